/** Repeating fetch driver: fires immediately on start, then on an interval. */

export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly tick: () => void | Promise<void>,
    private readonly intervalMs = 2000,
  ) {}

  start(): void {
    this.stop();
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  get running(): boolean {
    return this.timer !== null;
  }
}
