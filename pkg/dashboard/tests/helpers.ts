import { readFileSync } from "node:fs";
import { join } from "node:path";

/** Load a recorded API payload from tests/fixtures, typed by the caller. */
export function fixture<T>(name: string): T {
  const path = join(process.cwd(), "tests", "fixtures", name);
  return JSON.parse(readFileSync(path, "utf8")) as T;
}

export interface RecordedCall {
  url: string;
  method: string;
}

export interface RecordingFetch {
  calls: RecordedCall[];
  impl: (input: string, init?: RequestInit) => Promise<Response>;
  /** Resolve every request opened while `hold` was true. */
  release: () => void;
  hold: boolean;
}

/** Fetch stub that records (url, method) and serves a canned JSON body. */
export function recordingFetch(body: unknown = {}, status = 200): RecordingFetch {
  const waiters: Array<() => void> = [];
  const stub: RecordingFetch = {
    calls: [],
    hold: false,
    release: () => {
      while (waiters.length) waiters.shift()!();
    },
    impl: async (input, init) => {
      stub.calls.push({ url: input, method: init?.method ?? "GET" });
      if (stub.hold) {
        await new Promise<void>((resolve) => waiters.push(resolve));
      }
      return new Response(JSON.stringify(body), {
        status,
        headers: { "content-type": "application/json" },
      });
    },
  };
  return stub;
}

/** textContent of the element annotated with the given data-field path. */
export function fieldText(root: ParentNode, path: string): string | null {
  const node = root.querySelector(`[data-field="${path}"]`);
  return node ? node.textContent : null;
}
