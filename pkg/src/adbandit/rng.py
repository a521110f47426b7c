"""Deterministic random-stream management.

An experiment owns four independent PCG64 streams spawned from its config
seed, so that e.g. changing the Monte Carlo draw count never perturbs the
simulated traffic:

- ``arrival``: which context each arriving user belongs to
- ``alloc``:   Thompson draws used to pick a creative per impression
- ``outcome``: click realizations and stochastic display costs
- ``eval``:    per-batch posterior Monte Carlo (best-combination probability)

Stream cursors serialize to plain JSON and restore exactly, which is what
makes pause/resume and snapshot/restore byte-identical with an
uninterrupted run.
"""

from __future__ import annotations

import numpy as np

STREAM_NAMES = ("arrival", "alloc", "outcome", "eval")


def spawn_streams(seed: int) -> dict[str, np.random.Generator]:
    """Create the four named generators from a single experiment seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {
        name: np.random.Generator(np.random.PCG64(child))
        for name, child in zip(STREAM_NAMES, children)
    }


def generator_state(gen: np.random.Generator) -> dict:
    """JSON-serializable cursor of a generator (exact, including buffers)."""
    return gen.bit_generator.state


def restore_generator(state: dict) -> np.random.Generator:
    bg = np.random.PCG64()
    bg.state = state
    return np.random.Generator(bg)


def streams_state(streams: dict[str, np.random.Generator]) -> dict[str, dict]:
    return {name: generator_state(gen) for name, gen in streams.items()}


def restore_streams(states: dict[str, dict]) -> dict[str, np.random.Generator]:
    return {name: restore_generator(states[name]) for name in STREAM_NAMES}


def report_generator(report_seed: int) -> np.random.Generator:
    """Generator for on-demand report Monte Carlo, independent of the
    engine streams so reports are pure functions of (snapshot, seed)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(report_seed)))
