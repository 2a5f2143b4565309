"""Deterministic replay of asynchronous parareal under an explicit schedule.

A schedule is a list of events. Event ``k`` names the active slices ``P``
and, for each active slice ``n``, two version indices into the iterate
history: ``rho[n] <= k`` is the (stale) left interface fed to the fine and
old-coarse solves, ``mu[n] <= k + 1`` the possibly fresher one fed to the
new-coarse solve. ``mu[n] == k + 1`` reads the value written earlier in the
same event, which is how the synchronous sweep is embedded.

Text format, one event per line::

    # slices=4
    0; P={0,1,2,3}; rho={0:0,1:0,2:0,3:0}; mu={0:1,1:1,2:1,3:1}
"""

import re
from dataclasses import dataclass

import numpy as np

from .fd import initial_state
from .sync import (PararealConfig, PararealResult, coarse_G, correct, fine_F,
                   initialize_coarse, price_from_state, residual)

__all__ = [
    "Event",
    "Schedule",
    "synchronous_schedule",
    "random_schedule",
    "check_schedule",
    "admissible",
    "simulate_schedule",
    "fixed_point_residual",
    "dumps",
    "loads",
    "save",
    "load",
]


@dataclass(frozen=True)
class Event:
    active: tuple
    rho: dict
    mu: dict


@dataclass(frozen=True)
class Schedule:
    n_slices: int
    events: tuple

    def __len__(self):
        return len(self.events)


def synchronous_schedule(n_slices: int, n_events: int) -> Schedule:
    """Every slice active at every event, reading the newest data."""
    events = []
    for k in range(n_events):
        active = tuple(range(n_slices))
        events.append(Event(active, {n: k for n in active}, {n: k + 1 for n in active}))
    return Schedule(n_slices, tuple(events))


def random_schedule(n_slices: int, n_events: int, max_delay: int, seed=None,
                    p_active: float = 0.5, window: int | None = None) -> Schedule:
    """Seeded schedule with read lags at most ``max_delay``.

    Each slice is active with probability ``p_active``; a slice that has
    been idle for ``window - 1`` events is forced active, so every window
    of ``window`` events activates every slice. ``mu`` is never staler
    than ``rho``.
    """
    rng = np.random.default_rng(seed)
    if window is None:
        window = max_delay + 1
    idle = [0] * n_slices
    events = []
    for k in range(n_events):
        mask = rng.random(n_slices) < p_active
        for n in range(n_slices):
            if idle[n] >= window - 1:
                mask[n] = True
        if not mask.any():
            mask[rng.integers(n_slices)] = True
        active = tuple(int(n) for n in np.flatnonzero(mask))
        rho, mu = {}, {}
        for n in active:
            r = max(0, k - int(rng.integers(0, max_delay + 1)))
            lo = max(r, k + 1 - max_delay)
            rho[n] = r
            mu[n] = int(rng.integers(lo, k + 2))
        for n in range(n_slices):
            idle[n] = 0 if mask[n] else idle[n] + 1
        events.append(Event(active, rho, mu))
    return Schedule(n_slices, tuple(events))


def check_schedule(schedule: Schedule, window: int | None = None,
                   max_delay: int | None = None) -> str | None:
    """Return a description of the first violated condition, or None.

    Checked over the finite schedule: every event has a non-empty active
    set of valid slices with both reads given; ``rho <= k`` and
    ``mu <= k + 1``; every window of ``window`` consecutive events (default:
    the whole schedule) activates every slice; with ``max_delay`` set, no
    read lags further behind than that.
    """
    N = schedule.n_slices
    events = schedule.events
    if N < 1:
        return "schedule has no slices"
    if not events:
        return "schedule has no events"
    for k, ev in enumerate(events):
        if not ev.active:
            return f"event {k}: empty active set"
        bad = [n for n in ev.active if not 0 <= n < N]
        if bad:
            return f"event {k}: slice {bad[0]} outside 0..{N - 1}"
        for name, reads, cap in (("rho", ev.rho, k), ("mu", ev.mu, k + 1)):
            if set(reads) != set(ev.active):
                return f"event {k}: {name} keys {sorted(reads)} do not match P={list(ev.active)}"
            for n, v in reads.items():
                if not 0 <= v <= cap:
                    return f"event {k}: {name}[{n}]={v} outside 0..{cap}"
                if max_delay is not None and cap - v > max_delay:
                    return f"event {k}: {name}[{n}] lags {cap - v} > {max_delay}"
    W = len(events) if window is None else window
    if W < 1:
        return "window must be at least 1"
    for start in range(0, max(len(events) - W, 0) + 1):
        seen = set()
        for ev in events[start:start + W]:
            seen.update(ev.active)
        missing = sorted(set(range(N)) - seen)
        if missing:
            return f"slice {missing[0]} inactive in events {start}..{start + W - 1}"
    return None


def admissible(schedule: Schedule, window: int | None = None,
               max_delay: int | None = None) -> bool:
    return check_schedule(schedule, window, max_delay) is None


class _Memo:
    # history entries are kept alive for the whole replay, so ids are stable
    def __init__(self, fn, cfg):
        self.fn, self.cfg, self.cache = fn, cfg, {}

    def __call__(self, s):
        out = self.cache.get(id(s))
        if out is None:
            out = self.cache[id(s)] = self.fn(s, self.cfg)
        return out


def simulate_schedule(cfg: PararealConfig, schedule: Schedule, window: int | None = None,
                      initial=None, record_history: bool = False) -> PararealResult:
    """Replay ``schedule`` single-threaded and bitwise reproducibly.

    ``initial`` overrides the coarse start-up interfaces. The run counts as
    converged when one extra synchronous sweep from the final interfaces
    moves them by less than ``cfg.tol``.
    """
    reason = check_schedule(schedule, window)
    if reason is not None:
        raise ValueError(f"inadmissible schedule: {reason}")
    N = cfg.n_slices
    if schedule.n_slices != N:
        raise ValueError(f"schedule has {schedule.n_slices} slices, config has {N}")
    if initial is None:
        initial = initialize_coarse(initial_state(cfg.grid, cfg.problem), cfg)
    X = [list(initial)]
    if len(X[0]) != N + 1:
        raise ValueError(f"need {N + 1} initial interfaces, got {len(X[0])}")
    F = _Memo(fine_F, cfg)
    G = _Memo(coarse_G, cfg)
    trace = []
    for k, ev in enumerate(schedule.events):
        cur = X[k]
        new = [cur[0]]
        active = set(ev.active)
        for n in range(N):
            if n in active:
                old = X[ev.rho[n]][n]
                fresh = new[n] if ev.mu[n] == k + 1 else X[ev.mu[n]][n]
                new.append(correct(G(fresh), F(old), G(old)))
            else:
                new.append(cur[n + 1])
        trace.append(residual(cur, new))
        X.append(new)
    final = X[-1]
    converged = fixed_point_residual(final, cfg) < cfg.tol
    return PararealResult(final, len(schedule.events), trace,
                          price_from_state(final[-1], cfg), converged, cfg.tol,
                          X if record_history else None)


def fixed_point_residual(lambdas, cfg: PararealConfig) -> float:
    """Relative change produced by one synchronous sweep from ``lambdas``."""
    N = cfg.n_slices
    new = [lambdas[0]]
    for n in range(N):
        new.append(correct(coarse_G(new[n], cfg), fine_F(lambdas[n], cfg),
                           coarse_G(lambdas[n], cfg)))
    return residual(lambdas, new)


# -- text format -----------------------------------------------------------

_LINE = re.compile(r"^\s*(\d+)\s*;\s*P=\{([^}]*)\}\s*;\s*rho=\{([^}]*)\}\s*;\s*mu=\{([^}]*)\}\s*$")
_HEADER = re.compile(r"^#\s*slices\s*=\s*(\d+)\s*$")


def _fmt_map(d, keys):
    return ",".join(f"{n}:{d[n]}" for n in keys)


def dumps(schedule: Schedule) -> str:
    lines = [f"# slices={schedule.n_slices}"]
    for k, ev in enumerate(schedule.events):
        keys = sorted(ev.active)
        lines.append(f"{k}; P={{{','.join(map(str, keys))}}}; "
                     f"rho={{{_fmt_map(ev.rho, keys)}}}; mu={{{_fmt_map(ev.mu, keys)}}}")
    return "\n".join(lines) + "\n"


def _parse_map(text, lineno):
    out = {}
    for item in filter(None, (t.strip() for t in text.split(","))):
        key, sep, value = item.partition(":")
        if not sep:
            raise ValueError(f"line {lineno}: expected n:v, got {item!r}")
        out[int(key)] = int(value)
    return out


def loads(text: str, n_slices: int | None = None) -> Schedule:
    """Parse the line format; slice count comes from the header if present."""
    events = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _HEADER.match(line)
            if m and n_slices is None:
                n_slices = int(m.group(1))
            continue
        m = _LINE.match(line)
        if not m:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
        k = int(m.group(1))
        if k != len(events):
            raise ValueError(f"line {lineno}: event index {k}, expected {len(events)}")
        active = tuple(sorted(int(t) for t in m.group(2).split(",") if t.strip()))
        events.append(Event(active, _parse_map(m.group(3), lineno), _parse_map(m.group(4), lineno)))
    if n_slices is None:
        n_slices = 1 + max((n for ev in events for n in ev.active), default=-1)
    return Schedule(n_slices, tuple(events))


def save(schedule: Schedule, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(schedule))


def load(path, n_slices: int | None = None) -> Schedule:
    with open(path) as fh:
        return loads(fh.read(), n_slices)
