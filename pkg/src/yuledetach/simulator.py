"""Exact event-driven simulation of the generalized Yule network.

Two simulators live here:

* :func:`simulate_network` runs the whole network in continuous time.
  Every page reproduces at rate beta, and every live in-link gives birth at
  rate lam and dies at rate mu. A page whose count reaches zero is absorbed
  and has no further link events, but it still counts towards page births.
* :func:`sample_limit_degree` draws directly from the limit law of the
  in-link count of a random page: an Exp(beta) age, then one birth-death
  path of that duration simulated step by step. It never touches the
  closed-form pmf, so it can serve as an independent check of it.

Randomness comes from SplitMix64 streams keyed by (seed, index), where index
is the sample or replicate number. Output is therefore identical whatever
the number of worker threads.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
from numba import njit

from .errors import DomainError, ResourceError
from .model import ModelParams

__all__ = [
    "OVERFLOW",
    "POPULATION_CAP",
    "EVENT_KINDS",
    "SimConfig",
    "NetworkSnapshot",
    "simulate_network",
    "simulate_replicates",
    "sample_limit_degree",
    "simulate_bd_paths",
    "empirical_histogram",
    "write_event_log",
    "write_snapshot_csv",
]

OVERFLOW = -1
POPULATION_CAP = 10**9
EVENT_KINDS = ("page_birth", "link_birth", "link_death")
PAGE_BIRTH, LINK_BIRTH, LINK_DEATH = 0, 1, 2

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

# status codes of the network kernel
_DONE, _GROW, _CAPPED = 0, 1, 2


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _stream_state(seed, index):
    return _mix(_mix(seed) ^ _mix(index + _GOLDEN))


@njit(cache=True)
def _next_uniform(state):
    """Uniform on (0, 1]; advances ``state[0]`` in place."""
    state[0] += _GOLDEN
    x = _mix(state[0])
    return (np.float64(x >> _S11) + 1.0) * _INV53


@njit(cache=True)
def _exp(state, rate):
    return -math.log(_next_uniform(state)) / rate


@njit(cache=True)
def _bd_path(state, lam, mu, duration, cap):
    k = 1
    remaining = duration
    total = lam + mu
    p_birth = lam / total
    while True:
        remaining -= _exp(state, total * k)
        if remaining < 0.0:
            return k
        if _next_uniform(state) <= p_birth:
            k += 1
            if k >= cap:
                return -1
        else:
            k -= 1
            if k == 0:
                return 0


@njit(cache=True, nogil=True)
def _limit_kernel(seed, start, stop, beta, lam, mu, cap, out):
    state = np.empty(1, dtype=np.uint64)
    for i in range(start, stop):
        state[0] = _stream_state(seed, np.uint64(i))
        age = _exp(state, beta)
        out[i] = _bd_path(state, lam, mu, age, cap)


@njit(cache=True, nogil=True)
def _paths_kernel(seed, lam, mu, durations, cap, out):
    state = np.empty(1, dtype=np.uint64)
    for i in range(durations.shape[0]):
        state[0] = _stream_state(seed, np.uint64(i))
        out[i] = _bd_path(state, lam, mu, durations[i], cap)


@njit(cache=True, nogil=True)
def _network_kernel(state, beta, lam, mu, t_max, max_pages, max_events,
                    clock, counters, page_birth, inlinks, urn,
                    ev_time, ev_page, ev_kind):
    """Advance the network until a stop rule, the event cap, or full buffers.

    ``counters`` holds (pages, live links, events). Capacity is checked before
    any random number is drawn, so resuming after a buffer grow is exact.
    """
    n_pages = counters[0]
    n_links = counters[1]
    n_events = counters[2]
    t = clock[0]
    status = _DONE
    link_rate = lam + mu
    while True:
        if n_pages >= max_pages:
            status = _DONE
            break
        if n_events >= max_events:
            status = _CAPPED
            break
        if (n_events >= ev_time.shape[0] or n_pages >= page_birth.shape[0]
                or n_links >= urn.shape[0]):
            status = _GROW
            break
        page_rate = beta * n_pages
        total = page_rate + link_rate * n_links
        dt = _exp(state, total)
        if t + dt > t_max:
            t = t_max
            status = _DONE
            break
        t += dt
        x = _next_uniform(state) * total
        if x <= page_rate:
            pid = n_pages
            page_birth[pid] = t
            inlinks[pid] = 1
            urn[n_links] = pid
            n_links += 1
            n_pages += 1
            kind = PAGE_BIRTH
        else:
            j = int((x - page_rate) / link_rate)
            if j >= n_links:
                j = n_links - 1
            pid = urn[j]
            if _next_uniform(state) * link_rate <= lam:
                urn[n_links] = pid
                n_links += 1
                inlinks[pid] += 1
                kind = LINK_BIRTH
            else:
                n_links -= 1
                urn[j] = urn[n_links]
                inlinks[pid] -= 1
                kind = LINK_DEATH
        ev_time[n_events] = t
        ev_page[n_events] = pid
        ev_kind[n_events] = kind
        n_events += 1
    counters[0] = n_pages
    counters[1] = n_links
    counters[2] = n_events
    clock[0] = t
    return status


def _seed_u64(seed) -> np.uint64:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise DomainError(f"seed must be an integer, got {seed!r}")
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def _check_workers(workers) -> int:
    workers = int(workers)
    if workers < 1:
        raise DomainError(f"worker count must be >= 1, got {workers}")
    return workers


@dataclass(frozen=True)
class SimConfig:
    """Settings for :func:`simulate_network`.

    Exactly one of ``max_time`` and ``max_pages`` must be given.
    """

    params: ModelParams
    max_time: float | None = None
    max_pages: int | None = None
    seed: int = 0
    worker_count: int = 1
    max_events: int = 10_000_000

    def __post_init__(self):
        if (self.max_time is None) == (self.max_pages is None):
            raise DomainError("give exactly one of max_time and max_pages")
        if self.max_time is not None and not (self.max_time > 0 and math.isfinite(self.max_time)):
            raise DomainError(f"max_time must be finite and > 0, got {self.max_time}")
        if self.max_pages is not None and not (int(self.max_pages) == self.max_pages
                                               and self.max_pages > 0):
            raise DomainError(f"max_pages must be a positive integer, got {self.max_pages}")
        if int(self.max_events) < 1:
            raise DomainError("max_events must be >= 1")
        _seed_u64(self.seed)
        _check_workers(self.worker_count)


@dataclass
class NetworkSnapshot:
    """State of a simulated network; page 0 is the initial page."""

    time: float
    page_birth: np.ndarray
    inlinks: np.ndarray
    event_time: np.ndarray
    event_page: np.ndarray
    event_kind: np.ndarray
    params: ModelParams | None = field(default=None, compare=False)

    @property
    def page_count(self) -> int:
        return len(self.inlinks)

    @property
    def pages(self) -> list[tuple[int, float, int]]:
        return [(i, float(b), int(k)) for i, (b, k) in enumerate(zip(self.page_birth, self.inlinks))]

    @property
    def events(self) -> list[tuple[float, int, str]]:
        return [(float(t), int(p), EVENT_KINDS[k])
                for t, p, k in zip(self.event_time, self.event_page, self.event_kind)]

    def absorbed_fraction(self) -> float:
        return float(np.mean(self.inlinks == 0))


def _run_network(config: SimConfig, replicate: int) -> NetworkSnapshot:
    p = config.params
    state = np.array([_stream_state(_seed_u64(config.seed), np.uint64(replicate))], dtype=np.uint64)
    t_max = math.inf if config.max_time is None else float(config.max_time)
    max_pages = np.iinfo(np.int64).max if config.max_pages is None else int(config.max_pages)
    cap = 1024
    page_birth = np.zeros(cap)
    inlinks = np.zeros(cap, dtype=np.int64)
    urn = np.zeros(cap, dtype=np.int64)
    ev_time = np.zeros(cap)
    ev_page = np.zeros(cap, dtype=np.int64)
    ev_kind = np.zeros(cap, dtype=np.int8)
    inlinks[0] = 1
    counters = np.array([1, 1, 0], dtype=np.int64)
    clock = np.zeros(1)
    while True:
        status = _network_kernel(state, p.beta, p.lam, p.mu, t_max, max_pages,
                                 int(config.max_events), clock, counters, page_birth,
                                 inlinks, urn, ev_time, ev_page, ev_kind)
        if status != _GROW:
            break
        n_pages, n_links, n_events = counters
        if n_pages >= len(page_birth):
            page_birth = np.concatenate([page_birth, np.zeros_like(page_birth)])
            inlinks = np.concatenate([inlinks, np.zeros_like(inlinks)])
        if n_links >= len(urn):
            urn = np.concatenate([urn, np.zeros_like(urn)])
        if n_events >= len(ev_time):
            ev_time = np.concatenate([ev_time, np.zeros_like(ev_time)])
            ev_page = np.concatenate([ev_page, np.zeros_like(ev_page)])
            ev_kind = np.concatenate([ev_kind, np.zeros_like(ev_kind)])
    n_pages, _, n_events = (int(v) for v in counters)
    snap = NetworkSnapshot(
        time=float(clock[0]),
        page_birth=page_birth[:n_pages].copy(),
        inlinks=inlinks[:n_pages].copy(),
        event_time=ev_time[:n_events].copy(),
        event_page=ev_page[:n_events].copy(),
        event_kind=ev_kind[:n_events].copy(),
        params=p,
    )
    if status == _CAPPED:
        raise ResourceError(f"event cap of {config.max_events} reached at t={snap.time:.6g}",
                            partial=snap)
    return snap


def simulate_network(config: SimConfig, replicate: int = 0) -> NetworkSnapshot:
    """Simulate one network realisation from a single page with one in-link.

    Raises :class:`ResourceError` (with the partial snapshot) when more than
    ``config.max_events`` events would be needed.
    """
    if int(replicate) < 0:
        raise DomainError("replicate index must be >= 0")
    return _run_network(config, int(replicate))


def simulate_replicates(config: SimConfig, replicates: int) -> list[NetworkSnapshot]:
    """Independent realisations 0..replicates-1, run on ``worker_count`` threads."""
    if replicates < 0:
        raise DomainError("replicates must be >= 0")
    if config.worker_count == 1 or replicates < 2:
        return [_run_network(config, i) for i in range(replicates)]
    with ThreadPoolExecutor(config.worker_count) as pool:
        return list(pool.map(lambda i: _run_network(config, i), range(replicates)))


def sample_limit_degree(params: ModelParams, count: int, seed: int = 0,
                        workers: int = 1, cap: int = POPULATION_CAP) -> np.ndarray:
    """Draw ``count`` in-link counts from the limit law by direct simulation.

    Paths that reach ``cap`` links are returned as :data:`OVERFLOW`.
    """
    count = int(count)
    if count < 0:
        raise DomainError("count must be >= 0")
    workers = _check_workers(workers)
    out = np.empty(count, dtype=np.int64)
    if count == 0:
        return out
    s = _seed_u64(seed)
    bounds = np.linspace(0, count, workers + 1).astype(np.int64)
    if workers == 1:
        _limit_kernel(s, 0, count, params.beta, params.lam, params.mu, cap, out)
        return out
    with ThreadPoolExecutor(workers) as pool:
        jobs = [pool.submit(_limit_kernel, s, int(lo), int(hi), params.beta, params.lam,
                            params.mu, cap, out) for lo, hi in zip(bounds[:-1], bounds[1:])]
        for job in jobs:
            job.result()
    return out


def simulate_bd_paths(lam: float, mu: float, durations, seed: int = 0,
                      cap: int = POPULATION_CAP) -> np.ndarray:
    """Terminal states of birth-death paths from 1, one per duration."""
    if not lam > 0 or not mu >= 0:
        raise DomainError("need lam > 0 and mu >= 0")
    d = np.ascontiguousarray(durations, dtype=float)
    if d.ndim != 1 or np.any(d < 0) or not np.all(np.isfinite(d)):
        raise DomainError("durations must be a 1-d array of finite values >= 0")
    out = np.empty(len(d), dtype=np.int64)
    _paths_kernel(_seed_u64(seed), float(lam), float(mu), d, cap, out)
    return out


def empirical_histogram(data):
    """Histogram of in-link counts from samples or a :class:`NetworkSnapshot`.

    Overflow markers are dropped from sample input.
    """
    from .estimation import DegreeHistogram

    if isinstance(data, NetworkSnapshot):
        values = np.asarray(data.inlinks)
    else:
        values = np.asarray(list(data) if not isinstance(data, np.ndarray) else data)
        values = values[values != OVERFLOW]
    if values.size == 0:
        raise DomainError("cannot build a histogram from empty input")
    if not np.issubdtype(values.dtype, np.integer) or values.min() < 0:
        raise DomainError("histogram input must be non-negative integers")
    n, c = np.unique(values, return_counts=True)
    return DegreeHistogram({int(k): int(v) for k, v in zip(n, c)})


def _open_text(target):
    if isinstance(target, (str, os.PathLike)):
        return open(target, "w", encoding="utf-8", newline=""), True
    return target, False


def write_event_log(snapshot: NetworkSnapshot, target: str | os.PathLike | TextIO) -> None:
    """Write ``time,page_id,kind`` records with a header row."""
    fh, close = _open_text(target)
    try:
        fh.write("time,page_id,kind\n")
        for t, p, k in zip(snapshot.event_time, snapshot.event_page, snapshot.event_kind):
            fh.write(f"{t:.10g},{p},{EVENT_KINDS[k]}\n")
    finally:
        if close:
            fh.close()


def write_snapshot_csv(snapshot: NetworkSnapshot, target: str | os.PathLike | TextIO) -> None:
    """Write ``page_id,birth_time,inlink_count`` rows with a header row."""
    fh, close = _open_text(target)
    try:
        fh.write("page_id,birth_time,inlink_count\n")
        for i, (b, k) in enumerate(zip(snapshot.page_birth, snapshot.inlinks)):
            fh.write(f"{i},{b:.10g},{k}\n")
    finally:
        if close:
            fh.close()


def event_log_text(snapshot: NetworkSnapshot) -> str:
    buf = io.StringIO()
    write_event_log(snapshot, buf)
    return buf.getvalue()

