import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from yuledetach import model
from yuledetach.errors import DomainError, ResourceError
from yuledetach.model import ModelParams
from yuledetach.simulator import (
    EVENT_KINDS,
    OVERFLOW,
    NetworkSnapshot,
    SimConfig,
    empirical_histogram,
    event_log_text,
    sample_limit_degree,
    simulate_bd_paths,
    simulate_network,
    simulate_replicates,
    write_event_log,
    write_snapshot_csv,
)

SUPER = ModelParams(1.0, 0.5, 0.25)
NEAR_CRITICAL = ModelParams(0.1, 1.1, 1.0)


def chi_square_p(samples, pmf_values):
    """p-value of a chi-square test over bins with expected count >= 5, rest pooled."""
    count = len(samples)
    observed = np.bincount(samples, minlength=len(pmf_values))
    expected = count * np.asarray(pmf_values)
    keep = np.flatnonzero(expected >= 5)
    keep = keep[keep < len(observed)]
    obs = list(observed[keep])
    exp = list(expected[keep])
    obs.append(count - sum(obs))
    exp.append(count - sum(exp))
    if exp[-1] < 5:
        rest_obs, rest_exp = obs.pop(), exp.pop()
        obs[-1] += rest_obs
        exp[-1] += rest_exp
    return stats.chisquare(obs, exp).pvalue


def same(a, b):
    return a.time == b.time and all(
        np.array_equal(getattr(a, f), getattr(b, f))
        for f in ("page_birth", "inlinks", "event_time", "event_page", "event_kind"))


def replay(snapshot):
    """Rebuild per-page counts from the event log, checking absorption along the way."""
    counts = [1]
    births = [0.0]
    for t, page, kind in snapshot.events:
        if kind == "page_birth":
            assert page == len(counts)
            counts.append(1)
            births.append(t)
            continue
        assert counts[page] > 0, "event on an absorbed page"
        counts[page] += 1 if kind == "link_birth" else -1
    return np.array(counts), np.array(births)


class TestConfig:
    def test_exactly_one_stop_rule(self):
        with pytest.raises(DomainError):
            SimConfig(SUPER)
        with pytest.raises(DomainError):
            SimConfig(SUPER, max_time=1.0, max_pages=10)

    def test_bad_values(self):
        for kwargs in [dict(max_time=-1.0), dict(max_time=math.inf), dict(max_pages=0),
                       dict(max_time=1.0, worker_count=0), dict(max_time=1.0, seed=1.5),
                       dict(max_time=1.0, max_events=0)]:
            with pytest.raises(DomainError):
                SimConfig(SUPER, **kwargs)


class TestNetwork:
    def test_tiny_horizon(self):
        snap = simulate_network(SimConfig(SUPER, max_time=1e-12, seed=3))
        assert snap.page_count == 1
        assert list(snap.inlinks) == [1]
        assert snap.events == []
        assert snap.time == 1e-12

    def test_max_pages_stop(self):
        snap = simulate_network(SimConfig(SUPER, max_pages=25, seed=1))
        assert snap.page_count == 25
        assert snap.event_kind[-1] == 0
        assert snap.time == snap.page_birth[-1]

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**63), beta=st.floats(0.1, 2), lam=st.floats(0.1, 2), m=st.floats(0, 2))
    def test_event_log_invariants(self, seed, beta, lam, m):
        params = ModelParams(beta, lam, m * lam)
        snap = simulate_network(SimConfig(params, max_time=3.0, seed=seed))
        counts, births = replay(snap)
        assert np.array_equal(counts, snap.inlinks)
        assert np.array_equal(births, snap.page_birth)
        assert np.all(np.diff(snap.event_time) >= 0)
        assert snap.event_time.size == 0 or snap.event_time[-1] <= 3.0
        assert snap.page_count == 1 + int(np.sum(snap.event_kind == 0))
        assert np.all(snap.inlinks >= 0)

    def test_determinism(self):
        config = SimConfig(NEAR_CRITICAL, max_time=20.0, seed=42)
        a = simulate_network(config, replicate=3)
        b = simulate_network(config, replicate=3)
        assert same(a, b)
        c = simulate_network(config, replicate=4)
        assert not same(a, c)

    def test_worker_count_does_not_matter(self):
        one = simulate_replicates(SimConfig(NEAR_CRITICAL, max_time=20.0, seed=9, worker_count=1), 40)
        four = simulate_replicates(SimConfig(NEAR_CRITICAL, max_time=20.0, seed=9, worker_count=4), 40)
        assert len(one) == len(four) == 40
        assert all(same(a, b) for a, b in zip(one, four))

    def test_buffer_growth_is_transparent(self):
        # long run that grows every buffer several times; the replayed log must still agree
        snap = simulate_network(SimConfig(ModelParams(0.5, 1.0, 0.5), max_time=12.0, seed=11))
        assert snap.page_count > 1024 or len(snap.events) > 4096
        counts, _ = replay(snap)
        assert np.array_equal(counts, snap.inlinks)

    def test_page_count_is_geometric(self):
        # without link dynamics the page count is a Yule process: P(n) = e^(-bt) (1 - e^(-bt))^(n-1)
        beta, t, runs = 1.0, 1.5, 10**5
        config = SimConfig(ModelParams(beta, 1e-12, 0.0), max_time=t, seed=2)
        pages = np.array([simulate_network(config, i).page_count for i in range(runs)])
        n = np.arange(pages.max() + 2)
        probs = np.r_[0.0, [model.birth_pmf(k, t, beta) for k in n[1:]]]
        assert chi_square_p(pages, probs) > 0.001

    def test_links_frozen_when_only_pages_move(self):
        snap = simulate_network(SimConfig(ModelParams(1.0, 1e-12, 0.0), max_time=3.0, seed=5))
        assert np.all(snap.inlinks == 1)

    def test_expected_page_count(self):
        beta, t, reps = 0.3, 5.0, 4000
        config = SimConfig(ModelParams(beta, 1.0, 0.9), max_time=t, seed=8)
        pages = np.array([simulate_network(config, i).page_count for i in range(reps)])
        se = pages.std(ddof=1) / math.sqrt(reps)
        assert abs(pages.mean() - math.exp(beta * t)) <= 4 * se

    def test_lost_pages_outnumber_hubs(self):
        snaps = simulate_replicates(SimConfig(NEAR_CRITICAL, max_time=20.0, seed=7), 200)
        inlinks = np.concatenate([s.inlinks for s in snaps])
        absorbed = np.mean(inlinks == 0)
        large = np.mean(inlinks >= 10)
        assert absorbed > large > 0

    def test_event_cap(self):
        config = SimConfig(ModelParams(1.0, 2.0, 0.5), max_time=50.0, seed=1, max_events=500)
        with pytest.raises(ResourceError) as info:
            simulate_network(config)
        partial = info.value.partial
        assert isinstance(partial, NetworkSnapshot)
        assert len(partial.events) == 500
        counts, _ = replay(partial)
        assert np.array_equal(counts, partial.inlinks)

    def test_absorbed_snapshot_histogram(self):
        # pure death of links: everything ends at zero
        snap = simulate_network(SimConfig(ModelParams(1e-9, 1e-9, 50.0), max_time=10.0, seed=0))
        assert snap.page_count == 1
        hist = empirical_histogram(snap)
        assert hist.counts == {0: 1}
        assert snap.absorbed_fraction() == 1.0


class TestExport:
    def test_csv_files(self, tmp_path):
        snap = simulate_network(SimConfig(SUPER, max_time=4.0, seed=4))
        write_event_log(snap, tmp_path / "ev.csv")
        write_snapshot_csv(snap, tmp_path / "snap.csv")
        ev = (tmp_path / "ev.csv").read_text().splitlines()
        assert ev[0] == "time,page_id,kind"
        assert len(ev) == 1 + len(snap.events)
        for line, (t, p, k) in zip(ev[1:], snap.events):
            ts, ps, ks = line.split(",")
            assert float(ts) == pytest.approx(t, rel=1e-9)
            assert int(ps) == p and ks == k and ks in EVENT_KINDS
        rows = (tmp_path / "snap.csv").read_text().splitlines()
        assert rows[0] == "page_id,birth_time,inlink_count"
        assert [int(r.split(",")[2]) for r in rows[1:]] == list(snap.inlinks)

    def test_text_stream(self):
        snap = simulate_network(SimConfig(SUPER, max_time=2.0, seed=4))
        buf = io.StringIO()
        write_event_log(snap, buf)
        assert buf.getvalue() == event_log_text(snap)


class TestLimitSampler:
    def test_empty(self):
        assert len(sample_limit_degree(SUPER, 0, seed=1)) == 0

    def test_reproducible_across_workers(self):
        a = sample_limit_degree(SUPER, 50_000, seed=13, workers=1)
        b = sample_limit_degree(SUPER, 50_000, seed=13, workers=3)
        assert np.array_equal(a, b)

    def test_pure_yule_law(self):
        samples = sample_limit_degree(ModelParams(1.0, 0.5, 0.0), 10**6, seed=21)
        samples = samples[samples != OVERFLOW]
        n = np.arange(samples.max() + 2)
        probs = np.r_[0.0, model.yule_simon_pmf(n[1:], 1.0, 0.5)]
        assert chi_square_p(samples, probs) > 0.001

    @pytest.mark.parametrize("params", [SUPER, ModelParams(1.0, 0.5, 0.5), ModelParams(1.0, 0.25, 0.5)])
    def test_limit_law(self, params):
        samples = sample_limit_degree(params, 10**6, seed=22)
        assert np.all(samples != OVERFLOW)
        probs = model.pmf(np.arange(samples.max() + 2), params)
        assert chi_square_p(samples, probs) > 0.001

    def test_mean_by_median_of_means(self):
        samples = sample_limit_degree(SUPER, 10**6, seed=23).astype(float)
        groups = samples.reshape(100, -1).mean(axis=1)
        med = np.median(groups)
        se = groups.std(ddof=1) / math.sqrt(len(groups))
        assert abs(med - 4 / 3) <= 4 * se * 1.25

    def test_overflow_marker(self):
        samples = sample_limit_degree(ModelParams(0.01, 1.0, 0.0), 200, seed=1, cap=50)
        assert np.any(samples == OVERFLOW)
        assert np.all((samples == OVERFLOW) | ((samples >= 1) & (samples < 50)))

    def test_bd_paths(self):
        assert np.array_equal(simulate_bd_paths(1.0, 1.0, np.zeros(5)), np.ones(5))
        with pytest.raises(DomainError):
            simulate_bd_paths(1.0, 1.0, [-1.0])
        with pytest.raises(DomainError):
            simulate_bd_paths(0.0, 1.0, [1.0])


class TestHistogram:
    def test_small(self):
        assert empirical_histogram([1, 1, 2]).counts == {1: 2, 2: 1}

    def test_unit_ratio_yule(self):
        samples = sample_limit_degree(ModelParams(1.0, 1.0, 0.0), 10**6, seed=31)
        hist = empirical_histogram(samples)
        assert hist.total == 10**6 - int(np.sum(samples == OVERFLOW))
        assert hist.counts[1] / hist.total == pytest.approx(0.5, abs=4 * math.sqrt(0.25 / 10**6))

    def test_overflow_dropped(self):
        assert empirical_histogram(np.array([OVERFLOW, 3, 3])).counts == {3: 2}

    def test_errors(self):
        with pytest.raises(DomainError):
            empirical_histogram([])
        with pytest.raises(DomainError):
            empirical_histogram([OVERFLOW])
        with pytest.raises(DomainError):
            empirical_histogram([1.5, 2])
