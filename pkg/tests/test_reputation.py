import random
from collections import Counter

import pytest

from dhtsim.reputation import ReputationStore, ewma_update, selection_prob


def test_score_prior_and_counting():
    st = ReputationStore()
    assert st.score("x") == 0.5
    st.record("x", True)
    assert st.score("x") == pytest.approx((1 + 0.5) / 2)
    for _ in range(9):
        st.record("x", True)
    assert st.score("x") == pytest.approx(10.5 / 11)
    st2 = ReputationStore()
    for _ in range(10):
        st2.record("y", False)
    assert st2.score("y") == pytest.approx(0.5 / 11)


def test_record_path_touches_every_prefix():
    st = ReputationStore()
    st.record_path((1, 2, 3), True)
    st.record_path((1, 2, 9), False)
    assert st.counts[(1,)] == [1, 2]
    assert st.counts[(1, 2)] == [1, 2]
    assert st.counts[(1, 2, 3)] == [1, 1]
    assert st.counts[(1, 2, 9)] == [0, 1]
    with pytest.raises(ValueError):
        st.record_path((), True)


def test_record_path_depth_cap():
    st = ReputationStore()
    st.record_path((1, 2, 3, 4), True, max_depth=2)
    assert set(st.counts) == {(1,), (1, 2)}


def test_replay_oracle():
    rng = random.Random(10)
    st = ReputationStore()
    log = []
    for _ in range(2000):
        path = tuple(rng.randrange(6) for _ in range(rng.randint(1, 4)))
        ok = rng.random() < 0.6
        log.append((path, ok))
        st.record_path(path, ok)
    # recount from the log and compare every score
    counts = {}
    for path, ok in log:
        for d in range(1, len(path) + 1):
            c = counts.setdefault(tuple(path[:d]), [0, 0])
            c[1] += 1
            c[0] += ok
    for key, (s, u) in counts.items():
        assert st.counts[key] == [s, u]
        assert st.score(key) == pytest.approx((s + 0.5) / (u + 1))


def test_select_max_argmax_and_errors():
    st = ReputationStore()
    st.record("a", True)
    st.record("b", False)
    assert st.select_max(["a", "b", "c"]) == "a"
    with pytest.raises(ValueError):
        st.select_max([])


def test_select_max_sticky_tie_until_divergence():
    st = ReputationStore(seed=42)
    first = st.select_max(["a", "b"])
    for _ in range(50):
        assert st.select_max(["a", "b"]) == first
    other = "b" if first == "a" else "a"
    st.record(other, True)
    assert st.select_max(["a", "b"]) == other
    # drag the winner below: choice follows the argmax, not the cache
    st.record(other, False)
    st.record(other, False)
    st.record(first, True)
    assert st.select_max(["a", "b"]) == first


def test_select_max_fresh_tie_uniform_over_seeds():
    hits = Counter(
        ReputationStore(seed=s).select_max(["a", "b", "c", "d"])
        for s in range(2000)
    )
    for c in "abcd":
        assert abs(hits[c] / 2000 - 0.25) < 0.05


def test_ewma_exact_decay():
    s = 0.5
    for j in range(1, 20):
        s = ewma_update(s, 0.0, 0.1)
        assert s == pytest.approx(0.9 ** j * 0.5, rel=1e-12)
    assert ewma_update(0.4, 1.0, 0.25) == pytest.approx(0.55)
    with pytest.raises(ValueError):
        ewma_update(0.5, 1.0, 1.5)


def test_selection_prob_cases():
    assert selection_prob([1.0, 1.0], 0.0) == [0.5, 0.5]
    p = selection_prob([0.8, 0.2], 1.0)
    assert p[0] == pytest.approx(0.8) and sum(p) == pytest.approx(1.0)
    # heavy bias makes the better contact all but certain
    p = selection_prob([0.8, 0.2], 100.0)
    expect_low = 0.25 ** 100 / (1 + 0.25 ** 100)
    assert p[1] == pytest.approx(expect_low, rel=1e-9)
    assert p[0] == pytest.approx(1.0) and p[1] < 1e-60
    with pytest.raises(ValueError):
        selection_prob([], 1.0)
    with pytest.raises(ValueError):
        selection_prob([0.0, 0.0], 2.0)
    with pytest.raises(ValueError):
        selection_prob([0.5, -0.1], 2.0)


def test_selection_prob_sums_to_one():
    rng = random.Random(11)
    for _ in range(1000):
        scores = [rng.random() for _ in range(rng.randint(1, 8))]
        scores[rng.randrange(len(scores))] += 0.01  # keep max positive
        beta = rng.choice([0.0, 0.5, 1.0, 3.0, 10.0])
        p = selection_prob(scores, beta)
        assert sum(p) == pytest.approx(1.0)
        assert all(x >= 0 for x in p)


def test_leave_then_rejoin_restores_record():
    st = ReputationStore()
    for _ in range(5):
        st.record("m", False)
    bad = st.score("m")
    st.on_leave("m")
    assert "m" not in st.counts
    st.on_join("m")
    assert st.score("m") == pytest.approx(bad)


def test_join_unknown_key_uses_join_score():
    st = ReputationStore(join_score=0.42)
    st.on_join("fresh")
    assert st.score("fresh") == pytest.approx(0.42)
    # default configuration keeps the neutral prior
    st2 = ReputationStore()
    st2.on_join("fresh")
    assert st2.score("fresh") == 0.5


def test_departure_cache_evicts_oldest():
    st = ReputationStore(cache_limit=2)
    for key in ("a", "b", "c"):
        st.record(key, False)
        st.on_leave(key)
    st.on_join("a")  # evicted, so it comes back fresh
    assert st.score("a") == 0.5
    st.on_join("c")  # still cached
    assert st.score("c") == pytest.approx(0.5 / 2)
