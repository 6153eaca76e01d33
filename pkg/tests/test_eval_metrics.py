import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from saltbio.errors import DomainError, FormatError, ParameterError
from saltbio.eval_metrics import (
    ScoreSet,
    det_points,
    eer,
    far,
    format_scores,
    frr,
    ftc,
    fte,
    parse_scores,
    probit,
    roc_points,
    template_capacity,
)

unit = st.floats(0, 1, allow_nan=False)
score_sets = st.builds(ScoreSet, st.lists(unit, min_size=1, max_size=30), st.lists(unit, min_size=1, max_size=30))


def test_far_frr_hand_counts():
    s = ScoreSet((0.1, 0.2), (0.3, 0.4))
    assert far(s, 0.35) == 0.5
    assert far(s, 0.25) == 0.0
    assert far(s, 1.0) == 1.0
    assert frr(s, 0.15) == 0.5
    assert frr(s, 1.0) == 0.0
    assert frr(ScoreSet((0.1, 0.2), (0.5,)), 0.0) == 1.0


def test_empty_sets_raise():
    with pytest.raises(DomainError):
        far(ScoreSet((0.1,), ()), 0.5)
    with pytest.raises(DomainError):
        frr(ScoreSet((), (0.1,)), 0.5)
    with pytest.raises(DomainError):
        ScoreSet((1.5,), (0.1,))


@given(score_sets, st.lists(unit, min_size=2, max_size=20))
def test_rates_monotone(s, grid):
    pts = roc_points(s, sorted(grid))
    for (_, a0, r0), (_, a1, r1) in zip(pts, pts[1:]):
        assert a0 <= a1 and r0 >= r1
    assert all(0 <= a <= 1 and 0 <= r <= 1 for _, a, r in pts)


def test_grid_must_be_sorted():
    with pytest.raises(ParameterError):
        roc_points(ScoreSet((0.1,), (0.2,)), [0.5, 0.1])


def test_perfect_separation_has_zero_point():
    s = ScoreSet((0.1, 0.2), (0.3, 0.4))
    assert any(a == 0 and r == 0 for _, a, r in roc_points(s, [i / 100 for i in range(101)]))
    assert eer(s)[1] == 0.0


def test_det_probit():
    assert probit(0.5) == 0.0
    s = ScoreSet((0.1, 0.3), (0.2, 0.4))
    for t, a, r, pa, pr in det_points(s, [0.0, 0.25, 1.0]):
        if a == 0.5:
            assert pa == 0.0
        assert abs(pa) < 5 and abs(pr) < 5  # clamped at 1e-6


def test_eer_identical_lists():
    rng = random.Random(0)
    xs = tuple(rng.random() for _ in range(50))
    s = ScoreSet(xs, xs)
    assert eer(s) == oracles.eer_sweep(xs, xs)
    assert abs(eer(s)[1] - 0.5) <= 1 / 50


def test_eer_random_matches_sweep():
    rng = random.Random(1)
    g = tuple(min(1, max(0, rng.gauss(0.2, 0.08))) for _ in range(200))
    i = tuple(min(1, max(0, rng.gauss(0.45, 0.08))) for _ in range(200))
    assert eer(ScoreSet(g, i)) == oracles.eer_sweep(g, i)


@given(score_sets)
def test_eer_property(s):
    tau, value = eer(s)
    assert (tau, value) == oracles.eer_sweep(s.genuine, s.impostor)
    assert value <= max(far(s, tau), frr(s, tau))


def test_eer_dense_grid_stability():
    rng = random.Random(9)
    g = tuple(round(min(1, max(0, rng.gauss(0.2, 0.1))), 3) for _ in range(100))
    i = tuple(round(min(1, max(0, rng.gauss(0.4, 0.1))), 3) for _ in range(100))
    s = ScoreSet(g, i)
    _, value = eer(s)
    dense = [k / 10000 for k in range(10001)]
    best = min(roc_points(s, dense), key=lambda p: abs(p[1] - p[2]))
    assert abs((best[1] + best[2]) / 2 - value) < 1 / 100


def test_fte_ftc():
    assert fte(0, 10) == 0 and fte(10, 10) == 1 and fte(3, 12) == 0.25
    assert ftc(3, 12) == 0.25
    with pytest.raises(ParameterError):
        fte(0, 0)
    with pytest.raises(ParameterError):
        ftc(5, 4)


def test_template_capacity():
    assert template_capacity(100, 4) == 400
    assert template_capacity(1, 1) == 1


def test_score_file_round_trip():
    s = ScoreSet((0.1, 0.25), (0.5,))
    assert parse_scores(format_scores(s).splitlines()) == s
    with pytest.raises(FormatError):
        parse_scores(["bogus 0.1"])
