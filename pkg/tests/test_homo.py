from fractions import Fraction as F

import pytest

from pruw.errors import InfeasibleCode, OutOfRange
from pruw.homo import (
    BasicPair,
    basic_pairs,
    cost_curve,
    even_gap_dominance,
    even_gap_pairs,
    hull_cost_at,
    lower_hull,
    plan_homo,
    section_allocation,
    section_holders,
)


def test_basic_pairs_examples():
    pairs = {(p.R, p.K): p for p in basic_pairs(8)}
    assert pairs[(7, 2)].mu == F(7, 16) and pairs[(7, 2)].cost == 7
    assert pairs[(6, 1)].mu == F(3, 4) and pairs[(6, 1)].cost == 6
    assert all((r - k) % 2 == 1 for r, k in pairs)


def test_basic_pairs_n10_top():
    pairs = {(p.R, p.K): p for p in basic_pairs(10)}
    assert pairs[(10, 1)].mu == 1 and pairs[(10, 1)].cost == 5


def test_basic_pairs_n4_single():
    pairs = basic_pairs(4)
    assert len(pairs) == 1
    assert (pairs[0].R, pairs[0].K, pairs[0].mu, pairs[0].cost) == (4, 1, 1, 8)


def test_basic_pairs_sorted_by_mu():
    pairs = basic_pairs(12)
    assert all(a.mu <= b.mu for a, b in zip(pairs, pairs[1:]))


def test_lower_hull_two_points():
    pts = [
        BasicPair(R=4, K=1, mu=F(1, 2), cost=F(8)),
        BasicPair(R=6, K=1, mu=F(3, 4), cost=F(6)),
    ]
    assert lower_hull(pts) == pts


def _brute_lower_boundary(pairs):
    """Oracle: a point is on the lower boundary iff no segment between two
    other points passes strictly below it at its mu."""
    best = {}
    for p in sorted(pairs, key=lambda p: (p.mu, p.cost, p.R, p.K)):
        if p.mu not in best:
            best[p.mu] = p
    points = [best[mu] for mu in sorted(best)]
    keep = []
    for p in points:
        dominated = False
        for a in points:
            for b in points:
                if a.mu <= p.mu <= b.mu and a.mu < b.mu:
                    gamma = (b.mu - p.mu) / (b.mu - a.mu)
                    if gamma * a.cost + (1 - gamma) * b.cost < p.cost:
                        dominated = True
        if not dominated:
            keep.append(p)
    return keep


@pytest.mark.parametrize("n", [8, 10, 12])
def test_lower_hull_matches_brute_force(n):
    pairs = basic_pairs(n)
    assert lower_hull(pairs) == _brute_lower_boundary(pairs)


def test_hull_n10_membership():
    hull = lower_hull(basic_pairs(10))
    assert all(p.R in (8, 9, 10) for p in hull)
    assert all((p.R - p.K) % 2 == 1 for p in hull)


def test_hull_cost_convex_and_non_increasing():
    for n in (6, 9, 13, 20):
        hull = lower_hull(basic_pairs(n))
        costs = [p.cost for p in hull]
        assert all(a >= b for a, b in zip(costs, costs[1:]))
        slopes = [
            (b.cost - a.cost) / (b.mu - a.mu) for a, b in zip(hull, hull[1:])
        ]
        assert all(s1 <= s2 for s1, s2 in zip(slopes, slopes[1:]))


def test_plan_homo_golden_n8():
    plan = plan_homo(8, "0.7")
    assert plan.gamma == F(4, 25)
    assert (plan.pair_lo.R, plan.pair_lo.K) == (7, 2)
    assert (plan.pair_hi.R, plan.pair_hi.K) == (6, 1)
    assert plan.pair_lo.cost == 7 and plan.pair_hi.cost == 6
    assert plan.predicted_cost == F(154, 25)
    # the mixing weight also balances storage exactly
    assert plan.gamma * plan.pair_lo.mu + (1 - plan.gamma) * plan.pair_hi.mu == F(7, 10)


def test_plan_homo_vertex_hit():
    plan = plan_homo(8, F(3, 4))
    assert plan.gamma == 1
    assert plan.pair_lo == plan.pair_hi
    assert (plan.pair_lo.R, plan.pair_lo.K) == (6, 1)
    assert plan.predicted_cost == 6


def test_plan_homo_minimum_mu():
    plan = plan_homo(8, F(1, 5))
    assert (plan.pair_lo.R, plan.pair_lo.K) == (8, 5)
    assert plan.predicted_cost == 16  # 2N


def test_plan_homo_out_of_range():
    with pytest.raises(OutOfRange):
        plan_homo(8, F(1, 6))  # below 1/(N-3)
    with pytest.raises(OutOfRange):
        plan_homo(8, F(11, 10))


def test_plan_homo_odd_n_surplus_capacity():
    # no odd-gap pair reaches mu=1 for odd N; surplus stays unused
    plan = plan_homo(5, 1)
    assert (plan.pair_lo.R, plan.pair_lo.K) == (4, 1)
    assert plan.gamma == 1 and plan.predicted_cost == 8


def test_plan_homo_cost_matches_hull_everywhere():
    for n in (8, 11):
        hull = lower_hull(basic_pairs(n))
        lo, hi = hull[0].mu, hull[-1].mu
        grid = [lo + (hi - lo) * F(i, 17) for i in range(18)]
        for mu in grid:
            plan = plan_homo(n, mu)
            assert plan.predicted_cost == hull_cost_at(hull, mu)
            assert 0 <= plan.gamma <= 1
            if plan.pair_lo != plan.pair_hi:
                mixed = plan.gamma * plan.pair_lo.mu + (1 - plan.gamma) * plan.pair_hi.mu
                assert mixed == mu


def test_section_allocation_examples():
    alloc = section_allocation(8, 7)
    assert alloc[1] == (1, 2, 3, 4, 5, 6, 7)
    holders = section_holders(8, 7)
    assert holders[1] == (1, 3, 4, 5, 6, 7, 8)
    assert all(len(v) == 7 for v in holders.values())


def test_section_allocation_full_replication():
    alloc = section_allocation(6, 6)
    assert all(v == (1, 2, 3, 4, 5, 6) for v in alloc.values())


def test_section_holders_counting_oracle():
    n, r = 10, 8
    holders = section_holders(n, r)
    counts = {s: 0 for s in range(1, n + 1)}
    for db in range(1, n + 1):
        start = db
        for t in range(r):
            counts[((db - 1 + t) % n) + 1] += 1
    assert {s: len(holders[s]) for s in holders} == counts
    assert all(c == r for c in counts.values())


def test_even_gap_dominance_example():
    rep = even_gap_dominance(10, 8, 2)
    assert rep.cost_even == F(15, 2)
    assert rep.cost_neighbor_lo == 7
    assert rep.cost_neighbor_hi == 6
    assert rep.dominated


def test_even_gap_dominance_requires_even_gap():
    with pytest.raises(InfeasibleCode):
        even_gap_dominance(10, 7, 2)


@pytest.mark.parametrize("n", range(4, 17))
def test_even_gap_pairs_all_dominated(n):
    for r, k in even_gap_pairs(n):
        rep = even_gap_dominance(n, r, k)
        assert rep.dominated
        assert rep.hull_cost < rep.cost_even


def test_cost_curve_rows():
    rows = cost_curve(10)
    assert rows[0]["mu"] == F(1, 7) and rows[0]["cost"] == 20
    assert rows[-1]["mu"] == 1 and rows[-1]["cost"] == 5
    for row in rows:
        if row["divided_cost"] is not None:
            assert row["divided_cost"] >= row["cost"]
        if row["coded_cost"] is not None:
            assert row["coded_cost"] >= row["cost"]
