"""Storage planner for equal per-database budgets.

With a common budget mu per database, every pair (R, K_R) with odd R - K_R
gives a directly achievable operating point mu = R/(N*K_R) at total cost
4R/(R-K_R-1); even gaps are strictly dominated by mixing the neighbouring
odd-gap schemes. The achievable frontier is therefore the lower convex
hull of the odd-gap points, and an arbitrary mu is served by splitting the
model between the two bracketing hull schemes.

Storage layout is cyclic: each submodel is cut into N sections and
database n holds the R consecutive sections starting at n (wrapping), so
every section lives on exactly R databases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .errors import InfeasibleCode, OutOfRange
from .hetero import _frac, mds_total_cost

ZERO = Fraction(0)


@dataclass(frozen=True)
class BasicPair:
    """One directly achievable (storage fraction, total cost) operating point."""

    R: int
    K: int
    mu: Fraction
    cost: Fraction


def basic_pairs(n_databases: int) -> list[BasicPair]:
    """All odd-gap (R, K_R) pairs for N databases, sorted by mu."""
    if n_databases < 4:
        raise OutOfRange(f"need at least 4 databases, got {n_databases}")
    pairs = []
    for r in range(4, n_databases + 1):
        for k in range(1, r - 2):
            if (r - k - 1) % 2 != 0:
                continue
            pairs.append(
                BasicPair(
                    R=r,
                    K=k,
                    mu=Fraction(r, n_databases * k),
                    cost=Fraction(4 * r, r - k - 1),
                )
            )
    pairs.sort(key=lambda p: (p.mu, p.cost, p.R, p.K))
    return pairs


def lower_hull(pairs: list[BasicPair]) -> list[BasicPair]:
    """Vertices of the lower convex hull in the (mu, cost) plane.

    Duplicate mu keeps only the cheapest pair; collinear vertices are kept,
    so costs along the hull are piecewise linear with non-decreasing slope.
    """
    if not pairs:
        raise OutOfRange("no operating points to hull")
    best: dict[Fraction, BasicPair] = {}
    for p in sorted(pairs, key=lambda p: (p.mu, p.cost, p.R, p.K)):
        if p.mu not in best:
            best[p.mu] = p
    points = [best[mu] for mu in sorted(best)]
    hull: list[BasicPair] = []
    for p in points:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # pop b while slope(a,b) > slope(b,p); keep collinear vertices
            lhs = (b.cost - a.cost) * (p.mu - b.mu)
            rhs = (p.cost - b.cost) * (b.mu - a.mu)
            if lhs > rhs:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


@lru_cache(maxsize=256)
def _cached_hull(n_databases: int) -> tuple[BasicPair, ...]:
    return tuple(lower_hull(basic_pairs(n_databases)))


def hull_cost_at(hull: list[BasicPair], mu: Fraction) -> Fraction:
    """Piecewise-linear hull cost at mu.

    Beyond the last vertex the frontier is flat: extra capacity cannot beat
    the cheapest scheme, it just goes unused.
    """
    if mu < hull[0].mu:
        raise OutOfRange(f"mu={mu} below hull span start {hull[0].mu}")
    if mu >= hull[-1].mu:
        return hull[-1].cost
    for lo, hi in zip(hull, hull[1:]):
        if lo.mu <= mu <= hi.mu:
            if mu == lo.mu:
                return lo.cost
            if mu == hi.mu:
                return hi.cost
            gamma = (hi.mu - mu) / (hi.mu - lo.mu)
            return gamma * lo.cost + (1 - gamma) * hi.cost
    return hull[-1].cost


@dataclass(frozen=True)
class HomoPlan:
    """Mixture of the two bracketing hull schemes serving budget mu."""

    n: int
    mu: Fraction
    gamma: Fraction
    pair_lo: BasicPair
    pair_hi: BasicPair
    predicted_cost: Fraction

    def section_maps(self) -> dict[str, dict[int, tuple[int, ...]]]:
        return {
            "lo": section_allocation(self.n, self.pair_lo.R),
            "hi": section_allocation(self.n, self.pair_hi.R),
        }


def plan_homo(n_databases: int, mu) -> HomoPlan:
    """Bracket mu between adjacent hull vertices and mix the two schemes."""
    mu = _frac(mu)
    floor_mu = Fraction(1, n_databases - 3)
    if not floor_mu <= mu <= 1:
        raise OutOfRange(
            f"mu={mu} outside plannable range [{floor_mu}, 1] for N={n_databases}"
        )
    hull = list(_cached_hull(n_databases))
    if mu >= hull[-1].mu:
        # beyond the last vertex extra capacity goes unused: run the
        # cheapest scheme alone (arises for odd N, where no odd-gap pair
        # reaches mu = 1)
        vertex = hull[-1]
        return HomoPlan(
            n=n_databases,
            mu=mu,
            gamma=Fraction(1),
            pair_lo=vertex,
            pair_hi=vertex,
            predicted_cost=vertex.cost,
        )
    for vertex in hull:
        if vertex.mu == mu:
            return HomoPlan(
                n=n_databases,
                mu=mu,
                gamma=Fraction(1),
                pair_lo=vertex,
                pair_hi=vertex,
                predicted_cost=vertex.cost,
            )
    lo, hi = next(
        (a, b) for a, b in zip(hull, hull[1:]) if a.mu < mu < b.mu
    )
    gamma = (hi.mu - mu) / (hi.mu - lo.mu)
    cost = gamma * lo.cost + (1 - gamma) * hi.cost
    return HomoPlan(
        n=n_databases,
        mu=mu,
        gamma=gamma,
        pair_lo=lo,
        pair_hi=hi,
        predicted_cost=cost,
    )


def section_allocation(n_databases: int, r: int) -> dict[int, tuple[int, ...]]:
    """Database n holds the R cyclically consecutive sections starting at n."""
    if not 4 <= r <= n_databases:
        raise OutOfRange(f"replication {r} outside 4..{n_databases}")
    return {
        n: tuple(sorted(((n - 1 + t) % n_databases) + 1 for t in range(r)))
        for n in range(1, n_databases + 1)
    }


def section_holders(n_databases: int, r: int) -> dict[int, tuple[int, ...]]:
    """Inverse map: the R databases holding each section."""
    alloc = section_allocation(n_databases, r)
    holders: dict[int, list[int]] = {s: [] for s in range(1, n_databases + 1)}
    for db, sections in alloc.items():
        for s in sections:
            holders[s].append(db)
    return {s: tuple(sorted(dbs)) for s, dbs in holders.items()}


@dataclass(frozen=True)
class EvenGapReport:
    """Cost comparison showing an even-gap code is never worth using."""

    R: int
    K: int
    mu: Fraction
    cost_even: Fraction
    cost_neighbor_lo: Fraction | None
    cost_neighbor_hi: Fraction | None
    hull_cost: Fraction
    dominated: bool


def even_gap_dominance(n_databases: int, r: int, k: int) -> EvenGapReport:
    """Show the even-gap (R, K) point sits strictly above the odd-gap hull."""
    if (r - k) % 2 != 0:
        raise InfeasibleCode(f"({k}, {r}) has an odd gap; nothing to dominate")
    cost_even = mds_total_cost(k, r)
    mu = Fraction(r, n_databases * k)
    cost_lo = mds_total_cost(k, r - 1) if r - 1 - k >= 3 else None
    cost_hi = mds_total_cost(k, r + 1) if r + 1 <= n_databases else None
    if cost_lo is not None and cost_hi is not None:
        assert cost_even > cost_lo > cost_hi
    hull = list(_cached_hull(n_databases))
    hull_cost = hull_cost_at(hull, mu)
    return EvenGapReport(
        R=r,
        K=k,
        mu=mu,
        cost_even=cost_even,
        cost_neighbor_lo=cost_lo,
        cost_neighbor_hi=cost_hi,
        hull_cost=hull_cost,
        dominated=hull_cost < cost_even,
    )


def even_gap_pairs(n_databases: int) -> list[tuple[int, int]]:
    """All admissible (R, K) with even gap for N databases."""
    out = []
    for r in range(4, n_databases + 1):
        for k in range(1, r - 3):
            if (r - k) % 2 == 0:
                out.append((r, k))
    return out


def cost_curve(n_databases: int) -> list[dict]:
    """Hull samples with bracketing codes, plus restricted baselines.

    One row per distinct achievable mu: the hybrid hull cost with its
    bracketing codes and mixing weight, and the costs of the divided-only
    (K=1) and coded-only (R=N) restrictions where those can serve mu.
    """
    pairs = basic_pairs(n_databases)
    divided = [p for p in pairs if p.K == 1]
    coded = [p for p in pairs if p.R == n_databases]
    hull = lower_hull(pairs)
    div_hull = lower_hull(divided) if divided else []
    cod_hull = lower_hull(coded) if coded else []
    rows = []
    for mu in sorted({p.mu for p in pairs}):
        if mu < hull[0].mu or mu > hull[-1].mu:
            continue
        plan = plan_homo(n_databases, mu)
        row = {
            "mu": mu,
            "cost": plan.predicted_cost,
            "r_lo": plan.pair_lo.R,
            "k_lo": plan.pair_lo.K,
            "r_hi": plan.pair_hi.R,
            "k_hi": plan.pair_hi.K,
            "gamma": plan.gamma,
            "divided_cost": None,
            "coded_cost": None,
        }
        if div_hull and div_hull[0].mu <= mu <= div_hull[-1].mu:
            row["divided_cost"] = hull_cost_at(div_hull, mu)
        if cod_hull and cod_hull[0].mu <= mu <= cod_hull[-1].mu:
            row["coded_cost"] = hull_cost_at(cod_hull, mu)
        rows.append(row)
    return rows
