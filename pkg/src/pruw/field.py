"""Prime-field arithmetic and the shared evaluation constants.

Every protocol symbol is an element of Z_q for a prime q. Two moduli are
used by default: a large one for simulation, and a small one for the
exhaustive-enumeration privacy audits (which sweep q**2 points).

Elements are kept as canonical least non-negative residues so that
serialized values are bit-exact across runs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field as dc_field

from .errors import CompositeModulus, FieldTooSmall

# Large default for simulation runs; small default for enumeration audits.
DEFAULT_SIM_PRIME = 2147483647  # 2**31 - 1
DEFAULT_AUDIT_PRIME = 251

# Witness set making Miller-Rabin deterministic for all n < 3.3 * 10**24.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for the modulus sizes used here."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class PrimeField:
    """Handle for Z_q, q prime. Immutable and safe to share."""

    __slots__ = ("q",)

    def __init__(self, q: int):
        if q < 2 or not is_prime(q):
            raise CompositeModulus(f"{q} is not prime")
        object.__setattr__(self, "q", q)

    def __setattr__(self, *_):
        raise AttributeError("PrimeField is immutable")

    def __eq__(self, other) -> bool:
        return isinstance(other, PrimeField) and other.q == self.q

    def __hash__(self) -> int:
        return hash(("PrimeField", self.q))

    def __repr__(self) -> str:
        return f"PrimeField(q={self.q})"

    def element(self, value: int) -> FieldElement:
        return FieldElement(value % self.q, self)

    def zero(self) -> FieldElement:
        return FieldElement(0, self)

    def one(self) -> FieldElement:
        return FieldElement(1 % self.q, self)

    def inv(self, value: int) -> int:
        """Inverse of an integer residue, by Fermat."""
        value %= self.q
        if value == 0:
            raise ZeroDivisionError("division by zero in prime field")
        return pow(value, self.q - 2, self.q)


def make_field(q: int) -> PrimeField:
    """Build a field handle, rejecting composite moduli."""
    return PrimeField(q)


@dataclass(frozen=True)
class FieldElement:
    """Canonical residue in a PrimeField; arithmetic is pure and closed."""

    value: int
    field: PrimeField

    def __post_init__(self):
        object.__setattr__(self, "value", self.value % self.field.q)

    def _check(self, other: FieldElement) -> None:
        if self.field != other.field:
            raise ValueError("field elements from different fields")

    def __add__(self, other: FieldElement) -> FieldElement:
        self._check(other)
        return FieldElement(self.value + other.value, self.field)

    def __sub__(self, other: FieldElement) -> FieldElement:
        self._check(other)
        return FieldElement(self.value - other.value, self.field)

    def __mul__(self, other: FieldElement) -> FieldElement:
        self._check(other)
        return FieldElement(self.value * other.value, self.field)

    def __neg__(self) -> FieldElement:
        return FieldElement(-self.value, self.field)

    def __truediv__(self, other: FieldElement) -> FieldElement:
        self._check(other)
        return self * other.inverse()

    def __pow__(self, exp: int) -> FieldElement:
        if exp < 0:
            return self.inverse() ** (-exp)
        return FieldElement(pow(self.value, exp, self.field.q), self.field)

    def inverse(self) -> FieldElement:
        return FieldElement(self.field.inv(self.value), self.field)

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"FieldElement({self.value} mod {self.field.q})"


@dataclass(frozen=True)
class EvalConstants:
    """Globally known distinct nonzero constants for one (K, R) code segment.

    ``alphas`` carries one evaluation point per database (index 1..N);
    ``f`` is the y-by-K grid of combination points. All N + y*K values are
    pairwise distinct, so every denominator the protocol forms is nonzero.
    """

    field: PrimeField
    alphas: tuple[int, ...]
    f: tuple[tuple[int, ...], ...]  # y rows of K entries
    seed: int = dc_field(default=0, compare=False)

    def __post_init__(self):
        flat = list(self.alphas) + [v for row in self.f for v in row]
        if len(set(flat)) != len(flat):
            raise ValueError("evaluation constants must be pairwise distinct")
        if any(v % self.field.q == 0 for v in flat):
            raise ValueError("evaluation constants must be nonzero")

    @property
    def n_databases(self) -> int:
        return len(self.alphas)

    def alpha(self, n: int) -> int:
        """Evaluation point of database n (1-based)."""
        return self.alphas[n - 1]

    def f_at(self, j: int, i: int) -> int:
        """Combination point for coded position j, slot i (1-based)."""
        return self.f[j - 1][i - 1]


def gen_eval_constants(
    field: PrimeField, n_databases: int, y: int, k: int, seed: int
) -> EvalConstants:
    """Draw N + y*K pairwise-distinct nonzero constants, reproducibly.

    A seeded PRNG draws with rejection of duplicates; the pool is sorted
    ascending and the first N values become the per-database points. The
    same (field, sizes, seed) always yields the same constants.
    """
    need = n_databases + y * k
    if field.q <= need:
        raise FieldTooSmall(
            f"q={field.q} supports at most q-1 distinct nonzero constants; "
            f"need {need}"
        )
    rng = random.Random(seed)
    seen: set[int] = set()
    while len(seen) < need:
        seen.add(rng.randrange(1, field.q))
    pool = sorted(seen)
    alphas = tuple(pool[:n_databases])
    rest = pool[n_databases:]
    f = tuple(
        tuple(rest[j * k : (j + 1) * k]) for j in range(y)
    )
    return EvalConstants(field=field, alphas=alphas, f=f, seed=seed)
