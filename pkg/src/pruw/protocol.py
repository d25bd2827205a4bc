"""Private read-update-write over one (K, R) MDS-coded storage segment.

Stored content, queries, answers and updates all follow the same shape: a
data part built from Cauchy-style terms 1/(f - alpha) plus masking noise
polynomials in alpha. Databases only ever evaluate inner products and
publicly computable diagonal scalings, so nothing they see depends on the
target submodel index or on update values.

All bulk math runs on int64 numpy arrays holding canonical residues, with
a reduction after every product so intermediates stay below 2**63. The
subpacket is the unit of operation; every function here takes a batch of
subpackets (leading axis S) and treats them identically and independently.

Array shapes used throughout (M submodels, y coded positions, K slots):

    plain subpackets  (S, M, y, K)
    shard content     (S, y, M)
    query vectors     (K, y, M)   per database
    answers           (K, S)      per database
    update deltas     (S, y, K)
    update payloads   (K, S)      per database
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import (
    BadIndex,
    BadNullSet,
    DimensionMismatch,
    InfeasibleCode,
    SingularSystem,
)
from .field import EvalConstants


@dataclass(frozen=True)
class CodeSpec:
    """One (K, R) MDS configuration with derived noise count and subpacketization.

    K data slots are combined per coded symbol, every coded symbol lives on
    R databases, storage carries x+1 noise vectors, and y = R - K - x - 1
    coded positions per submodel fit in one subpacket.
    """

    K: int
    R: int
    x: int
    y: int

    def __post_init__(self):
        if self.y != self.R - self.K - self.x - 1 or self.y < 1:
            raise InfeasibleCode(f"inconsistent code parameters {self}")

    @property
    def gap(self) -> int:
        return self.R - self.K


def derive_code(K: int, R: int) -> CodeSpec:
    """Fill in the cost-optimal noise count and subpacketization for (K, R).

    The noise degree x equals y for odd R-K and y+1 for even R-K; the
    admissible range is K <= R-3 (odd gap) or K <= R-4 (even gap).
    """
    if K < 1 or R < 4:
        raise InfeasibleCode(f"need K >= 1 and R >= 4, got K={K}, R={R}")
    gap = R - K
    if gap % 2 == 1:
        if K > R - 3:
            raise InfeasibleCode(f"odd R-K requires K <= R-3, got K={K}, R={R}")
        x = (R - K - 1) // 2
    else:
        if K > R - 4:
            raise InfeasibleCode(f"even R-K requires K <= R-4, got K={K}, R={R}")
        x = (R - K) // 2
    y = R - K - x - 1
    return CodeSpec(K=K, R=R, x=x, y=y)


@dataclass
class ShardState:
    """One database's stored noisy coded content for one storage segment."""

    db_index: int
    spec: CodeSpec
    data: np.ndarray  # (S, y, M) int64 residues

    @property
    def n_subpackets(self) -> int:
        return self.data.shape[0]

    def symbol_count(self) -> int:
        return int(self.data.size)

    def copy(self) -> "ShardState":
        return ShardState(self.db_index, self.spec, self.data.copy())


@dataclass
class QueryBundle:
    """Per-database query vectors plus the client-only hidden index.

    ``vectors[n]`` is what database n receives; ``theta`` never leaves the
    client side and is excluded from any serialized form.
    """

    spec: CodeSpec
    consts: EvalConstants
    theta: int  # client-side only
    vectors: dict[int, np.ndarray]  # n -> (K, y, M)

    def server_view(self, n: int) -> np.ndarray:
        try:
            return self.vectors[n]
        except KeyError:
            raise DimensionMismatch(f"no query vector for database {n}") from None


@dataclass
class AnswerBundle:
    """K scalars per participating database per subpacket."""

    spec: CodeSpec
    answers: dict[int, np.ndarray]  # n -> (K, S)


@dataclass
class UpdateBundle:
    """Combined update scalars per database; silent databases get nothing."""

    spec: CodeSpec
    null_set: tuple[int, ...]
    payload: dict[int, np.ndarray]  # n -> (K, S), absent for n in null_set


# ---------------------------------------------------------------------------
# cached per-database constant tables
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _inv_f_minus_alpha(consts: EvalConstants, n: int) -> tuple[tuple[int, ...], ...]:
    a = consts.alpha(n)
    return tuple(
        tuple(consts.field.inv(v - a) for v in row) for row in consts.f
    )


@lru_cache(maxsize=4096)
def _prod_f_minus_alpha(consts: EvalConstants, n: int) -> tuple[int, ...]:
    q = consts.field.q
    a = consts.alpha(n)
    out = []
    for row in consts.f:
        p = 1
        for v in row:
            p = p * ((v - a) % q) % q
        out.append(p)
    return tuple(out)


@lru_cache(maxsize=4096)
def _lagrange_coeff(consts: EvalConstants, n: int) -> tuple[tuple[int, ...], ...]:
    """coeff[j][l] = prod_{i != l}(f_ji - alpha_n) / prod_{i != l}(f_ji - f_jl)."""
    q = consts.field.q
    a = consts.alpha(n)
    out = []
    for row in consts.f:
        k = len(row)
        per_l = []
        for l in range(k):
            num = 1
            den = 1
            for i in range(k):
                if i == l:
                    continue
                num = num * ((row[i] - a) % q) % q
                den = den * ((row[i] - row[l]) % q) % q
            per_l.append(num * consts.field.inv(den) % q)
        out.append(tuple(per_l))
    return tuple(out)


@lru_cache(maxsize=4096)
def _update_scale(consts: EvalConstants) -> tuple[tuple[int, ...], ...]:
    """scale[j][l] = prod_{i != l}(f_ji - f_jl) / prod_{t != j}(f_tl - f_jl).

    Database-independent prefactor turning a raw delta into its combined
    update coefficient.
    """
    q = consts.field.q
    f = consts.f
    y = len(f)
    k = len(f[0])
    out = []
    for j in range(y):
        per_l = []
        for l in range(k):
            num = 1
            for i in range(k):
                if i != l:
                    num = num * ((f[j][i] - f[j][l]) % q) % q
            den = 1
            for t in range(y):
                if t != j:
                    den = den * ((f[t][l] - f[j][l]) % q) % q
            per_l.append(num * consts.field.inv(den) % q)
        out.append(tuple(per_l))
    return tuple(out)


@lru_cache(maxsize=4096)
def _update_poly_factors(
    consts: EvalConstants, n: int
) -> tuple[tuple[tuple[int, ...], ...], tuple[int, ...]]:
    """Per-database factors of the combined update polynomial.

    Returns (partial, full) with partial[j][l] = prod_{t != j}(f_tl - alpha_n)
    and full[l] = prod_t (f_tl - alpha_n), products over coded positions t.
    """
    q = consts.field.q
    a = consts.alpha(n)
    f = consts.f
    y = len(f)
    k = len(f[0])
    terms = [[(f[t][l] - a) % q for l in range(k)] for t in range(y)]
    full = []
    for l in range(k):
        p = 1
        for t in range(y):
            p = p * terms[t][l] % q
        full.append(p)
    partial = []
    for j in range(y):
        per_l = []
        for l in range(k):
            p = 1
            for t in range(y):
                if t != j:
                    p = p * terms[t][l] % q
            per_l.append(p)
        partial.append(tuple(per_l))
    return tuple(partial), tuple(full)


def _null_shaper(
    consts: EvalConstants, n: int, null_set: tuple[int, ...]
) -> tuple[tuple[int, ...], ...]:
    """omega[j][l] = prod_{r in F}(alpha_r - alpha_n) / prod_{r in F}(alpha_r - f_jl).

    Zero exactly when n is in F, which is what lets those databases skip
    the writing round without drifting out of sync.
    """
    q = consts.field.q
    a = consts.alpha(n)
    num = 1
    for r in null_set:
        num = num * ((consts.alpha(r) - a) % q) % q
    out = []
    for row in consts.f:
        per_l = []
        for l in range(len(row)):
            den = 1
            for r in null_set:
                den = den * ((consts.alpha(r) - row[l]) % q) % q
            per_l.append(num * consts.field.inv(den) % q)
        out.append(tuple(per_l))
    return tuple(out)


# ---------------------------------------------------------------------------
# protocol operations
# ---------------------------------------------------------------------------


def _as_batch(w: np.ndarray, ndim: int) -> np.ndarray:
    if w.ndim == ndim - 1:
        return w[np.newaxis, ...]
    if w.ndim != ndim:
        raise DimensionMismatch(f"expected {ndim - 1}- or {ndim}-dim array, got {w.ndim}")
    return w


def encode_subpacket(
    w: np.ndarray,
    spec: CodeSpec,
    consts: EvalConstants,
    participants: list[int],
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> dict[int, np.ndarray]:
    """Encode plain subpackets into the per-database noisy coded columns.

    ``w`` has shape (S, M, y, K). Each database n in ``participants`` gets
    a (S, y, M) block: the Cauchy combination of the K slots plus the
    shared noise polynomial evaluated at its own alpha_n. Noise vectors are
    drawn once and reused for every database; ``noise`` (shape
    (S, y, x+1, M)) overrides the draw for enumeration tests.
    """
    q = consts.field.q
    w = _as_batch(np.asarray(w, dtype=np.int64), 4)
    s_count, m_count, y, k = w.shape
    if (y, k) != (spec.y, spec.K):
        raise DimensionMismatch(f"plain subpacket shaped {(y, k)}, spec wants {(spec.y, spec.K)}")
    if len(set(participants)) != len(participants):
        raise DimensionMismatch("participants must be distinct")
    if noise is None:
        if rng is None:
            raise ValueError("either rng or noise must be provided")
        noise = rng.integers(0, q, size=(s_count, spec.y, spec.x + 1, m_count), dtype=np.int64)
    else:
        noise = np.asarray(noise, dtype=np.int64) % q
        if noise.shape != (s_count, spec.y, spec.x + 1, m_count):
            raise DimensionMismatch("noise must be shaped (S, y, x+1, M)")

    out: dict[int, np.ndarray] = {}
    for n in participants:
        inv_fa = _inv_f_minus_alpha(consts, n)
        a = consts.alpha(n)
        acc = np.zeros((s_count, spec.y, m_count), dtype=np.int64)
        for j in range(spec.y):
            col = acc[:, j, :]
            for i in range(spec.K):
                col += w[:, :, j, i] * inv_fa[j][i]
                col %= q
            a_pow = 1
            for t in range(spec.x + 1):
                col += noise[:, j, t, :] * a_pow
                col %= q
                a_pow = a_pow * a % q
        out[n] = acc
    return out


def build_queries(
    theta: int,
    m_count: int,
    spec: CodeSpec,
    consts: EvalConstants,
    participants: list[int],
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> QueryBundle:
    """Build the K query vectors per database for hidden index ``theta``.

    Block j of vector l is the Lagrange-style coefficient times the theta
    indicator plus prod_i(f_ji - alpha_n) times a noise vector shared by
    all databases. The per-database scaling of the noise is invertible, so
    the server-visible marginal is uniform and theta-independent.
    """
    if not 1 <= theta <= m_count:
        raise BadIndex(f"theta={theta} outside 1..{m_count}")
    q = consts.field.q
    if noise is None:
        if rng is None:
            raise ValueError("either rng or noise must be provided")
        noise = rng.integers(0, q, size=(spec.y, spec.K, m_count), dtype=np.int64)
    else:
        noise = np.asarray(noise, dtype=np.int64) % q
        if noise.shape != (spec.y, spec.K, m_count):
            raise DimensionMismatch("query noise must be shaped (y, K, M)")

    e_theta = np.zeros(m_count, dtype=np.int64)
    e_theta[theta - 1] = 1

    vectors: dict[int, np.ndarray] = {}
    for n in participants:
        lag = _lagrange_coeff(consts, n)
        prod_fa = _prod_f_minus_alpha(consts, n)
        vec = np.zeros((spec.K, spec.y, m_count), dtype=np.int64)
        for l in range(spec.K):
            for j in range(spec.y):
                vec[l, j, :] = (lag[j][l] * e_theta + prod_fa[j] * noise[j, l, :]) % q
        vectors[n] = vec
    return QueryBundle(spec=spec, consts=consts, theta=theta, vectors=vectors)


def answer_query(shard: ShardState, queries: QueryBundle, n: int) -> np.ndarray:
    """Inner products of the stored content with the K query vectors.

    Pure database-side computation: uses only the shard and the received
    vectors, never the hidden index. Returns a (K, S) array.
    """
    if shard.spec != queries.spec:
        raise DimensionMismatch("shard and queries reference different code specs")
    vec = queries.server_view(n)
    q = queries.consts.field.q
    s_count = shard.n_subpackets
    out = np.zeros((queries.spec.K, s_count), dtype=np.int64)
    for l in range(queries.spec.K):
        prods = shard.data * vec[l][np.newaxis, :, :] % q
        out[l] = prods.reshape(s_count, -1).sum(axis=1) % q
    return out


def _invert_matrix_mod(rows: list[list[int]], q: int) -> list[list[int]]:
    """Exact Gaussian elimination over Z_q with pivot search."""
    n = len(rows)
    aug = [[v % q for v in row] + [1 if i == j else 0 for j in range(n)]
           for i, row in enumerate(rows)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] % q != 0), None)
        if pivot is None:
            raise SingularSystem("decoding matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv_p = pow(aug[col][col], q - 2, q)
        aug[col] = [v * inv_p % q for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                factor = aug[r][col]
                aug[r] = [(v - factor * pv) % q for v, pv in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def decoding_matrix(
    spec: CodeSpec, consts: EvalConstants, participants: list[int], l: int
) -> list[list[int]]:
    """R x R system matrix for slot l: Cauchy block then Vandermonde block."""
    q = consts.field.q
    rows = []
    for n in participants:
        inv_fa = _inv_f_minus_alpha(consts, n)
        a = consts.alpha(n)
        row = [inv_fa[j][l] for j in range(spec.y)]
        a_pow = 1
        for _ in range(spec.K + spec.x + 1):
            row.append(a_pow)
            a_pow = a_pow * a % q
        rows.append(row)
    return rows


def decode_read(
    answers: dict[int, np.ndarray] | AnswerBundle,
    spec: CodeSpec,
    consts: EvalConstants,
    participants: list[int],
) -> np.ndarray:
    """Solve the R x R system per slot and return the (S, y, K) data block.

    Only the first y unknowns are data; the trailing noise-polynomial
    coefficients are solved for and discarded.
    """
    if isinstance(answers, AnswerBundle):
        answers = answers.answers
    if set(answers) != set(participants) or len(participants) != spec.R:
        raise DimensionMismatch("need exactly the R participating databases' answers")
    q = consts.field.q
    s_count = next(iter(answers.values())).shape[1]
    out = np.zeros((s_count, spec.y, spec.K), dtype=np.int64)
    for l in range(spec.K):
        rows = decoding_matrix(spec, consts, participants, l)
        inv_rows = _invert_matrix_mod(rows, q)
        rhs = np.stack([answers[n][l] for n in participants])  # (R, S)
        for j in range(spec.y):
            acc = np.zeros(s_count, dtype=np.int64)
            for r in range(spec.R):
                acc = (acc + inv_rows[j][r] * rhs[r]) % q
            out[:, j, l] = acc
    return out


def default_null_set(spec: CodeSpec, participants: list[int]) -> tuple[int, ...]:
    """The x - y lowest-indexed participants sit out the writing round."""
    return tuple(sorted(participants)[: spec.x - spec.y])


def build_updates(
    delta: np.ndarray,
    theta: int,
    spec: CodeSpec,
    consts: EvalConstants,
    participants: list[int],
    null_set: tuple[int, ...] | list[int],
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> UpdateBundle:
    """Combine a (S, y, K) delta block into K masked scalars per database.

    Each delta entry is pre-scaled by its database-independent coefficient;
    the combined scalar for database n evaluates a degree-y polynomial at
    alpha_n whose leading noise term uses one fresh symbol per slot and
    subpacket, shared across databases. Databases in ``null_set`` receive
    nothing.
    """
    delta = _as_batch(np.asarray(delta, dtype=np.int64), 3)
    s_count = delta.shape[0]
    if delta.shape[1:] != (spec.y, spec.K):
        raise DimensionMismatch(f"delta shaped {delta.shape[1:]}, spec wants {(spec.y, spec.K)}")
    null_set = tuple(sorted(null_set))
    if len(null_set) != spec.x - spec.y:
        raise BadNullSet(f"null set must have {spec.x - spec.y} databases, got {len(null_set)}")
    if not set(null_set) <= set(participants):
        raise BadNullSet("null set must be a subset of the participants")
    q = consts.field.q
    if noise is None:
        if rng is None:
            raise ValueError("either rng or noise must be provided")
        noise = rng.integers(0, q, size=(spec.K, s_count), dtype=np.int64)
    else:
        noise = np.asarray(noise, dtype=np.int64) % q
        if noise.shape != (spec.K, s_count):
            raise DimensionMismatch("update noise must be shaped (K, S)")

    scale = _update_scale(consts)
    scaled = delta.copy()
    for j in range(spec.y):
        for l in range(spec.K):
            scaled[:, j, l] = scaled[:, j, l] * scale[j][l] % q

    payload: dict[int, np.ndarray] = {}
    for n in participants:
        if n in null_set:
            continue
        partial, full = _update_poly_factors(consts, n)
        u = np.zeros((spec.K, s_count), dtype=np.int64)
        for l in range(spec.K):
            acc = np.zeros(s_count, dtype=np.int64)
            for j in range(spec.y):
                acc = (acc + partial[j][l] * scaled[:, j, l]) % q
            u[l] = (acc + full[l] * noise[l]) % q
        payload[n] = u
    return UpdateBundle(spec=spec, null_set=null_set, payload=payload)


def apply_update(
    shard: ShardState, updates: UpdateBundle, queries: QueryBundle, n: int
) -> ShardState:
    """Fold the received update scalars into the stored content, in place.

    The database forms the incremental update from its update scalars, the
    query vectors it already holds, and public constants: the null-shaper
    diagonal, the received scalar, the reciprocal storage scaling, then the
    query vector. The result has the same shape as storage and is added on.
    """
    if shard.spec != updates.spec or shard.spec != queries.spec:
        raise DimensionMismatch("shard, updates and queries reference different code specs")
    if n in updates.null_set:
        raise BadNullSet(f"database {n} sits out this writing round")
    if n not in updates.payload:
        raise DimensionMismatch(f"no update payload for database {n}")
    q = queries.consts.field.q
    spec = shard.spec
    u = updates.payload[n]  # (K, S)
    if u.shape[1] != shard.n_subpackets:
        raise DimensionMismatch("update batch does not match shard subpacket count")
    vec = queries.server_view(n)  # (K, y, M)
    omega = _null_shaper(queries.consts, n, updates.null_set)
    prod_fa = _prod_f_minus_alpha(queries.consts, n)
    inv_prod = [queries.consts.field.inv(p) for p in prod_fa]
    for l in range(spec.K):
        for j in range(spec.y):
            coef = omega[j][l] * inv_prod[j] % q
            block = coef * vec[l, j, :] % q  # (M,)
            shard.data[:, j, :] = (
                shard.data[:, j, :] + u[l][:, np.newaxis] * block[np.newaxis, :]
            ) % q
    return shard


def cost_formulas(spec: CodeSpec) -> tuple[Fraction, Fraction, Fraction]:
    """Exact per-useful-symbol read, write and total costs of the code."""
    c_r = Fraction(spec.R, spec.R - spec.K - spec.x - 1)
    c_w = Fraction(2 * spec.R - 2 * spec.x - spec.K - 1, spec.R - spec.x - spec.K - 1)
    if spec.gap % 2 == 1:
        c_t = Fraction(4 * spec.R, spec.R - spec.K - 1)
    else:
        c_t = Fraction(4 * spec.R - 2, spec.R - spec.K - 2)
    assert c_t == c_r + c_w
    return c_r, c_w, c_t
