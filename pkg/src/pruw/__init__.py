"""Private read-update-write planning and simulation toolkit.

Submodels live MDS-coded with additive noise across N non-colluding
databases under per-database storage budgets. The planners pick the coded
storage mixture minimizing total communication; the simulator executes the
full finite-field read/write protocol and audits privacy, security and
cost claims by direct measurement.
"""

from .errors import (
    BadIndex,
    BadNullSet,
    CompositeModulus,
    DegenerateHomogeneous,
    DimensionMismatch,
    FieldTooSmall,
    IndivisibleL,
    InfeasibleAllocation,
    InfeasibleCode,
    InvariantViolation,
    OutOfRange,
    PruwError,
    SingularSystem,
)
from .field import (
    DEFAULT_AUDIT_PRIME,
    DEFAULT_SIM_PRIME,
    EvalConstants,
    FieldElement,
    PrimeField,
    gen_eval_constants,
    is_prime,
    make_field,
)
from .protocol import (
    AnswerBundle,
    CodeSpec,
    QueryBundle,
    ShardState,
    UpdateBundle,
    answer_query,
    apply_update,
    build_queries,
    build_updates,
    cost_formulas,
    decode_read,
    default_null_set,
    derive_code,
    encode_subpacket,
)

__all__ = [name for name in dir() if not name.startswith("_")]
