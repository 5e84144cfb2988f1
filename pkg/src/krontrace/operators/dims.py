import logging
import operator
import os
from dataclasses import dataclass, field

from ..exceptions import BudgetExceededError, DimensionError

LOG = logging.getLogger(__name__)

BUDGET_DK_ENV = "KRONTRACE_BUDGET_DK"
BUDGET_SUBSETS_ENV = "KRONTRACE_BUDGET_SUBSETS"
BUDGET_ORACLE_ENV = "KRONTRACE_BUDGET_ORACLE"

DEFAULT_MAX_DIMENSION = 4096
DEFAULT_MAX_SUBSYSTEMS = 16
DEFAULT_MAX_ORACLE_TERMS = 10**7


def _env_int(name, default):
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        LOG.warning("Ignoring non-integer %s=%r", name, raw)
        return default
    if value < 1:
        LOG.warning("Ignoring non-positive %s=%r", name, raw)
        return default
    return value


@dataclass(frozen=True)
class Budgets:
    """Desk-scale limits shared by every brute-force path."""

    max_dimension: int = DEFAULT_MAX_DIMENSION
    max_subsystems: int = DEFAULT_MAX_SUBSYSTEMS
    max_oracle_terms: int = DEFAULT_MAX_ORACLE_TERMS

    @classmethod
    def from_env(cls):
        return cls(
            max_dimension=_env_int(BUDGET_DK_ENV, DEFAULT_MAX_DIMENSION),
            max_subsystems=_env_int(BUDGET_SUBSETS_ENV, DEFAULT_MAX_SUBSYSTEMS),
            max_oracle_terms=_env_int(BUDGET_ORACLE_ENV, DEFAULT_MAX_ORACLE_TERMS),
        )

    def check_subsets(self, k):
        if k > self.max_subsystems:
            raise BudgetExceededError(
                f"2^{k} subset enumeration exceeds the cap of k <= {self.max_subsystems}"
            )

    def check_oracle(self, terms):
        if terms > self.max_oracle_terms:
            raise BudgetExceededError(
                f"Moment oracle needs {terms} terms, cap is {self.max_oracle_terms}"
            )


@dataclass(frozen=True)
class Dims:
    """Uniform subsystem dimensions: ``k`` subsystems of dimension ``d``.

    >>> Dims(2, 3).D
    8
    """

    d: int
    k: int
    max_dimension: int = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in ("d", "k"):
            value = getattr(self, name)
            try:
                value = operator.index(value)
            except TypeError:
                raise DimensionError(f"{name} must be an integer: {value!r}") from None
            if value < 1:
                raise DimensionError(f"{name} must be >= 1: {value}")
            object.__setattr__(self, name, value)
        cap = self.max_dimension
        if cap is None:
            cap = Budgets.from_env().max_dimension
            object.__setattr__(self, "max_dimension", cap)
        if self.d**self.k > cap:
            raise BudgetExceededError(
                f"Total dimension {self.d}^{self.k} = {self.d ** self.k} exceeds the"
                f" desk-scale cap of {cap}"
            )

    @property
    def D(self):  # pylint: disable=invalid-name
        return self.d**self.k

    @classmethod
    def from_side(cls, side, k, max_dimension=None):
        """Recover ``d`` from a matrix side ``d^k``; rejects non-perfect powers."""
        d = round(side ** (1.0 / k))
        for candidate in (d - 1, d, d + 1):
            if candidate >= 1 and candidate**k == side:
                return cls(candidate, k, max_dimension)
        raise DimensionError(f"Side {side} is not a perfect {k}-th power")

    def check_side(self, side):
        if side != self.D:
            raise DimensionError(f"Matrix side {side} does not match d^k = {self.D}")


def index_digits(index, dims):
    """Split a global index into ``k`` base-``d`` digits, subsystem 1 first.

    >>> index_digits(5, Dims(3, 2, max_dimension=4096))
    (1, 2)
    >>> index_digits(2, Dims(2, 2, max_dimension=4096))
    (1, 0)
    """
    if not 0 <= index < dims.D:
        raise DimensionError(f"Index {index} out of range [0, {dims.D})")
    digits = []
    for _ in range(dims.k):
        index, digit = divmod(index, dims.d)
        digits.append(digit)
    return tuple(reversed(digits))


def digits_index(digits, dims):
    """Inverse of :func:`index_digits`.

    >>> digits_index((1, 2), Dims(3, 2, max_dimension=4096))
    5
    """
    if len(digits) != dims.k:
        raise DimensionError(f"Expected {dims.k} digits, got {len(digits)}")
    index = 0
    for digit in digits:
        if not 0 <= digit < dims.d:
            raise DimensionError(f"Digit {digit} out of range [0, {dims.d})")
        index = index * dims.d + digit
    return index
