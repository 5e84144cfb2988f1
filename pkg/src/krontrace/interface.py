from enum import Enum, auto


class AutoName(Enum):
    @staticmethod
    def _generate_next_value_(name, _start, _count, _last_values):
        return name


# pylint: disable=invalid-name
class ScalarField(str, AutoName):
    Real = auto()
    Complex = auto()

    @property
    def tag(self):
        """Numeric tag used by the binary matrix format.

        >>> ScalarField.Real.tag, ScalarField.Complex.tag
        (0, 1)
        """
        return 0 if self is ScalarField.Real else 1

    @classmethod
    def from_tag(cls, tag):
        try:
            return (cls.Real, cls.Complex)[tag]
        except IndexError:
            raise ValueError(f"Unknown field tag {tag}") from None

    @classmethod
    def parse(cls, value):
        """Case-insensitive lookup used by the CLI.

        >>> ScalarField.parse("complex")
        <ScalarField.Complex: 'Complex'>
        """
        if isinstance(value, cls):
            return value
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        raise ValueError(f"Unknown scalar field '{value}'")


# pylint: disable=invalid-name
class QueryDistribution(str, AutoName):
    RealRademacher = auto()
    RealGaussian = auto()
    ComplexRademacher = auto()
    ComplexGaussian = auto()

    @property
    def field(self):
        if self.value.startswith("Complex"):
            return ScalarField.Complex
        return ScalarField.Real

    @property
    def is_gaussian(self):
        return self.value.endswith("Gaussian")

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        normalized = str(value).replace("_", "").replace("-", "").lower()
        for member in cls:
            if member.value.lower() == normalized:
                return member
        raise ValueError(f"Unknown query distribution '{value}'")


class MatrixKind(str, AutoName):
    dense_file = auto()
    kron_factors_file = auto()
    rank_one_seed = auto()
    all_ones = auto()
    wishart_seed = auto()
    random_dense_seed = auto()
    random_psd_seed = auto()


class RunMode(str, AutoName):
    hutchinson = auto()
    recovery = auto()


class OutputFormat(str, AutoName):
    csv = auto()
    json = auto()


class VerifyDepth(str, AutoName):
    fast = auto()
    full = auto()
