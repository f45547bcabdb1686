"""Exception types shared across the engines and tooling."""


class InvalidSpec(ValueError):
    """Circuit specification violates one of its invariants."""


class DimensionMismatch(ValueError):
    """Operator or profile shape is incompatible with the state."""


class TooLarge(ValueError):
    """Requested system size exceeds the engine's configured cap."""


class OutOfRange(IndexError):
    """Site or bond index outside the chain."""


class ZeroProbabilityBranch(ArithmeticError):
    """A measurement outcome with probability below 1e-14 was sampled."""


class RankCollapse(ArithmeticError):
    """All singular values of a two-site update fell below tolerance."""


class VanishingDensity(ArithmeticError):
    """Total occupation too small to normalize an observable."""


class ShapeMismatch(ValueError):
    """Series being combined do not share (L, depth)."""


class UnstableStep(ArithmeticError):
    """Explicit finite-difference step violates its stability bound."""


class NonConvergence(RuntimeError):
    """Least-squares fit failed to converge."""


class EmptyPool(ValueError):
    """Measurement-pattern candidate pool is empty."""


class ParseError(ValueError):
    """Config or calibration file could not be parsed."""


class ValidationError(ValueError):
    """Parsed config violates a semantic constraint."""
