"""Exception types shared across the package."""


class ScmfkitError(Exception):
    """Base class for all package errors."""


class InvalidMatrix(ScmfkitError, ValueError):
    """Matrix violates a structural invariant (finiteness, symmetry, bounds)."""


class DimensionError(ScmfkitError, ValueError):
    """Incompatible or ill-formed dimensions."""


class InvalidOccupation(ScmfkitError, ValueError):
    """Occupation index set is invalid (duplicates, out of range)."""


class TooLarge(ScmfkitError, ValueError):
    """Requested basis or matrix exceeds the dense-diagonalization caps."""


class SectorError(ScmfkitError, ValueError):
    """Operation requires a different Fock sector."""


class NotRepresentable(ScmfkitError, RuntimeError):
    """Constraint target could not be met; carries the best residual found."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BracketError(ScmfkitError, RuntimeError):
    """Chemical-potential search failed; carries the sampled (mu, N) trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class SingularU(ScmfkitError, RuntimeError):
    """U block of a Bogoliubov transform is singular beyond removable modes."""


class ConjugateMissing(ScmfkitError, ValueError):
    """A complex principal variable lacks its conjugate partner (field not hermitian)."""


class LabelError(ScmfkitError, KeyError):
    """Unknown principal-variable label."""


class DomainError(ScmfkitError, ValueError):
    """Scalar argument outside its mathematical domain."""


class ConfigError(ScmfkitError, ValueError):
    """Malformed or inconsistent run configuration."""
