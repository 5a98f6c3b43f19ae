from __future__ import annotations


class BasisDegenerateError(ValueError):
    """The right frame does not span the single-site operator space."""


class IllConditionedBasisWarning(UserWarning):
    pass


class GradingError(ValueError):
    pass


class ModelError(ValueError):
    """Invalid term data: negative rate, support outside the lattice, non-Hermitian H."""


class NotMagnetizationConservingError(ModelError):
    pass


class KMSViolationError(ModelError):
    pass


class DimensionError(ValueError):
    """Shape mismatch, or a dense request above the configured limit."""


class StructureError(RuntimeError):
    """Block-triangular / Hermitian-block precondition failed."""


class NotPositiveDefiniteError(ValueError):
    pass
