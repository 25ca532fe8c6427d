"""Exception hierarchy.

Everything raised deliberately by the library derives from :class:`SelgenError`,
which the CLI maps to exit code 2 (data error).
"""


class SelgenError(Exception):
    pass


class EmptyInput(SelgenError, ValueError):
    pass


class DimensionMismatch(SelgenError, ValueError):
    pass


class LengthMismatch(SelgenError, ValueError):
    pass


class NonFiniteInput(SelgenError, ValueError):
    pass


class NotPositiveDefinite(SelgenError, ArithmeticError):
    def __init__(self, message: str, pivot_index: int = -1):
        super().__init__(message)
        self.pivot_index = pivot_index


class SingularCovariance(NotPositiveDefinite):
    pass


class SideNotConfigured(SelgenError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "side not configured"


class ZeroVector(SelgenError, ValueError):
    pass


class KTooLarge(SelgenError, ValueError):
    pass


class UnderDetermined(SelgenError, ValueError):
    pass


class SingularDesign(SelgenError, ArithmeticError):
    pass


class MissingFeature(SelgenError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing feature"


class DegenerateInput(SelgenError, ValueError):
    pass


class EmptyAfterRemoval(SelgenError, ValueError):
    pass


class EmptyDocument(SelgenError, ValueError):
    pass


class SingleSegment(SelgenError, ValueError):
    pass


class MissingVariant(SelgenError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing variant"


class BadCov(SelgenError, ValueError):
    pass


class NotConverged(UserWarning):
    """Warning emitted when IRLS stops at ``max_iter``; the model is still returned."""


# -- storage -----------------------------------------------------------------


class StoreError(SelgenError):
    pass


class BadMagic(StoreError):
    pass


class UnsupportedVersion(StoreError):
    pass


class DtypeMismatch(StoreError):
    pass


class TruncatedPayload(StoreError):
    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset


class MetadataError(StoreError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class LineCountMismatch(MetadataError):
    pass


class DuplicateId(MetadataError):
    pass


class MalformedLine(MetadataError):
    pass


class SchemaMismatch(StoreError):
    pass


class VersionUnsupported(StoreError):
    pass
