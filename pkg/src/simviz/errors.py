"""Exception taxonomy shared across the simviz modules."""


class SimvizError(Exception):
    """Base class for all errors raised by simviz."""


# --- array file parsing ---

class ArrayFormatError(SimvizError):
    """Base for errors while reading the array file format."""


class BadMagic(ArrayFormatError):
    pass


class UnsupportedVersion(ArrayFormatError):
    pass


class UnsupportedDtype(ArrayFormatError):
    pass


class FortranOrderUnsupported(ArrayFormatError):
    pass


class HeaderSyntax(ArrayFormatError):
    pass


class TruncatedPayload(ArrayFormatError):
    pass


class NonFiniteElement(ArrayFormatError):
    pass


# --- manifests ---

class ManifestSyntax(SimvizError):
    pass


class DuplicateId(SimvizError):
    pass


class MissingFile(SimvizError):
    pass


class ShapeMismatch(SimvizError):
    pass


# --- images ---

class UnsupportedImageFormat(SimvizError):
    pass


class CorruptImage(SimvizError):
    pass


# --- similarity math ---

class ZeroNormEmbedding(SimvizError):
    pass


class DimensionMismatch(SimvizError):
    pass


class PoolingInconsistent(SimvizError):
    pass


class ZeroSimilarity(SimvizError):
    pass


class EmptyClass(SimvizError):
    pass


# --- extraction / retrieval ---

class ImageTooSmall(SimvizError):
    pass


class UnknownId(SimvizError):
    pass
