"""Exception hierarchy shared across the package."""


class DagnetError(Exception):
    """Base class for all package errors."""


# graphs
class CycleError(DagnetError, ValueError):
    pass


class EmptyGraphError(DagnetError, ValueError):
    pass


class LayerIndexError(DagnetError, IndexError):
    pass


class SpecError(DagnetError, ValueError):
    """Invalid generator or dataset specification."""


# tensors and models
class ShapeError(DagnetError, ValueError):
    pass


class NoTapeError(DagnetError, RuntimeError):
    """``backward`` was called on a tensor that no recorded op produced."""


class LabelRangeError(DagnetError, ValueError):
    pass


class SizeError(DagnetError, ValueError):
    pass


class CellArityError(DagnetError, ValueError):
    pass


# pruning / extraction
class NoMaskableLayersError(DagnetError, ValueError):
    pass


class DataError(DagnetError, ValueError):
    pass


class ProbeShapeError(DagnetError, ValueError):
    pass


class UnsupportedModelError(DagnetError, TypeError):
    pass


class ExtractionTooLargeError(DagnetError, MemoryError):
    pass


# persistence
class FormatError(DagnetError, ValueError):
    pass


class TruncationError(FormatError):
    pass


class MagicError(FormatError):
    pass


class CountMismatchError(FormatError):
    pass
