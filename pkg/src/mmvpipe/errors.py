"""Typed exception hierarchy for the pipeline.

Every recoverable failure mode raises a subclass of :class:`PipelineError`
so callers can catch one base class at CLI boundaries while tests assert
the specific condition.
"""


class PipelineError(Exception):
    """Base class for all pipeline errors."""


# --- ndimage ---------------------------------------------------------------

class RoiOutOfBounds(PipelineError):
    """ROI offset + size exceeds the image extent on some axis."""


class ReflectTooSmall(PipelineError):
    """Reflect padding requested on an axis of extent 1."""


# --- file formats ----------------------------------------------------------

class IoError(PipelineError):
    """Filesystem failure while reading or writing an image file."""


class BadMagic(PipelineError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersion(PipelineError):
    """File declares a format version this reader does not speak."""


class TruncatedPayload(PipelineError):
    """File is shorter than its header promises."""


class MalformedHeader(PipelineError):
    """Header fields are structurally invalid (dtype code, axis labels, extents)."""


class UnsupportedTiff(PipelineError):
    """TIFF file falls outside the supported baseline 2D subset."""


# --- normalization ---------------------------------------------------------

class EmptyImage(PipelineError):
    """Operation requires at least two elements."""


class ZeroVariance(PipelineError):
    """Standard deviation of the statistics region is zero."""


class NoZAxis(PipelineError):
    """Center normalization requires a Z axis."""


class TooFewStainPixels(PipelineError):
    """Fewer than two pixels survive the optical-density transparency pruning."""


class DegenerateStains(PipelineError):
    """The two recovered stain directions coincide (rank-1 OD cloud)."""


# --- data pipeline ---------------------------------------------------------

class UnpairedSource(PipelineError):
    """A source image has no matching target."""


class DuplicateId(PipelineError):
    """Two records resolve to the same sample id."""


class EmptyDataset(PipelineError):
    """Discovery produced no records."""


class AlreadySplit(PipelineError):
    """Split requested on a manifest whose records already carry split tags."""


class TransformError(PipelineError):
    """A deterministic preprocessing op failed; carries op name and sample id."""


class AllExcluded(PipelineError):
    """Patch sampling rejected the maximum number of draws (cost map all zero)."""


# --- tiling / executors ----------------------------------------------------

class ShapeMismatch(PipelineError):
    """Executor returned a batch of the wrong shape."""


class ChannelMismatch(PipelineError):
    """Image channel count does not match the executor declaration."""


class ExecutorFailure(PipelineError):
    """Executor raised while processing a window; carries the window index."""


class SpawnFailure(PipelineError):
    """External executor process could not be started."""


class HelloMismatch(PipelineError):
    """External executor handshake declaration conflicts with the spec."""


class ExternalProtocolError(PipelineError):
    """Malformed frame, timeout, or unexpected exit of an external executor."""


# --- metrics ---------------------------------------------------------------

class NonBinaryInput(PipelineError):
    """Mask metric received values outside {0, 1}."""


class TooSmallForWindow(PipelineError):
    """Image spatial extents are smaller than the SSIM window."""


# --- config ----------------------------------------------------------------

class ParseError(PipelineError):
    """Config file could not be parsed."""


class UnknownKey(PipelineError):
    """Config contains a key the schema does not define."""


class ValidationError(PipelineError):
    """Config value violates its declared constraint."""
