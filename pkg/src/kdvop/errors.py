"""Exception types raised across the package."""


class KdvopError(Exception):
    """Base class for package-specific failures."""


class BlowUpError(KdvopError):
    """Time integration produced a non-finite state.

    Carries the recorded-step index (and sample index when known) so the
    offending trajectory can be located.
    """

    def __init__(self, step: int, sample: int | None = None):
        self.step = step
        self.sample = sample
        where = f"recorded step {step}"
        if sample is not None:
            where += f", sample {sample}"
        super().__init__(f"non-finite state during integration ({where})")


class DataFormatError(KdvopError):
    """Dataset or checkpoint file is structurally invalid."""


class ChecksumError(DataFormatError):
    """Stored CRC-32 does not match the file contents."""


class VersionError(DataFormatError):
    """File was written by an incompatible format version."""


class DegenerateFeatureError(KdvopError):
    """Normalizer statistics are degenerate (zero variance or zero range)."""


class DivergenceError(KdvopError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, history=None):
        self.epoch = epoch
        self.history = history
        super().__init__(f"non-finite training loss at epoch {epoch}")
