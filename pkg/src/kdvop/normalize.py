"""Feature scalers with fit-on-train-only provenance.

Statistics are taken over axis 0 (samples) and keep the trailing feature
shape, so a scaler fitted on [N, ...] applies to any batch [B, ...] of the
same feature shape.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFeatureError

KINDS = ("standard", "minmax", "none")


@dataclass
class Normalizer:
    kind: str = "none"
    loc: np.ndarray | None = None    # mean (standard) or min (minmax)
    scale: np.ndarray | None = None  # std (standard) or max-min (minmax)
    fitted_on: str = "train"

    def apply(self, x):
        if self.kind == "none":
            return np.asarray(x, dtype=np.float64)
        return (np.asarray(x, dtype=np.float64) - self.loc) / self.scale

    def invert(self, x):
        if self.kind == "none":
            return np.asarray(x, dtype=np.float64)
        return np.asarray(x, dtype=np.float64) * self.scale + self.loc

    def state(self) -> dict:
        out = {"kind": self.kind, "fitted_on": self.fitted_on}
        if self.kind != "none":
            out["loc"] = self.loc
            out["scale"] = self.scale
        return out

    @classmethod
    def from_state(cls, state: dict) -> "Normalizer":
        return cls(
            kind=state["kind"],
            loc=state.get("loc"),
            scale=state.get("scale"),
            fitted_on=state.get("fitted_on", "train"),
        )


def fit_normalizer(kind: str, data, fitted_on: str = "train") -> Normalizer:
    """Fit scaling statistics on data [N, ...feature dims...]."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if kind == "none":
        return Normalizer(kind="none", fitted_on=fitted_on)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim < 1 or data.shape[0] < 1:
        raise ValueError("need at least one sample to fit")
    if kind == "standard":
        loc = data.mean(axis=0)
        scale = data.std(axis=0)
        if np.any(scale == 0.0):
            raise DegenerateFeatureError(
                f"{int(np.sum(scale == 0.0))} features have zero variance"
            )
    else:
        loc = data.min(axis=0)
        scale = data.max(axis=0) - loc
        if np.any(scale == 0.0):
            raise DegenerateFeatureError(
                f"{int(np.sum(scale == 0.0))} features have zero range"
            )
    return Normalizer(kind=kind, loc=loc, scale=scale, fitted_on=fitted_on)
