"""Loss functions on the prediction/target pair.

The absolute loss and the Huber loss are globally Lipschitz in the
prediction (constants 1 and delta); squared error is kept as the
non-robust baseline and reports no Lipschitz constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError

FAMILIES = ("l1", "huber", "l2")

HUBER_DEFAULT_DELTA = 1.345


@dataclass(frozen=True)
class LossSpec:
    family: str
    delta: float = HUBER_DEFAULT_DELTA

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpecError(
                f"loss family must be one of {FAMILIES}, got {self.family!r}"
            )
        if self.family == "huber" and not self.delta > 0:
            raise InvalidSpecError(f"huber delta must be > 0, got {self.delta}")

    @property
    def tag(self) -> str:
        return self.family


def _residual(y, y_true):
    y = np.asarray(y, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(y_true))):
        raise ValueError("non-finite loss input")
    return y - y_true


def loss(spec: LossSpec, y, y_true):
    """Pointwise loss; scalar in, float out, array in, array out."""
    r = _residual(y, y_true)
    if spec.family == "l1":
        out = np.abs(r)
    elif spec.family == "l2":
        out = r * r
    else:
        d = spec.delta
        a = np.abs(r)
        out = np.where(a <= d, 0.5 * r * r, d * a - 0.5 * d * d)
    return float(out) if out.ndim == 0 else out


def dloss_dpred(spec: LossSpec, y, y_true):
    """Subgradient of the loss in the prediction argument.

    Absolute loss uses 0 at a zero residual.
    """
    r = _residual(y, y_true)
    if spec.family == "l1":
        out = np.sign(r)
    elif spec.family == "l2":
        out = 2.0 * r
    else:
        out = np.clip(r, -spec.delta, spec.delta)
    return float(out) if out.ndim == 0 else out


def _dpred_unchecked(spec: LossSpec, preds: np.ndarray, y_true: np.ndarray) -> np.ndarray:
    """Subgradient without finiteness validation, for hot loops."""
    r = preds - y_true
    if spec.family == "l1":
        return np.sign(r)
    if spec.family == "l2":
        return 2.0 * r
    return np.clip(r, -spec.delta, spec.delta)


def lipschitz_constant(spec: LossSpec) -> float | None:
    """Lipschitz constant in the prediction; None for squared error."""
    if spec.family == "l1":
        return 1.0
    if spec.family == "huber":
        return spec.delta
    return None


def loss_spec_from_string(name: str, delta: float | None = None) -> LossSpec:
    """Build a LossSpec from a CLI/config token such as 'l1' or 'huber'."""
    name = name.strip().lower()
    if delta is None:
        return LossSpec(name)
    return LossSpec(name, delta=delta)
