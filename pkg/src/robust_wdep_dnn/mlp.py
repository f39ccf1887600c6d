"""Feedforward ReLU networks with explicit parameters.

Networks are plain containers of per-layer weight matrices and bias
vectors, evaluated and differentiated by hand so that every floating
point operation is under our control.  The parameter vector is the
per-layer concatenation (vec(W_1), b_1, ..., vec(W_{L+1}), b_{L+1}),
with each weight matrix flattened column by column; projection and
serialization both use this ordering.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError, ShapeError

__all__ = [
    "NetworkArchitecture",
    "NetworkParams",
    "ClassSpec",
    "forward",
    "grad",
    "project_to_class",
    "count_nonzero",
    "sup_norm",
    "depth",
    "max_width",
    "he_uniform_init",
]


@dataclass(frozen=True)
class NetworkArchitecture:
    """Layer widths (p_0, ..., p_{L+1}); p_0 is the input dimension."""

    widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 2:
            raise InvalidSpecError("architecture needs at least input and output widths")
        if any(w < 1 for w in widths):
            raise InvalidSpecError(f"all widths must be >= 1, got {widths}")
        if widths[-1] != 1:
            raise InvalidSpecError(f"output width must be 1, got {widths[-1]}")

    @property
    def depth(self) -> int:
        """Number of hidden layers."""
        return len(self.widths) - 2

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def n_params(self) -> int:
        return sum(o * i + o for i, o in zip(self.widths[:-1], self.widths[1:]))

    @staticmethod
    def from_hidden(input_dim: int, hidden: tuple[int, ...]) -> "NetworkArchitecture":
        return NetworkArchitecture((input_dim, *hidden, 1))


@dataclass(frozen=True)
class NetworkParams:
    """Per-layer weights and biases of a network.

    Arrays are frozen after construction; evaluation is therefore safe
    from any number of threads.  Training code works on its own copies.
    """

    arch: NetworkArchitecture
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        widths = self.arch.widths
        n_layers = len(widths) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ShapeError(
                f"expected {n_layers} weight/bias pairs, got "
                f"{len(self.weights)}/{len(self.biases)}"
            )
        ws, bs = [], []
        for k in range(n_layers):
            w = np.array(self.weights[k], dtype=np.float64)
            b = np.array(self.biases[k], dtype=np.float64)
            if w.shape != (widths[k + 1], widths[k]):
                raise ShapeError(
                    f"layer {k + 1}: weight shape {w.shape} != "
                    f"({widths[k + 1]}, {widths[k]})"
                )
            if b.shape != (widths[k + 1],):
                raise ShapeError(
                    f"layer {k + 1}: bias shape {b.shape} != ({widths[k + 1]},)"
                )
            w.flags.writeable = False
            b.flags.writeable = False
            ws.append(w)
            bs.append(b)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    def theta(self) -> np.ndarray:
        """Flat parameter vector, column-major per weight matrix."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.flatten(order="F"))
            parts.append(b)
        return np.concatenate(parts)

    @staticmethod
    def from_theta(arch: NetworkArchitecture, theta: np.ndarray) -> "NetworkParams":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (arch.n_params,):
            raise ShapeError(f"theta length {theta.shape} != ({arch.n_params},)")
        widths = arch.widths
        ws, bs, pos = [], [], 0
        for k in range(len(widths) - 1):
            n_in, n_out = widths[k], widths[k + 1]
            ws.append(theta[pos : pos + n_out * n_in].reshape((n_out, n_in), order="F"))
            pos += n_out * n_in
            bs.append(theta[pos : pos + n_out])
            pos += n_out
        return NetworkParams(arch, tuple(ws), tuple(bs))

    def copy_arrays(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Writable copies of the weights and biases, for optimizers."""
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]

    def to_dict(self) -> dict:
        return {"arch": list(self.arch.widths), "theta": self.theta().tolist()}

    @staticmethod
    def from_dict(payload: dict) -> "NetworkParams":
        arch = NetworkArchitecture(tuple(payload["arch"]))
        return NetworkParams.from_theta(arch, np.asarray(payload["theta"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @staticmethod
    def load(path) -> "NetworkParams":
        with open(path, "r", encoding="utf-8") as fh:
            return NetworkParams.from_dict(json.load(fh))


@dataclass(frozen=True)
class ClassSpec:
    """Constraint tuple (depth, width, magnitude, output, sparsity) caps.

    Membership requires depth <= depth_cap, max hidden width <= width_cap,
    sup-norm of the parameter vector <= magnitude_cap and at most
    floor(sparsity_cap) nonzero parameters.  The output cap bounds |h|
    through clamping at evaluation time, not through membership.
    """

    depth_cap: float
    width_cap: float
    magnitude_cap: float
    output_cap: float
    sparsity_cap: float
    activation: str = "relu"

    def __post_init__(self):
        caps = {
            "depth_cap": self.depth_cap,
            "width_cap": self.width_cap,
            "magnitude_cap": self.magnitude_cap,
            "output_cap": self.output_cap,
            "sparsity_cap": self.sparsity_cap,
        }
        for name, value in caps.items():
            if not value > 0:
                raise InvalidSpecError(f"{name} must be strictly positive, got {value}")
        if self.activation != "relu":
            raise InvalidSpecError(f"unsupported activation {self.activation!r}")

    def contains(self, params: NetworkParams) -> bool:
        return (
            depth(params) <= self.depth_cap
            and max_width(params) <= self.width_cap
            and sup_norm(params) <= self.magnitude_cap
            and count_nonzero(params) <= math.floor(self.sparsity_cap)
        )


def _check_input(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != params.arch.input_dim:
        raise ShapeError(
            f"input shape {x.shape} incompatible with input dim {params.arch.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    return x


def forward(params: NetworkParams, x, clamp: float | None = None):
    """Evaluate the network at ``x``.

    Hidden layers apply ReLU element-wise, the output layer is affine.
    ``x`` may be a single input vector or a matrix of row vectors; the
    result is a float or a 1d array accordingly.  When ``clamp`` is
    given, the output is clipped to [-clamp, clamp].
    """
    x = _check_input(params, x)
    single = x.ndim == 1
    a = x[None, :] if single else x
    n_layers = len(params.weights)
    for k in range(n_layers - 1):
        a = np.maximum(a @ params.weights[k].T + params.biases[k], 0.0)
    out = (a @ params.weights[-1].T + params.biases[-1])[:, 0]
    if clamp is not None and math.isfinite(clamp):
        out = np.clip(out, -clamp, clamp)
    return float(out[0]) if single else out


def _forward_cached(weights, biases, x):
    """Forward pass over a batch keeping activations for backprop."""
    acts = [x]
    a = x
    for k in range(len(weights) - 1):
        z = a @ weights[k].T + biases[k]
        a = np.maximum(z, 0.0)
        acts.append(a)
    raw = (a @ weights[-1].T + biases[-1])[:, 0]
    return acts, raw


def _backward(weights, acts, raw, upstream, clamp, g_w=None, g_b=None):
    """Parameter gradients of sum_i upstream_i * h(x_i).

    ``upstream`` carries the per-sample loss derivatives (already scaled
    by the caller, e.g. divided by the batch size).  Clamped outputs and
    inactive ReLU units propagate zero; the boundary itself (|raw| equal
    to the clamp level, pre-activation exactly zero) also gets zero.
    Gradients are written into ``g_w``/``g_b`` when given.
    """
    if clamp is not None and math.isfinite(clamp):
        upstream = np.where(np.abs(raw) < clamp, upstream, 0.0)
    if g_w is None:
        g_w = [np.empty_like(w) for w in weights]
        g_b = [np.empty_like(w[:, 0]) for w in weights]
    delta = upstream[:, None]
    np.matmul(delta.T, acts[-1], out=g_w[-1])
    np.sum(delta, axis=0, out=g_b[-1])
    for k in range(len(weights) - 2, -1, -1):
        delta = (delta @ weights[k + 1]) * (acts[k + 1] > 0.0)
        np.matmul(delta.T, acts[k], out=g_w[k])
        np.sum(delta, axis=0, out=g_b[k])
    return g_w, g_b


def grad(params: NetworkParams, x, upstream: float, clamp: float | None = None) -> NetworkParams:
    """Gradient of ``upstream * h(x)`` with respect to every parameter.

    Returned in a container shaped exactly like ``params``.  At ReLU
    kinks (pre-activation exactly 0) and at clamp boundaries the
    subgradient is taken to be 0.
    """
    x = _check_input(params, x)
    if x.ndim != 1:
        raise ShapeError("grad expects a single input vector")
    acts, raw = _forward_cached(params.weights, params.biases, x[None, :])
    g_w, g_b = _backward(
        params.weights, acts, raw, np.array([float(upstream)]), clamp
    )
    return NetworkParams(params.arch, tuple(g_w), tuple(g_b))


def count_nonzero(params: NetworkParams) -> int:
    total = 0
    for w, b in zip(params.weights, params.biases):
        total += int(np.count_nonzero(w)) + int(np.count_nonzero(b))
    return total


def sup_norm(params: NetworkParams) -> float:
    worst = 0.0
    for w, b in zip(params.weights, params.biases):
        worst = max(worst, float(np.max(np.abs(w))) if w.size else 0.0)
        worst = max(worst, float(np.max(np.abs(b))) if b.size else 0.0)
    return worst


def depth(params: NetworkParams) -> int:
    return params.arch.depth


def max_width(params: NetworkParams) -> int:
    """Largest hidden-layer width; 0 for a purely affine network."""
    hidden = params.arch.widths[1:-1]
    return max(hidden) if hidden else 0


def _project_theta(theta: np.ndarray, magnitude_cap: float, sparsity_cap: float) -> np.ndarray:
    out = np.clip(theta, -magnitude_cap, magnitude_cap)
    keep = math.floor(sparsity_cap)
    if np.count_nonzero(out) > keep:
        # stable sort keeps the lower flattened index on magnitude ties
        order = np.argsort(-np.abs(out), kind="stable")
        out[order[keep:]] = 0.0
    return out


def project_to_class(params: NetworkParams, spec: ClassSpec) -> NetworkParams:
    """Project onto the constraint class by clipping then magnitude pruning.

    Entries are clipped to [-magnitude_cap, magnitude_cap]; if more than
    floor(sparsity_cap) entries remain nonzero, only the largest-magnitude
    ones are kept (ties resolved toward the lower flattened index).
    Depth and width caps are construction-time properties and must
    already hold.
    """
    if spec.sparsity_cap < 1:
        raise InvalidSpecError(f"sparsity cap must be >= 1, got {spec.sparsity_cap}")
    if depth(params) > spec.depth_cap or max_width(params) > spec.width_cap:
        raise InvalidSpecError(
            "architecture exceeds the depth/width caps; these are not projectable"
        )
    theta = _project_theta(params.theta(), spec.magnitude_cap, spec.sparsity_cap)
    return NetworkParams.from_theta(params.arch, theta)


def he_uniform_init(arch: NetworkArchitecture, rng: np.random.Generator) -> NetworkParams:
    """He-uniform weights, zero biases."""
    ws, bs = [], []
    for n_in, n_out in zip(arch.widths[:-1], arch.widths[1:]):
        limit = math.sqrt(6.0 / n_in)
        ws.append(rng.uniform(-limit, limit, size=(n_out, n_in)))
        bs.append(np.zeros(n_out))
    return NetworkParams(arch, tuple(ws), tuple(bs))
