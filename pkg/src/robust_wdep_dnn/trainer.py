"""Minibatch Adam training of a network under a chosen loss.

Training monitors the full-sample empirical risk after every epoch and
stops once the running best has not strictly improved for a fixed
number of epochs, returning the parameters that achieved the best risk
(not the last iterate).  All randomness derives from the config seed.

Parameters, moments and gradients live in flat buffers with per-layer
views so the optimizer touches every parameter in one fused pass; this
internal layout never leaks into the serialized parameter order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import mlp
from .errors import DivergenceError, InsufficientDataError, ShapeError
from .losses import LossSpec, _dpred_unchecked, loss
from .mlp import ClassSpec, NetworkArchitecture, NetworkParams

__all__ = ["TrainConfig", "TrainReport", "empirical_risk", "fit"]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    patience: int = 30
    max_epochs: int = 1000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    class_spec: ClassSpec | None = None
    shuffle: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("adam betas must lie strictly inside (0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1 or self.learning_rate <= 0:
            raise ValueError("batch size, max epochs and learning rate must be positive")


@dataclass(frozen=True)
class TrainReport:
    params: NetworkParams
    best_risk: float
    epochs_run: int
    risk_history: tuple[float, ...]


def empirical_risk(params: NetworkParams, x, y, spec: LossSpec,
                   clamp: float | None = None) -> float:
    """Mean loss of the network over the given pairs."""
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise InsufficientDataError("empirical risk needs at least one pair")
    preds = mlp.forward(params, x, clamp=clamp)
    return float(np.mean(loss(spec, preds, y)))


class _FlatLayout:
    """Flat float64 buffer with per-layer weight/bias views."""

    def __init__(self, arch: NetworkArchitecture):
        self.arch = arch
        self.size = arch.n_params

    def views(self, flat: np.ndarray):
        weights, biases, pos = [], [], 0
        widths = self.arch.widths
        for n_in, n_out in zip(widths[:-1], widths[1:]):
            weights.append(flat[pos : pos + n_out * n_in].reshape(n_out, n_in))
            pos += n_out * n_in
            biases.append(flat[pos : pos + n_out])
            pos += n_out
        return weights, biases


def _clamp_level(cfg: TrainConfig) -> float | None:
    if cfg.class_spec is None:
        return None
    level = cfg.class_spec.output_cap
    return level if math.isfinite(level) else None


def fit(x, y, arch: NetworkArchitecture, loss_spec: LossSpec,
        cfg: TrainConfig) -> TrainReport:
    """Empirical risk minimization by shuffled minibatch Adam.

    When a constraint class is configured, parameters are projected back
    onto it after every optimizer step and predictions are clamped at
    its output cap.  BLAS threading is pinned to one thread for the
    duration of the call: the matrices are small enough that thread
    sync costs dominate, and single-threaded reductions keep results
    bitwise reproducible under any worker-pool layout.
    """
    with threadpool_limits(limits=1, user_api="blas"):
        return _fit_pinned(x, y, arch, loss_spec, cfg)


def _fit_pinned(x, y, arch, loss_spec, cfg) -> TrainReport:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise InsufficientDataError("fit needs at least one pair")
    if x.ndim != 2 or x.shape[0] != n:
        raise ShapeError(f"pairs mismatch: x {x.shape} vs y {y.shape}")
    if x.shape[1] != arch.input_dim:
        raise ShapeError(
            f"input dim {x.shape[1]} != architecture input {arch.input_dim}"
        )

    layout = _FlatLayout(arch)
    theta = np.empty(layout.size)
    weights, biases = layout.views(theta)
    init_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    init = mlp.he_uniform_init(arch, init_rng)
    for view, value in zip(weights, init.weights):
        view[:] = value
    for view, value in zip(biases, init.biases):
        view[:] = value

    clamp = _clamp_level(cfg)
    project = cfg.class_spec is not None

    grad_flat = np.empty(layout.size)
    g_w, g_b = layout.views(grad_flat)
    moment1 = np.zeros(layout.size)
    moment2 = np.zeros(layout.size)
    scratch = np.empty(layout.size)
    step = 0

    # preallocated batch buffers; short final batches use leading slices
    bsz = min(cfg.batch_size, n)
    act_bufs = [np.empty((bsz, w)) for w in arch.widths[1:-1]]
    delta_bufs = [np.empty((bsz, w)) for w in arch.widths[1:-1]]

    def batch_step(xb, yb):
        blen = len(yb)
        acts = [xb]
        a = xb
        for k in range(len(weights) - 1):
            buf = act_bufs[k][:blen]
            np.matmul(a, weights[k].T, out=buf)
            buf += biases[k]
            np.maximum(buf, 0.0, out=buf)
            acts.append(buf)
            a = buf
        raw = a @ weights[-1].T + biases[-1]
        raw = raw[:, 0]
        preds = raw if clamp is None else np.clip(raw, -clamp, clamp)
        # a non-finite prediction makes the sum non-finite
        if not math.isfinite(float(preds.sum())):
            return None
        upstream = _dpred_unchecked(loss_spec, preds, yb) / blen
        if clamp is not None:
            upstream = np.where(np.abs(raw) < clamp, upstream, 0.0)
        delta = upstream[:, None]
        np.matmul(delta.T, acts[-1], out=g_w[-1])
        delta.sum(axis=0, out=g_b[-1])
        for k in range(len(weights) - 2, -1, -1):
            buf = delta_bufs[k][:blen]
            np.matmul(delta, weights[k + 1], out=buf)
            buf *= acts[k + 1] > 0.0
            delta = buf
            np.matmul(delta.T, acts[k], out=g_w[k])
            delta.sum(axis=0, out=g_b[k])
        return preds

    # full-sample forward buffers, reused every epoch
    risk_acts = [np.empty((n, w)) for w in arch.widths[1:]]

    def full_risk() -> float:
        a = x
        for k in range(len(weights) - 1):
            buf = risk_acts[k]
            np.matmul(a, weights[k].T, out=buf)
            buf += biases[k]
            np.maximum(buf, 0.0, out=buf)
            a = buf
        out = risk_acts[-1]
        np.matmul(a, weights[-1].T, out=out)
        out += biases[-1]
        preds = out[:, 0]
        if clamp is not None:
            preds = np.clip(preds, -clamp, clamp)
        return float(np.mean(loss(loss_spec, preds, y)))

    best_risk = math.inf
    best_theta = theta.copy()
    history: list[float] = []
    epochs_without_improvement = 0
    epochs_run = 0
    one_minus_b1 = 1.0 - cfg.beta1
    one_minus_b2 = 1.0 - cfg.beta2

    for epoch in range(1, cfg.max_epochs + 1):
        if cfg.shuffle:
            order_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, epoch]))
            order = order_rng.permutation(n)
        else:
            order = np.arange(n)
        x_shuffled, y_shuffled = x[order], y[order]
        for start in range(0, n, cfg.batch_size):
            xb = x_shuffled[start : start + cfg.batch_size]
            yb = y_shuffled[start : start + cfg.batch_size]
            if batch_step(xb, yb) is None:
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}",
                    step=step,
                )
            step += 1
            corr1 = 1.0 - cfg.beta1**step
            corr2 = 1.0 - cfg.beta2**step
            # m += (1-b1)(g - m); v += (1-b2)(g^2 - v)
            np.subtract(grad_flat, moment1, out=scratch)
            scratch *= one_minus_b1
            moment1 += scratch
            np.multiply(grad_flat, grad_flat, out=scratch)
            scratch -= moment2
            scratch *= one_minus_b2
            moment2 += scratch
            # theta -= lr * (m/corr1) / (sqrt(v/corr2) + eps)
            np.divide(moment2, corr2, out=scratch)
            np.sqrt(scratch, out=scratch)
            scratch += cfg.eps
            np.divide(moment1, scratch, out=scratch)
            scratch *= cfg.learning_rate / corr1
            theta -= scratch
            if project:
                projected = mlp.project_to_class(
                    NetworkParams(arch, tuple(weights), tuple(biases)),
                    cfg.class_spec,
                )
                for view, value in zip(weights, projected.weights):
                    view[:] = value
                for view, value in zip(biases, projected.biases):
                    view[:] = value

        risk = full_risk()
        if not math.isfinite(risk):
            raise DivergenceError(f"non-finite risk after epoch {epoch}", step=step)
        history.append(risk)
        epochs_run = epoch
        if risk < best_risk:
            best_risk = risk
            best_theta[:] = theta
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= cfg.patience:
                break

    best_weights, best_biases = layout.views(best_theta)
    params = NetworkParams(arch, tuple(best_weights), tuple(best_biases))
    return TrainReport(
        params=params,
        best_risk=best_risk,
        epochs_run=epochs_run,
        risk_history=tuple(history),
    )
