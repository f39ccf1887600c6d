"""Stationary nonlinear autoregressive data generation.

A trajectory follows Y_t = f(Y_{t-1}, ..., Y_{t-p}) + e_t with an i.i.d.
innovation sequence.  Two concrete regression functions are built in: a
threshold autoregression of order 3 and an exponential autoregression
of order 2.  Supervised pairs embed each observation against its p
most recent lags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .csvio import read_csv, write_csv
from .errors import DivergenceError, InsufficientDataError, InvalidSpecError

DGP_NAMES = ("dgp1", "dgp2", "custom")
ERROR_LAWS = ("gaussian", "t", "cauchy", "none")

# Per-lag slopes dominating |f| at infinity, used by the stationarity
# check.  For dgp2 the envelope sums to exactly 1, sitting on the
# boundary of the sufficient condition.
DEFAULT_ALPHAS = {
    "dgp1": (0.5, 0.0, 0.15),
    "dgp2": (0.8, 0.2),
}

DIVERGENCE_LIMIT = 1e12


def f_dgp1(y1, y2, y3):
    """Threshold autoregression: lag 2 enters the state but not the map."""
    del y2
    return (
        0.5
        - 0.5 * np.maximum(y1, 0.0)
        + 0.2 * np.minimum(y1, 0.0)
        + 0.15 * np.asarray(y3, dtype=np.float64)
    )


def f_dgp2(y1, y2):
    """Exponential autoregression with amplitude-dependent coefficients."""
    y1 = np.asarray(y1, dtype=np.float64)
    damp = np.exp(-y1 * y1)
    return 0.75 + (0.8 - 0.2 * damp) * y1 + (-0.2 + 0.3 * damp) * y2


def _f_dgp1_scalar(lags):
    y1 = lags[0]
    pos = y1 if y1 > 0.0 else 0.0
    neg = y1 if y1 < 0.0 else 0.0
    return 0.5 - 0.5 * pos + 0.2 * neg + 0.15 * lags[2]


def _f_dgp2_scalar(lags):
    y1 = lags[0]
    damp = math.exp(-y1 * y1)
    return 0.75 + (0.8 - 0.2 * damp) * y1 + (-0.2 + 0.3 * damp) * lags[1]


_SCALAR_MAPS = {"dgp1": _f_dgp1_scalar, "dgp2": _f_dgp2_scalar}
_REQUIRED_ORDER = {"dgp1": 3, "dgp2": 2}


@dataclass(frozen=True)
class DgpSpec:
    """Everything needed to reproduce one autoregressive process."""

    order: int
    function: str = "dgp1"
    error: str = "gaussian"
    df: float = 2.0
    burnin: int = 500
    alphas: tuple[float, ...] = ()
    seed: int = 0
    custom_map: object = None  # scalar callable lags -> float, picklable

    def __post_init__(self):
        if self.function not in DGP_NAMES:
            raise InvalidSpecError(f"unknown regression function {self.function!r}")
        if self.error not in ERROR_LAWS:
            raise InvalidSpecError(f"unknown error law {self.error!r}")
        if self.order < 1:
            raise InvalidSpecError(f"order must be >= 1, got {self.order}")
        if self.burnin < 0:
            raise InvalidSpecError(f"burnin must be >= 0, got {self.burnin}")
        required = _REQUIRED_ORDER.get(self.function)
        if required is not None and self.order != required:
            raise InvalidSpecError(
                f"{self.function} has order {required}, got {self.order}"
            )
        if self.function == "custom" and self.custom_map is None:
            raise InvalidSpecError("custom function requires custom_map")
        if self.error == "t" and not self.df > 0:
            raise InvalidSpecError(f"degrees of freedom must be > 0, got {self.df}")
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas and self.function in DEFAULT_ALPHAS:
            alphas = DEFAULT_ALPHAS[self.function]
        if any(a < 0 for a in alphas):
            raise InvalidSpecError("stationarity coefficients must be >= 0")
        object.__setattr__(self, "alphas", alphas)

    def scalar_map(self):
        if self.function == "custom":
            return self.custom_map
        return _SCALAR_MAPS[self.function]

    def regression_values(self, x: np.ndarray) -> np.ndarray:
        """Vectorized f over rows of lag vectors (most recent lag first)."""
        x = np.asarray(x, dtype=np.float64)
        if self.function == "dgp1":
            return f_dgp1(x[:, 0], x[:, 1], x[:, 2])
        if self.function == "dgp2":
            return f_dgp2(x[:, 0], x[:, 1])
        f = self.custom_map
        return np.array([f(tuple(row)) for row in x])


@dataclass(frozen=True)
class Trajectory:
    values: np.ndarray
    spec: DgpSpec

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def dgp1_spec(error="gaussian", seed=0, **kwargs) -> DgpSpec:
    return DgpSpec(order=3, function="dgp1", error=error, seed=seed, **kwargs)


def dgp2_spec(error="gaussian", seed=0, **kwargs) -> DgpSpec:
    return DgpSpec(order=2, function="dgp2", error=error, seed=seed, **kwargs)


def sample_innovation(law: str, rng: np.random.Generator, size=None, df: float = 2.0):
    """Draw from the innovation law.

    Student t is composed as normal / sqrt(chi2(df)/df) and the Cauchy
    as tan of a uniform angle, so every draw is pinned to the generator
    stream.
    """
    if law == "gaussian":
        return rng.standard_normal(size)
    if law == "t":
        if not df > 0:
            raise InvalidSpecError(f"degrees of freedom must be > 0, got {df}")
        z = rng.standard_normal(size)
        chi2 = rng.chisquare(df, size)
        return z / np.sqrt(chi2 / df)
    if law == "cauchy":
        u = rng.random(size)
        return np.tan(np.pi * (u - 0.5))
    if law == "none":
        return 0.0 if size is None else np.zeros(size)
    raise InvalidSpecError(f"unknown error law {law!r}")


def simulate(spec: DgpSpec, n: int, rng: np.random.Generator | None = None) -> Trajectory:
    """Generate n post-burn-in observations of the process.

    The recursion starts from an all-zero history, runs burnin + n steps
    and keeps the final n values.  Deterministic given the spec seed (or
    the supplied generator).
    """
    if n < spec.order + 1:
        raise InsufficientDataError(
            f"need n >= order + 1 = {spec.order + 1}, got {n}"
        )
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    total = spec.burnin + n
    eps = sample_innovation(spec.error, rng, size=total, df=spec.df)
    f = spec.scalar_map()
    lags = [0.0] * spec.order  # lags[j] = Y_{t-1-j}
    out = np.empty(total)
    for t in range(total):
        value = f(lags) + eps[t]
        if not math.isfinite(value) or abs(value) > DIVERGENCE_LIMIT:
            raise DivergenceError(
                f"simulation diverged at step {t + 1}", step=t + 1
            )
        out[t] = value
        lags = [value] + lags[:-1]
    return Trajectory(out[spec.burnin :], spec)


def embed(traj, order: int):
    """Supervised pairs (lag vector, next value), time order preserved.

    Row i of X holds (Y_{i-1}, ..., Y_{i-order}) for the target Y_i.
    """
    values = traj.values if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    n = len(values)
    if n <= order:
        raise InsufficientDataError(f"need more than {order} observations, got {n}")
    y = values[order:]
    x = np.empty((n - order, order))
    for j in range(order):
        x[:, j] = values[order - 1 - j : n - 1 - j]
    return x, y


@dataclass(frozen=True)
class StationarityCheck:
    stationary: bool
    margin: float


def check_stationarity(spec: DgpSpec) -> StationarityCheck:
    """Sufficient linear-envelope condition: the lag slopes sum below 1."""
    total = float(sum(spec.alphas))
    return StationarityCheck(stationary=total < 1.0, margin=1.0 - total)


def write_trajectory_csv(values, path) -> None:
    values = np.asarray(values, dtype=np.float64)
    write_csv(path, ["y"], ([v] for v in values))


def read_trajectory_csv(path) -> np.ndarray:
    header, rows = read_csv(path)
    if header != ["y"]:
        raise ValueError(f"{path}: expected single column 'y', got {header}")
    return np.array([float(r[0]) for r in rows])


def write_pairs_csv(x, y, path) -> None:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    header = [f"x{j + 1}" for j in range(x.shape[1])] + ["y"]
    write_csv(path, header, ([*row, target] for row, target in zip(x, y)))


def read_pairs_csv(path) -> tuple[np.ndarray, np.ndarray]:
    header, rows = read_csv(path)
    if len(header) < 2 or header[-1] != "y":
        raise ValueError(f"{path}: expected columns x1..xp,y, got {header}")
    data = np.array([[float(v) for v in row] for row in rows])
    return data[:, :-1], data[:, -1]
