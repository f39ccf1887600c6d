"""Closed-form theoretical quantities for the two excess-risk bounds.

Everything here is pure arithmetic on a bundle of model constants: the
effective sample size under exponential strong mixing, architecture
schedules, truncation levels, the log covering-number bound and the
right-hand sides of both excess-risk bounds.  An infinite moment order
is a supported sentinel: (1 - 1/r) collapses to 1 and any m**(1/r)
factor to 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

from .errors import (
    HypothesisWarning,
    InvalidSpecError,
    SmoothnessWarning,
    TooSmallNError,
    VacuousBoundWarning,
)

__all__ = [
    "TheoryInputs",
    "ArchitectureSchedule",
    "AssumptionReport",
    "effective_sample_size",
    "truncate",
    "truncation_level",
    "schedule_thm1",
    "schedule_thm2",
    "covering_number_log_bound",
    "psi_value",
    "bound_thm1",
    "bound_thm2",
    "deviation_constants",
    "smoothness_threshold",
    "weak_dependence_decay_exponent",
    "check_assumptions",
]

PSI_KINDS = ("theta", "eta", "kappa", "lambda")


def psi_value(kind: str, u: int, v: int) -> float:
    """Combinator of block sizes for the four weak-dependence variants."""
    if u < 1 or v < 1:
        raise InvalidSpecError("block sizes must be >= 1")
    if kind == "theta":
        return 2.0 * v
    if kind == "eta":
        return float(u + v)
    if kind == "kappa":
        return float(u * v)
    if kind == "lambda":
        return (u + v + u * v) / 2.0
    raise InvalidSpecError(f"unknown psi kind {kind!r}, expected one of {PSI_KINDS}")


@dataclass(frozen=True)
class TheoryInputs:
    """Model constants feeding the schedules and bounds.

    Defaults are chosen so both bound evaluators are finite, satisfy the
    weak-dependence smoothness hypothesis and decrease over the grid
    n = 1e3..1e8 used by the CLI.
    """

    smoothness: float = 2.5          # Holder exponent of the target
    input_dim: int = 1
    moment_order: float = math.inf   # r; output has finite r-th moment
    loss_lipschitz: float = 1.0
    mixing_scale: float = 1.0        # multiplier of the mixing coefficients
    mixing_rate: float = 8.0         # c in exp(-c * j**gamma)
    mixing_exponent: float = 3.0     # gamma
    dep_sum_scale: float = 1.0       # L1 of the weighted dependence sums
    dep_sum_growth: float = 1.0      # L2, geometric growth in the moment index
    dep_factorial_power: float = 0.0  # mu, factorial power in the sums
    moment_bound: float = 1.0        # M, bound on E|Y|^r
    log_exponent: float = 3.1        # nu > 3 in the mixing bound
    depth_scale: float = 1.0
    width_scale: float = 1.0
    sparsity_scale: float = 1.0
    magnitude_scale: float = 1.0
    psi_kind: str = "theta"
    holder_norm: float | None = None  # bound on the target norm, if known
    output_bound: float | None = None  # user-supplied F cap (mixing schedule)

    def __post_init__(self):
        # moment orders at or below 1 stay representable so the
        # assumption report can flag them; formulas reject them instead
        if not self.moment_order > 0:
            raise InvalidSpecError(f"moment order must be > 0, got {self.moment_order}")
        positives = {
            "smoothness": self.smoothness,
            "loss_lipschitz": self.loss_lipschitz,
            "mixing_scale": self.mixing_scale,
            "mixing_rate": self.mixing_rate,
            "mixing_exponent": self.mixing_exponent,
            "moment_bound": self.moment_bound,
            "depth_scale": self.depth_scale,
            "width_scale": self.width_scale,
            "sparsity_scale": self.sparsity_scale,
            "magnitude_scale": self.magnitude_scale,
        }
        for name, value in positives.items():
            if not value > 0:
                raise InvalidSpecError(f"{name} must be > 0, got {value}")
        if self.input_dim < 1:
            raise InvalidSpecError(f"input_dim must be >= 1, got {self.input_dim}")
        for name in ("dep_sum_scale", "dep_sum_growth", "dep_factorial_power"):
            if getattr(self, name) < 0:
                raise InvalidSpecError(f"{name} must be >= 0")
        psi_value(self.psi_kind, 1, 1)

    @property
    def rate_factor(self) -> float:
        """(1 - 1/r), equal to 1 at infinite moment order."""
        return 1.0 if math.isinf(self.moment_order) else 1.0 - 1.0 / self.moment_order

    def root(self, base: float) -> float:
        """base**(1/r), equal to 1 at infinite moment order."""
        return 1.0 if math.isinf(self.moment_order) else base ** (1.0 / self.moment_order)


@dataclass(frozen=True)
class ArchitectureSchedule:
    """Raw schedule values with conservative integer caps."""

    depth: float
    width: float
    sparsity: float
    magnitude: float
    output_bound: float | None = None

    @property
    def depth_int(self) -> int:
        return max(1, math.ceil(self.depth))

    @property
    def width_int(self) -> int:
        return max(1, math.ceil(self.width))

    @property
    def sparsity_int(self) -> int:
        return math.floor(self.sparsity)


def effective_sample_size(n: int, mixing_rate: float, mixing_exponent: float) -> int:
    """Reduced sample count floor(n / ceil((8n/c)**(1/(gamma+1))))."""
    if n < 1:
        raise TooSmallNError(f"n must be >= 1, got {n}")
    block = math.ceil((8.0 * n / mixing_rate) ** (1.0 / (mixing_exponent + 1.0)))
    value = n // max(block, 1)
    if value < 1:
        raise TooSmallNError(
            f"effective sample size vanished at n={n}; bound machinery undefined"
        )
    return int(value)


def truncate(y, level: float):
    """Clip at +-level, preserving scalars."""
    if not level > 0:
        raise InvalidSpecError(f"truncation level must be > 0, got {level}")
    if y > level:
        return level
    if y < -level:
        return -level
    return y


def truncation_level(inputs: TheoryInputs, n: int, theorem: int,
                     output_bound: float | None = None) -> float:
    """Tail-control level used when clipping the output variable.

    The mixing path takes the larger of the output cap and the r-th root
    of the effective sample size; the weak-dependence path grows like
    n**((mu+1)/(r(2 mu+3))).
    """
    _require_moment_order(inputs)
    if theorem == 1:
        cap = output_bound if output_bound is not None else inputs.output_bound
        if cap is None:
            raise InvalidSpecError("mixing truncation level needs an output bound")
        m = effective_sample_size(n, inputs.mixing_rate, inputs.mixing_exponent)
        return max(cap, inputs.root(m))
    if theorem == 2:
        mu = inputs.dep_factorial_power
        if math.isinf(inputs.moment_order):
            return 1.0
        exponent = (mu + 1.0) / (inputs.moment_order * (2.0 * mu + 3.0))
        return float(n) ** exponent
    raise InvalidSpecError(f"theorem must be 1 or 2, got {theorem}")


def _require_moment_order(inputs: TheoryInputs) -> None:
    if not inputs.moment_order > 1:
        raise InvalidSpecError(
            f"moment order must exceed 1 here, got {inputs.moment_order}"
        )


def _schedule_from_m(inputs: TheoryInputs, m: int) -> ArchitectureSchedule:
    """Shared schedule kernel in the effective sample count m."""
    _require_moment_order(inputs)
    if m < 3:
        raise TooSmallNError(f"schedules need an effective sample count >= 3, got {m}")
    rate = inputs.rate_factor
    s, d = inputs.smoothness, inputs.input_dim
    log_m = math.log(m)
    growth = m ** (rate * d / (s + d))
    depth = rate * s * inputs.depth_scale / (s + d) * log_m
    width = inputs.width_scale * growth
    sparsity = rate * s * inputs.sparsity_scale / (s + d) * growth * log_m
    magnitude = inputs.magnitude_scale * m ** (rate * 4.0 * s * (d / s + 1.0) / (s + d))
    return ArchitectureSchedule(depth=depth, width=width, sparsity=sparsity,
                                magnitude=magnitude)


def schedule_thm1(inputs: TheoryInputs, n: int) -> ArchitectureSchedule:
    """Architecture schedule under strong mixing, driven by the effective
    sample size.  The output cap has no formula here; it is whatever the
    caller supplied (it must exceed the target's norm)."""
    m = effective_sample_size(n, inputs.mixing_rate, inputs.mixing_exponent)
    sched = _schedule_from_m(inputs, m)
    return replace(sched, output_bound=inputs.output_bound)


def schedule_thm2(inputs: TheoryInputs, n: int) -> ArchitectureSchedule:
    """Architecture schedule under weak dependence, driven by n itself,
    with the explicit output-cap ceiling."""
    sched = _schedule_from_m(inputs, n)
    return replace(sched, output_bound=truncation_level(inputs, n, theorem=2))


def covering_number_log_bound(depth: float, width: float, magnitude: float,
                              sparsity: float, activation_lipschitz: float,
                              radius: float) -> float:
    """Natural log of the covering-number bound of the constraint class.

    Returns 2 L (S+1) log((1/eps) C L (N+1) max(B, 1)); the raw bound
    overflows routinely, so callers exponentiate only when safe.  A log
    argument at or below 1 makes the bound vacuous and is flagged with a
    warning rather than an error.
    """
    for name, value in (("depth", depth), ("width", width), ("magnitude", magnitude),
                        ("sparsity", sparsity),
                        ("activation_lipschitz", activation_lipschitz),
                        ("radius", radius)):
        if not value > 0:
            raise InvalidSpecError(f"{name} must be > 0, got {value}")
    inner = activation_lipschitz * depth * (width + 1.0) * max(magnitude, 1.0) / radius
    if inner <= 1.0:
        warnings.warn(
            f"covering bound is vacuous: log argument {inner} <= 1",
            VacuousBoundWarning,
            stacklevel=2,
        )
    return 2.0 * depth * (sparsity + 1.0) * math.log(inner)


def _mixing_constant(inputs: TheoryInputs) -> float:
    """Constant multiplying the middle term of the mixing bound."""
    k = inputs.loss_lipschitz
    return (64.0 / 3.0) * k * (1.0 + 4.0 * math.exp(-2.0) * inputs.mixing_scale) \
        + 6.0 * k * inputs.moment_bound


def _bound_thm1_from_m(inputs: TheoryInputs, m: int) -> float:
    """Mixing bound kernel in the effective sample count m."""
    _require_moment_order(inputs)
    if m < 3:
        raise TooSmallNError(f"effective sample size {m} < 3")
    rate = inputs.rate_factor
    s, d = inputs.smoothness, inputs.input_dim
    k = inputs.loss_lipschitz
    log_m = math.log(m)
    approx = (log_m**inputs.log_exponent + k) / m ** (s / (s + d) * rate)
    deviation = _mixing_constant(inputs) / m**rate
    discretization = 3.0 * k / m
    return approx + deviation + discretization


def bound_thm1(inputs: TheoryInputs, n: int) -> float:
    """Excess-risk bound under strong mixing, evaluated at sample size n."""
    if not inputs.log_exponent > 3:
        warnings.warn(
            f"log exponent {inputs.log_exponent} does not exceed 3; the bound "
            "lies outside its hypothesis",
            HypothesisWarning,
            stacklevel=2,
        )
    m = effective_sample_size(n, inputs.mixing_rate, inputs.mixing_exponent)
    return _bound_thm1_from_m(inputs, m)


def deviation_constants(inputs: TheoryInputs, trunc_level: float,
                        variant: str = "proof") -> tuple[float, float]:
    """Quadratic and linear deviation scales of the weak-dependence
    concentration step.

    The proof-body values carry factors 16 and 4; the pre-statement text
    carries 32 and 8 and is kept behind the 'statement' variant.
    """
    if variant == "proof":
        quad_factor, lin_factor = 16.0, 4.0
    elif variant == "statement":
        quad_factor, lin_factor = 32.0, 8.0
    else:
        raise InvalidSpecError(f"unknown variant {variant!r}")
    k = inputs.loss_lipschitz
    mu = inputs.dep_factorial_power
    psi11 = psi_value(inputs.psi_kind, 1, 1)
    quad = quad_factor * k * k * trunc_level * trunc_level * psi11 * inputs.dep_sum_scale
    lin = lin_factor * k * trunc_level * inputs.dep_sum_growth * max(
        2.0 ** (3.0 + mu) / psi11, 1.0
    )
    return quad, lin


def _weak_dependence_constant(inputs: TheoryInputs) -> float:
    """Leading constant of the weak-dependence bound, assembled from the
    proof-body deviation scales."""
    k = inputs.loss_lipschitz
    mu = inputs.dep_factorial_power
    psi11 = psi_value(inputs.psi_kind, 1, 1)
    numerator = 2.0 ** ((mu + 1.0) / (2.0 * mu + 3.0)) * 4.0 * k * (
        psi11 * inputs.dep_sum_scale
    ) ** ((mu + 2.0) / (2.0 * mu + 3.0))
    denominator = (
        inputs.dep_sum_growth * max(2.0 ** (3.0 + mu) / psi11, 1.0)
    ) ** (1.0 / (2.0 * mu + 3.0))
    c0 = numerator / denominator
    return 2.0 + c0 + 6.0 * k * inputs.moment_bound


def smoothness_threshold(inputs: TheoryInputs) -> float:
    """Smoothness the weak-dependence bound requires the target to exceed."""
    d = inputs.input_dim
    mu = inputs.dep_factorial_power
    r = inputs.moment_order
    if math.isinf(r):
        first = d * ((mu + 2.0) - 1.0)
    else:
        denom = r * (2.0 * mu + 3.0) - (mu + 1.0)
        if denom <= 0:
            return math.inf
        first = d * ((r - 1.0) * (2.0 * mu + 3.0) * (mu + 2.0) / denom - 1.0)
    second = d * (inputs.rate_factor * (2.0 * mu + 3.0) - 1.0)
    return max(first, second)


def weak_dependence_decay_exponent(inputs: TheoryInputs) -> float:
    """Decay exponent (1 - 1/r)(mu + 1)/(2 mu + 3) of the leading term."""
    mu = inputs.dep_factorial_power
    return inputs.rate_factor * (mu + 1.0) / (2.0 * mu + 3.0)


def bound_thm2(inputs: TheoryInputs, n: int) -> float:
    """Excess-risk bound under weak dependence, evaluated at sample size n.

    Outside the smoothness hypothesis the value is still computed but a
    warning is attached.
    """
    _require_moment_order(inputs)
    if n < 3:
        raise TooSmallNError(f"need n >= 3, got {n}")
    threshold = smoothness_threshold(inputs)
    if not inputs.smoothness > threshold:
        warnings.warn(
            f"smoothness {inputs.smoothness} does not exceed the required "
            f"threshold {threshold}; the bound lies outside its hypothesis",
            SmoothnessWarning,
            stacklevel=2,
        )
    rate = inputs.rate_factor
    s, d = inputs.smoothness, inputs.input_dim
    k = inputs.loss_lipschitz
    deviation = _weak_dependence_constant(inputs) / n ** weak_dependence_decay_exponent(inputs)
    discretization = 3.0 * k / n
    approx = 2.0 * k / n ** (s / (s + d) * rate)
    return deviation + discretization + approx


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    ok: bool
    detail: str


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[AssumptionCheck, ...]

    @property
    def all_ok(self) -> bool:
        return all(c.ok for c in self.checks)


def check_assumptions(inputs: TheoryInputs) -> AssumptionReport:
    """Arithmetic feasibility report for the given constants.

    Only closed-form conditions are examined; no data-driven dependence
    estimation is attempted.
    """
    checks = []
    checks.append(AssumptionCheck(
        "loss_lipschitz",
        math.isfinite(inputs.loss_lipschitz) and inputs.loss_lipschitz > 0,
        f"Lipschitz constant {inputs.loss_lipschitz}",
    ))
    checks.append(AssumptionCheck(
        "moment_order",
        inputs.moment_order > 1,
        f"moment order {inputs.moment_order} (needs > 1)",
    ))
    checks.append(AssumptionCheck(
        "log_exponent",
        inputs.log_exponent > 3,
        f"log exponent {inputs.log_exponent} (mixing bound needs > 3)",
    ))
    threshold = smoothness_threshold(inputs)
    checks.append(AssumptionCheck(
        "smoothness",
        inputs.smoothness > threshold,
        f"smoothness {inputs.smoothness} vs weak-dependence threshold {threshold:.6g}",
    ))
    positive = all((
        inputs.mixing_scale > 0, inputs.mixing_rate > 0, inputs.mixing_exponent > 0,
        inputs.moment_bound > 0,
    ))
    checks.append(AssumptionCheck(
        "positivity",
        positive,
        "mixing and moment constants strictly positive",
    ))
    return AssumptionReport(tuple(checks))
