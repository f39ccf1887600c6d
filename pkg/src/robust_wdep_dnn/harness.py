"""Monte Carlo replication engine.

For every (sample size, replication) cell one training trajectory, one
test trajectory and one long evaluation trajectory are simulated; each
configured loss is then fitted on the shared training data so the loss
arms are paired.  Per trained network the engine records the empirical
excess risk under all three loss metrics on the evaluation trajectory
and the one-step prediction errors on the test trajectory.

Replications are embarrassingly parallel; records are sorted before
writing so the output does not depend on the worker count.  The
``seconds`` column of records.csv is intentionally left empty: wall
time is not reproducible, and records.csv is required to be, so
measured timings go to a separate sidecar file.
"""

from __future__ import annotations

import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import mlp
from .csvio import VERSION_LINE, format_value
from .dgp import DgpSpec, embed, simulate
from .errors import DivergenceError, InsufficientDataError, InvalidSpecError
from .losses import HUBER_DEFAULT_DELTA, LossSpec, loss, loss_spec_from_string
from .mlp import NetworkArchitecture, NetworkParams
from .trainer import TrainConfig, fit

RECORDS_HEADER = [
    "dgp", "error", "loss", "n", "rep",
    "excess_l1", "excess_huber", "excess_l2",
    "mape", "rmspe", "epochs", "seconds", "diverged",
]

SUMMARY_HEADER = [
    "dgp", "error", "loss", "n", "metric", "count", "excluded",
    "min", "q1", "median", "q3", "max", "mean", "std",
]

METRIC_FIELDS = ("excess_l1", "excess_huber", "excess_l2", "mape", "rmspe")

_DGP_CODES = {"custom": 0, "dgp1": 1, "dgp2": 2}
_LAW_CODES = {"none": 0, "gaussian": 1, "t": 2, "cauchy": 3}


@dataclass(frozen=True)
class ExperimentConfig:
    dgp: DgpSpec
    losses: tuple[LossSpec, ...]
    sample_sizes: tuple[int, ...] = (250, 500, 1000)
    replications: int = 100
    eval_length: int = 10_000
    hidden: tuple[int, ...] = (100, 100)
    train: TrainConfig = TrainConfig()
    master_seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise InvalidSpecError("replications must be >= 1")
        if not self.losses:
            raise InvalidSpecError("at least one loss is required")
        if self.eval_length <= self.dgp.order:
            raise InvalidSpecError("eval trajectory must exceed the process order")
        for n in self.sample_sizes:
            if n <= self.dgp.order + self.train.batch_size:
                raise InvalidSpecError(
                    f"sample size {n} too small for order {self.dgp.order} "
                    f"and batch size {self.train.batch_size}"
                )
        object.__setattr__(self, "losses", tuple(self.losses))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def arch(self) -> NetworkArchitecture:
        return NetworkArchitecture.from_hidden(self.dgp.order, self.hidden)

    @property
    def error_tag(self) -> str:
        if self.dgp.error == "t":
            return f"t{self.dgp.df:g}"
        return self.dgp.error

    def huber_delta(self) -> float:
        for spec in self.losses:
            if spec.family == "huber":
                return spec.delta
        return HUBER_DEFAULT_DELTA

    @staticmethod
    def from_dict(payload: dict) -> "ExperimentConfig":
        dgp_payload = dict(payload.get("dgp", {}))
        name = dgp_payload.pop("name", dgp_payload.pop("function", "dgp1"))
        error_token = dgp_payload.pop("error", "gaussian")
        law, df = parse_error_token(error_token, dgp_payload.pop("df", None))
        order = dgp_payload.pop("order", None)
        if order is None:
            order = {"dgp1": 3, "dgp2": 2}.get(name)
            if order is None:
                raise InvalidSpecError("custom dgp config requires an order")
        spec = DgpSpec(order=int(order), function=name, error=law, df=df,
                       **dgp_payload)

        losses = []
        for entry in payload.get("losses", ["l1", "huber", "l2"]):
            if isinstance(entry, str):
                losses.append(loss_spec_from_string(entry))
            else:
                losses.append(LossSpec(entry["family"],
                                       delta=entry.get("delta", HUBER_DEFAULT_DELTA)))

        train_payload = dict(payload.get("train", {}))
        train = TrainConfig(**train_payload)

        return ExperimentConfig(
            dgp=spec,
            losses=tuple(losses),
            sample_sizes=tuple(payload.get("sample_sizes", (250, 500, 1000))),
            replications=int(payload.get("replications", 100)),
            eval_length=int(payload.get("eval_length", 10_000)),
            hidden=tuple(payload.get("hidden", (100, 100))),
            train=train,
            master_seed=int(payload.get("seed", 0)),
        )

    @staticmethod
    def from_file(path) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            text = fh.read()
        if str(path).endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            payload = tomllib.loads(text.decode("utf-8"))
        else:
            payload = json.loads(text.decode("utf-8"))
        return ExperimentConfig.from_dict(payload)


def parse_error_token(token: str, df=None) -> tuple[str, float]:
    """Map CLI/config tokens like 'gauss', 't2', 'cauchy' to (law, df)."""
    token = str(token).strip().lower()
    if token in ("gauss", "gaussian", "normal"):
        return "gaussian", 2.0
    if token in ("cauchy",):
        return "cauchy", 2.0
    if token in ("none", "zero"):
        return "none", 2.0
    if token == "t":
        return "t", float(df) if df is not None else 2.0
    if token.startswith("t"):
        return "t", float(token[1:].strip("()"))
    raise InvalidSpecError(f"unknown error law token {token!r}")


@dataclass(frozen=True)
class ReplicationRecord:
    dgp: str
    error: str
    loss: str
    n: int
    rep: int
    excess_l1: float
    excess_huber: float
    excess_l2: float
    mape: float
    rmspe: float
    epochs: int
    seconds: float
    diverged: bool

    def sort_key(self):
        return (self.dgp, self.error, self.loss, self.n, self.rep)


def _as_predictor(hhat):
    """Accept a NetworkParams or any callable on row-stacked inputs."""
    if isinstance(hhat, NetworkParams):
        return lambda x: mlp.forward(hhat, x)
    if callable(hhat):
        return hhat
    raise TypeError(f"cannot evaluate predictor of type {type(hhat)!r}")


def mape(hhat, x, y) -> float:
    """Mean absolute one-step prediction error over the test pairs."""
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise InsufficientDataError("mape needs at least one test pair")
    residual = y - _as_predictor(hhat)(np.asarray(x, dtype=np.float64))
    return float(np.mean(np.abs(residual)))


def rmspe(hhat, x, y) -> float:
    """Root mean squared one-step prediction error over the test pairs."""
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise InsufficientDataError("rmspe needs at least one test pair")
    residual = y - _as_predictor(hhat)(np.asarray(x, dtype=np.float64))
    return float(math.sqrt(np.mean(residual * residual)))


def excess_risk_empirical(hhat, spec: DgpSpec, loss_spec: LossSpec, m: int,
                          rng: np.random.Generator) -> float:
    """Empirical excess risk on a fresh trajectory of length m.

    The reference predictor is the true regression function, which is
    the target under all three losses because the innovations are
    symmetric around zero.
    """
    traj = simulate(spec, m, rng=rng)
    x, y = embed(traj, spec.order)
    preds = _as_predictor(hhat)(x)
    targets = spec.regression_values(x)
    return float(np.mean(loss(loss_spec, preds, y) - loss(loss_spec, targets, y)))


def _excess_risks_shared(preds, targets, y, metric_specs) -> dict[str, float]:
    out = {}
    for spec in metric_specs:
        out[spec.family] = float(np.mean(loss(spec, preds, y) - loss(spec, targets, y)))
    return out


def _cell_seeds(cfg: ExperimentConfig, n: int, rep: int):
    master = int(cfg.master_seed) & 0xFFFFFFFFFFFFFFFF
    base = [master, _DGP_CODES[cfg.dgp.function], _LAW_CODES[cfg.dgp.error], n, rep]
    streams = {}
    for idx, name in enumerate(("train", "test", "eval", "fit"), start=1):
        streams[name] = np.random.SeedSequence(base + [idx])
    return streams


def _run_cell(args) -> list[ReplicationRecord]:
    """Fit every configured loss on one shared (n, rep) data cell.

    BLAS threading is pinned so the records are bitwise identical no
    matter how many workers share the machine.
    """
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=1, user_api="blas"):
        return _run_cell_pinned(args)


def _run_cell_pinned(args) -> list[ReplicationRecord]:
    cfg, n, rep = args
    seeds = _cell_seeds(cfg, n, rep)
    arch = cfg.arch
    order = cfg.dgp.order
    metric_specs = (
        LossSpec("l1"),
        LossSpec("huber", delta=cfg.huber_delta()),
        LossSpec("l2"),
    )
    fit_seed = int(seeds["fit"].generate_state(1)[0])

    records = []
    try:
        train_traj = simulate(cfg.dgp, n, rng=np.random.default_rng(seeds["train"]))
        test_traj = simulate(cfg.dgp, n, rng=np.random.default_rng(seeds["test"]))
        eval_traj = simulate(cfg.dgp, cfg.eval_length,
                             rng=np.random.default_rng(seeds["eval"]))
    except DivergenceError:
        return [
            _diverged_record(cfg, loss_spec, n, rep) for loss_spec in cfg.losses
        ]

    x_train, y_train = embed(train_traj, order)
    x_test, y_test = embed(test_traj, order)
    x_eval, y_eval = embed(eval_traj, order)
    eval_targets = cfg.dgp.regression_values(x_eval)

    for loss_spec in cfg.losses:
        started = time.perf_counter()
        train_cfg = replace(cfg.train, seed=fit_seed)
        try:
            report = fit(x_train, y_train, arch, loss_spec, train_cfg)
            preds_eval = mlp.forward(report.params, x_eval)
            excess = _excess_risks_shared(preds_eval, eval_targets, y_eval, metric_specs)
            records.append(ReplicationRecord(
                dgp=cfg.dgp.function,
                error=cfg.error_tag,
                loss=loss_spec.family,
                n=n,
                rep=rep,
                excess_l1=excess["l1"],
                excess_huber=excess["huber"],
                excess_l2=excess["l2"],
                mape=mape(report.params, x_test, y_test),
                rmspe=rmspe(report.params, x_test, y_test),
                epochs=report.epochs_run,
                seconds=time.perf_counter() - started,
                diverged=False,
            ))
        except DivergenceError:
            records.append(_diverged_record(cfg, loss_spec, n, rep,
                                            seconds=time.perf_counter() - started))
    return records


def _diverged_record(cfg, loss_spec, n, rep, seconds=0.0) -> ReplicationRecord:
    nan = float("nan")
    return ReplicationRecord(
        dgp=cfg.dgp.function, error=cfg.error_tag, loss=loss_spec.family,
        n=n, rep=rep, excess_l1=nan, excess_huber=nan, excess_l2=nan,
        mape=nan, rmspe=nan, epochs=0, seconds=seconds, diverged=True,
    )


def run_experiment(cfg: ExperimentConfig, threads: int | None = None,
                   progress: bool = False) -> list[ReplicationRecord]:
    """Run the full sweep and return records sorted by (dgp, error, loss, n, rep)."""
    cells = [(cfg, n, rep)
             for n in cfg.sample_sizes
             for rep in range(cfg.replications)]
    records: list[ReplicationRecord] = []
    if threads is not None and threads <= 1:
        batches = map(_run_cell, cells)
        for done, batch in enumerate(batches, start=1):
            records.extend(batch)
            if progress:
                print(f"cell {done}/{len(cells)} done", file=sys.stderr)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for done, batch in enumerate(pool.map(_run_cell, cells), start=1):
                records.extend(batch)
                if progress:
                    print(f"cell {done}/{len(cells)} done", file=sys.stderr)
    records.sort(key=ReplicationRecord.sort_key)
    return records


def write_records_csv(records, path) -> None:
    """Deterministic records table; measured seconds are withheld."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(VERSION_LINE + "\n")
        fh.write(",".join(RECORDS_HEADER) + "\n")
        for rec in records:
            row = [
                rec.dgp, rec.error, rec.loss, rec.n, rec.rep,
                rec.excess_l1, rec.excess_huber, rec.excess_l2,
                rec.mape, rec.rmspe, rec.epochs, "", int(rec.diverged),
            ]
            fh.write(",".join("" if v == "" else format_value(v) for v in row) + "\n")


def write_timings_csv(records, path) -> None:
    """Measured wall time per record; not reproducible run to run."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(VERSION_LINE + "\n")
        fh.write("dgp,error,loss,n,rep,seconds\n")
        for rec in records:
            fh.write(",".join(format_value(v) for v in (
                rec.dgp, rec.error, rec.loss, rec.n, rec.rep, rec.seconds,
            )) + "\n")


@dataclass(frozen=True)
class SummaryRow:
    dgp: str
    error: str
    loss: str
    n: int
    metric: str
    count: int
    excluded: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    mean: float
    std: float


def summarize(records) -> list[SummaryRow]:
    """Boxplot statistics per (dgp, error, loss, n, metric) group.

    Quantiles use linear interpolation.  Diverged records are excluded
    and counted.
    """
    if not records:
        raise InsufficientDataError("summarize needs at least one record")
    groups: dict[tuple, list[ReplicationRecord]] = {}
    for rec in records:
        groups.setdefault((rec.dgp, rec.error, rec.loss, rec.n), []).append(rec)
    rows = []
    for (dgp_tag, error_tag, loss_tag, n), members in sorted(groups.items()):
        kept = [rec for rec in members if not rec.diverged]
        excluded = len(members) - len(kept)
        for metric in METRIC_FIELDS:
            values = np.array([getattr(rec, metric) for rec in kept])
            if len(values) == 0:
                stats = [math.nan] * 7
            else:
                q1, med, q3 = np.quantile(values, [0.25, 0.5, 0.75])
                std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
                stats = [float(values.min()), float(q1), float(med), float(q3),
                         float(values.max()), float(values.mean()), std]
            rows.append(SummaryRow(
                dgp=dgp_tag, error=error_tag, loss=loss_tag, n=n, metric=metric,
                count=len(values), excluded=excluded,
                minimum=stats[0], q1=stats[1], median=stats[2], q3=stats[3],
                maximum=stats[4], mean=stats[5], std=stats[6],
            ))
    return rows


def write_summary_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(VERSION_LINE + "\n")
        fh.write(",".join(SUMMARY_HEADER) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in (
                row.dgp, row.error, row.loss, row.n, row.metric,
                row.count, row.excluded, row.minimum, row.q1, row.median,
                row.q3, row.maximum, row.mean, row.std,
            )) + "\n")


def boxplot_payload(records) -> dict:
    """Grouped raw metric arrays for external plotting."""
    groups = []
    keyed: dict[tuple, list[ReplicationRecord]] = {}
    for rec in records:
        keyed.setdefault((rec.dgp, rec.error, rec.loss, rec.n), []).append(rec)
    for (dgp_tag, error_tag, loss_tag, n), members in sorted(keyed.items()):
        kept = [rec for rec in members if not rec.diverged]
        entry = {
            "dgp": dgp_tag, "error": error_tag, "loss": loss_tag, "n": n,
            "excluded": len(members) - len(kept),
        }
        for metric in METRIC_FIELDS:
            entry[metric] = [getattr(rec, metric) for rec in kept]
        groups.append(entry)
    return {"version": VERSION_LINE.lstrip("# "), "groups": groups}


def write_boxplot_json(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(boxplot_payload(records), fh, indent=2, sort_keys=True)
        fh.write("\n")
