"""Frozen-encoder evaluation, Pareto fronts, hypervolume, attainment surfaces.

The evaluation protocol: freeze the encoder, embed the train and test
splits, train fresh target and adversary heads on the training embeddings,
and report held-out metrics. Datasets with a continuous target report MSE
on both axes; binary targets report accuracies.

Hypervolume is computed in a normalized (maximize, maximize) space where
both axes increase with desirability:

    accuracy kind:  (target_acc, 1 - |adv_acc - chance| / (1 - chance))
    mse kind:       (1 / (1 + target_mse), adv_mse / (adv_mse + var_S))

with reference point (0, 0). ``chance`` is the majority rate of the
sensitive attribute on the test split and var_S its test variance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import encoder as enc
from .datasets import Dataset

__all__ = [
    "TradeoffPoint",
    "HeadSpec",
    "EvalConfig",
    "FrontReport",
    "evaluate_frozen",
    "train_head",
    "head_predict",
    "pareto_front",
    "dominates",
    "hypervolume",
    "normalized_objectives",
    "front_report",
    "attainment_surface",
    "points_to_csv",
    "points_from_csv",
]

CSV_HEADER = "lambda,seed,target_metric,adversary_metric,kind"


@dataclass(frozen=True)
class TradeoffPoint:
    """One (lambda, seed) evaluation cell: utility vs leakage metrics."""

    lam: float
    seed: int
    target_metric: float
    adversary_metric: float
    metric_kind: str  # "accuracy" | "mse"
    error: str | None = None


@dataclass(frozen=True)
class HeadSpec:
    """Architecture and loss of an evaluation head.

    Heads default to the leaky activation: their inputs feed forward into
    small nonnegative hidden vectors, where a plain relu unit can be dead at
    initialization for an unlucky seed and never recover.
    """

    hidden: tuple[int, ...] = ()
    loss: str = "mse"  # "mse" | "bce"
    activation: str = "leaky_relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.loss not in ("mse", "bce"):
            raise ValueError(f"unknown head loss {self.loss!r}")


@dataclass(frozen=True)
class EvalConfig:
    """Frozen-encoder evaluation protocol parameters.

    ``repeats`` > 1 retrains each head that many times from different seeds
    and reports the median test metric, suppressing head-initialization
    measurement noise (useful when fronts of competing methods are close).
    """

    target_head: HeadSpec = HeadSpec()
    adversary_head: HeadSpec = HeadSpec()
    epochs: int = 200
    lr: float = 3e-4
    batch_size: int = 200
    weight_decay: float = 0.0
    repeats: int = 1


@dataclass
class FrontReport:
    points: list[TradeoffPoint]
    hypervolume: float
    reference: tuple[float, float]
    normalization: dict

    def to_dict(self) -> dict:
        return {
            "points": [asdict(p) for p in self.points],
            "hypervolume": self.hypervolume,
            "reference": list(self.reference),
            "normalization": self.normalization,
        }


def _embed(encoder, x: np.ndarray) -> np.ndarray:
    if callable(encoder):
        return np.atleast_2d(np.asarray(encoder(x), dtype=np.float64))
    z, _ = enc.forward(encoder, x)
    return z


def _loss_grad(out: np.ndarray, labels: np.ndarray, loss: str) -> tuple[float, np.ndarray]:
    b = out.shape[1]
    if loss == "mse":
        resid = out - labels
        return float(np.sum(resid**2)) / b, (2.0 / b) * resid
    p = 1.0 / (1.0 + np.exp(-out))
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    val = -float(np.sum(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))) / b
    return val, (p - labels) / b


def train_head(
    z: np.ndarray,
    labels: np.ndarray,
    spec: HeadSpec,
    seed: int,
    epochs: int = 200,
    lr: float = 3e-4,
    batch_size: int = 200,
    weight_decay: float = 0.0,
) -> enc.EncoderParams:
    """Train a fresh MLP head on frozen embeddings with minibatch Adam."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    labels = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    n = z.shape[1]
    b = min(batch_size, n)
    mlp = enc.MlpSpec(input_dim=z.shape[0], hidden=spec.hidden, output_dim=labels.shape[0],
                      activation=spec.activation)
    params = enc.init(mlp, seed)
    for epoch in range(epochs):
        order = np.random.default_rng([seed, epoch]).permutation(n)
        for start in range(0, n - b + 1, b):
            idx = order[start : start + b]
            out, cache = enc.forward(params, z[:, idx])
            _, d_out = _loss_grad(out, labels[:, idx], spec.loss)
            dw, db, _ = enc.backward(params, cache, d_out)
            enc.adam_step(params, (dw, db), lr=lr, weight_decay=weight_decay)
    return params


def head_predict(params: enc.EncoderParams, z: np.ndarray) -> np.ndarray:
    out, _ = enc.forward(params, z)
    return out


def _metric(out: np.ndarray, labels: np.ndarray, kind: str, loss: str) -> float:
    if kind == "mse":
        return float(np.mean(np.sum((out - labels) ** 2, axis=0)))
    if labels.shape[0] == 1:
        threshold = 0.0 if loss == "bce" else 0.5
        pred = (out[0] >= threshold).astype(np.float64)
        return float(np.mean(pred == labels[0]))
    return float(np.mean(out.argmax(axis=0) == labels.argmax(axis=0)))


def _standardize_embeddings(z_tr: np.ndarray, z_te: np.ndarray):
    """Z-score both splits with training-split statistics.

    One-sided embeddings (e.g. an always-positive coordinate) would
    otherwise leave half of a fresh relu head dead at initialization.
    """
    mu = z_tr.mean(axis=1, keepdims=True)
    sd = z_tr.std(axis=1, keepdims=True)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return (z_tr - mu) / sd, (z_te - mu) / sd


def evaluate_frozen(
    encoder,
    dataset: Dataset,
    config: EvalConfig,
    seed: int,
    lam: float = float("nan"),
) -> TradeoffPoint:
    """Embed the dataset with a frozen encoder and score fresh heads on test.

    ``encoder`` is either trained EncoderParams or any callable X -> Z. For
    EncoderParams, a parameter checksum before and after head training
    guarantees the encoder really was frozen. Embeddings are standardized
    with training-split statistics before the heads are fit.
    """
    checksum = enc.param_checksum(encoder) if isinstance(encoder, enc.EncoderParams) else None
    x_tr, y_tr, s_tr = dataset.train_arrays()
    x_te, y_te, s_te = dataset.test_arrays()
    z_tr, z_te = _standardize_embeddings(_embed(encoder, x_tr), _embed(encoder, x_te))
    kind = "mse" if dataset.target_kind == "continuous" else "accuracy"

    common = dict(epochs=config.epochs, lr=config.lr, batch_size=config.batch_size,
                  weight_decay=config.weight_decay)
    t_metrics, a_metrics = [], []
    for rep in range(max(config.repeats, 1)):
        target = train_head(z_tr, y_tr, config.target_head, seed=_mix(seed, 1 + 10 * rep), **common)
        adversary = train_head(z_tr, s_tr, config.adversary_head, seed=_mix(seed, 2 + 10 * rep), **common)
        t_metrics.append(_metric(head_predict(target, z_te), y_te, kind, config.target_head.loss))
        a_metrics.append(_metric(head_predict(adversary, z_te), s_te, kind, config.adversary_head.loss))
    if checksum is not None and enc.param_checksum(encoder) != checksum:
        raise RuntimeError("encoder parameters changed during frozen evaluation")
    return TradeoffPoint(
        lam=lam, seed=seed,
        target_metric=float(np.median(t_metrics)),
        adversary_metric=float(np.median(a_metrics)),
        metric_kind=kind,
    )


def _mix(seed: int, salt: int) -> int:
    return int(np.random.default_rng([seed, salt]).integers(0, 2**31 - 1))


def _better(a: float, b: float, sense: str) -> bool:
    return a > b if sense == "max" else a < b


def dominates(b_vals, a_vals, orientation) -> bool:
    """Strict domination: b beats a on every axis simultaneously."""
    return all(_better(bv, av, o) for bv, av, o in zip(b_vals, a_vals, orientation))


def pareto_front(points: list[TradeoffPoint], orientation=("max", "min")) -> list[TradeoffPoint]:
    """Points not strictly dominated by any other, ordered by the first axis."""
    vals = [(p.target_metric, p.adversary_metric) for p in points]
    keep = [
        p
        for i, p in enumerate(points)
        if not any(dominates(vals[j], vals[i], orientation) for j in range(len(points)) if j != i)
    ]
    return sorted(keep, key=lambda p: p.target_metric)


def hypervolume(values: np.ndarray, reference=(0.0, 0.0)) -> float:
    """Area dominated by 2-D points (both axes maximized) above a reference.

    Computed by a sort-and-sweep over the staircase of nondominated points.
    Every point must weakly dominate the reference.
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1, 2)
    if values.size == 0:
        return 0.0
    rx, ry = float(reference[0]), float(reference[1])
    if np.any(values[:, 0] < rx) or np.any(values[:, 1] < ry):
        raise ValueError("a point lies below the reference point")
    order = np.argsort(-values[:, 0], kind="stable")
    hv = 0.0
    top = ry
    for i in order:
        x, y = values[i]
        if y > top:
            hv += (x - rx) * (y - top)
            top = y
    return hv


def normalized_objectives(
    points: list[TradeoffPoint],
    *,
    chance: float | None = None,
    sensitive_variance: float | None = None,
) -> np.ndarray:
    """Map raw metric pairs to the unit square, both axes increasing in
    desirability (utility, privacy)."""
    kinds = {p.metric_kind for p in points}
    if len(kinds) > 1:
        raise ValueError(f"mixed metric kinds {kinds}")
    out = np.empty((len(points), 2))
    for i, p in enumerate(points):
        if p.metric_kind == "accuracy":
            if chance is None:
                raise ValueError("accuracy-kind points need the chance rate")
            out[i, 0] = p.target_metric
            out[i, 1] = 1.0 - abs(p.adversary_metric - chance) / (1.0 - chance)
        else:
            if sensitive_variance is None:
                raise ValueError("mse-kind points need the sensitive variance")
            out[i, 0] = 1.0 / (1.0 + p.target_metric)
            out[i, 1] = p.adversary_metric / (p.adversary_metric + sensitive_variance)
    return np.clip(out, 0.0, None)


def front_report(
    points: list[TradeoffPoint],
    *,
    chance: float | None = None,
    sensitive_variance: float | None = None,
) -> FrontReport:
    """Nondominated subset and hypervolume in the normalized objective space."""
    ok = [p for p in points if p.error is None]
    norm = {"chance": chance, "sensitive_variance": sensitive_variance,
            "failed_points": len(points) - len(ok)}
    if not ok:
        return FrontReport(points=[], hypervolume=0.0, reference=(0.0, 0.0), normalization=norm)
    values = normalized_objectives(ok, chance=chance, sensitive_variance=sensitive_variance)
    keep = [
        i
        for i in range(len(ok))
        if not any(dominates(values[j], values[i], ("max", "max")) for j in range(len(ok)) if j != i)
    ]
    front = [ok[i] for i in sorted(keep, key=lambda i: values[i, 0])]
    hv = hypervolume(values[keep], reference=(0.0, 0.0))
    return FrontReport(points=front, hypervolume=hv, reference=(0.0, 0.0), normalization=norm)


def chance_rate(dataset: Dataset) -> float:
    """Majority rate of the sensitive attribute on the test split."""
    _, _, s_te = dataset.test_arrays()
    rate = float(s_te[0].mean())
    return max(rate, 1.0 - rate)


def sensitive_variance(dataset: Dataset) -> float:
    """Per-sample variance of the sensitive rows on the test split."""
    _, _, s_te = dataset.test_arrays()
    return float(np.sum(s_te.var(axis=1)))


def attainment_surface(
    runs: list[list[TradeoffPoint]],
    quantile: float,
    orientation=("max", "min"),
) -> np.ndarray:
    """Empirical attainment surface across repeated runs.

    For each abscissa on a grid over the first axis (the union of observed
    first-axis values), take each run's best attained second-axis value among
    its points at least as good as the abscissa, then the requested quantile
    across runs. Runs that never attain an abscissa contribute the worst
    possible value (signed infinity).
    """
    if not runs:
        raise ValueError("need at least one run")
    if not 0.0 < quantile < 1.0:
        raise ValueError(f"quantile must lie in (0, 1), got {quantile}")
    first_sense, second_sense = orientation
    xs = sorted({p.target_metric for run in runs for p in run if p.error is None})
    worst = np.inf if second_sense == "min" else -np.inf
    out = np.empty((len(xs), 2))
    for k, x in enumerate(xs):
        per_run = []
        for run in runs:
            cands = [
                p.adversary_metric
                for p in run
                if p.error is None
                and (p.target_metric >= x if first_sense == "max" else p.target_metric <= x)
            ]
            if not cands:
                per_run.append(worst)
            elif second_sense == "min":
                per_run.append(min(cands))
            else:
                per_run.append(max(cands))
        out[k] = (x, float(np.quantile(per_run, quantile)))
    return out


def points_to_csv(points: list[TradeoffPoint], path) -> None:
    """Write points as CSV: '.' decimals, newline terminators, header row.

    Failed cells are omitted from the CSV (kind would be meaningless); they
    are accounted for in the front report's normalization block.
    """
    lines = [CSV_HEADER]
    for p in points:
        if p.error is not None:
            continue
        lines.append(f"{p.lam!r},{p.seed},{p.target_metric!r},{p.adversary_metric!r},{p.metric_kind}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def points_from_csv(path) -> list[TradeoffPoint]:
    points = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        for line in f:
            line = line.strip()
            if not line:
                continue
            lam, seed, t, a, kind = line.split(",")
            points.append(
                TradeoffPoint(
                    lam=float(lam),
                    seed=int(seed),
                    target_metric=float(t),
                    adversary_metric=float(a),
                    metric_kind=kind,
                )
            )
    return points


def save_front_report(report: FrontReport, path, extra: dict | None = None) -> None:
    blob = report.to_dict()
    if extra:
        blob.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(blob, f, sort_keys=True, indent=1)
