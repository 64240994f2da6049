"""Trainers: closed-form-head encoder training plus the two descent-ascent
baselines, and lambda-sweep orchestration over seeds.

* ``optnet``: per batch, the encoder embeds the batch, the exact ridge
  objective and its analytic gradient are evaluated through the closed-form
  heads, and the gradient flows back through the encoder. Plain Adam; no
  inner players to train.
* ``sgda``: simultaneous descent-ascent with MLP heads. The encoder
  minimizes (1 - lambda) L_y - lambda L_s while the target and adversary
  heads each minimize their own MSE; all three update simultaneously.
* ``extra_sgda``: the same game with an extrapolation step. Gradients are
  computed at the current parameters, a provisional Adam step produces an
  extrapolated point, gradients are recomputed there, and the committed
  update applies the extrapolated gradients from the original parameters.
  Moment accumulators advance only on the committed step.

Baseline head losses are mean squared error on the same label encoding the
ridge heads see, so recorded objectives are directly comparable. Shuffling
is deterministic per (seed, epoch); incomplete trailing batches are dropped.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import encoder as enc
from . import ridge
from .datasets import Dataset
from .encoder import DivergenceError, MlpSpec
from .evaluation import EvalConfig, TradeoffPoint, evaluate_frozen
from .kernels import KernelSpec

__all__ = [
    "TrainConfig",
    "TrainHistory",
    "EpochRecord",
    "train",
    "train_optnet",
    "train_sgda",
    "train_extra_sgda",
    "extragradient_step",
    "sweep",
    "default_lambda_grid",
]

METHODS = ("optnet", "sgda", "extra_sgda")


@dataclass(frozen=True)
class TrainConfig:
    encoder: MlpSpec
    method: str = "optnet"
    lam: float = 0.0
    kernel: KernelSpec = KernelSpec()
    gamma_y: float = 1e-4
    gamma_s: float = 1e-4
    batch_size: int = 200
    epochs: int = 200
    lr: float = 3e-4
    weight_decay: float = 2e-4
    seed: int = 0
    head_target: MlpSpec | None = None
    head_adversary: MlpSpec | None = None
    grad_route: str = "chol"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.batch_size < 2:
            raise ValueError("batch size must be at least 2")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")


@dataclass(frozen=True)
class EpochRecord:
    objective: float
    j_y: float
    j_s: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    wall_clock: list[float] = field(default_factory=list)
    checkpoint_path: str | None = None

    def final(self) -> EpochRecord:
        return self.records[-1]


def _batches(n: int, batch_size: int, seed: int, epoch: int):
    """Deterministic shuffled batches; the ragged tail is dropped."""
    order = np.random.default_rng([seed, epoch]).permutation(n)
    for start in range(0, n - batch_size + 1, batch_size):
        yield order[start : start + batch_size]


def _check_batch(config: TrainConfig, n_train: int) -> None:
    if config.batch_size > n_train:
        raise ValueError(f"batch size {config.batch_size} exceeds training-set size {n_train}")


def _record_epoch(history: TrainHistory, sums: np.ndarray, count: int, epoch: int, t0: float):
    rec = EpochRecord(*(sums / max(count, 1)))
    if not all(np.isfinite(v) for v in (rec.objective, rec.j_y, rec.j_s)):
        raise DivergenceError(f"diverged at epoch {epoch}")
    history.records.append(rec)
    history.wall_clock.append(time.perf_counter() - t0)


def train(config: TrainConfig, dataset: Dataset):
    """Dispatch to the configured trainer."""
    if config.method == "optnet":
        return train_optnet(config, dataset)
    if config.method == "sgda":
        return train_sgda(config, dataset)
    return train_extra_sgda(config, dataset)


def train_optnet(config: TrainConfig, dataset: Dataset):
    """Train the encoder end-to-end through the closed-form ridge heads."""
    x, y, s = dataset.train_arrays()
    _check_batch(config, x.shape[1])
    params = enc.init(config.encoder, config.seed)
    history = TrainHistory()
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        sums = np.zeros(3)
        count = 0
        for idx in _batches(x.shape[1], config.batch_size, config.seed, epoch):
            z, cache = enc.forward(params, x[:, idx])
            value, d_z = ridge.arl_objective_grad(
                z, y[:, idx], s[:, idx],
                config.gamma_y, config.gamma_s, config.lam, config.kernel,
                route=config.grad_route,
            )
            dw, db, _ = enc.backward(params, cache, d_z)
            enc.adam_step(params, (dw, db), lr=config.lr, weight_decay=config.weight_decay)
            sums += (value.total, value.j_target, value.j_sensitive)
            count += 1
        _record_epoch(history, sums, count, epoch, t0)
    return params, history


def _mse_grad(out: np.ndarray, labels: np.ndarray):
    b = out.shape[1]
    resid = out - labels
    return float(np.sum(resid**2)) / b, (2.0 / b) * resid


def _game_grads(players, xb, yb, sb, lam):
    """Simultaneous gradients for (encoder, target head, adversary head).

    Returns per-player (d_weights, d_biases) plus the batch losses.
    """
    encoder_p, head_y, head_s = players
    z, z_cache = enc.forward(encoder_p, xb)
    out_y, cache_y = enc.forward(head_y, z)
    out_s, cache_s = enc.forward(head_s, z)
    l_y, d_out_y = _mse_grad(out_y, yb)
    l_s, d_out_s = _mse_grad(out_s, sb)
    gy_w, gy_b, d_z_y = enc.backward(head_y, cache_y, d_out_y)
    gs_w, gs_b, d_z_s = enc.backward(head_s, cache_s, d_out_s)
    d_z = (1.0 - lam) * d_z_y - lam * d_z_s
    ge_w, ge_b, _ = enc.backward(encoder_p, z_cache, d_z)
    return [(ge_w, ge_b), (gy_w, gy_b), (gs_w, gs_b)], l_y, l_s


def _baseline_setup(config: TrainConfig, dataset: Dataset):
    if config.head_target is None or config.head_adversary is None:
        raise ValueError(f"method {config.method!r} needs head_target and head_adversary specs")
    x, y, s = dataset.train_arrays()
    _check_batch(config, x.shape[1])
    players = (
        enc.init(config.encoder, config.seed),
        enc.init(config.head_target, config.seed + 1),
        enc.init(config.head_adversary, config.seed + 2),
    )
    return x, y, s, players


def train_sgda(config: TrainConfig, dataset: Dataset):
    """Simultaneous stochastic gradient descent-ascent with Adam updates."""
    x, y, s, players = _baseline_setup(config, dataset)
    history = TrainHistory()
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        sums = np.zeros(3)
        count = 0
        for idx in _batches(x.shape[1], config.batch_size, config.seed, epoch):
            grads, l_y, l_s = _game_grads(players, x[:, idx], y[:, idx], s[:, idx], config.lam)
            for player, g in zip(players, grads):
                enc.adam_step(player, g, lr=config.lr, weight_decay=config.weight_decay)
            sums += ((1.0 - config.lam) * l_y - config.lam * l_s, l_y, l_s)
            count += 1
        _record_epoch(history, sums, count, epoch, t0)
    return players[0], history


def extragradient_step(params, grad_fn, extrapolate_fn, commit_fn):
    """One extragradient round.

    Gradients are taken at ``params``; ``extrapolate_fn`` moves to a
    provisional point without committing optimizer state; gradients are
    recomputed there; ``commit_fn`` applies those extrapolated gradients
    from the ORIGINAL parameters. Returns the committed parameters.
    """
    g1 = grad_fn(params)
    mid = extrapolate_fn(params, g1)
    g2 = grad_fn(mid)
    return commit_fn(params, g2)


def train_extra_sgda(config: TrainConfig, dataset: Dataset):
    """Descent-ascent with an extra gradient step (Adam-based extrapolation)."""
    x, y, s, players = _baseline_setup(config, dataset)
    history = TrainHistory()
    last = {}

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        sums = np.zeros(3)
        count = 0
        for idx in _batches(x.shape[1], config.batch_size, config.seed, epoch):
            xb, yb, sb = x[:, idx], y[:, idx], s[:, idx]

            def grad_fn(ps):
                grads, l_y, l_s = _game_grads(ps, xb, yb, sb, config.lam)
                last["l_y"], last["l_s"] = l_y, l_s
                return grads

            def extrapolate_fn(ps, grads):
                return tuple(
                    enc.adam_extrapolate(p, g, lr=config.lr, weight_decay=config.weight_decay)
                    for p, g in zip(ps, grads)
                )

            def commit_fn(ps, grads):
                for p, g in zip(ps, grads):
                    enc.adam_step(p, g, lr=config.lr, weight_decay=config.weight_decay)
                return ps

            players = extragradient_step(players, grad_fn, extrapolate_fn, commit_fn)
            sums += ((1.0 - config.lam) * last["l_y"] - config.lam * last["l_s"],
                     last["l_y"], last["l_s"])
            count += 1
        _record_epoch(history, sums, count, epoch, t0)
    return players[0], history


def default_lambda_grid() -> list[float]:
    """Eleven equispaced trade-off weights covering [0, 1]."""
    return [i / 10 for i in range(11)]


def _run_cell(base_config: TrainConfig, lam: float, seed: int, dataset: Dataset,
              eval_config: EvalConfig) -> TradeoffPoint:
    kind = "mse" if dataset.target_kind == "continuous" else "accuracy"
    try:
        config = replace(base_config, lam=lam, seed=seed)
        params, _ = train(config, dataset)
        return evaluate_frozen(params, dataset, eval_config, seed=seed, lam=lam)
    except Exception as exc:  # cell failures must not kill the sweep
        return TradeoffPoint(
            lam=lam, seed=seed, target_metric=float("nan"), adversary_metric=float("nan"),
            metric_kind=kind, error=f"{type(exc).__name__}: {exc}",
        )


def sweep(
    base_config: TrainConfig,
    lambda_grid: list[float],
    seeds: list[int],
    dataset: Dataset,
    eval_config: EvalConfig,
    threads: int = 1,
) -> list[TradeoffPoint]:
    """Train and evaluate one encoder per (lambda, seed) cell.

    Cells are independent; results come back ordered by (lambda, seed)
    regardless of execution order, and a failed cell is recorded as an
    error-marked point rather than aborting the sweep.
    """
    if not lambda_grid or not seeds:
        raise ValueError("lambda grid and seed list must be nonempty")
    cells = [(lam, seed) for lam in lambda_grid for seed in seeds]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(
                pool.map(lambda c: _run_cell(base_config, c[0], c[1], dataset, eval_config), cells)
            )
    else:
        points = [_run_cell(base_config, lam, seed, dataset, eval_config) for lam, seed in cells]
    return sorted(points, key=lambda p: (p.lam, p.seed))
