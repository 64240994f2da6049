"""Command-line front end.

One JSON config document describes the dataset, training method, sweep, and
evaluation; subcommands turn it into deterministic artifacts:

    gen-gaussian   write a Gaussian-mixture dataset container (.npz)
    dim-analyze    eigenvalue dimensionality report per lambda -> dim.json
    train          one training run -> history.jsonl + encoder.ckpt
    sweep          lambda x seed x method grid -> tradeoff CSVs + front JSONs
    eval           score a saved encoder checkpoint -> point.json
    hv             hypervolume of an existing tradeoff CSV -> front.json

Exit codes: 0 ok, 2 config error, 3 data error, 4 divergence,
5 partial sweep failure (under 80% of cells succeeded). The environment
variable ARL_OUT overrides the configured output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import datasets, dimension, evaluation, training
from . import encoder as enc
from .encoder import DivergenceError, MlpSpec
from .evaluation import EvalConfig, HeadSpec
from .kernels import KernelSpec
from .training import TrainConfig

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# config loading and validation


_TOP_KEYS = {"dataset", "method", "sweep", "evaluation", "output_dir"}
_DATASET_KEYS = {
    "gaussian_mixture": {"kind", "n_train", "n_test", "seed"},
    "tabular": {"kind", "path", "schema_path", "test_path", "test_fraction", "split_seed"},
    "container": {"kind", "path"},
}
_METHOD_KEYS = {
    "method", "lambda", "kernel", "gamma_y", "gamma_s", "batch_size", "epochs",
    "lr", "weight_decay", "seed", "encoder_hidden", "embedding_dim", "instance_norm",
    "activation", "head_target_hidden", "head_adversary_hidden", "grad_route",
}
_KERNEL_KEYS = {"family", "sigma", "c"}
_SWEEP_KEYS = {"lambda_grid", "seeds", "methods", "quantiles"}
_EVAL_KEYS = {"target_head", "adversary_head", "epochs", "lr", "batch_size", "weight_decay", "seed", "repeats"}
_HEAD_KEYS = {"hidden", "loss", "activation"}


def _expect_keys(block: dict, allowed: set, where: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            cfg = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    _expect_keys(cfg, _TOP_KEYS, "config")
    ds = cfg.get("dataset")
    if not isinstance(ds, dict) or "kind" not in ds:
        raise ConfigError("config needs a dataset block with a 'kind'")
    kind = ds["kind"]
    if kind not in _DATASET_KEYS:
        raise ConfigError(f"unknown dataset kind {kind!r}")
    _expect_keys(ds, _DATASET_KEYS[kind], f"dataset({kind})")
    method = cfg.get("method", {})
    _expect_keys(method, _METHOD_KEYS, "method")
    if "kernel" in method:
        _expect_keys(method["kernel"], _KERNEL_KEYS, "method.kernel")
    if "sweep" in cfg:
        _expect_keys(cfg["sweep"], _SWEEP_KEYS, "sweep")
    if "evaluation" in cfg:
        _expect_keys(cfg["evaluation"], _EVAL_KEYS, "evaluation")
        for side in ("target_head", "adversary_head"):
            if side in cfg["evaluation"]:
                _expect_keys(cfg["evaluation"][side], _HEAD_KEYS, f"evaluation.{side}")
    lam = method.get("lambda", 0.0)
    if not isinstance(lam, (int, float)) or not 0.0 <= lam <= 1.0:
        raise ConfigError(f"method.lambda must lie in [0, 1], got {lam!r}")
    grid = (cfg.get("sweep") or {}).get("lambda_grid")
    if grid is not None and any(not 0.0 <= g <= 1.0 for g in grid):
        raise ConfigError("sweep.lambda_grid values must lie in [0, 1]")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# block resolution


def build_dataset(cfg: dict) -> datasets.Dataset:
    ds = cfg["dataset"]
    kind = ds["kind"]
    try:
        if kind == "gaussian_mixture":
            return datasets.gaussian_mixture(
                n_train=int(ds.get("n_train", 4000)),
                n_test=int(ds.get("n_test", 1000)),
                seed=int(ds.get("seed", 0)),
            )
        if kind == "container":
            return datasets.load_container(ds["path"])
        schema = datasets.TabularSchema.from_json(ds["schema_path"])
        return datasets.load_tabular(
            ds["path"],
            schema,
            test_path=ds.get("test_path"),
            test_fraction=float(ds.get("test_fraction", 0.3)),
            split_seed=int(ds.get("split_seed", 0)),
        )
    except FileNotFoundError as e:
        raise DataError(f"dataset file not found: {e.filename}")
    except (ValueError, KeyError, OSError) as e:
        raise DataError(str(e))


def _resolve_embedding_dim(method: dict, dataset: datasets.Dataset) -> int:
    if method.get("embedding_dim") is not None:
        return int(method["embedding_dim"])
    _, y, s = dataset.train_arrays()
    report = dimension.optimal_dim(y, s, float(method.get("lambda", 0.0)), mode="lowrank")
    return dimension.recommended_dim(report)


def build_train_config(cfg: dict, dataset: datasets.Dataset, method_name: str | None = None,
                       ) -> TrainConfig:
    m = cfg.get("method", {})
    r = _resolve_embedding_dim(m, dataset)
    instance_norm = m.get("instance_norm")
    if instance_norm is None:
        instance_norm = r > 1
    encoder_spec = MlpSpec(
        input_dim=dataset.d,
        hidden=tuple(m.get("encoder_hidden", [8, 4])),
        output_dim=r,
        activation=m.get("activation", "relu"),
        instance_norm_output=bool(instance_norm),
    )
    name = method_name or m.get("method", "optnet")
    head_target = head_adversary = None
    if name in ("sgda", "extra_sgda"):
        head_target = MlpSpec(
            input_dim=r,
            hidden=tuple(m.get("head_target_hidden", [8, 4])),
            output_dim=dataset.y.shape[0],
        )
        head_adversary = MlpSpec(
            input_dim=r,
            hidden=tuple(m.get("head_adversary_hidden", [8, 4])),
            output_dim=dataset.s.shape[0],
        )
    try:
        return TrainConfig(
            encoder=encoder_spec,
            method=name,
            lam=float(m.get("lambda", 0.0)),
            kernel=KernelSpec.from_dict(m.get("kernel", {"family": "rbf", "sigma": 1.0})),
            gamma_y=float(m.get("gamma_y", 1e-4)),
            gamma_s=float(m.get("gamma_s", 1e-4)),
            batch_size=int(m.get("batch_size", 200)),
            epochs=int(m.get("epochs", 200)),
            lr=float(m.get("lr", 3e-4)),
            weight_decay=float(m.get("weight_decay", 2e-4)),
            seed=int(m.get("seed", 0)),
            head_target=head_target,
            head_adversary=head_adversary,
            grad_route=m.get("grad_route", "chol"),
        )
    except ValueError as e:
        raise ConfigError(str(e))


def build_eval_config(cfg: dict) -> EvalConfig:
    e = cfg.get("evaluation", {})

    def head(block) -> HeadSpec:
        block = block or {}
        return HeadSpec(hidden=tuple(block.get("hidden", [])), loss=block.get("loss", "mse"),
                        activation=block.get("activation", "leaky_relu"))

    try:
        return EvalConfig(
            target_head=head(e.get("target_head")),
            adversary_head=head(e.get("adversary_head")),
            epochs=int(e.get("epochs", 200)),
            lr=float(e.get("lr", 3e-4)),
            batch_size=int(e.get("batch_size", 200)),
            weight_decay=float(e.get("weight_decay", 0.0)),
            repeats=int(e.get("repeats", 1)),
        )
    except ValueError as e:
        raise ConfigError(str(e))


def _out_dir(cfg: dict) -> str:
    out = os.environ.get("ARL_OUT") or cfg.get("output_dir", "out")
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, blob: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(blob, f, sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_gaussian(args) -> int:
    ds = datasets.gaussian_mixture(args.n_train, args.n_test, args.seed)
    datasets.save_container(ds, args.out)
    print(f"wrote {args.out}: n={ds.n} (train {int(ds.is_train.sum())})")
    return 0


def cmd_dim_analyze(args) -> int:
    cfg = load_config(args.config)
    dataset = build_dataset(cfg)
    _, y, s = dataset.train_arrays()
    grid = (cfg.get("sweep") or {}).get("lambda_grid") or [cfg.get("method", {}).get("lambda", 0.0)]
    mode = args.mode or ("dense" if y.shape[1] <= dimension.DENSE_LIMIT else "lowrank")
    reports = []
    for lam in grid:
        rep = dimension.optimal_dim(y, s, float(lam), mode=mode)
        reports.append(
            {
                "lambda": float(lam),
                "eigenvalues": [float(v) for v in rep.eigenvalues],
                "optimal_r": rep.optimal_r,
                "free_optimum": rep.free_optimum,
                "method": rep.method,
            }
        )
        print(f"lambda={lam:g}: optimal_r={rep.optimal_r} (free optimum {rep.free_optimum:.6g})")
        if rep.optimal_r == 0:
            dimension.recommended_dim(rep)  # emits the clamp warning
    out = _out_dir(cfg)
    _write_json(
        os.path.join(out, "dim.json"),
        {"config": cfg, "config_sha256": config_hash(cfg), "reports": reports},
    )
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    dataset = build_dataset(cfg)
    config = build_train_config(cfg, dataset)
    out = _out_dir(cfg)
    t0 = time.perf_counter()
    params, history = training.train(config, dataset)
    ckpt = os.path.join(out, "encoder.ckpt")
    enc.save_checkpoint(params, ckpt)
    history.checkpoint_path = ckpt
    hist_path = os.path.join(out, "history.jsonl")
    with open(hist_path, "w", encoding="utf-8", newline="\n") as f:
        for i, rec in enumerate(history.records):
            f.write(json.dumps(
                {"epoch": i, "objective": rec.objective, "j_y": rec.j_y, "j_s": rec.j_s},
                sort_keys=True) + "\n")
    _write_json(
        os.path.join(out, "manifest.json"),
        {
            "config": cfg,
            "config_sha256": config_hash(cfg),
            "artifacts": ["encoder.ckpt", "history.jsonl"],
            "wall_clock_s": time.perf_counter() - t0,
        },
    )
    final = history.final()
    print(f"final J_y={final.j_y:.6g} J_s={final.j_s:.6g}")
    return 0


def _sweep_one_method(cfg, dataset, eval_config, method, out, threads):
    base = build_train_config(cfg, dataset, method_name=method)
    sw = cfg.get("sweep") or {}
    grid = sw.get("lambda_grid") or training.default_lambda_grid()
    seeds = sw.get("seeds") or [0, 1, 2, 3, 4]
    quantiles = sw.get("quantiles") or [0.5]
    points = training.sweep(base, grid, seeds, dataset, eval_config, threads=threads)
    evaluation.points_to_csv(points, os.path.join(out, f"tradeoff_{method}.csv"))

    kind = "mse" if dataset.target_kind == "continuous" else "accuracy"
    norm = (
        {"sensitive_variance": evaluation.sensitive_variance(dataset)}
        if kind == "mse"
        else {"chance": evaluation.chance_rate(dataset)}
    )
    ok = [p for p in points if p.error is None]
    per_seed = {}
    for seed in seeds:
        seed_pts = [p for p in ok if p.seed == seed]
        if seed_pts:
            per_seed[str(seed)] = evaluation.front_report(seed_pts, **norm).hypervolume
    report = evaluation.front_report(points, **norm)
    hv_values = list(per_seed.values())
    evaluation.save_front_report(
        report,
        os.path.join(out, f"front_{method}.json"),
        extra={
            "method": method,
            "config_sha256": config_hash(cfg),
            "config": cfg,
            "per_seed_hypervolume": per_seed,
            "hypervolume_median": float(np.median(hv_values)) if hv_values else 0.0,
            "hypervolume_std": float(np.std(hv_values)) if hv_values else 0.0,
        },
    )
    surfaces = {}
    runs = [[p for p in ok if p.seed == seed] for seed in seeds]
    runs = [r for r in runs if r]
    orientation = ("min", "max") if kind == "mse" else ("max", "min")
    for q in quantiles:
        surf = evaluation.attainment_surface(runs, q, orientation=orientation)
        surfaces[str(q)] = [[float(a), float(b)] for a, b in surf]
    _write_json(
        os.path.join(out, f"attainment_{method}.json"),
        {"method": method, "orientation": list(orientation), "quantiles": surfaces,
         "config_sha256": config_hash(cfg)},
    )
    return points


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    dataset = build_dataset(cfg)
    eval_config = build_eval_config(cfg)
    out = _out_dir(cfg)
    sw = cfg.get("sweep") or {}
    methods = sw.get("methods") or [cfg.get("method", {}).get("method", "optnet")]
    all_points = []
    for method in methods:
        all_points.extend(_sweep_one_method(cfg, dataset, eval_config, method, out, args.threads))
    n_ok = sum(1 for p in all_points if p.error is None)
    for p in all_points:
        if p.error is not None:
            logger.error("cell lambda=%g seed=%d failed: %s", p.lam, p.seed, p.error)
    print(f"sweep: {n_ok}/{len(all_points)} cells succeeded")
    return 0 if n_ok >= 0.8 * len(all_points) else 5


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    dataset = build_dataset(cfg)
    eval_config = build_eval_config(cfg)
    try:
        params = enc.load_checkpoint(args.checkpoint)
    except FileNotFoundError:
        raise DataError(f"checkpoint not found: {args.checkpoint}")
    lam = float(cfg.get("method", {}).get("lambda", 0.0))
    point = evaluation.evaluate_frozen(params, dataset, eval_config,
                                       seed=int(cfg.get("evaluation", {}).get("seed", 0)), lam=lam)
    out = _out_dir(cfg)
    _write_json(os.path.join(out, "point.json"),
                {"config": cfg, "config_sha256": config_hash(cfg), "point": asdict(point)})
    print(f"target={point.target_metric:.6g} adversary={point.adversary_metric:.6g} "
          f"({point.metric_kind})")
    return 0


def cmd_hv(args) -> int:
    try:
        points = evaluation.points_from_csv(args.csv)
    except FileNotFoundError:
        raise DataError(f"CSV not found: {args.csv}")
    except ValueError as e:
        raise DataError(str(e))
    if not points:
        raise DataError(f"{args.csv} holds no points")
    kind = points[0].metric_kind
    if kind == "accuracy" and args.chance is None:
        raise ConfigError("accuracy-kind points need --chance")
    if kind == "mse" and args.sensitive_variance is None:
        raise ConfigError("mse-kind points need --sensitive-variance")
    report = evaluation.front_report(
        points, chance=args.chance, sensitive_variance=args.sensitive_variance
    )
    if args.out:
        evaluation.save_front_report(report, args.out)
    print(f"hypervolume={report.hypervolume!r} front_size={len(report.points)}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arlkit", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-gaussian", help="write a Gaussian-mixture dataset container")
    g.add_argument("--n-train", type=int, default=4000)
    g.add_argument("--n-test", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_gaussian)

    d = sub.add_parser("dim-analyze", help="embedding dimensionality analysis")
    d.add_argument("--config", required=True)
    d.add_argument("--mode", choices=["dense", "lowrank"], default=None)
    d.set_defaults(func=cmd_dim_analyze)

    t = sub.add_parser("train", help="one training run")
    t.add_argument("--config", required=True)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="lambda x seed x method sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("eval", help="evaluate a saved encoder checkpoint")
    e.add_argument("--config", required=True)
    e.add_argument("--checkpoint", required=True)
    e.set_defaults(func=cmd_eval)

    h = sub.add_parser("hv", help="hypervolume of an existing tradeoff CSV")
    h.add_argument("--csv", required=True)
    h.add_argument("--chance", type=float, default=None)
    h.add_argument("--sensitive-variance", type=float, default=None)
    h.add_argument("--out", default=None)
    h.set_defaults(func=cmd_hv)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except DivergenceError as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
