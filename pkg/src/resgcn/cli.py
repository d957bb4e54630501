"""Command-line pipeline: synth, inject, train, score, eval, sweep, run, selfcheck.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
numerical error. Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import graph as gio
from .config import RunConfig, load_config, parse_value
from .errors import CapacityError, ConfigError, InvalidGraphError, ResGCNError
from .inject import inject_benchmark
from .metrics import EvalResult, evaluate, results_csv, roc_auc, strategy_table
from .model import (
    ScoreReport,
    load_checkpoint,
    rank_scores,
    save_checkpoint,
    score_nodes,
    stage_rng,
    train,
)
from .synthetic import sbm_graph

logger = logging.getLogger("resgcn")

USAGE_ERRORS = (ConfigError, CapacityError, InvalidGraphError, FileNotFoundError)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def pca_target(g, cfg: RunConfig) -> int | None:
    if cfg.pca_stage == "none":
        return None
    return min(cfg.pca_dim, g.d, g.n)


def preprocess(g, pca_dim):
    if pca_dim is None:
        return g
    return g.with_changes(attributes=gio.pca_reduce(g.attributes, pca_dim))


def load_input(cfg: RunConfig, with_labels=False):
    g, labels = gio.load_graph(cfg.edges, cfg.attributes, cfg.labels if with_labels else None)
    return g, labels


# ---------------------------------------------------------------------------
# commands


def cmd_inject(cfg: RunConfig) -> dict:
    """Write edges.txt, attributes.csv, labels.csv and manifest.json."""
    cfg.validate(require=("edges", "attributes"))
    g, _ = load_input(cfg)
    if cfg.pca_stage == "inject":
        g = preprocess(g, pca_target(g, cfg))
    spec = dataclasses.replace(cfg.injection_spec(), seed=int(stage_rng(cfg.seed, "inject").integers(2**63)))
    result = inject_benchmark(g, spec)
    out = _out(cfg)
    paths = {
        "edges": out / "edges.txt",
        "attributes": out / "attributes.csv",
        "labels": out / "labels.csv",
        "manifest": out / "manifest.json",
    }
    gio.save_graph(result.graph, paths["edges"], paths["attributes"])
    gio.write_labels(result.labels, paths["labels"])
    manifest = result.manifest()
    manifest["root_seed"] = cfg.seed
    manifest["pca_stage"] = cfg.pca_stage
    manifest["pca_dim"] = cfg.pca_dim
    _write_json(paths["manifest"], manifest)
    logger.info("wrote benchmark with %d anomalies to %s", int(result.labels.sum()), out)
    return paths


def cmd_train(cfg: RunConfig) -> dict:
    """Write checkpoint.json and history.csv (epoch,E_S,E_A,L)."""
    cfg.validate(require=("edges", "attributes"))
    hp = cfg.hyperparams()
    g, _ = load_input(cfg)
    pdim = pca_target(g, cfg) if cfg.pca_stage == "train" else None
    params, history = train(preprocess(g, pdim), hp)
    out = _out(cfg)
    paths = {"checkpoint": out / "checkpoint.json", "history": out / "history.csv"}
    save_checkpoint(paths["checkpoint"], params, hp, extra={"pca_dim": pdim})
    _write_csv(paths["history"], ["epoch", "E_S", "E_A", "L"],
               [[e, repr(es), repr(ea), repr(l)] for e, es, ea, l in history])
    logger.info("trained %d epochs: L %.6g -> %.6g", len(history), history[0][3], history[-1][3])
    return paths


def _write_scores(path, report: ScoreReport) -> None:
    _write_csv(path, ["rank", "node", "score"],
               [[r, int(v), repr(float(report.scores[v]))] for r, v in enumerate(report.ranking, start=1)])


def cmd_score(cfg: RunConfig) -> dict:
    """Write scores_<strategy>.csv for every configured strategy, rows in rank order."""
    cfg.validate(require=("edges", "attributes", "checkpoint"))
    params, hp, extra = load_checkpoint(cfg.checkpoint)
    g, _ = load_input(cfg)
    g = preprocess(g, extra.get("pca_dim"))
    out = _out(cfg)
    paths = {}
    for strategy in cfg.strategies:
        paths[strategy] = out / f"scores_{strategy}.csv"
        _write_scores(paths[strategy], score_nodes(g, params, hp, strategy))
    return paths


def read_scores(path) -> ScoreReport:
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows[int(row["node"])] = float(row["score"])
    n = len(rows)
    if sorted(rows) != list(range(n)):
        raise InvalidGraphError(f"{path}: node ids must cover 0..n-1 exactly once")
    scores = np.array([rows[i] for i in range(n)])
    strategy = Path(path).stem.removeprefix("scores_")
    return ScoreReport(strategy, scores, rank_scores(scores))


def cmd_eval(cfg: RunConfig, score_paths) -> dict:
    """Write eval.json (list of EvalResult objects) and eval.csv (long table)."""
    cfg.validate(require=("labels",))
    if not score_paths:
        raise ConfigError("eval needs at least one scores CSV")
    for p in score_paths:
        if not Path(p).exists():
            raise ConfigError(f"scores path does not exist: {p}")
    reports = [read_scores(p) for p in score_paths]
    n = reports[0].scores.size
    labels = gio.read_labels(cfg.labels, n)
    results = [evaluate(r, labels, cfg.ks_for(n)) for r in reports]
    out = _out(cfg)
    paths = {"json": out / "eval.json", "csv": out / "eval.csv"}
    _write_json(paths["json"], {"results": [r.to_dict() for r in results]})
    paths["csv"].write_text(results_csv(results), encoding="utf-8")
    print(strategy_table(results))
    return paths


def _sweep_point(args):
    g, labels, hp, strategies, ks = args
    params, history = train(g, hp)
    rows = []
    for s in strategies:
        res = evaluate(score_nodes(g, params, hp, s), labels, ks)
        rows.append((s, res, history[-1][3]))
    return rows


def cmd_sweep(cfg: RunConfig) -> dict:
    """Train once per grid value of alpha or lambda; write sweep.csv."""
    cfg.validate(require=("edges", "attributes", "labels"))
    g, labels = load_input(cfg, with_labels=True)
    g = preprocess(g, pca_target(g, cfg) if cfg.pca_stage == "train" else None)
    base = cfg.hyperparams()
    field = "alpha" if cfg.sweep_param == "alpha" else "lam"
    hps = [dataclasses.replace(base, **{field: float(v)}) for v in cfg.grid]
    ks = cfg.ks_for(g.n)
    jobs = [(g, labels, hp, cfg.strategies, ks) for hp in hps]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            points = list(pool.map(_sweep_point, jobs))
    else:
        points = [_sweep_point(j) for j in jobs]
    header = ["param", "value", "strategy", "final_L", "auc"]
    header += [f"precision@{k}" for k in ks] + [f"recall@{k}" for k in ks]
    rows = []
    name = "lambda" if field == "lam" else "alpha"
    for v, point in zip(cfg.grid, points):
        for strategy, res, final_l in point:
            rows.append([name, repr(float(v)), strategy, repr(final_l), repr(res.auc)]
                        + [repr(res.precision_at[k]) for k in ks]
                        + [repr(res.recall_at[k]) for k in ks])
    out = _out(cfg)
    path = out / f"sweep_{name}.csv"
    _write_csv(path, header, rows)
    return {"sweep": path}


def cmd_run(cfg: RunConfig) -> dict:
    """inject -> train -> score -> eval, all under ``out_dir``."""
    cfg.validate(require=("edges", "attributes"))
    bench = cmd_inject(cfg)
    stage = dataclasses.replace(cfg, edges=str(bench["edges"]), attributes=str(bench["attributes"]),
                                labels=str(bench["labels"]))
    if cfg.pca_stage == "inject":
        stage.pca_stage = "none"
    trained = cmd_train(stage)
    stage.checkpoint = str(trained["checkpoint"])
    scores = cmd_score(stage)
    evald = cmd_eval(stage, list(scores.values()))
    return {**bench, **trained, **{f"scores_{k}": v for k, v in scores.items()}, **evald}


def cmd_synth(args) -> dict:
    sizes = [int(v) for v in args.sizes.split(",")]
    g, block = sbm_graph(sizes, args.p_in, args.p_out, args.d, args.mean_scale, args.noise,
                         rng=stage_rng(args.seed, "synth"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"edges": out / "edges.txt", "attributes": out / "attributes.csv"}
    gio.save_graph(g, paths["edges"], paths["attributes"])
    _write_csv(out / "blocks.csv", ["node_id", "block"], [[i, int(b)] for i, b in enumerate(block)])
    return paths


def cmd_selfcheck(seed: int = 0) -> bool:
    """Gradient, normalization and metric oracles; prints one line per check."""
    from .gradcheck import check_model_gradients
    from .graph import normalize_adjacency
    from .synthetic import random_graph

    rng = np.random.default_rng(seed)
    checks = []

    errs = check_model_gradients(seed=seed)
    worst = max(errs.values())
    checks.append(("gradient", worst < 1e-4, f"max relative error {worst:.2e}"))

    dev = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 51))
        g = random_graph(n, int(rng.integers(0, n * (n - 1) // 2 + 1)), 2, rng)
        a = g.adjacency.toarray() + np.eye(n)
        dinv = np.diag(1.0 / np.sqrt(a.sum(axis=1)))
        dev = max(dev, float(np.abs(normalize_adjacency(g).dense() - dinv @ a @ dinv).max()))
    checks.append(("normalization", dev <= 1e-12, f"max deviation {dev:.1e}"))

    dev = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 40))
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        s = rng.integers(0, 5, n).astype(float)
        pos, neg = s[y == 1], s[y == 0]
        pair = (np.sum(pos[:, None] > neg[None, :]) + 0.5 * np.sum(pos[:, None] == neg[None, :])) / (pos.size * neg.size)
        dev = max(dev, abs(roc_auc(s, y) - pair))
    checks.append(("roc_auc", dev <= 1e-12, f"max deviation {dev:.1e}"))

    ok = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return ok


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p):
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (value parsed as JSON when possible)")
    p.add_argument("--edges")
    p.add_argument("--attributes")
    p.add_argument("--labels")
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="resgcn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a stochastic-block-model attributed graph")
    p.add_argument("--sizes", default="100,100")
    p.add_argument("--p-in", type=float, default=0.2)
    p.add_argument("--p-out", type=float, default=0.02)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--mean-scale", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    for name, text in [("inject", "inject structural and attribute anomalies"),
                       ("train", "train a model"),
                       ("run", "inject, train, score and evaluate in one go"),
                       ("sweep", "train over a grid of alpha or lambda")]:
        _common(sub.add_parser(name, help=text))
    p = sub.add_parser("score", help="score nodes with a trained checkpoint")
    _common(p)
    p.add_argument("--checkpoint")
    p = sub.add_parser("eval", help="evaluate score files against labels")
    _common(p)
    p.add_argument("scores", nargs="+")
    p = sub.add_parser("selfcheck", help="run gradient and oracle checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def config_from_args(args) -> RunConfig:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = parse_value(value)
    for key in ("edges", "attributes", "labels", "out_dir", "seed", "checkpoint"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, overrides)


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("UsageError", str(exc), 1)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            cmd_synth(args)
            return 0
        if args.command == "selfcheck":
            return 0 if cmd_selfcheck(args.seed) else 2
        cfg = config_from_args(args)
        if args.command == "eval":
            cmd_eval(cfg, args.scores)
        else:
            {"inject": cmd_inject, "train": cmd_train, "score": cmd_score,
             "sweep": cmd_sweep, "run": cmd_run}[args.command](cfg)
        return 0
    except UsageError as exc:
        return _fail("UsageError", str(exc), 1)
    except USAGE_ERRORS as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    except (ResGCNError, ArithmeticError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
