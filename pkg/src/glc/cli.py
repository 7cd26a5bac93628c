"""Command-line entry point: ``glc {generate,cluster,correct,selftrain,eval,grid}``.

Every command writes its outputs under ``--out`` (default: current directory)
and echoes the fully resolved config into its JSON report. Failures print one
line ``error[<kind>]: <message>`` to stderr and exit with a kind-specific code.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import DbscanParams, dbscan, kmeans
from .config import ConfigError, RunConfig, config_keys, load_config
from .correction import apply_thresholds, fit_corrector, threshold_grid
from .dataset import (ParseError, generate_synthetic, load_embeddings, load_labels, load_raw, save_embeddings,
                      save_labels, save_raw)
from .graph import load_graph, save_graph
from .metrics import evaluate
from .selftrain import make_scenario, run_loop, synth_spec

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_SCHEMA = 4
EXIT_CONFIG = 5

HISTORY_COLUMNS = ["epoch", "nmi", "pair_f", "n_outliers", "map", "edges_removed_conf",
                   "edges_removed_nc", "restarted", "glc_applied"]


class CliError(Exception):
    def __init__(self, kind, message, code):
        super().__init__(message)
        self.kind = kind
        self.code = code


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".9g")


def _clean(obj):
    """JSON-safe copy: numpy scalars to python, NaN/inf to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError("missing_file", f"no such file: {p}", EXIT_MISSING)
    return p


def _config(ns) -> RunConfig:
    overrides = {key: getattr(ns, f"cfg_{key}") for key in config_keys()}
    cfg_path = _existing(ns.config) if ns.config else None
    return load_config(cfg_path, **overrides)


def _out_dir(ns) -> Path:
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands -----------------------------------------------------------------

def cmd_generate(ns) -> dict:
    cfg = _config(ns)
    out = _out_dir(ns)
    sc = make_scenario(cfg)
    save_raw(sc.raw, out / "raw.csv")
    save_embeddings(sc.embeddings, out / "embeddings.csv")
    save_labels(sc.clean, out / "clean_labels.csv")
    save_labels(sc.initial, out / "noisy_labels.csv")
    save_labels(sc.raw.gt_labels, out / "gt_labels.csv")
    gt = sc.raw.gt_labels
    report = {
        "config": cfg.as_dict(),
        "n": int(sc.raw.n),
        "clean": evaluate(sc.clean, gt).as_dict(),
        "noisy": evaluate(sc.initial, gt).as_dict(),
    }
    write_json(report, out / "generate.json")
    return report


def cmd_cluster(ns) -> dict:
    cfg = _config(ns)
    es = load_embeddings(_existing(ns.embeddings))
    out = _out_dir(ns)
    if ns.method == "dbscan":
        lab = dbscan(es, DbscanParams(cfg.eps, cfg.min_pts))
    else:
        if ns.n_clusters is None:
            raise CliError("config", "kmeans needs --n-clusters", EXIT_CONFIG)
        lab = kmeans(es, ns.n_clusters, seed=cfg.seed)
    save_labels(lab, out / "labels.csv")
    report = {"config": cfg.as_dict(), "method": ns.method, "n_clusters": lab.n_clusters,
              "n_outliers": lab.n_outliers}
    if es.gt_labels is not None:
        report["metrics"] = evaluate(lab, es.gt_labels).as_dict()
    write_json(report, out / "cluster.json")
    return report


def cmd_correct(ns) -> dict:
    cfg = _config(ns)
    es = load_embeddings(_existing(ns.embeddings))
    lab = load_labels(_existing(ns.labels))
    if lab.n != es.n:
        raise CliError("schema", f"labels have {lab.n} rows, embeddings {es.n}", EXIT_SCHEMA)
    out = _out_dir(ns)
    fit = fit_corrector(es, lab, cfg, seed=cfg.seed)
    res = apply_thresholds(fit, cfg.tau1, cfg.tau2)
    save_labels(res.corrected, out / "corrected_labels.csv")
    if ns.dump_graph:
        save_graph(fit.graph, out / "graph.txt", fit.confidence)
    report = {"config": cfg.as_dict(), "result": res.summary()}
    if es.gt_labels is not None:
        report["metrics_before"] = evaluate(lab, es.gt_labels).as_dict()
        report["metrics_after"] = evaluate(res.corrected, es.gt_labels).as_dict()
    write_json(report, out / "correct.json")
    return report


def write_history(hist, path: Path) -> None:
    with path.open("w") as fh:
        fh.write(",".join(HISTORY_COLUMNS) + "\n")
        for rec in hist.records:
            row = rec.row()
            fh.write(",".join(_num(row[c]) for c in HISTORY_COLUMNS) + "\n")


def cmd_selftrain(ns) -> dict:
    cfg = _config(ns)
    out = _out_dir(ns)
    raw = load_raw(_existing(ns.raw)) if ns.raw else generate_synthetic(synth_spec(cfg))
    hist = run_loop(raw, cfg, use_glc=ns.glc == "on", seed=cfg.seed)
    write_history(hist, out / "history.csv")
    final = hist.final
    report = {
        "config": cfg.as_dict(),
        "glc": ns.glc,
        "final": evaluate(final.labels, raw.gt_labels).as_dict() | {"map": final.map},
        "epochs": len(hist),
    }
    write_json(report, out / "selftrain.json")
    return report


def cmd_eval(ns) -> dict:
    lab = load_labels(_existing(ns.labels))
    gt = load_labels(_existing(ns.gt))
    if lab.n != gt.n:
        raise CliError("schema", f"labels have {lab.n} rows, ground truth {gt.n}", EXIT_SCHEMA)
    if gt.n_outliers:
        raise CliError("schema", "ground truth may not contain -1", EXIT_SCHEMA)
    graph = load_graph(_existing(ns.graph), n=lab.n) if ns.graph else None
    report = evaluate(lab, gt.labels, graph=graph).as_dict()
    text = json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"
    if ns.out_file:
        Path(ns.out_file).write_text(text)
    sys.stdout.write(text)
    return report


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError("config", f"bad threshold list: {text!r}", EXIT_CONFIG) from None


def cmd_grid(ns) -> dict:
    cfg = _config(ns)
    es = load_embeddings(_existing(ns.embeddings))
    lab = load_labels(_existing(ns.labels))
    if es.gt_labels is None:
        raise CliError("schema", "embeddings carry no gt_label values", EXIT_SCHEMA)
    tau1s, tau2s = _floats(ns.tau1_grid), _floats(ns.tau2_grid)
    out = _out_dir(ns)
    surface, _ = threshold_grid(es, lab, cfg, tau1s, tau2s, seed=cfg.seed)
    with (out / "grid.csv").open("w") as fh:
        fh.write("tau1\\tau2," + ",".join(_num(t) for t in tau2s) + "\n")
        for t1, row in zip(tau1s, surface):
            fh.write(_num(t1) + "," + ",".join(_num(v) for v in row) + "\n")
    best = np.unravel_index(np.argmax(surface), surface.shape)
    report = {"config": cfg.as_dict(), "tau1": tau1s, "tau2": tau2s, "nmi": surface.tolist(),
              "best": {"tau1": tau1s[best[0]], "tau2": tau2s[best[1]], "nmi": float(surface[best])}}
    write_json(report, out / "grid.json")
    return report


# --- parser -------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", default=".", help="output directory")
    group = p.add_argument_group("config overrides")
    for key in config_keys():
        group.add_argument(f"--{key}", dest=f"cfg_{key}", metavar="V")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthetic scenario: raw data, embeddings, labels")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("cluster", help="initial pseudo labels from embeddings")
    p.add_argument("embeddings")
    p.add_argument("--method", choices=["dbscan", "kmeans"], default="dbscan")
    p.add_argument("--n-clusters", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("correct", help="one graph-based correction pass")
    p.add_argument("embeddings")
    p.add_argument("labels")
    p.add_argument("--dump-graph", action="store_true", help="also write graph.txt")
    _add_common(p)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("selftrain", help="closed-loop self-training run")
    p.add_argument("--glc", choices=["on", "off"], default="on")
    p.add_argument("--raw", help="raw inputs CSV (default: synthesize from config)")
    _add_common(p)
    p.set_defaults(func=cmd_selftrain)

    p = sub.add_parser("eval", help="metrics of a labeling against ground truth")
    p.add_argument("labels")
    p.add_argument("gt")
    p.add_argument("--graph", help="edge list to score for kNN-graph recall")
    p.add_argument("--out-file", help="also write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="NMI surface over (tau1, tau2)")
    p.add_argument("embeddings")
    p.add_argument("labels")
    p.add_argument("--tau1-grid", default="0.4,0.5,0.6,0.7,0.8")
    p.add_argument("--tau2-grid", default="0.4,0.5,0.6,0.7,0.8")
    _add_common(p)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        ns.func(ns)
    except CliError as e:
        return _fail(e.kind, str(e), e.code)
    except ConfigError as e:
        return _fail("config", str(e), EXIT_CONFIG)
    except ParseError as e:
        return _fail("schema", str(e), EXIT_SCHEMA)
    except FileNotFoundError as e:
        return _fail("missing_file", f"no such file: {e.filename}", EXIT_MISSING)
    except (ValueError, OSError) as e:
        return _fail("runtime", str(e), EXIT_RUNTIME)
    return EXIT_OK


def _fail(kind, message, code) -> int:
    print(f"error[{kind}]: {' '.join(str(message).split())}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
