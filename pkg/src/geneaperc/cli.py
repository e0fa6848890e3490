"""Command-line front end: ``geneaperc {simulate,estimate,verify,sweep,oracle,export}``.

Exit codes: 0 success, 1 a verification check failed, 2 bad usage or
configuration, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, coloring, mc, oracle, percolation
from .branching import GrowthBudget, OffspringLaw, sample_bgw_tree
from .config import ConfigError, resolve
from .genealogy import Tree, complete_tree, example_tree, parse_text, path_tree, read_tree, star
from .rng import as_generator
from .verify import UnknownSuiteError, run_suites

COMMANDS = ("simulate", "estimate", "verify", "sweep", "oracle", "export")
SIM_MODELS = ("bgw", "percolation", "dac", "restricted-dac", "infinite-alleles", "mim", "mdm")


class UsageError(ValueError):
    pass


def _write(out: Path, name: str, text: str, written: list[str]) -> None:
    mc.atomic_write_text(out / name, text)
    written.append(name)


def _manifest(out: Path, command: str, cfg: dict, written: list[str], extra: dict | None = None) -> None:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    body = {
        "command": command,
        "version": __version__,
        "seed": cfg.get("seed"),
        "configHash": hashlib.sha256(blob.encode()).hexdigest(),
        "config": cfg,
        "outputs": sorted(written),
        **(extra or {}),
    }
    mc.atomic_write_text(out / "manifest.json", json.dumps(body, indent=2, sort_keys=True, default=str) + "\n")


# --------------------------------------------------------------------------
# trees and models from configuration


def tree_from_config(spec, rng) -> tuple[Tree, dict]:
    """``{"type": "bgw", "law": ..., "depth": 10}``, ``example``, ``complete``, ``path``, ``star``, ``text`` or ``file``."""
    spec = dict(spec or {"type": "bgw"})
    kind = spec.get("type", "bgw")
    if kind == "bgw":
        law = OffspringLaw.from_config(spec.get("law", {"type": "example"}))
        budget = GrowthBudget(int(spec.get("depth", 10)), int(spec.get("max_vertices", 1_000_000)))
        g = sample_bgw_tree(law, budget, rng)
        return g.tree, {"truncated": bool(g.truncated), "stoppedBy": g.stopped_by, "law": law.to_config()}
    if kind == "example":
        return example_tree(), {}
    if kind == "complete":
        return complete_tree(int(spec["arity"]), int(spec["depth"])), {}
    if kind == "path":
        return path_tree(int(spec["length"])), {}
    if kind == "star":
        return star(int(spec["n"])), {}
    if kind == "text":
        return parse_text(spec["text"]), {}
    if kind == "file":
        return read_tree(spec["path"]), {}
    raise ConfigError(f"unknown tree type {kind!r}")


def _colors(cfg) -> coloring.ColorDistribution:
    if "colors" in cfg:
        return coloring.ColorDistribution(tuple(mc._num(c) for c in cfg["colors"]))
    return coloring.ColorDistribution.uniform(int(cfg.get("d", 2)))


def cmd_simulate(cfg: dict, out: Path, workers: int) -> int:
    model = cfg.get("model", "bgw")
    if model not in SIM_MODELS:
        raise ConfigError(f"unknown model {model!r}; expected one of {SIM_MODELS}")
    rng = as_generator(int(cfg.get("seed", 0)))
    written: list[str] = []
    summary: dict = {"model": model}
    col = None
    if model in ("mim", "mdm"):
        tree_cfg = dict(cfg.get("tree", {}))
        law = OffspringLaw.from_config(tree_cfg.get("law", cfg.get("law", {"type": "example"})))
        budget = GrowthBudget(int(tree_cfg.get("depth", cfg.get("depth", 10))), int(tree_cfg.get("max_vertices", 1_000_000)))
        params = coloring.MutationParams(mc._num(cfg["r"]), int(cfg.get("d", 2)), law)
        sampler = coloring.mdm_sample if model == "mdm" else coloring.mim_sample
        g = sampler(budget, params, int(cfg.get("root_type", 1)), rng)
        t = g.tree
        col = coloring.Coloring(g.types, "color", params.d)
        summary.update({"truncated": bool(g.truncated), "stoppedBy": g.stopped_by})
    else:
        tree_cfg = cfg.get("tree") or {"type": "bgw", "law": cfg.get("law", {"type": "example"}), "depth": cfg.get("depth", 10)}
        t, info = tree_from_config(tree_cfg, rng)
        summary.update(info)
        config = None
        if model == "percolation":
            config = percolation.percolate(t, mc._num(cfg["p"]), rng)
        elif model == "dac":
            rc = cfg.get("root_color")
            config, col = coloring.dac_color(t, mc._num(cfg["p"]), _colors(cfg), rng, None if rc is None else int(rc))
        elif model == "restricted-dac":
            rc = cfg.get("root_color")
            config, col = coloring.restricted_dac_color(t, mc._num(cfg["p"]), int(cfg.get("d", 2)), None if rc is None else int(rc), rng)
        elif model == "infinite-alleles":
            config, col = coloring.infinite_alleles_color(t, mc._num(cfg["r"]), rng)
        if config is not None:
            part = percolation.clusters(t, config)
            _write(out, "edges.txt", config.to_text(), written)
            summary["rootClusterSize"] = part.root_size
            summary["clusters"] = part.n_clusters
            summary["largestCluster"] = int(part.sizes.max())
            rec = percolation.cluster_record(t, config, seed=cfg.get("seed"))
            _write(out, "clusters.json", json.dumps(rec, indent=2) + "\n", written)
    summary["vertices"] = len(t)
    summary["height"] = t.height
    summary["generationSizes"] = t.generation_sizes().tolist()
    _write(out, "tree.txt", t.to_text(), written)
    if col is not None:
        classes = col.classes()
        key = "alleleCount" if col.kind == "allele" else "colorClasses"
        summary[key] = len(classes)
        summary["classSizes"] = {str(k): v for k, v in sorted(classes.items())}
        summary["rootComponentSize"] = len(coloring.same_type_root_component(t, col))
        _write(out, "coloring.json", col.to_json(t) + "\n", written)
        _write(out, "partition.csv", col.partition_csv(), written)
        _write(out, "tree.dot", col.to_dot(t), written)
    else:
        _write(out, "tree.dot", t.to_dot(), written)
    _write(out, "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n", written)
    _manifest(out, "simulate", cfg, written)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _plan_cfg(cfg: dict) -> dict:
    keys = set(mc.ExperimentPlan.__dataclass_fields__)
    return {k: v for k, v in cfg.items() if k in keys}


def cmd_estimate(cfg: dict, out: Path, workers: int) -> int:
    plan = mc.ExperimentPlan.from_dict(_plan_cfg(cfg))
    arch = mc.run_plan(plan, out, workers)
    if cfg.get("locate"):
        br = mc.locate_critical(plan, float(cfg.get("tol", 0.05)), workers, int(cfg.get("repeats", 1)))
        mc.atomic_write_text(out / "bracket.json", json.dumps(br.to_dict(), indent=2) + "\n")
        print(json.dumps({"low": br.low, "high": br.high, "status": br.status}))
    sys.stdout.write(arch.csv_path.read_text(encoding="utf-8"))
    return 0


def plot_data(records_csv: str) -> str:
    rows = list(csv.DictReader(io.StringIO(records_csv)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "ciLow", "ciHigh"])
    for r in rows:
        w.writerow([r["param"], r["estimate"], r["ciLow"], r["ciHigh"]])
    return buf.getvalue()


def cmd_sweep(cfg: dict, out: Path, workers: int) -> int:
    cfg = dict(cfg)
    if "grid" not in cfg:
        start, stop, num = float(cfg.pop("start", 0.1)), float(cfg.pop("stop", 0.9)), int(cfg.pop("num", 9))
        cfg["grid"] = [round(float(x), 12) for x in np.linspace(start, stop, num)]
    for k in ("start", "stop", "num"):
        cfg.pop(k, None)
    plan = mc.ExperimentPlan.from_dict(_plan_cfg(cfg))
    arch = mc.run_plan(plan, out, workers)
    text = arch.csv_path.read_text(encoding="utf-8")
    mc.atomic_write_text(out / "plot-data.csv", plot_data(text))
    sys.stdout.write(text)
    return 0


def cmd_oracle(cfg: dict, out: Path, workers: int) -> int:
    kind = cfg.get("kind", "root-cluster")
    written: list[str] = []
    if kind == "bgw-truncated":
        law = OffspringLaw.from_config(cfg.get("law", {"type": "example"}))
        spec = oracle.TruncationSpec(int(cfg.get("depth", 2)), cfg.get("max_children"), int(cfg.get("cap", oracle.DEFAULT_CAP)))
        res = oracle.exact_bgw_truncated_law(law, spec)
    else:
        t, _ = tree_from_config(cfg.get("tree", {"type": "complete", "arity": 2, "depth": 1}), as_generator(int(cfg.get("seed", 0))))
        if kind == "root-cluster":
            res = oracle.exact_root_cluster_law(t, _frac(cfg.get("p", "1/2")), workers)
        elif kind == "shape":
            res = oracle.exact_root_cluster_shape_law(t, _frac(cfg.get("p", "1/2")))
        elif kind == "coloring":
            params = {k: _frac(v) if k in ("p", "r") else v for k, v in dict(cfg.get("params", {})).items()}
            if "colors" in params:
                params["colors"] = coloring.ColorDistribution(tuple(_frac(c) for c in params["colors"]))
            res = oracle.exact_coloring_law(t, cfg.get("model", "dac"), params, cfg.get("observable", "coloring"), int(cfg.get("cap", oracle.DEFAULT_CAP)))
        else:
            raise ConfigError(f"unknown oracle kind {kind!r}")
    _write(out, "law.csv", res.to_csv(), written)
    _write(out, "law.json", res.to_json() + "\n", written)
    _manifest(out, "oracle", cfg, written)
    sys.stdout.write(res.to_csv())
    return 0


def _frac(x):
    from fractions import Fraction

    return Fraction(x) if isinstance(x, str) else oracle.exact(x)


def cmd_export(cfg: dict, out: Path, workers: int, inputs: list[str]) -> int:
    if not inputs:
        raise UsageError("export needs at least one input (a simulate output directory, tree file or estimates CSV)")
    written: list[str] = []
    for item in inputs:
        path = Path(item)
        if path.is_dir() and (path / "tree.txt").exists():
            t = read_tree(path / "tree.txt")
            if (path / "coloring.json").exists():
                recs = json.loads((path / "coloring.json").read_text(encoding="utf-8"))
                key = "color" if "color" in recs[0] else "allele"
                col = coloring.Coloring(np.array([r[key] for r in recs]), "color" if key == "color" else "allele")
                _write(out, f"{path.name}.dot", col.to_dot(t), written)
            else:
                _write(out, f"{path.name}.dot", t.to_dot(), written)
        elif path.is_dir() and (path / "estimates.csv").exists():
            _write(out, f"{path.name}-plot-data.csv", plot_data((path / "estimates.csv").read_text(encoding="utf-8")), written)
        elif path.suffix == ".csv" and path.exists():
            _write(out, f"{path.stem}-plot-data.csv", plot_data(path.read_text(encoding="utf-8")), written)
        elif path.exists():
            _write(out, f"{path.stem}.dot", read_tree(path).to_dot(), written)
        else:
            raise FileNotFoundError(f"no such input: {path}")
    _manifest(out, "export", {**cfg, "inputs": inputs}, written)
    for w in written:
        print(out / w)
    return 0


def cmd_verify(cfg: dict, out: Path, workers: int, suites: list[str]) -> int:
    names = [s for item in suites for s in item.split(",") if s.strip()]
    if not names:
        raise UsageError("verify needs --suite NAME (e.g. correspondences, dac-threshold, all)")
    checks = run_suites(names, cfg, workers)
    report = {"passed": all(c.passed for c in checks), "checks": [c.to_dict() for c in checks]}
    out.mkdir(parents=True, exist_ok=True)
    mc.atomic_write_text(out / "report.json", json.dumps(report, indent=2, default=str) + "\n")
    _manifest(out, "verify", {**cfg, "suites": names}, ["report.json"])
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.suite}: {c.name}")
    return 0 if report["passed"] else 1


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML or JSON configuration")
    common.add_argument("--out", metavar="DIR", default="geneaperc-out", help="output directory")
    common.add_argument("--seed", type=int, metavar="U64", help="master seed (overrides config)")
    common.add_argument("--workers", type=int, default=1, metavar="N", help="worker threads")
    common.add_argument("--set", action="append", default=[], metavar="K=V", dest="sets", help="override a config key; repeatable, last wins")
    p = argparse.ArgumentParser(prog="geneaperc", description="Percolation and colourings on branching-process genealogies.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("simulate", parents=[common], help="sample a tree and a percolation/colouring on it")
    sub.add_parser("estimate", parents=[common], help="survival estimates (and optionally a critical bracket) for a plan")
    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("--suite", action="append", default=[], metavar="NAME", help="suite name; repeatable or comma separated")
    sub.add_parser("sweep", parents=[common], help="survival estimates over a parameter grid, with plot data")
    sub.add_parser("oracle", parents=[common], help="exact law by enumeration")
    e = sub.add_parser("export", parents=[common], help="DOT from trees, plot data from estimates")
    e.add_argument("inputs", nargs="*", metavar="INPUT")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        cfg = resolve(args.config, args.sets, section=args.command)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise UsageError("--seed must be an unsigned 64-bit integer")
            cfg["seed"] = args.seed
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.workers, args.suite)
        if args.command == "export":
            return cmd_export(cfg, out, args.workers, args.inputs)
        handler = {"simulate": cmd_simulate, "estimate": cmd_estimate, "sweep": cmd_sweep, "oracle": cmd_oracle}[args.command]
        return handler(cfg, out, args.workers)
    except (UsageError, ConfigError, UnknownSuiteError) as e:
        parser.error(f"{args.command}: {e.args[0] if e.args else e}")
    except OSError as e:
        print(f"geneaperc {args.command}: I/O error: {e}", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as e:
        print(f"geneaperc {args.command}: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
