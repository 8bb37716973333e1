"""Command-line front end.

Subcommands: analyze, train-factual, train-structural, align, eval, import-sim.
Settings come from defaults, then an optional ``key = value`` config file,
then command-line flags.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import platform
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .cotrain import ORDERS, CotrainConfig, MatchResult, run_cotraining
from .encoder import DEFAULT_DIM, load_vectors
from .errors import KGAlignError
from .factual import FactualConfig, factual_similarity, init_factual_params, save_factual_params, train_factual
from .kg import graph_stats, load_openea_dataset, split_seed
from .metrics import DEFAULT_NAME_ATTRIBUTES, EvalReport, cumulative_prf, heterogeneity_report, hits_at_k, mrr
from .simmat import write_similarity
from .structural import StructuralConfig, import_similarity, train_structural

logger = logging.getLogger("kgalign")

THREADS_ENV = "KGALIGN_THREADS"


@dataclass
class RunConfig:
    dataset_dir: str = ""
    vectors_path: Optional[str] = None
    dim: int = DEFAULT_DIM
    output_dir: str = "out"
    rng_seed: int = 0
    train_frac: float = 0.2
    val_frac: float = 0.1
    threads: Optional[int] = None
    top_k: int = 50
    name_attrs: tuple = DEFAULT_NAME_ATTRIBUTES
    factual: FactualConfig = field(default_factory=FactualConfig)
    structural: StructuralConfig = field(default_factory=StructuralConfig)
    cotrain: CotrainConfig = field(default_factory=CotrainConfig)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["name_attrs"] = list(self.name_attrs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        sub = {
            "factual": FactualConfig(**d.pop("factual", {})),
            "structural": StructuralConfig(**d.pop("structural", {})),
            "cotrain": CotrainConfig(**d.pop("cotrain", {})),
        }
        if "name_attrs" in d:
            d["name_attrs"] = tuple(d["name_attrs"])
        return cls(**d, **sub)


def _coerce(value: str, current):
    if isinstance(current, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(value)
    if isinstance(current, float):
        return float(value)
    if isinstance(current, tuple):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if value.strip().lower() in ("none", ""):
        return None
    return value.strip()


_INT_FIELDS = {"threads"}


def apply_setting(cfg: RunConfig, key: str, value: str) -> RunConfig:
    """Set ``key`` (``name`` or ``section.name``) from its text form."""
    key = key.strip().replace("-", "_")
    if "." in key:
        section, name = key.split(".", 1)
        if section not in ("factual", "structural", "cotrain"):
            raise KGAlignError(f"unknown config section {section!r}")
        sub = getattr(cfg, section)
        if name not in {f.name for f in dataclasses.fields(sub)}:
            raise KGAlignError(f"unknown config key {key!r}")
        new = dataclasses.replace(sub, **{name: _coerce(value, getattr(sub, name))})
        return dataclasses.replace(cfg, **{section: new})
    for section in ("factual", "structural", "cotrain"):
        sub = getattr(cfg, section)
        if key in {f.name for f in dataclasses.fields(sub)} and key not in {f.name for f in dataclasses.fields(cfg)}:
            return apply_setting(cfg, f"{section}.{key}", value)
    if key not in {f.name for f in dataclasses.fields(cfg)}:
        raise KGAlignError(f"unknown config key {key!r}")
    current = getattr(cfg, key)
    if key in _INT_FIELDS:
        parsed = None if value.strip().lower() in ("", "none") else int(value)
    else:
        parsed = _coerce(value, current)
    return dataclasses.replace(cfg, **{key: parsed})


def read_config_file(path: str, cfg: Optional[RunConfig] = None) -> RunConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    cfg = cfg or RunConfig()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise KGAlignError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            cfg = apply_setting(cfg, key, value)
    return cfg


def _structural_from_flag(cfg: RunConfig, flag: str) -> RunConfig:
    if flag.startswith("external:"):
        s = dataclasses.replace(cfg.structural, variant="external", external_path=flag.split(":", 1)[1])
    else:
        s = dataclasses.replace(cfg.structural, variant=flag, external_path=None)
    return dataclasses.replace(cfg, structural=s)


def build_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = read_config_file(args.config, cfg)
    simple = {
        "dataset": "dataset_dir",
        "vectors": "vectors_path",
        "dim": "dim",
        "seed": "rng_seed",
        "out": "output_dir",
        "threads": "threads",
        "top_k": "top_k",
    }
    for flag, name in simple.items():
        v = getattr(args, flag, None)
        if v is not None:
            cfg = dataclasses.replace(cfg, **{name: v})
    if getattr(args, "order", None):
        cfg = dataclasses.replace(cfg, cotrain=dataclasses.replace(cfg.cotrain, order=args.order))
    if getattr(args, "max_cycles", None) is not None:
        cfg = dataclasses.replace(cfg, cotrain=dataclasses.replace(cfg.cotrain, max_cycles=args.max_cycles))
    if getattr(args, "structural", None):
        cfg = _structural_from_flag(cfg, args.structural)
    if getattr(args, "name_attrs", None):
        cfg = dataclasses.replace(cfg, name_attrs=tuple(a for a in args.name_attrs.split(",") if a))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise KGAlignError(f"--set expects key=value, got {item!r}")
        cfg = apply_setting(cfg, *item.split("=", 1))
    if cfg.threads is None and os.environ.get(THREADS_ENV):
        cfg = dataclasses.replace(cfg, threads=int(os.environ[THREADS_ENV]))
    return cfg


# -- helpers -------------------------------------------------------------------


def _load(cfg: RunConfig):
    if not cfg.dataset_dir:
        raise KGAlignError("no dataset given (use --dataset)")
    kg1, kg2, alignment = load_openea_dataset(cfg.dataset_dir)
    seed = split_seed(alignment, cfg.train_frac, cfg.val_frac, cfg.rng_seed)
    table = load_vectors(cfg.vectors_path) if cfg.vectors_path else None
    return kg1, kg2, seed, table


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def format_table(rows: dict) -> str:
    width = max(len(k) for k in rows) if rows else 0
    return "\n".join(f"{k:<{width}}  {_fmt(v)}" for k, v in rows.items())


def format_kv(rows: dict) -> str:
    return "\n".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in rows.items())


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def write_matches(path: str, result: MatchResult) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in result.matches:
            fh.write(f"{p.e1}\t{p.e2}\t{p.source}\t{p.cycle}\n")


def write_rankings(path: str, rankings: dict, top_k: Optional[int] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e1, ranked in rankings.items():
            ranked = ranked[:top_k] if top_k else ranked
            fh.write("\t".join([e1, *ranked]) + "\n")


def read_matches(path: str) -> list[tuple[str, str, str, int]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 4:
                raise KGAlignError(f"{path}:{lineno}: expected e1, e2, source, cycle")
            rows.append((fields[0], fields[1], fields[2], int(fields[3])))
    return rows


def read_rankings(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            fields = line.rstrip("\n").split("\t")
            if fields and fields[0]:
                out[fields[0]] = fields[1:]
    return out


def manifest_dict(cfg: RunConfig, result: Optional[MatchResult] = None, command: str = "align") -> dict:
    d = {
        "command": command,
        "config": cfg.to_dict(),
        "versions": {
            "kgalign": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }
    if result is not None:
        d["trainings"] = result.trainings
        d["per_cycle_counts"] = result.per_cycle_counts
        d["per_cycle_hits1"] = result.per_cycle_hits1
        d["reciprocal"] = len(result.reciprocal)
        d["bipartite"] = len(result.bipartite)
    return d


# -- commands ------------------------------------------------------------------


def cmd_analyze(cfg: RunConfig) -> dict:
    kg1, kg2, alignment = load_openea_dataset(cfg.dataset_dir)
    rows: dict = {}
    for idx, kg in ((1, kg1), (2, kg2)):
        st = graph_stats(kg)
        rows.update(
            {
                f"entities_{idx}": len(kg.entities),
                f"rel_triples_{idx}": len(kg.relation_triples),
                f"attr_triples_{idx}": len(kg.attribute_triples),
                f"relations_{idx}": len(kg.relations),
                f"attributes_{idx}": len(kg.attributes),
                f"max_cs_{idx}": st.max_cs,
                f"wcc_r_{idx}": st.wcc_r,
            }
        )
    if alignment.matches:
        rep = heterogeneity_report(kg1, kg2, alignment.matches, cfg.name_attrs)
        rows.update(rep.as_dict())
    else:
        logger.warning("no gold links; heterogeneity metrics skipped")
    os.makedirs(cfg.output_dir, exist_ok=True)
    _write(os.path.join(cfg.output_dir, "analysis.txt"), format_table(rows))
    _write(os.path.join(cfg.output_dir, "analysis.kv"), format_kv(rows))
    print(format_table(rows))
    return rows


def cmd_train_factual(cfg: RunConfig) -> dict:
    kg1, kg2, seed, table = _load(cfg)
    params = init_factual_params(kg1, kg2, cfg.dim, table)
    res = train_factual(seed.train, seed.val, kg1, kg2, params, cfg.factual, cfg.rng_seed)
    os.makedirs(cfg.output_dir, exist_ok=True)
    save_factual_params(os.path.join(cfg.output_dir, "factual.npz"), res.params)
    write_similarity(os.path.join(cfg.output_dir, "factual_sim.txt"), factual_similarity(res.params, kg1, kg2))
    info = {"epochs": res.epochs, "best_val_hits1": res.best_val_hits1}
    print(format_table(info))
    return info


def cmd_train_structural(cfg: RunConfig) -> dict:
    kg1, kg2, seed, _ = _load(cfg)
    model = train_structural(seed.train, seed.val, kg1, kg2, None, cfg.structural, cfg.rng_seed)
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_similarity(os.path.join(cfg.output_dir, "structural_sim.txt"), model.similarity(kg1, kg2))
    info = {"variant": cfg.structural.variant, "epochs": model.epochs, "best_val_hits1": model.best_val_hits1}
    print(format_table(info))
    return info


def cmd_align(cfg: RunConfig) -> MatchResult:
    kg1, kg2, seed, table = _load(cfg)
    result = run_cotraining(
        kg1, kg2, seed, cfg.factual, cfg.structural, cfg.cotrain, cfg.rng_seed, table=table, dim=cfg.dim,
        top_k=cfg.top_k,
    )
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_matches(os.path.join(cfg.output_dir, "matches.tsv"), result)
    write_rankings(os.path.join(cfg.output_dir, "rankings.tsv"), result.rankings, cfg.top_k)
    with open(os.path.join(cfg.output_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest_dict(cfg, result), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{len(result.reciprocal)} reciprocal + {len(result.bipartite)} best-match pairs -> {cfg.output_dir}")
    return result


def cmd_eval(cfg: RunConfig, matches_path: str, rankings_path: Optional[str] = None) -> EvalReport:
    kg1, kg2, alignment = load_openea_dataset(cfg.dataset_dir)
    seed = split_seed(alignment, cfg.train_frac, cfg.val_frac, cfg.rng_seed)
    gold = dict(seed.test)
    rows = read_matches(matches_path)
    stray = [e1 for e1, _, _, _ in rows if e1 not in gold]
    if stray:
        raise KGAlignError(
            f"{len(stray)} matched entities (e.g. {stray[0]!r}) are not in the test split; "
            "dataset or seed differ from the run that produced the matches"
        )
    reciprocal = {e1: e2 for e1, e2, src, _ in rows if src.startswith("reciprocal")}
    rankings = {e1: [e2] for e1, e2, src, _ in rows if not src.startswith("reciprocal")}
    if rankings_path:
        rankings.update({k: v for k, v in read_rankings(rankings_path).items() if k not in reciprocal})
    hits = {k: hits_at_k(rankings, gold, k, reciprocal) for k in (1, 10)}
    order = [c for c in ORDERS[cfg.cotrain.order]]
    harvests: dict = {c: {} for c in order}
    for e1, e2, src, cycle in rows:
        if src.startswith("reciprocal-"):
            comp = src.split("-", 1)[1]
            harvests.setdefault(comp, {}).setdefault(cycle, []).append((e1, e2))
    per_comp = {c: [cyc[k] for k in sorted(cyc)] for c, cyc in harvests.items()}
    report = EvalReport(hits, mrr(rankings, gold, reciprocal), cumulative_prf(per_comp, gold, len(gold), order))
    flat = report.flat()
    print(format_table(flat))
    if cfg.output_dir:
        os.makedirs(cfg.output_dir, exist_ok=True)
        _write(os.path.join(cfg.output_dir, "eval.kv"), format_kv(flat))
    return report


def cmd_import_sim(cfg: RunConfig, matrix_path: str) -> dict:
    kg1, kg2, seed, _ = _load(cfg)
    sm = import_similarity(matrix_path, kg1, kg2)
    val = seed.val
    h1 = float("nan")
    if val:
        sub = sm.restrict([a for a, _ in val], [b for _, b in val])
        h1 = float(np.mean(np.argmax(sub.scores, axis=1) == np.arange(len(val))))
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_similarity(os.path.join(cfg.output_dir, "imported_sim.txt"), sm)
    info = {"rows": sm.shape[0], "cols": sm.shape[1], "val_hits1": h1}
    print(format_table(info))
    return info


# -- argument parsing -------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--dataset", help="OpenEA-format dataset directory")
    p.add_argument("--vectors", help="precomputed text vector file")
    p.add_argument("--dim", type=int, help="embedding dimension for literals/labels")
    p.add_argument("--seed", type=int, help="random seed (also fixes the seed split)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help=f"cap on BLAS threads (fallback: ${THREADS_ENV})")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgalign", description="Hybrid entity alignment for knowledge graphs")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="graph statistics and heterogeneity metrics")
    _common(p)
    p.add_argument("--name-attrs", help="comma-separated name attributes")

    p = sub.add_parser("train-factual", help="train the factual component alone")
    _common(p)

    p = sub.add_parser("train-structural", help="train a structural component alone")
    _common(p)
    p.add_argument("--structural", help="translational | neighbor-agg | external:<path>")

    p = sub.add_parser("align", help="full co-training run")
    _common(p)
    p.add_argument("--order", choices=sorted(ORDERS))
    p.add_argument("--structural", help="translational | neighbor-agg | external:<path>")
    p.add_argument("--max-cycles", type=int)
    p.add_argument("--top-k", type=int, help="candidates kept per row in rankings.tsv")

    p = sub.add_parser("eval", help="score a matches file against the gold test split")
    _common(p)
    p.add_argument("--order", choices=sorted(ORDERS))
    p.add_argument("--matches", required=True)
    p.add_argument("--rankings")

    p = sub.add_parser("import-sim", help="validate and import an external similarity matrix")
    _common(p)
    p.add_argument("--matrix", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = build_config(args)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=cfg.threads):
            if args.command == "analyze":
                cmd_analyze(cfg)
            elif args.command == "train-factual":
                cmd_train_factual(cfg)
            elif args.command == "train-structural":
                cmd_train_structural(cfg)
            elif args.command == "align":
                cmd_align(cfg)
            elif args.command == "eval":
                cmd_eval(cfg, args.matches, args.rankings)
            elif args.command == "import-sim":
                cmd_import_sim(cfg, args.matrix)
    except (KGAlignError, ValueError, OSError) as exc:
        print(f"kgalign: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
