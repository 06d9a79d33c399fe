"""Command-line entry point: ``radsearch search|learn|lambda|bench``.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 internal
consistency failure (optimal searchers disagreeing in ``bench``).
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import statistics
import sys
import time

import numpy as np

from . import __version__
from .dataset import Dataset, load_csv
from .errors import ConfigError, RadSearchError
from .learners import kfold_eval, learn_dlist, learn_radreg, learn_reglist
from .rowtree import build_rowtree, measure_lambda
from .score import ScoreFn, required_spec
from .search import SEARCHERS, SearchConfig
from .synthetic import bernoulli, correlated

FORMAT_VERSION = "radsearch-report/1"
NAIVE_RULE_LIMIT = 2e6
NAIVE_VISIT_LIMIT = 5e9

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_INCONSISTENT = 0, 1, 2, 3

logger = logging.getLogger("radsearch")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_input(p):
    p.add_argument("--input", help="CSV file with a header row")
    p.add_argument("--schema", help='column roles, e.g. "A,B,C cat; y num; age eqfreq:4; id ignore"')
    p.add_argument("--synthetic",
                   help="generate data instead: 'R,M,LAMBDA,SEED' (correlated binary chain) "
                        "or 'bernoulli:R,M,P,SEED'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "tsv", "text"), default="text")
    p.add_argument("--out", help="write the report here instead of standard output")


def _add_search(p, algo_default="rad"):
    p.add_argument("--k", type=int, required=True, help="maximum rule length")
    p.add_argument("--support", default="1", help="minimum matching rows: INT or R/N (ceiling)")
    p.add_argument("--score", default="mean", help="mean, ent, var, strength, impact or bgss")
    p.add_argument("--target", help="real-valued target column")
    p.add_argument("--output-attr", help="categorical output attribute (ent, strength)")
    p.add_argument("--exclude", default="", help="comma-separated attributes kept out of rules")
    p.add_argument("--top", type=int, default=1)
    p.add_argument("--algo", choices=tuple(SEARCHERS), default=algo_default)
    p.add_argument("--prune", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--max-ad-nodes", type=int, default=None)
    p.add_argument("--debug-adtree", action="store_true", help="report AD-tree memory per depth")
    p.add_argument("--yes", action="store_true", help="run even when the naive cost estimate is huge")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="radsearch", description="Optimal conjunctive rule search and rule learners.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("search", help="find the best rules")
    _add_input(p)
    _add_search(p)

    p = sub.add_parser("learn", help="learn a decision list, regression list or RADREG model")
    _add_input(p)
    _add_search(p)
    p.add_argument("--model", choices=("dlist", "reglist", "radreg"), required=True)
    p.add_argument("--max-terms", type=int, default=5)
    p.add_argument("--folds", type=int, default=None)

    p = sub.add_parser("lambda", help="measure rowtree compressibility")
    _add_input(p)
    p.add_argument("--k", type=int, required=True, help="rowtree depth to probe")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--exclude", default="")

    p = sub.add_parser("bench", help="time several searchers on one task")
    _add_input(p)
    _add_search(p)
    p.add_argument("--algos", default="rad,nsn")
    p.add_argument("--repeat", type=int, default=1)
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _parse_synthetic(text: str) -> tuple:
    kind = "correlated"
    if ":" in text:
        kind, text = text.split(":", 1)
    parts = text.split(",")
    if kind not in ("correlated", "bernoulli") or len(parts) not in (3, 4):
        raise UsageError(f"bad --synthetic {text!r}; expected [bernoulli:]R,M,P[,SEED]")
    try:
        r, m, p = int(parts[0]), int(parts[1]), float(parts[2])
        seed = int(parts[3]) if len(parts) == 4 else 0
    except ValueError:
        raise UsageError(f"bad --synthetic {text!r}") from None
    return kind, r, m, p, seed


def load_dataset(args) -> Dataset:
    if args.synthetic:
        if args.input:
            raise UsageError("--input and --synthetic are mutually exclusive")
        kind, r, m, p, seed = _parse_synthetic(args.synthetic)
        if kind == "bernoulli":
            return bernoulli(r, m, p, seed)
        return correlated(r, m, p, seed)
    if not args.input or not args.schema:
        raise UsageError("--input and --schema are required (or use --synthetic)")
    return load_csv(args.input, args.schema)


def resolve_support(text: str, n_rows: int) -> int:
    """``"50"`` -> 50; ``"R/10"`` -> ceil(R / 10)."""
    text = str(text).strip()
    if text.upper().startswith("R/"):
        try:
            div = float(text[2:])
        except ValueError:
            raise UsageError(f"bad --support {text!r}") from None
        if div <= 0:
            raise UsageError("--support R/N needs N > 0")
        return int(math.ceil(n_rows / div))
    try:
        value = int(text)
    except ValueError:
        raise UsageError(f"bad --support {text!r}; expected INT or R/N") from None
    if value < 0:
        raise UsageError("--support must be non-negative")
    return value


def _excluded(ds: Dataset, text: str) -> frozenset:
    names = [s.strip() for s in text.split(",") if s.strip()]
    return frozenset(ds.attribute_index(n) for n in names)


def make_config(ds: Dataset, args) -> SearchConfig:
    score = ScoreFn.named(args.score)
    output = args.output_attr
    spec = required_spec(score, ds, target=args.target, output_attribute=output)
    excluded = _excluded(ds, args.exclude)
    if output is not None:
        excluded |= {ds.attribute_index(output)}
    return SearchConfig(
        k=args.k,
        n_support=resolve_support(args.support, ds.n_rows),
        score=score,
        spec=spec,
        top_n=args.top,
        excluded_attributes=excluded,
        pruning=args.prune,
        threads=args.threads,
        max_ad_nodes=args.max_ad_nodes if args.max_ad_nodes is not None else SearchConfig.max_ad_nodes,
    )


def naive_cost(ds: Dataset, cfg: SearchConfig) -> tuple:
    """``(rules, row visits)`` of a naive search over all rules of length <= k."""
    # elementary symmetric polynomials of the arities count rules per length
    e = [1.0] + [0.0] * cfg.k
    for m in cfg.eligible_attributes(ds):
        for q in range(cfg.k, 0, -1):
            e[q] += e[q - 1] * ds.arities[m]
    rules = sum(e)
    return rules, rules * float(ds.n_rows)


def _guard_naive(ds, cfg, args, algos):
    if "naive" not in algos:
        return
    rules, visits = naive_cost(ds, cfg)
    if rules > NAIVE_RULE_LIMIT or visits > NAIVE_VISIT_LIMIT:
        msg = f"naive search scores about {rules:.3g} rules with {visits:.3g} row visits"
        if not args.yes:
            raise UsageError(msg + "; pass --yes to run it anyway")
        logger.warning(msg)


def config_echo(args, ds: Dataset, cfg: SearchConfig = None) -> dict:
    echo = {
        k: v for k, v in sorted(vars(args).items())
        if k not in ("out", "format", "verbose") and v is not None
    }
    echo["n_rows"] = ds.n_rows
    echo["n_attributes"] = ds.n_attributes
    if cfg is not None:
        echo["n_support_resolved"] = cfg.n_support
        echo["statvec"] = list(cfg.spec.labels)
    return echo


def rule_records(ds: Dataset, result) -> list:
    out = []
    for rank, e in enumerate(result.entries, start=1):
        out.append({
            "rank": rank,
            "rule": e.rule.format(ds),
            "literals": [[ds.attribute_names[a], ds.levels[a][v]] for a, v in e.rule],
            "score": e.score,
            "n_match": _n_match(e.sumstats, result.labels),
            "sumstats": [float(x) for x in e.sumstats],
        })
    return out


def _n_match(sumstats, labels) -> float:
    if labels and labels[0] == "1":
        return float(sumstats[0])
    return float(np.sum(sumstats))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_search(args) -> dict:
    ds = load_dataset(args)
    cfg = make_config(ds, args)
    _guard_naive(ds, cfg, args, {args.algo})
    result = SEARCHERS[args.algo](ds, cfg)
    stats = result.stats.as_dict()
    if args.debug_adtree:
        stats["ad_memory_bytes_estimate"] = stats["ad_nodes"] * (8 * cfg.spec.dim + 200)
    return {
        "format_version": FORMAT_VERSION,
        "command": "search",
        "config": config_echo(args, ds, cfg),
        "statvec": list(result.labels),
        "results": rule_records(ds, result),
        "statistics": stats,
    }


def cmd_learn(args) -> dict:
    ds = load_dataset(args)
    if args.model == "radreg" and args.max_terms < 1:
        raise UsageError("--max-terms must be >= 1")
    if args.model == "dlist":
        if args.output_attr is None or args.target is not None:
            raise UsageError("dlist needs --output-attr and no --target")
    elif args.target is None or args.output_attr is not None:
        raise UsageError(f"{args.model} needs --target and no --output-attr")
    support = resolve_support(args.support, ds.n_rows)
    searcher = SEARCHERS[args.algo]
    excluded = _excluded(ds, args.exclude)
    if args.folds is not None:
        # fail fast before any training
        if args.folds < 2 or args.folds > ds.n_rows or ds.n_rows // args.folds < support:
            raise UsageError(f"--folds {args.folds} is infeasible for {ds.n_rows} rows "
                             f"with support {support}; use fewer folds")

    def fit(data, rows=None):
        common = dict(k=args.k, n_support=support, searcher=searcher, rows=rows,
                      excluded=excluded, threads=args.threads)
        if args.model == "dlist":
            return learn_dlist(data, args.output_attr, **common)
        if args.model == "reglist":
            return learn_reglist(data, args.target, **common)
        return learn_radreg(data, args.target, max_terms=args.max_terms, **common)

    t0 = time.perf_counter()
    model = fit(ds)
    report = {
        "format_version": FORMAT_VERSION,
        "command": "learn",
        "config": config_echo(args, ds),
        "model_text": model.to_text(ds),
        "model": model.to_dict(ds),
        "statistics": {"training_loss": model.loss(ds, None),
                       "elapsed_seconds": time.perf_counter() - t0},
    }
    report["config"]["n_support_resolved"] = support
    if args.folds is not None:
        report["cross_validation"] = kfold_eval(ds, fit, args.folds, args.seed, support).as_dict()
    return report


def lambda_probe(ds: Dataset, k: int, samples: int, seed: int, excluded=frozenset()) -> dict:
    eligible = [m for m in range(ds.n_attributes) if m not in excluded]
    if k < 1 or k > len(eligible):
        raise UsageError(f"--k must be between 1 and {len(eligible)}")
    rng = np.random.default_rng(seed)
    stats = np.ones((ds.n_rows, 1))
    per_subset = []
    survivors = parents = 0
    for _ in range(samples):
        subset = sorted(int(a) for a in rng.choice(eligible, size=k, replace=False))
        rt = build_rowtree(ds, stats, subset)
        lam = measure_lambda(rt)
        names = [ds.attribute_names[a] for a in subset]
        per_subset.append({"attributes": names, "lambda": lam, "stored_rows": rt.stored_row_count()})
        for d in range(k):
            for node in rt.levels[d]:
                parents += len(node.rows)
                survivors += sum(len(c.rows) for c in node.children.values())
    values = [s["lambda"] for s in per_subset if s["lambda"] is not None]
    return {
        "mean_lambda": float(np.mean(values)) if values else None,
        "pooled_lambda": survivors / parents if parents else None,
        "min_lambda": min(values) if values else None,
        "max_lambda": max(values) if values else None,
        "std_lambda": float(np.std(values)) if values else None,
        "measurable_subsets": len(values),
        "subsets": per_subset,
    }


def cmd_lambda(args) -> dict:
    ds = load_dataset(args)
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    probe = lambda_probe(ds, args.k, args.samples, args.seed, _excluded(ds, args.exclude))
    return {
        "format_version": FORMAT_VERSION,
        "command": "lambda",
        "config": config_echo(args, ds),
        "results": probe,
        "statistics": {},
    }


OPTIMAL = ("rad", "nsn", "naive")


def cmd_bench(args) -> dict:
    ds = load_dataset(args)
    cfg = make_config(ds, args)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    unknown = [a for a in algos if a not in SEARCHERS]
    if unknown or not algos:
        raise UsageError(f"unknown algorithms {unknown}; choose from {list(SEARCHERS)}")
    if args.repeat < 1:
        raise UsageError("--repeat must be >= 1")
    _guard_naive(ds, cfg, args, set(algos))
    runs = {}
    for algo in algos:
        times, result = [], None
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            result = SEARCHERS[algo](ds, cfg)
            times.append(time.perf_counter() - t0)
        runs[algo] = {
            "times_seconds": times,
            "median_seconds": statistics.median(times),
            "best_score": result.best_score if result.entries else None,
            "best_rule": result.best.rule.format(ds) if result.entries else None,
            "statistics": result.stats.as_dict(),
        }
    base = runs.get("rad") or runs[algos[0]]
    base_name = "rad" if "rad" in runs else algos[0]
    speedups_seconds = {
        a: (r["median_seconds"] / base["median_seconds"] if base["median_seconds"] > 0 else None)
        for a, r in runs.items()
    }
    opt_scores = [runs[a]["best_score"] for a in algos if a in OPTIMAL]
    consistent = all(_same_score(opt_scores[0], s) for s in opt_scores[1:]) if opt_scores else True
    eligible = cfg.eligible_attributes(ds)
    ineligible = frozenset(range(ds.n_attributes)) - set(eligible)
    lam = lambda_probe(ds, cfg.k, 10, args.seed, ineligible)
    return {
        "format_version": FORMAT_VERSION,
        "command": "bench",
        "config": config_echo(args, ds, cfg),
        "results": {
            "runs": runs,
            "relative_time_vs_" + base_name + "_seconds": speedups_seconds,
            "optimal_scores_agree": consistent,
            "measured_lambda": lam["pooled_lambda"],
        },
        "statistics": {},
    }


def _same_score(a, b) -> bool:
    if a is None or b is None:
        return a is b
    if a == b:
        return True
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


COMMANDS = {"search": cmd_search, "learn": cmd_learn, "lambda": cmd_lambda, "bench": cmd_bench}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"
    if fmt == "tsv":
        return _render_tsv(report)
    return _render_text(report)


def _render_tsv(report: dict) -> str:
    buf = io.StringIO()
    cmd = report["command"]
    if cmd == "search":
        labels = report["statvec"]
        buf.write("\t".join(["rank", "rule", "score", "n_match"] + labels) + "\n")
        for r in report["results"]:
            row = [str(r["rank"]), r["rule"], repr(r["score"]), repr(r["n_match"])]
            row.extend(repr(x) for x in r["sumstats"])
            buf.write("\t".join(row) + "\n")
    elif cmd == "learn":
        buf.write("line\tmodel\n")
        for i, line in enumerate(report["model_text"].splitlines(), start=1):
            buf.write(f"{i}\t{line}\n")
    elif cmd == "lambda":
        buf.write("attributes\tlambda\tstored_rows\n")
        for s in report["results"]["subsets"]:
            buf.write(f"{','.join(s['attributes'])}\t{s['lambda']}\t{s['stored_rows']}\n")
    else:
        buf.write("algo\tmedian_seconds\tbest_score\tbest_rule\n")
        for a, r in report["results"]["runs"].items():
            buf.write(f"{a}\t{r['median_seconds']:.6f}\t{r['best_score']}\t{r['best_rule']}\n")
    return buf.getvalue()


def _render_text(report: dict) -> str:
    cmd = report["command"]
    lines = []
    if cmd == "search":
        lines.append(f"statistics vector: ({', '.join(report['statvec'])})")
        if not report["results"]:
            lines.append("no rule meets the support threshold")
        for r in report["results"]:
            lines.append(f"{r['rank']:>3}. {r['rule']}    score={r['score']:.6g}  "
                         f"n={r['n_match']:g}  sumstats=({', '.join(f'{x:g}' for x in r['sumstats'])})")
        st = report["statistics"]
        lines.append(f"[{st['algorithm']}] cubes={st['cubes_evaluated']} rules={st['rules_scored']} "
                     f"rowtrees={st['rowtrees_built']} ad_nodes={st['ad_nodes']} "
                     f"time={st['elapsed_seconds']:.3f}s")
    elif cmd == "learn":
        lines.append(report["model_text"])
        lines.append(f"training loss: {report['statistics']['training_loss']:.6g}")
        cv = report.get("cross_validation")
        if cv:
            lines.append(f"{len(cv['per_fold'])}-fold CV loss: {cv['mean']:.6g} ± {cv['stderr']:.3g}")
    elif cmd == "lambda":
        res = report["results"]
        lines.append(f"mean lambda over {res['measurable_subsets']} subsets: {res['mean_lambda']}")
        lines.append(f"pooled lambda: {res['pooled_lambda']}  range: [{res['min_lambda']}, {res['max_lambda']}]")
    else:
        res = report["results"]
        for a, r in res["runs"].items():
            times = ", ".join(f"{t:.3f}" for t in r["times_seconds"])
            lines.append(f"{a:>6}: median {r['median_seconds']:.3f}s  [{times}]  best={r['best_score']}  "
                         f"{r['best_rule']}")
        rel = next(v for k, v in res.items() if k.startswith("relative_time"))
        lines.append("time relative to baseline: " + ", ".join(
            f"{a}={v:.2f}x" for a, v in rel.items() if v is not None))
        lines.append(f"measured lambda: {res['measured_lambda']}")
        lines.append("optimal searchers agree" if res["optimal_scores_agree"]
                     else "OPTIMAL SEARCHERS DISAGREE")
    return "\n".join(lines) + "\n"


def strip_timing(obj):
    """Copy of a report without wall-clock fields (keys ending in ``_seconds``)."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if not k.endswith("_seconds")}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"radsearch: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        report = COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"radsearch: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RadSearchError, OSError) as exc:
        print(f"radsearch: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    text = render(report, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if report["command"] == "bench" and not report["results"]["optimal_scores_agree"]:
        print("radsearch: optimal searchers returned different best scores", file=sys.stderr)
        return EXIT_INCONSISTENT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
