"""Command-line front end.

Subcommands: fit, learn, query, sample, compare, ceg, evaluate, export-dot,
predict.  Datasets are CSV files (records by default, contingency counts with
``--freq-column``) or the bundled fixtures ``builtin:titanic`` and
``builtin:asym``.  Models round-trip through ``.sevt.json`` files.

Every run is pure given (inputs, flags, seed); learn and evaluate also write
a ``<out>.manifest.json`` with the command line, SHA-256 digests of the
inputs, the seed, the library version and the wall-clock duration.  Exit
codes: 0 success, 1 I/O failure, 2 validation failure, 3 numeric failure.
Set ``STAGEDTREE_COLOR=0`` to disable ANSI highlighting in reports.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, datasets, estimation, learn, query
from .ceg import ceg as build_ceg, ceg_adjmat, ceg_to_dot, tree_to_dot
from .data import Dataset, load_counts_csv, load_model, load_records_csv, save_model
from .divergences import parse_divergence
from .evaluation import ALGORITHMS, evaluate

SCORE_FLAGS = {"bic": "neg_bic", "aic": "neg_aic", "loglik": "loglik"}


def _color_enabled() -> bool:
    return sys.stdout.isatty() and os.environ.get("STAGEDTREE_COLOR") != "0"


def _emph(text: str) -> str:
    return f"\033[1m{text}\033[0m" if _color_enabled() else text


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _load_dataset(args) -> tuple[Dataset, dict[str, str]]:
    """Dataset plus {source: digest} for the manifest."""
    spec = args.data
    if spec is None:
        raise ValueError("this command needs --data")
    order = args.order.split(",") if getattr(args, "order", None) else None
    if spec == "builtin:titanic":
        ds = datasets.titanic()
        digest = _sha256(datasets.titanic_counts_csv())
    elif spec == "builtin:asym":
        ds = datasets.asym()
        digest = _sha256(repr(ds.counts.tolist()).encode())
    else:
        with open(spec, "rb") as fh:
            raw = fh.read()
        digest = _sha256(raw)
        freq = getattr(args, "freq_column", None)
        if freq:
            ds = load_counts_csv(raw, freq_column=freq)
        else:
            ds = load_records_csv(raw)
    if order:
        ds = ds.reorder(order)
    return ds, {spec: digest}


def _read_model(path: str) -> tuple:
    with open(path, "rb") as fh:
        raw = fh.read()
    return load_model(raw), {path: _sha256(raw)}


def _write_out(args, text: str) -> None:
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_model(path: str, model) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(model))


def _write_manifest(out_path: str, inputs: dict[str, str], seed, started: float) -> None:
    manifest = {
        "command": sys.argv[1:],
        "inputs": inputs,
        "seed": seed,
        "version": __version__,
        "duration_s": round(time.perf_counter() - started, 6),
    }
    with open(out_path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def _initial_model(args, ds: Dataset):
    build = estimation.full if args.init == "full" else estimation.indep
    return build(
        ds,
        join_unobserved=args.join_unobserved,
        lambda_=args.lambda_,
        name_unobserved=args.name_unobserved,
    )


def _search_config(args) -> learn.SearchConfig:
    return learn.SearchConfig(
        score=SCORE_FLAGS[args.score],
        scope=frozenset(args.scope.split(",")) if args.scope else None,
        seed=args.seed,
        max_iter=args.max_iter,
        thr=args.thr,
        k=args.k,
        distance=parse_divergence(args.distance),
        linkage=args.linkage,
    )


# -- subcommand handlers -------------------------------------------------------


def cmd_fit(args) -> int:
    ds, _ = _load_dataset(args)
    model = _initial_model(args, ds)
    _write_model(args.out, model)
    print(_emph(estimation.score(model).report()))
    return 0


def cmd_learn(args) -> int:
    started = time.perf_counter()
    ds, inputs = _load_dataset(args)
    model = _initial_model(args, ds)
    cfg = _search_config(args)
    model = ALGORITHMS[args.alg](model, cfg)
    _write_model(args.out, model)
    _write_manifest(args.out, inputs, args.seed, started)
    print(_emph(estimation.score(model).report()))
    return 0


def cmd_query(args) -> int:
    model, _ = _read_model(args.model)
    if args.what == "prob":
        event = {}
        if args.event:
            for part in args.event.split(","):
                var, _, level = part.partition("=")
                if not level:
                    raise ValueError(f"bad event term {part!r}, expected Var=Level")
                event[var] = level
        print(f"{query.prob(model, event, log=args.log):.7f}")
    elif args.what == "stage":
        path = tuple(args.path.split(","))
        print(query.get_stage(model, path))
    else:  # paths
        for p in query.get_path(model, args.var, args.stage):
            print(",".join(p))
    return 0


def cmd_sample(args) -> int:
    model, _ = _read_model(args.model)
    rows = query.sample_from(model, args.n, args.seed)
    lines = [",".join(model.tree.names)]
    lines.extend(",".join(r) for r in rows)
    _write_out(args, "\n".join(lines) + "\n")
    return 0


def cmd_compare(args) -> int:
    a, _ = _read_model(args.model_a)
    b, _ = _read_model(args.model_b)
    equal, diff = query.compare_stages(a, b, method=args.method)
    print("TRUE" if equal else "FALSE")
    for d, paths in enumerate(diff.by_stratum):
        for p in paths:
            print(f"stratum {d}: {','.join(p) if p else '<root>'}")
    return 0


def cmd_ceg(args) -> int:
    model, _ = _read_model(args.model)
    graph = build_ceg(model)
    if args.format == "dot":
        _write_out(args, ceg_to_dot(graph))
    else:  # adjmat-csv
        mat = ceg_adjmat(graph)
        lines = ["," + ",".join(graph.order)]
        for name, row in zip(graph.order, mat):
            lines.append(name + "," + ",".join(str(int(x)) for x in row))
        _write_out(args, "\n".join(lines) + "\n")
    return 0


def cmd_export_dot(args) -> int:
    model, _ = _read_model(args.model)
    _write_out(args, tree_to_dot(model))
    return 0


def cmd_predict(args) -> int:
    model, _ = _read_model(args.model)
    with open(args.data, "rb") as fh:
        raw = fh.read()
    import csv
    import io

    rows = list(csv.DictReader(io.StringIO(raw.decode("utf-8"))))
    if not rows:
        raise ValueError("no rows to predict")
    labels = query.predict(model, args.class_var, rows)
    _write_out(args, "\n".join(labels) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    ds, inputs = _load_dataset(args)
    cfg = _search_config(args)
    report = evaluate(
        ds, args.alg, seed=args.seed, cfg=cfg, n_splits=args.splits, init=args.init
    )
    _write_out(args, report.to_csv())
    if args.out:
        _write_manifest(args.out, inputs, args.seed, started)
    return 0


# -- parser ---------------------------------------------------------------------


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="CSV path, builtin:titanic or builtin:asym")
    p.add_argument("--freq-column", help="treat --data as a counts table with this frequency column")
    p.add_argument("--order", help="comma-separated variable order")


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--init", choices=["full", "indep"], default="full",
                   help="initial staging (default full)")
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.0,
                   help="Laplace smoothing (default 0)")
    p.add_argument("--no-join-unobserved", dest="join_unobserved",
                   action="store_false", help="keep zero-count subtrees")
    p.add_argument("--name-unobserved", default="na",
                   help="label of the unobserved stage (default na)")


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--score", choices=sorted(SCORE_FLAGS), default="bic",
                   help="score maximized by the search (default bic)")
    p.add_argument("--thr", type=float, default=0.1, help="joining threshold (bj)")
    p.add_argument("--k", type=int, default=2, help="stages per stratum (hclust/kmeans)")
    p.add_argument("--distance", default="kl",
                   help="kl, tv, hl, bh, cd, lp:<p> or ry:<alpha>")
    p.add_argument("--linkage", choices=sorted(learn.LINKAGES), default="complete")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--max-iter", type=int, default=100, help="iterations (bhcr)")
    p.add_argument("--scope", help="comma-separated variables whose strata are searched")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stagedtrees",
        description="Learn, query and transform staged event tree models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit an initial full/indep model")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--out", default="model.sevt.json", help="model output path")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("learn", help="run a staging search")
    _add_data_flags(p)
    _add_fit_flags(p)
    _add_search_flags(p)
    p.add_argument("--alg", choices=sorted(ALGORITHMS), required=True)
    p.add_argument("--out", default="model.sevt.json", help="model output path")
    p.set_defaults(handler=cmd_learn)

    p = sub.add_parser("query", help="query a fitted model")
    p.add_argument("what", choices=["prob", "stage", "paths"])
    p.add_argument("--model", required=True, help="model .sevt.json path")
    p.add_argument("--event", help="Var=Level,... for prob")
    p.add_argument("--log", action="store_true", help="log probability")
    p.add_argument("--path", help="comma-separated level labels for stage")
    p.add_argument("--var", help="variable for paths")
    p.add_argument("--stage", help="stage id for paths")
    p.set_defaults(handler=cmd_query)

    p = sub.add_parser("sample", help="sample records from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("compare", help="compare the stagings of two models")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.add_argument("--method", choices=["stages", "naive", "hamming"],
                   default="stages")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("ceg", help="export the chain event graph")
    p.add_argument("model", help="model .sevt.json path")
    p.add_argument("--format", choices=["dot", "adjmat-csv"], default="dot")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_ceg)

    p = sub.add_parser("export-dot", help="export the staged tree as DOT")
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_export_dot)

    p = sub.add_parser("predict", help="predict a class variable for CSV rows")
    p.add_argument("--model", required=True)
    p.add_argument("--class", dest="class_var", required=True)
    p.add_argument("--data", required=True, help="CSV of the other variables")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("evaluate", help="seeded 80/20 train/test benchmark")
    _add_data_flags(p)
    _add_search_flags(p)
    p.add_argument("--alg", choices=sorted(ALGORITHMS), required=True)
    p.add_argument("--init", choices=["full", "indep"], default=None,
                   help="initial staging (defaults per algorithm)")
    p.add_argument("--splits", type=int, default=10)
    p.add_argument("--out", help="report CSV path (stdout otherwise)")
    p.set_defaults(handler=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"error: numeric failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
