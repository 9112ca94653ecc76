"""Command-line entry point: ``patree <subcommand> [--manifest FILE] [--set key=value ...]``.

Exit codes: 0 ok, 2 bad configuration, 3 unreadable input file, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .core import SparseAdjacency
from .data import DataFormatError, load_dataset, save_edge_list
from .experiments import Manifest, ManifestError, accuracy, run_experiment
from .graphs import build_edges
from .models import DivergenceError, gcn_fit, predict, save_params, sgc_fit

EXIT_CONFIG, EXIT_PARSE, EXIT_NUMERIC = 2, 3, 4


def _manifest(args, **forced) -> Manifest:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ManifestError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    overrides.update({k: str(v) for k, v in forced.items()})
    return Manifest.from_file(args.manifest, overrides)


def cmd_build_graph(args) -> int:
    m = _manifest(args)
    x, labels = load_dataset(m.dataset_spec(), seed=m.seed)
    edges = build_edges(x, labels, m.recipe(), seed=m.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_edge_list(out / "edges.txt", edges)
    print(f"{m.variant}: {len(edges)} edges over {edges.n} nodes -> {out / 'edges.txt'}")
    return 0


def cmd_train(args) -> int:
    m = _manifest(args)
    x, labels = load_dataset(m.dataset_spec(), seed=m.seed)
    edges = build_edges(x, labels, m.recipe(), seed=m.seed)
    adj = SparseAdjacency.from_edge_set(edges.n, edges)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = m.train_config(seed=m.seed)
    for model in m.models:
        fit = sgc_fit if model == "sgc" else gcn_fit
        params = fit(x, adj, labels, cfg)
        acc = accuracy(predict(params, x, adj), labels.y, labels.test)
        save_params(params, out / f"{model}.params")
        print(f"{model}: test accuracy {acc:.4f} (K={cfg.k_layers}, {len(edges)} edges)")
    return 0


def _run(args, protocol: str | None) -> int:
    m = _manifest(args, **({"protocol": protocol} if protocol else {}))
    report = run_experiment(m, args.out_dir)
    if m.protocol == "confusion":
        for r in report.extra:
            print(f"{r['method']:>20}: tn={r['tn']} fn={r['fn']} fp={r['fp']} tp={r['tp']} "
                  f"removal={r['removal_rate']:.4f} hit={r['hit_rate']:.4f}")
    else:
        for s in report.summary():
            print(f"{s['cell']:>28}: {s['mean']:.4f} +/- {s['std']:.4f} ({s['runs']} runs)")
    print(f"results in {args.out_dir}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="patree", description="PA-tree graph construction with SGC/GCN")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--manifest", type=Path, help="key = value manifest file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a manifest key")
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir", default="results")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    common(sub.add_parser("build-graph", help="write the constructed edge list")).set_defaults(fn=cmd_build_graph)
    common(sub.add_parser("train", help="fit the manifest's models once and report test accuracy")).set_defaults(fn=cmd_train)
    p = common(sub.add_parser("sweep", help="smoothing, forest or plain accuracy runs"))
    p.add_argument("--axis", choices=["smoothing", "forest", "accuracy"], default="smoothing")
    p.set_defaults(fn=lambda a: _run(a, a.axis))
    common(sub.add_parser("compare-adjacency", help="confusion counts vs a ground-truth edge list")).set_defaults(
        fn=lambda a: _run(a, "confusion")
    )
    common(sub.add_parser("ablation", help="the four graph recipes")).set_defaults(fn=lambda a: _run(a, "ablation"))
    common(sub.add_parser("baseline-knn", help="k-nn classifier next to the graph models")).set_defaults(
        fn=lambda a: _run(a, "knn")
    )

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ManifestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
