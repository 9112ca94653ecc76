"""Acceptance criteria, one test each. Every test prints a single PASS/FAIL line."""

import itertools
import time

import numpy as np
import pytest
from oracles import central_diff, dense_abar, max_rel_err, random_problem

from patree.core import EdgeSet, from_edge_set
from patree.data import make_split, make_synthetic, save_edge_list
from patree.experiments import Manifest, adjacency_confusion, execute, write_report
from patree.graphs import (
    GraphRecipe,
    Variant,
    build_edges,
    default_knn_k,
    epsilon_graph,
    intrinsic_graph,
    knn_graph,
    penalty_graph,
)
from patree.models import (
    TrainConfig,
    _encode,
    _init_layers,
    gcn_fit_normalized,
    gcn_loss_grad,
    sgc_fit_smoothed,
    sgc_loss_grad,
    sgc_precompute,
)
from patree.propagation import normalize, smooth
from patree.trees import Leaf, TreeConfig, build_pa_tree, build_rp_tree, leaves


@pytest.fixture
def verdict(capsys):
    def report(num, title, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {num:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
        assert ok, detail

    return report


def test_01_gradient_fidelity(verdict):
    t0 = time.perf_counter()
    worst = {"sgc": 0.0, "gcn": 0.0}
    for i in range(20):
        n = 10 + i % 6
        x, adj, labels = random_problem(n, 3, 3, seed=1000 + i)
        classes, y_tr, _ = _encode(labels)
        rng = np.random.default_rng(i)

        cfg = TrainConfig(k_layers=2, seed=i)
        xs = sgc_precompute(x, adj, 2)[labels.train]
        p = _init_layers([3, len(classes)], cfg, "sgc", classes, rng)
        p.biases[0][...] = rng.normal(0, 0.3, p.biases[0].shape)
        _, g = sgc_loss_grad(p, xs, y_tr, cfg.weight_decay)
        num = central_diff(lambda: sgc_loss_grad(p, xs, y_tr, cfg.weight_decay)[0], p.flat())
        worst["sgc"] = max(worst["sgc"], max_rel_err(g, num))

        cfg = TrainConfig(k_layers=2, hidden_width=6, seed=i)
        abar = normalize(adj)
        p = _init_layers([3, 6, len(classes)], cfg, "gcn", classes, rng)
        for b in p.biases:
            b[...] = rng.normal(0, 0.3, b.shape)
        _, g = gcn_loss_grad(p, abar, x, labels.train, y_tr, cfg.weight_decay)
        num = central_diff(lambda: gcn_loss_grad(p, abar, x, labels.train, y_tr, cfg.weight_decay)[0], p.flat())
        worst["gcn"] = max(worst["gcn"], max_rel_err(g, num))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-4 and elapsed < 10
    verdict(1, "gradient fidelity", ok, f"max rel err SGC {worst['sgc']:.2e}, GCN {worst['gcn']:.2e}; 20 instances in {elapsed:.2f}s")


def test_02_oracle_equivalence(verdict):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 51))
        k = int(rng.integers(0, 11))
        p = rng.uniform(0, 0.5)
        pairs = [q for q in itertools.combinations(range(n), 2) if rng.random() < p]
        e = EdgeSet(n, pairs)
        adj = from_edge_set(n, e)
        x = rng.standard_normal((n, 3))
        oracle = np.linalg.matrix_power(dense_abar(adj.to_dense()), k) @ x
        worst = max(worst, float(np.max(np.abs(smooth(normalize(adj), x, k) - oracle))))
    verdict(2, "normalize+smooth vs dense powers", worst <= 1e-10, f"max abs diff {worst:.2e} over 200 instances")


def _median_balanced(node):
    if isinstance(node, Leaf):
        return True, node.indices.size
    ok_l, nl = _median_balanced(node.left)
    ok_r, nr = _median_balanced(node.right)
    return ok_l and ok_r and nl - nr in (0, 1), nl + nr


def test_03_tree_invariants(verdict):
    rng = np.random.default_rng(3)
    violations = 0
    for i in range(100):
        n = int(rng.integers(1, 1001))
        d = int(rng.integers(1, 21))
        n0 = int(rng.integers(1, 60))
        x = rng.standard_normal((n, d)) * rng.uniform(0.1, 10, d)
        for tree in (build_pa_tree(x, TreeConfig(n0=n0)), build_rp_tree(x, TreeConfig(n0=n0, kind="rp", seed=i))):
            parts = leaves(tree)
            flat = np.concatenate(parts)
            if sorted(flat.tolist()) != list(range(n)) or max(p.size for p in parts) > n0:
                violations += 1
            if tree.config.kind == "pa" and not _median_balanced(tree.root)[0]:
                violations += 1
    verdict(3, "tree invariants", violations == 0, f"{violations} violations over 100 datasets x 2 tree kinds")


def test_04_fusion_invariants(verdict):
    violations, graphs = 0, 0
    for kind in ("blobs", "rings", "two_moons", "smile"):
        x, y = make_synthetic(kind, 300, seed=4)
        for seed in range(10):
            labels = make_split(y, (50, 50, 200), seed)
            e = build_edges(x, labels, GraphRecipe(Variant.FULL), seed=seed)
            violations += len(e & penalty_graph(labels)) + len(intrinsic_graph(labels) - e)
            graphs += 1
    verdict(4, "fusion invariants", violations == 0, f"{violations} violating pairs over {graphs} FULL graphs")


def test_05_desk_accuracy(verdict):
    m = Manifest.from_dict({"dataset": "blobs", "n": "300", "split": "50,50,200", "variant": "full", "k_layers": "2", "runs": "10"})
    r = execute(m)
    sgc, gcn = r.mean("sgc_full"), r.mean("gcn_full")
    ok = sgc >= 0.90 and abs(gcn - sgc) <= 0.05
    verdict(5, "desk-scale accuracy (blobs)", ok, f"SGC K=2 {sgc:.4f}, GCN {gcn:.4f}, gap {abs(gcn - sgc):.4f}")


def test_06_oversmoothing_direction(verdict):
    m = Manifest.from_dict(
        {"protocol": "smoothing", "dataset": "rings", "variant": "full", "models": "sgc", "k_values": "2,50", "runs": "10"}
    )
    r = execute(m)
    k2, k50 = r.mean("sgc_full_k2"), r.mean("sgc_full_k50")
    verdict(6, "oversmoothing direction (two rings)", k50 <= k2, f"SGC K=2 {k2:.4f}, K=50 {k50:.4f}")


def test_07_timing_direction(verdict):
    x, y = make_synthetic("blobs", 2000, seed=7)
    labels = make_split(y, (200, 200, 1600), 0)
    e = build_edges(x, labels, GraphRecipe())
    abar = normalize(from_edge_set(2000, e))
    cfg = TrainConfig(k_layers=2, epochs=200)
    xbar = smooth(abar, x, 2)

    def best_of(fn, reps=3):
        out = []
        for _ in range(reps):
            t0 = time.perf_counter()
            fn()
            out.append(time.perf_counter() - t0)
        return min(out)

    t_sgc = best_of(lambda: sgc_fit_smoothed(xbar, labels, cfg))
    t_gcn = best_of(lambda: gcn_fit_normalized(x, abar, labels, cfg))
    verdict(7, "timing direction (n=2000, 200 epochs)", t_sgc < t_gcn,
            f"SGC {t_sgc * 1e3:.1f} ms, GCN {t_gcn * 1e3:.1f} ms, ratio GCN/SGC {t_gcn / t_sgc:.1f}")


def test_08_confusion_correctness(verdict):
    rng = np.random.default_rng(8)
    n, bad = 15, 0
    allpairs = list(itertools.combinations(range(n), 2))
    for _ in range(50):
        pa, pb = rng.uniform(0, 1, 2)
        a = {p for p in allpairs if rng.random() < pa}
        b = {p for p in allpairs if rng.random() < pb}
        c = adjacency_confusion(EdgeSet(n, list(a)), EdgeSet(n, list(b)), n)
        tp = sum(p in a and p in b for p in allpairs)
        fp = sum(p in a and p not in b for p in allpairs)
        fn = sum(p in b and p not in a for p in allpairs)
        tn = sum(p not in a and p not in b for p in allpairs)
        bad += (c.tn, c.fn, c.fp, c.tp) != (tn, fn, fp, tp) or c.total != n * (n - 1) // 2
    verdict(8, "confusion vs brute force", bad == 0, f"{bad} mismatches over 50 random 15-node pairs")


def test_09_determinism(verdict, tmp_path):
    x, y = make_synthetic("blobs", 120, seed=0)
    gt = tmp_path / "gt.txt"
    save_edge_list(gt, EdgeSet(120, [p for p in itertools.combinations(range(120), 2) if y[p[0]] == y[p[1]]]))
    base = {"n": "120", "split": "20,20,80", "epochs": "40", "runs": "2", "seed": "9"}
    manifests = {
        "accuracy": {},
        "smoothing": {"k_values": "1,2,5"},
        "forest": {"tree": "rp", "forest_sizes": "2,3"},
        "ablation": {},
        "knn": {},
        "confusion": {"ground_truth": str(gt)},
    }
    differing = []
    for proto, extra in manifests.items():
        m = Manifest.from_dict({**base, "protocol": proto, **extra})
        outs = []
        for rep in "ab":
            d = write_report(execute(m), tmp_path / proto / rep)
            outs.append({p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*.csv"))})
        if not outs[0] or outs[0] != outs[1]:
            differing.append(proto)
    verdict(9, "byte-identical CSV reruns", not differing,
            f"{len(manifests) - len(differing)}/{len(manifests)} protocols identical" + (f"; differing: {differing}" if differing else ""))


def _connected(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        parent[find(i)] = find(j)
    return len({find(i) for i in range(n)}) == 1


def test_10_baseline_sanity(verdict):
    rng = np.random.default_rng(10)
    disconnected, knn_bad = 0, 0
    for i in range(40):
        n = int(rng.integers(2, 201))
        d = int(rng.integers(1, 6))
        x = rng.standard_normal((n, d)) * rng.uniform(0.1, 5, d)
        if i % 4 == 0:
            x, _ = make_synthetic(("blobs", "rings", "two_moons", "smile")[i // 4 % 4], max(n, 8), seed=i)
            n = len(x)
        disconnected += not _connected(n, epsilon_graph(x))
        k = default_knn_k(n)
        brute = set()
        for a in range(n):
            dist = sorted((float(np.sqrt(np.sum((x[a] - x[b]) ** 2))), b) for b in range(n) if b != a)
            brute |= {(min(a, b), max(a, b)) for _, b in dist[:k]}
        knn_bad += knn_graph(x).as_set() != brute
    ok = disconnected == 0 and knn_bad == 0
    verdict(10, "baseline sanity", ok, f"{disconnected} disconnected eps-graphs, {knn_bad} k-nn mismatches over 40 instances")
