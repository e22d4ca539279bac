"""End-to-end acceptance checks. Each test prints one PASS/FAIL line."""

import time
import warnings

import numpy as np
import pytest
from scipy.stats import spearmanr

from conftest import dense_w_from_rules, pairwise_objective, random_instance, rel_err
from pairpca.cli import main
from pairpca.dapca import FitConfig, fit
from pairpca.dataset import Dataset, ToyConfig, generate_toy, load_csv
from pairpca.eigen import eig_sym, load_model, select_components
from pairpca.gram import (
    gram_cross_term,
    gram_oracle,
    gram_semi_supervised,
    gram_stca,
    gram_supervised,
)
from pairpca.validate import direct_validate, mixing_score, sweep
from pairpca.weights import DeltaSpec, build_delta


@pytest.fixture
def report(capsys):
    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return _report


def _cos(A, B):
    return np.abs(np.sum(A * B, axis=0))


def test_c01_oracle_equivalence(report):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(10_000 + seed)
        inst = random_instance(rng, n_max=200, d_max=15, c_max=5)
        labels, X, Y = inst["labels"], inst["X"], inst["Y"]
        src, tgt = Dataset(X, labels), Dataset(Y)
        d_eff = build_delta(DeltaSpec(inst["delta"], inst["alpha"]), labels)
        ny = Y.shape[0]
        Z = np.vstack([X, Y])
        zeros_d, zeros_a = np.zeros_like(inst["delta"]), np.zeros_like(inst["alpha"])

        w_sup = dense_w_from_rules(labels, 0, inst["delta"], inst["alpha"])
        w_semi = dense_w_from_rules(labels, ny, inst["delta"], inst["alpha"], inst["beta"])
        w_cross = dense_w_from_rules(labels, ny, zeros_d, zeros_a, 0.0,
                                     inst["neighbors"], inst["gamma"])
        gap = X.mean(0) - Y.mean(0)
        q_semi = gram_oracle(Z, w_semi)
        worst = max(
            worst,
            rel_err(gram_supervised(src, d_eff).q, gram_oracle(X, w_sup)),
            rel_err(gram_semi_supervised(src, tgt, d_eff, inst["beta"]).q, q_semi),
            rel_err(gram_stca(src, tgt, d_eff, inst["beta"], inst["phi"]).q,
                    q_semi - inst["phi"] * np.outer(gap, gap)),
            rel_err(gram_cross_term(X, Y, inst["neighbors"], inst["gamma"]),
                    gram_oracle(Z, w_cross)),
        )
    elapsed = time.perf_counter() - t0
    report(1, worst < 1e-10 and elapsed < 30,
           f"max rel err {worst:.2e} over 100 instances, {elapsed:.1f}s")


def test_c02_pca_degeneracy(report, rng):
    Z = rng.normal(size=(150, 6)) @ rng.normal(size=(6, 6))
    n = Z.shape[0]
    vecs = eig_sym(gram_oracle(Z, np.ones((n, n))))[1]
    ref = np.linalg.eigh(np.cov(Z, rowvar=False))[1][:, ::-1]
    worst = _cos(vecs, ref).min()
    report(2, worst >= 1 - 1e-8, f"min |cos| {worst:.12f}")


def test_c03_diagonal_invariance(report, rng):
    worst = 0.0
    for _ in range(20):
        Z = rng.normal(size=(60, 5))
        W = rng.normal(size=(60, 60))
        W = W + W.T
        W2 = W.copy()
        np.fill_diagonal(W2, rng.normal(size=60) * 1e3)
        worst = max(worst, rel_err(gram_oracle(Z, W2), gram_oracle(Z, W)))
    report(3, worst <= 1e-12, f"max rel diff {worst:.2e}")


def test_c04_objective_identity(report):
    worst = 0.0
    for seed in range(30):
        rng = np.random.default_rng(20_000 + seed)
        inst = random_instance(rng, n_max=200, d_max=10, c_max=4)
        labels, X, Y = inst["labels"], inst["X"], inst["Y"]
        d_eff = build_delta(DeltaSpec(inst["delta"], inst["alpha"]), labels)
        q = (gram_semi_supervised(Dataset(X, labels), Dataset(Y), d_eff, inst["beta"]).q
             + gram_cross_term(X, Y, inst["neighbors"], inst["gamma"]))
        W = dense_w_from_rules(labels, Y.shape[0], inst["delta"], inst["alpha"], inst["beta"],
                               inst["neighbors"], inst["gamma"])
        d = X.shape[1]
        E = np.linalg.qr(rng.normal(size=(d, int(rng.integers(1, d + 1)))))[0]
        direct = pairwise_objective(np.vstack([X, Y]), W, E)
        fast = np.trace(E.T @ q @ E)
        worst = max(worst, abs(fast - direct) / max(abs(direct), 1e-300))
    report(4, worst <= 1e-8, f"max rel err {worst:.2e}")


def test_c05_nonnegative_truncation(report, rng):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lam, _ = select_components(np.array([5.0, 2.0, -1.0]), np.eye(3), 3)
        ok = len(lam) == 2
        for _ in range(50):
            A = rng.normal(size=(8, 8))
            vals, vecs = eig_sym(A + A.T)
            if vals[0] < 0:
                continue
            got, _ = select_components(vals, vecs, 8)
            ok &= bool(np.all(got >= -1e-12 * vals[0]))
    report(5, ok, f"(5,2,-1) kept {len(lam)}; random spectra never kept negatives")


def test_c06_dapca_convergence(report):
    src, tgt, _ = generate_toy(ToyConfig(seed=42))
    t0 = time.perf_counter()
    m = fit(src, tgt, FitConfig(method="dapca", alpha=1.0, gamma=100.0, k=5, q=2))
    elapsed = time.perf_counter() - t0
    h = np.array(m.diagnostics["objective"])
    monotone = bool(np.all(np.diff(h) >= -1e-9 * np.abs(h[:-1])))
    it = m.diagnostics["iterations"]
    report(6, monotone and it <= 30 and elapsed < 10,
           f"{it} iterations, stop={m.diagnostics['stop_reason']}, monotone={monotone}, "
           f"{elapsed:.1f}s")


def test_c07_toy_adaptation_win(report):
    da, pc = [], []
    for seed in (42, 43, 44, 45, 46):
        src, tgt, hidden = generate_toy(ToyConfig(seed=seed))
        cfg = FitConfig(method="dapca", alpha=1.0, gamma=100.0, k=5, q=2, seed=seed)
        da.append(direct_validate(src, tgt, hidden, cfg, classifier_k=5).balanced_accuracy)
        pc.append(direct_validate(src, tgt, hidden, FitConfig(method="pca", q=2),
                                  classifier_k=5).balanced_accuracy)
    a, b = float(np.mean(da)), float(np.mean(pc))
    report(7, a >= 0.9 and a - b >= 0.1, f"DAPCA BA {a:.4f}, PCA BA {b:.4f} over 5 seeds")


def test_c08_degeneration_chain(report):
    src, tgt, _ = generate_toy(ToyConfig(seed=42))
    a = fit(src, tgt, FitConfig(method="dapca", gamma=0.0, q=2, components="nonnegative"))
    b = fit(src, tgt, FitConfig(method="sspca", q=2))
    c1 = _cos(a.basis, b.basis).min()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e = fit(src, Dataset(np.empty((0, 3))), FitConfig(method="sspca", beta=0.0, q=1))
        f = fit(src, None, FitConfig(method="spca", q=1))
    c2 = _cos(e.basis, f.basis).min()

    g = fit(src, None, FitConfig(method="pca", q=3))
    ref = np.linalg.eigh(np.cov(src.values, rowvar=False))[1][:, ::-1]
    c3 = _cos(g.basis, ref).min()
    worst = min(c1, c2, c3)
    report(8, worst >= 1 - 1e-8, f"min |cos| dapca/sspca {c1:.10f}, sspca/spca {c2:.10f}, "
           f"uniform/pca {c3:.10f}")


def test_c09_self_consistency_signal(report):
    src, tgt, hidden = generate_toy(ToyConfig(seed=42))
    t0 = time.perf_counter()
    rows = sweep(src, tgt, hidden, FitConfig(method="dapca", k=5, q=2, seed=42),
                 [0.1, 1.0, 10.0], [1.0, 10.0, 100.0], classifier_k=5, seed=42)
    elapsed = time.perf_counter() - t0
    ba = [r["balanced_accuracy"] for r in rows]
    sc = [r["self_consistency"] for r in rows]
    rho = float(spearmanr(sc, ba).statistic)
    report(9, rho >= 0.5 and elapsed < 180,
           f"Spearman rho {rho:.3f}, BA range {min(ba):.3f}-{max(ba):.3f}, {elapsed:.1f}s")


def test_c10_mixing_duplicates(report, rng):
    worst = 0.0
    for _ in range(5):
        P = rng.normal(size=(300, 2))
        _, norm = mixing_score(P, P.copy(), k=20, n_permutations=20,
                               seed=int(rng.integers(1 << 30)))
        worst = max(worst, abs(norm))
    report(10, worst <= 0.1, f"max |normalized| {worst:.4f}")


def test_c11_cli_reproducibility(report, tmp_path):
    for d in ("a", "b"):
        assert main(["toygen", "--seed", "42", "--out", str(tmp_path / d)]) == 0
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
               for n in ("source.csv", "target.csv", "target_labels.csv"))
    a = tmp_path / "a"
    assert main(["fit", "--method", "dapca", "--source", str(a / "source.csv"),
                 "--target", str(a / "target.csv"), "--out", str(tmp_path / "fit")]) == 0
    assert main(["transform", "--model", str(tmp_path / "fit" / "model.txt"),
                 "--input", str(a / "target.csv"), "--out", str(tmp_path / "p.csv")]) == 0
    src, tgt = load_csv(a / "source.csv", "label"), load_csv(a / "target.csv")
    mem = fit(src, tgt, FitConfig(method="dapca", seed=42))
    disk = load_model(tmp_path / "fit" / "model.txt")
    diff = max(np.abs(load_csv(tmp_path / "p.csv").values - tgt.values @ mem.basis).max(),
               np.abs(disk.basis - mem.basis).max())
    report(11, same and diff <= 1e-12, f"byte-identical={same}, max entry diff {diff:.1e}")
