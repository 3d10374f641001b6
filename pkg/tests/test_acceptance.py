"""Acceptance suite: one test and one printed verdict line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
are produced; they are repeated in the terminal summary either way.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy import integrate, special

from embedq.cli import main as cli_main
from embedq.ensemble import embed, embedding_plan, sample_kbody
from embedq.observables import (
    SpectralResult,
    chi2_per_bin,
    diagonalize,
    survival_mc,
    survival_theory,
    theory_bin_density,
)
from embedq.qfunc import moment_closed_form, q_factorial, q_hermite, weight_pdf, weight_quadrature
from embedq.qparam import SystemSpec, q_begue, q_fegoe, q_fegue, q_for

import ensemble_cache
import oracles

# printed tables: (N, m) -> list of (first k, last k, value); "k >= j" rows run to k = m
PRINTED_FERMION_Q_TABLE = {
    (12, 6): [(1, 1, "0.735"), (2, 2, "0.287"), (3, 3, "0.057"), (4, 4, "0.005"), (5, 6, "0.000")],
    (20, 8): [(1, 1, "0.814"), (2, 2, "0.417"), (3, 3, "0.119"), (4, 4, "0.015"), (5, 5, "0.001"), (6, 8, "0.000")],
    (50, 10): [(1, 1, "0.879"), (2, 2, "0.567"), (3, 3, "0.239"), (4, 4, "0.053"), (5, 5, "0.003"), (6, 10, "0.000")],
}
PRINTED_BOSON_Q_TABLE = {
    (5, 10): [(1, 1, "0.969"), (2, 2, "0.861"), (3, 3, "0.664"), (4, 4, "0.405"), (5, 5, "0.172"),
              (6, 6, "0.045"), (7, 7, "0.007"), (8, 10, "0.000")],
    (10, 20): [(1, 1, "0.984"), (2, 2, "0.932"), (3, 3, "0.840"), (4, 4, "0.712"), (5, 5, "0.556"),
               (6, 6, "0.392"), (7, 7, "0.242"), (8, 8, "0.127"), (9, 9, "0.054"), (10, 10, "0.018"),
               (11, 11, "0.005"), (12, 12, "0.001"), (13, 20, "0.000")],
}
PRINTED_FERMION_Q = {k: float(v) for lo, hi, v in PRINTED_FERMION_Q_TABLE[12, 6] for k in range(lo, hi + 1)}

CHI2_BOUND = 2.0


def _table_mismatches(table, fns):
    bad, cells = [], 0
    for (N, m), rows in table.items():
        for lo, hi, printed in rows:
            cells += 1
            for name, fn in fns.items():
                got = [f"{fn(N, m, k):.3f}" for k in range(lo, hi + 1)]
                if any(g != printed for g in got):
                    label = f"k={lo}" if lo == hi else f"k>={lo}"
                    bad.append(f"{name}({N},{m},{label}) {'/'.join(sorted(set(got)))} vs {printed}")
    return cells, bad


def test_criterion_01_fermion_q_table(report):
    t0 = time.perf_counter()
    cells, bad = _table_mismatches(PRINTED_FERMION_Q_TABLE, {"FEGUE": q_fegue, "FEGOE": q_fegoe})
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 1.0
    detail = f"{cells} printed rows x 2 ensembles, {len(bad)} mismatches in {elapsed:.3f}s"
    if bad:
        detail += "; " + "; ".join(bad)
    assert report(1, "printed fermion q table", ok, detail), detail


def test_criterion_02_boson_q_table(report):
    t0 = time.perf_counter()
    cells, bad = _table_mismatches(PRINTED_BOSON_Q_TABLE, {"BEGUE": q_begue})
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 1.0 and cells == 21
    detail = f"{cells} printed rows, {len(bad)} mismatches in {elapsed:.3f}s"
    if bad:
        detail += "; " + "; ".join(bad)
    assert report(2, "printed boson q table", ok, detail), detail


def test_criterion_03_moment_identities(report):
    polys = {
        2: lambda q: 2 + q,
        3: lambda q: 5 + 6 * q + 3 * q**2 + q**3,
        4: lambda q: 14 + 28 * q + 28 * q**2 + 20 * q**3 + 10 * q**4 + 4 * q**5 + q**6,
    }
    qs = np.random.default_rng(2024).random(20)
    poly_err = max(abs(moment_closed_form(n, q) / p(q) - 1) for n, p in polys.items() for q in qs)
    quad_err = 0.0
    for q in (0.0, 0.3, 0.7, 0.95):
        x0 = 2 / math.sqrt(1 - q)
        for n in (1, 2, 3, 4):
            num = integrate.quad(lambda x: x ** (2 * n) * weight_pdf(x, q), -x0, x0, limit=400,
                                 epsabs=1e-13, epsrel=1e-12, points=[0.0])[0]
            quad_err = max(quad_err, abs(num / moment_closed_form(n, q) - 1))
    ok = poly_err < 1e-12 and quad_err < 1e-6
    detail = f"max rel error vs polynomials {poly_err:.2e} (20 random q), vs quadrature {quad_err:.2e}"
    assert report(3, "moment identities", ok, detail), detail


def test_criterion_04_orthogonality(report):
    worst = 0.0
    for q in (0.2, 0.5, 0.8):
        x, w = weight_quadrature(q)
        H = [q_hermite(n, x, q) for n in range(7)]
        for n in range(7):
            for m in range(7):
                val = float(np.dot(w, H[n] * H[m]))
                ref = q_factorial(n, q) if n == m else 0.0
                worst = max(worst, abs(val - ref) / q_factorial(max(n, m), q))
    ok = worst < 1e-6
    detail = f"max relative deviation {worst:.2e} over n, m <= 6 and q in (0.2, 0.5, 0.8)"
    assert report(4, "q-Hermite orthogonality", ok, detail), detail


def test_criterion_05_embedding_oracle(report):
    kinds = {("fermion", 1): "FEGOE", ("fermion", 2): "FEGUE", ("boson", 1): "BEGOE", ("boson", 2): "BEGUE"}
    t0 = time.perf_counter()
    worst, cases = 0.0, 0
    for (stats, beta), kind in kinds.items():
        for N in range(1, 6):
            for m in range(1, 5):
                if stats == "fermion" and m > N:
                    continue
                for k in range(1, m + 1):
                    spec = SystemSpec(N, m, k, kind)
                    v = sample_kbody(spec, 7 * cases + 1)
                    basis, kconfigs, plan = embedding_plan(spec)
                    err = np.abs(embed(v, basis, kconfigs, plan) - oracles.brute_embed(v, N, m, k, stats)).max()
                    worst = max(worst, float(err))
                    cases += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 120
    detail = f"{cases} (N, m, k, statistics, beta) cases, max |diff| {worst:.1e}, {elapsed:.1f}s"
    assert report(5, "embedding vs operator products", ok, detail), detail


def test_criterion_06_mu4_convergence(report):
    t0 = time.perf_counter()
    gue = ensemble_cache.density("FEGUE", 12, 6, 2, 500)
    goe = ensemble_cache.density("FEGOE", 12, 6, 6, 500)
    elapsed = time.perf_counter() - t0
    target = 2 + PRINTED_FERMION_Q[2]
    a, b = gue.moment(4), goe.moment(4)
    ok = abs(a / target - 1) < 0.02 and abs(b / 2.0 - 1) < 0.02
    detail = (f"FEGUE(12,6,2) mu4 {a:.4f} +/- {gue.moment_stderr(4):.4f} vs {target:.3f}; "
              f"FEGOE(12,6,6) mu4 {b:.4f} +/- {goe.moment_stderr(4):.4f} vs 2.000; {elapsed:.0f}s")
    assert report(6, "spectral mu4 convergence", ok, detail), detail


def _density_chi2(kind, N, m, ks, qfn):
    out = []
    for k in ks:
        h = ensemble_cache.density(kind, N, m, k, 200).histogram
        expected = theory_bin_density(h.edges, qfn(N, m, k))
        out.append((k, chi2_per_bin(h, expected), chi2_per_bin(h, expected, "stderr")))
    return out


def test_criterion_07_density_shape(report):
    fer = _density_chi2("FEGOE", 12, 6, range(1, 7), q_fegoe)
    bos = _density_chi2("BEGUE", 5, 10, range(1, 11), q_begue)
    bad = [f"{name} k={k}" for name, rows in (("FEGOE", fer), ("BEGUE", bos)) for k, c, _ in rows if not c < CHI2_BOUND]
    fmt = lambda rows: " ".join(f"k{k}={c:.2f}({s:.1f})" for k, c, s in rows)
    detail = (f"chi2/bin, 200 members [stderr-based in brackets]. FEGOE(12,6): {fmt(fer)}; "
              f"BEGUE(5,10): {fmt(bos)}; above {CHI2_BOUND}: {', '.join(bad) or 'none'}")
    assert report(7, "spectral density shape", not bad, detail), detail


def test_criterion_08_ldos_shape(report):
    rows = []
    for k in range(2, 7):
        h = ensemble_cache.quench(k, 200).ldos
        expected = theory_bin_density(h.edges, PRINTED_FERMION_Q[k])
        rows.append((k, chi2_per_bin(h, expected), chi2_per_bin(h, expected, "stderr"), h.events))
    bad = [f"k={k}" for k, c, _, _ in rows if not c < CHI2_BOUND]
    detail = ("chi2/bin, FEGOE(1+k) N=12 m=6 lambda=0.5 delta=0.2, 200 members [stderr-based]: "
              + " ".join(f"k{k}={c:.2f}({s:.1f}, {n:.0f} states)" for k, c, s, n in rows)
              + f"; above {CHI2_BOUND}: {', '.join(bad) or 'none'}")
    assert report(8, "LDOS shape", not bad, detail), detail


def test_criterion_09_survival_theory_limits(report):
    t3 = np.linspace(0, 3, 301)
    gauss = np.abs(survival_theory(1.0, t3).y - np.exp(-t3**2)).max()
    t10 = np.linspace(0, 10, 1001)
    with np.errstate(invalid="ignore", divide="ignore"):
        bessel = np.where(t10 > 0, (special.j1(2 * t10) / t10) ** 2, 1.0)
    semi = np.abs(survival_theory(0.0, t10).y - bessel).max()
    ok = gauss < 1e-4 and semi < 1e-4
    detail = f"max |F - exp(-t^2)| {gauss:.1e} for t <= 3; max |F - (J1(2t)/t)^2| {semi:.1e} for t <= 10"
    assert report(9, "survival theory limits", ok, detail), detail


def test_criterion_10_survival_short_time(report):
    rows = []
    for k in (4, 5, 6):
        F = ensemble_cache.quench(k, 200).survival
        th = survival_theory(q_for(SystemSpec(12, 6, k, "FEGOE")), F.x).y
        early = F.x <= 0.5
        rows.append((k, float(np.abs(F.y[early] - th[early]).max()), F.meta["states"]))
    ok = all(d < 0.05 for _, d, _ in rows)
    detail = "max |F_mc - F_th| for t <= 0.5, 200 members, delta1=0.01: " + " ".join(
        f"k{k}={d:.4f} ({n} states)" for k, d, n in rows)
    assert report(10, "survival short-time agreement", ok, detail), detail


def test_criterion_11_trivial_dynamics(report):
    t = np.linspace(0, 5, 501)
    s = 1 / math.sqrt(2)
    pair = SpectralResult(np.array([-1.0, 1.0]), np.array([[s, s], [s, -s]]), 0.0, 1.0,
                          basis_energies=np.zeros(2), standardized=True)
    two = np.abs(survival_mc([pair], t).y - np.cos(t) ** 2).max()
    frozen = survival_mc([diagonalize(np.diag([-1.0, 0.0, 1.0]))], t, delta1=0.1).y
    H = np.diag([0.0, 1.0, 2.0]) + 0.3 * np.ones((3, 3))
    start = survival_mc([diagonalize(H)], t, delta1=5.0).y[0]
    ok = two < 1e-12 and np.all(frozen == 1.0) and start == 1.0
    detail = f"F(0) = {start!r}; diagonal quench max |F - 1| {np.abs(frozen - 1).max():.1e}; two-level error {two:.1e}"
    assert report(11, "trivial dynamics", ok, detail), detail


def test_criterion_12_determinism(report, tmp_path):
    commands = {
        "qtable": ["qtable"],
        "density": ["density", "--kind", "BEGOE", "--N", "4", "--m", "3", "--k", "1-3", "--members", "4"],
        "ldos": ["ldos", "--kind", "FEGUE", "--N", "7", "--m", "3", "--k", "2", "--members", "4", "--delta", "0.5"],
        "survival": ["survival", "--N", "7", "--m", "3", "--k", "2", "--members", "4", "--delta1", "0.3",
                     "--format", "json"],
    }
    differing = []
    for name, args in commands.items():
        sums = []
        for rep, workers in (("a", "1"), ("b", "2")):
            out = tmp_path / f"{name}_{rep}"
            assert cli_main(args + ["--seed", "5", "--workers", workers, "--out", str(out)]) == 0
            sums.append(json.loads((out / "manifest.json").read_text())["files"])
        if sums[0] != sums[1] or not sums[0]:
            differing.append(name)
    ok = not differing
    detail = f"reran {', '.join(commands)} with 1 and 2 workers; differing outputs: {', '.join(differing) or 'none'}"
    assert report(12, "determinism", ok, detail), detail
