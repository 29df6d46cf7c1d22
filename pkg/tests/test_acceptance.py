"""End-to-end acceptance criteria, one test each, with runtime budgets.

Every test prints a single ``[criterion N] PASS|FAIL ...`` line to the
terminal (outside pytest's capture) before asserting.
"""

import math
import time

import numpy as np

from lcproj import density as D
from lcproj import dist
from lcproj.density import PiecewiseLogLinearDensity as PLD
from lcproj.experiments import (SweepConfig, resolve_jobs, run_continuity_sweep,
                                run_delta_cdf_tail, run_empirical_rate, run_property_battery,
                                run_sweep)
from lcproj.metrics import hellinger_sq
from lcproj.solver import brute_force_oracle, objective, project
from lcproj.transforms import envelope_integral, lipschitz_majorize, normalize_envelope

JOBS = resolve_jobs(None)
ORACLE_SEED = 20240601


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}")


def test_criterion_1_holder_exponent(capsys):
    t0 = time.perf_counter()
    cfg = SweepConfig(kind="continuity", eps=1.0, grid=list(np.logspace(-4, -1.5, 6)))
    r = run_continuity_sweep(cfg, jobs=JOBS)
    elapsed = time.perf_counter() - t0
    ok = 0.20 <= r.slope <= 0.30 and elapsed < 60
    report(capsys, 1, ok, f"continuity slope {r.slope:.4f} (band [0.20, 0.30], se {r.se:.2g}), "
                          f"{elapsed:.1f}s < 60s")
    assert 0.20 <= r.slope <= 0.30
    assert elapsed < 60


def test_criterion_2_empirical_rate(capsys):
    t0 = time.perf_counter()
    grid = [2 ** k for k in range(7, 14)]
    lines, ok = [], True
    for q, band in ((2.0, (-0.35, -0.15)), (4.0, (-0.475, -0.275))):
        cfg = SweepConfig(kind="empirical_rate", grid=grid, trials=200, q=q, seed=2)
        r = run_empirical_rate(cfg, jobs=JOBS)
        inside = band[0] <= r.slope <= band[1]
        ok &= inside and r.passed
        lines.append(f"q={q:g} slope {r.slope:.4f} (se {r.se:.2g}, band [{band[0]}, {band[1]}])")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 15 * 60
    report(capsys, 2, ok, "; ".join(lines) + f", {elapsed:.1f}s < 900s")
    assert ok


def test_criterion_3_lemma_battery(capsys):
    t0 = time.perf_counter()
    r = run_property_battery(SweepConfig(kind="property_battery", corpus_size=500), jobs=JOBS)
    elapsed = time.perf_counter() - t0
    failed = [c["x"] for c in r.cells if c["failed"]]
    worst = min((c for c in r.cells if c["x"] != "hellinger_shrinking_uniforms"),
                key=lambda c: c["min_margin"])
    fixture = hellinger_sq(D.uniform_density(-0.25, 0.25), D.uniform_density(-1 / 16, 1 / 16))
    ok = r.passed and abs(fixture - 1) <= 1e-10 and elapsed < 300
    report(capsys, 3, ok, f"{len(r.rows)} rows over {len(r.cells)} lemmas, failed {failed or 'none'}; "
                          f"tightest {worst['x']} margin {worst['min_margin']:.3g}; "
                          f"fixture d_H^2 = {fixture!r}; {elapsed:.1f}s < 300s")
    assert not failed
    assert abs(fixture - 1) <= 1e-10
    assert elapsed < 300


def test_criterion_4_oracle_equivalence(capsys):
    t0 = time.perf_counter()
    rng = dist.make_rng(ORACLE_SEED)
    worst_obj = worst_h = 0.0
    for _ in range(20):
        P = dist.random_distribution(rng, 2, 5)
        o, r = brute_force_oracle(P), project(P)
        worst_obj = max(worst_obj, abs(o.objective - r.objective))
        worst_h = max(worst_h, hellinger_sq(o.density, r.density))
    elapsed = time.perf_counter() - t0
    ok = worst_obj <= 1e-6 and worst_h <= 1e-6 and elapsed < 120
    report(capsys, 4, ok, f"20 cases: max |dobj| {worst_obj:.2e}, max d_H^2 {worst_h:.2e}, "
                          f"{elapsed:.1f}s < 120s")
    assert worst_obj <= 1e-6 and worst_h <= 1e-6
    assert elapsed < 120


def test_criterion_5_lipschitz_majorization(capsys):
    t0 = time.perf_counter()
    U = D.uniform_density(-1, 1)
    checks = {}

    bases = [U, project(dist.DiscreteDistribution.uniform([-1, 0, 1])).density,
             D.normalize(PLD([-1, 0, 1], [-2, 0, -2]))]
    rng = dist.make_rng(55)
    bases += [project(dist.random_distribution(rng)).density for _ in range(20)]

    majorizes = True
    for f in bases:
        xs = np.linspace(f.knots[0], f.knots[-1], 1000)
        for L in (0.5, 1.0, 10.0, 100.0):
            majorizes &= bool(np.all(lipschitz_majorize(f, L).log_eval(xs) >= D.log_eval(f, xs) - 1e-10))
    checks["majorizes"] = majorizes

    err = max(abs(envelope_integral(lipschitz_majorize(U, L)) - (1 + 1 / L)) for L in (10.0, 100.0))
    checks["uniform_integral"] = err <= 1e-10

    spread = 0.0
    for f in bases:
        vals = [(envelope_integral(lipschitz_majorize(f, L)) - 1) * L for L in (1e2, 1e3, 1e4)]
        spread = max(spread, max(vals) / min(vals) - 1)
    checks["excess_1_over_L"] = spread <= 0.10

    near_opt = True
    rng = dist.make_rng(56)
    for _ in range(20):
        P = dist.random_distribution(rng)
        f = project(P).density
        for L in (1.0, 10.0, 100.0):
            e = lipschitz_majorize(f, L)
            near_opt &= objective(normalize_envelope(e), P) >= objective(f, P) - (envelope_integral(e) - 1)
    checks["near_optimality"] = near_opt

    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < 30
    report(capsys, 5, ok, f"{checks}; uniform integral err {err:.1e}; max excess*L spread "
                          f"{spread:.2%}; {elapsed:.1f}s < 30s")
    assert all(checks.values())
    assert elapsed < 30


def test_criterion_6_delta_cdf_tail(capsys):
    t0 = time.perf_counter()
    cfg = SweepConfig(kind="delta_cdf_tail", grid=[1000], trials=500, seed=6)
    r = run_delta_cdf_tail(cfg, jobs=JOBS)
    elapsed = time.perf_counter() - t0
    c = r.cells[0]
    bound = 5 * math.sqrt(math.log(1000) / 1000)
    ok = c["q95"] <= bound and elapsed < 120
    report(capsys, 6, ok, f"n=1000, 500 trials: q95 {c['q95']:.4f} <= {bound:.4f} "
                          f"(ratio {c['q95_over_rate']:.3f} of 5); {elapsed:.1f}s < 120s")
    assert c["q95"] <= bound
    assert elapsed < 120


DETERMINISM_CONFIGS = [
    dict(kind="continuity", eps=1.0, grid=list(np.logspace(-4, -1.5, 6))),
    dict(kind="empirical_rate", grid=[128, 512, 2048], trials=50, seed=11),
    dict(kind="delta_cdf_tail", grid=[100, 1000], trials=100, seed=12),
    dict(kind="property_battery", corpus_size=40, seed=13),
]


def test_criterion_7_determinism(capsys, tmp_path):
    workers = max(JOBS, 2)
    differing = []
    for cfg in DETERMINISM_CONFIGS:
        kind = cfg["kind"]
        first = run_sweep(SweepConfig(**cfg), jobs=workers).write(tmp_path / f"{kind}.a.csv")[0]
        second = run_sweep(SweepConfig(**cfg), jobs=1).write(tmp_path / f"{kind}.b.csv")[0]
        if first.read_bytes() != second.read_bytes():
            differing.append(kind)
    ok = not differing
    kinds = ", ".join(c["kind"] for c in DETERMINISM_CONFIGS)
    report(capsys, 7, ok, f"{kinds}: reruns ({workers} workers, then 1) byte-identical; "
                          f"differing: {differing or 'none'}")
    assert ok
