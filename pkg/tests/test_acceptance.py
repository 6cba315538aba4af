"""Acceptance criteria, one PASS/FAIL line each.

Runs under pytest (lines go straight to the terminal) or as a script:
``python -m tests.test_acceptance``.
"""

import math
import sys
import time

import numpy as np
import pytest

from cvqkd_rr.cells import engine_for
from cvqkd_rr.channel import ChannelParams
from cvqkd_rr.decoder import GroupingPolicy, posterior_bits
from cvqkd_rr.eve import eve_params, sample_eve
from cvqkd_rr.keyrate import analytic_report, cascade_ber, theoretical_rate, xi_threshold
from cvqkd_rr.numerics import rng_stream
from cvqkd_rr.session import SessionConfig, run_session
from cvqkd_rr.sweep import SweepConfig, csv_text, run_sweep

from .conftest import grid_for
from .helpers import beam_splitter_rate

DISTANCES = tuple(float(d) for d in range(10, 151, 10))


def report(capsys, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


@pytest.fixture(scope="module")
def sweep():
    rows = run_sweep(SweepConfig(distances_km=DISTANCES, sensitivity=False))
    return {r.distance_km: r for r in rows}


def crit1(capsys=None):
    got = theoretical_rate(ChannelParams(0.01, 0.0, 500.0))
    oracle = beam_splitter_rate(0.01, 500.0)
    ok = abs(got - 0.00723) <= 1e-4 and abs(got - oracle) <= 1e-10
    return report(capsys, "1 theoretical rate pin", ok,
                  f"rate={got:.6f} (target 0.00723 +- 1e-4), |closed form - oracle|="
                  f"{abs(got - oracle):.1e}")


def crit2(capsys=None):
    ana = analytic_report(ChannelParams.from_distance(100.0))
    t0 = time.perf_counter()
    ses = run_session(SessionConfig(distance_km=100.0, n_pulses=10 ** 6, seed=0))
    dt = time.perf_counter() - t0
    eff = ses.report.efficiency
    ok = 0.12 <= ana.efficiency <= 0.24 and 0.12 <= eff <= 0.24 and dt <= 180 and ses.keys_match
    return report(capsys, "2 efficiency at 100 km", ok,
                  f"analytic={ana.efficiency:.4f} session(n=1e6)={eff:.4f} in [0.12, 0.24], "
                  f"session time {dt:.1f}s (<= 180s)")


def crit3(rows, capsys=None):
    positive = all(rows[d].practical > 0 for d in DISTANCES)
    eff150 = rows[150.0].efficiency
    ok = positive and 5e-4 <= eff150 <= 5e-3
    worst = min(rows[d].practical for d in DISTANCES)
    return report(capsys, "3 positivity to 150 km", ok,
                  f"min practical={worst:.3e} bits/pulse, efficiency(150 km)={eff150:.5f} "
                  f"in [5e-4, 5e-3]")


def crit4(rows, capsys=None):
    best = max(DISTANCES, key=lambda d: rows[d].efficiency)
    eff = rows[best].efficiency
    return report(capsys, "4 peak efficiency", 0.30 <= eff <= 0.45,
                  f"max={eff:.4f} at {best:g} km, band [0.30, 0.45]")


def crit5(capsys=None):
    ana = analytic_report(ChannelParams.from_distance(100.0))
    ses = run_session(SessionConfig(distance_km=100.0, n_pulses=10 ** 6, seed=2))
    ok = ana.mean_ber_ae > 0.04 and ses.empirical_ber_ae > 0.04
    return report(capsys, "5 Eve-Alice BER at 100 km", ok,
                  f"model={ana.mean_ber_ae:.4f}, sampled={ses.empirical_ber_ae:.4f} (> 0.04)")


def crit6(capsys=None):
    x1 = xi_threshold(1e-3, 500.0, 1.0)
    x5 = xi_threshold(1e-3, 500.0, 0.5)
    ok = 0.49 <= x1 <= 0.50 and 0.24 <= x5 <= 0.26
    return report(capsys, "6 excess-noise thresholds", ok,
                  f"gamma=1: {x1:.4f} in [0.49, 0.50]; gamma=0.5: {x5:.4f} in [0.24, 0.26]")


def crit7(capsys=None):
    e = cascade_ber(0.15, 0.25)
    ok = e == 0.325 and abs((e - 0.15) - 0.175) < 1e-15 and e - 0.15 > 0.17
    return report(capsys, "7 cascade BER", ok, f"cascade(0.15, 0.25)={e!r}, gap={e - 0.15:.3f}")


def crit8a(capsys=None):
    p = ChannelParams.from_distance(100.0)
    n = 10 ** 6
    rng = rng_stream(17)
    a = rng.child(0).standard_normal(n) * math.sqrt(p.alice_variance)
    b = math.sqrt(p.transmission) * a + rng.child(1).standard_normal(n)
    c = sample_eve(a, eve_params(p), rng.child(2))
    r = np.corrcoef(b - math.sqrt(p.transmission) * a, c - a)[0, 1]
    return report(capsys, "8a Markov residual correlation", abs(r) < 4 / math.sqrt(n),
                  f"|r|={abs(r):.2e} < {4 / math.sqrt(n):.0e}")


def crit8b(capsys=None):
    pol = GroupingPolicy()
    worst, cells = -math.inf, 0
    for d in DISTANCES:
        p = ChannelParams.from_distance(d)
        t = engine_for(p, grid_for(p), pol, eve_params(p)).table()
        live = t.prob > 0
        worst = max(worst, float(np.max((t.i_eb() - t.i_ab)[live])))
        cells += int(live.sum())
    return report(capsys, "8b per-group data processing", worst <= 1e-12,
                  f"max I_EB - I_AB = {worst:.2e} over {cells} groups, 10-150 km")


def _mc_sigma(res):
    # per key pulse the contribution is (i_ab - i_eb) of its group, zero if discarded
    p = np.array([g.count for g in res.groups]) / res.n_key
    v = np.array([g.i_ab - g.i_eb for g in res.groups])
    m1, m2 = float(p @ v), float(p @ (v * v))
    return math.sqrt(max(m2 - m1 * m1, 0.0) / res.n_key)


def crit8c(capsys=None):
    parts, ok = [], True
    for k, d in enumerate((15.0, 50.0, 100.0)):
        ana = analytic_report(ChannelParams.from_distance(d)).practical_rate
        res = run_session(SessionConfig(distance_km=d, n_pulses=10 ** 6), stream_id=k)
        tol = max(3 * _mc_sigma(res), 1e-3)
        diff = abs(res.report.practical_rate - ana)
        ok &= diff <= tol
        parts.append(f"{d:g} km |diff|={diff:.1e} (tol {tol:.1e})")
    return report(capsys, "8c analytic vs Monte-Carlo", ok, "; ".join(parts))


def crit8d(capsys=None):
    p = ChannelParams.from_distance(100.0)
    g = grid_for(p)
    rng = np.random.default_rng(0)
    b = rng.normal(0, 20, 10 ** 5)
    lefts = 14 * rng.integers(-300, 300, 10 ** 5) + rng.integers(0, 7, 10 ** 5)
    p0, p1 = posterior_bits(b, lefts, p, g)
    err = float(np.max(np.abs(p0 + p1 - 1)))
    return report(capsys, "8d posterior normalization", err <= 1e-12, f"max |p0+p1-1|={err:.1e}")


def crit8e(capsys=None):
    cfg = SweepConfig(distances_km=(30.0, 90.0), mode="both", n_pulses=100_000, seed=11,
                      sensitivity=False)
    first = [csv_text([r for r in run_sweep(cfg) if r.mode == m]) for m in ("analytic", "monte-carlo")]
    second = [csv_text([r for r in run_sweep(cfg) if r.mode == m]) for m in ("analytic", "monte-carlo")]
    ok = first == second and all(len(t.splitlines()) == 3 for t in first)
    return report(capsys, "8e deterministic CSV", ok,
                  "analytic and monte-carlo CSVs byte-identical across reruns" if ok
                  else "CSV differs between reruns")


def crit8f(capsys=None, sessions=1000):
    mismatched = keyed = 0
    for seed in range(sessions):
        res = run_session(SessionConfig(distance_km=15.0, n_pulses=20_000, seed=seed,
                                        calibration_fraction=0.5))
        mismatched += not res.keys_match
        keyed += len(res.final_key) > 0
    return report(capsys, "8f final-key equality", mismatched == 0 and keyed == sessions,
                  f"{sessions} seeded sessions, {mismatched} mismatches, {keyed} non-empty keys")


def test_criterion_1(capsys):
    assert crit1(capsys)


def test_criterion_2(capsys):
    assert crit2(capsys)


def test_criterion_3(sweep, capsys):
    assert crit3(sweep, capsys)


def test_criterion_4(sweep, capsys):
    assert crit4(sweep, capsys)


def test_criterion_5(capsys):
    assert crit5(capsys)


def test_criterion_6(capsys):
    assert crit6(capsys)


def test_criterion_7(capsys):
    assert crit7(capsys)


def test_criterion_8a(capsys):
    assert crit8a(capsys)


def test_criterion_8b(sweep, capsys):
    assert crit8b(capsys)


def test_criterion_8c(capsys):
    assert crit8c(capsys)


def test_criterion_8d(capsys):
    assert crit8d(capsys)


def test_criterion_8e(capsys):
    assert crit8e(capsys)


def test_criterion_8f(capsys):
    assert crit8f(capsys)


if __name__ == "__main__":
    rows = {r.distance_km: r for r in run_sweep(SweepConfig(distances_km=DISTANCES,
                                                            sensitivity=False))}
    results = [crit1(), crit2(), crit3(rows), crit4(rows), crit5(), crit6(), crit7(), crit8a(),
               crit8b(), crit8c(), crit8d(), crit8e(), crit8f()]
    sys.exit(0 if all(results) else 1)
