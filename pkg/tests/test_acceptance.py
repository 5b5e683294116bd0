"""Acceptance criteria C1-C8.

Each test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
terminal summary. C1-C4 and C6-C8 are full-length runs marked ``slow``
(deselect with ``-m "not slow"``).
"""
from pathlib import Path

import numpy as np
import pytest

from cvmd.core import load_config
from cvmd.harness.case3 import envelope_coverage
from cvmd.harness.checks import (check_lij_quadrature, check_mop_global, check_theta_identity,
                                 check_va_virial)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
LINES = []


def report(label: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def case1(tmp_path_factory):
    from cvmd.harness.case1 import run_case1
    return run_case1(load_config(CONFIGS / "case1.cfg"), tmp_path_factory.mktemp("case1"))


@pytest.fixture(scope="module")
def case1_half_dt():
    from cvmd.harness.case1 import run_case1
    cfg = load_config(CONFIGS / "case1.cfg")
    cfg = cfg.with_overrides(dt=cfg.dt / 2, steps=cfg.steps * 2)
    return run_case1(cfg, mass_checks=False)


@pytest.fixture(scope="module")
def case2(tmp_path_factory):
    from cvmd.harness.case2 import run_case2
    return run_case2(load_config(CONFIGS / "case2.cfg"), tmp_path_factory.mktemp("case2"))


@pytest.fixture(scope="module")
def case3(tmp_path_factory):
    from cvmd.harness.case3 import run_case3
    return run_case3(load_config(CONFIGS / "case3.cfg"), tmp_path_factory.mktemp("case3"))


@pytest.mark.slow
def test_c1_mass_conservation(case1):
    v = case1.mass_violations
    ok = set(v) == {"cv", "mass_grid", "box"} and not any(v.values())
    assert report("C1 mass conservation (exact)", ok, f"violations {v}")


@pytest.mark.slow
def test_c2_momentum_conservation(case1):
    r = case1.momentum_ratio["cv"]
    assert report("C2 momentum residual ratio <= 1e-10", r <= 1e-10, f"max {r:.3e}")


@pytest.mark.slow
def test_c3_energy_conservation(case1, case1_half_dt):
    e1, e2 = case1.energy_ratio_cv, case1_half_dt.energy_ratio_cv
    ok = e1 < 0.01 and e2 <= 0.6 * e1
    assert report("C3 energy residual < 1% and halves with dt", ok,
                  f"dt {case1.dt:g}: {e1:.4%}, dt {case1_half_dt.dt:g}: {e2:.4%}, "
                  f"ratio {e2 / e1:.3f}")


@pytest.mark.slow
def test_c4_pressure_routes(case2):
    pd = case2.pd_series
    half = len(pd) // 2
    kappa = case2.final["kappa_cv"]
    rho_t = case2.density * case2.temperature
    dk = abs(kappa - rho_t) / rho_t
    ok = case2.pd_total < 2.0 and pd[half:].mean() < pd[:half].mean() and dk <= 0.05
    assert report("C4 PD(Pi) < 2%, decreasing, kappa_CV within 5% of rho T", ok,
                  f"PD {case2.pd_total:.4f}%, halves {pd[:half].mean():.3f}% -> "
                  f"{pd[half:].mean():.3f}%, kappa {kappa:.5f} vs rho T {rho_t:.5f} "
                  f"({dk:.3%})")


def test_c5_exact_equivalences():
    results = [check_va_virial(), check_mop_global(), check_theta_identity(100_000),
               check_lij_quadrature()]
    ok = all(r.passed for r in results)
    assert report("C5 algebraic equivalences", ok, "; ".join(r.line() for r in results))


@pytest.mark.slow
def test_c6_couette_velocity(case3):
    u0 = case3.params.U0
    rms = {t: case3.velocity_rms(t) for t in (4, 16, 64)}
    ok = all(v < 0.05 * u0 for v in rms.values())
    assert report("C6 velocity RMS < 0.05 U0 at t = 4, 16, 64", ok,
                  ", ".join(f"t={t}: {v:.4f}" for t, v in rms.items()))


@pytest.mark.slow
def test_c7_couette_shear_stress(case3):
    s, i = case3.stress, case3.interior
    an = s["analytic"][i]
    va_ok = np.abs(s["va"][i] - an) <= 2 * s["va_sem"][i]
    mop_ok = np.abs(s["mop"][i] - an) <= 2 * s["mop_sem"][i]
    pair_ok = np.abs(s["diff"][i]) <= 2 * s["diff_sem"][i]
    ok = va_ok.all() and mop_ok.all() and pair_ok.all()
    assert report("C7 VA, MOP and analytic Pi_xy within 2 SEM per bin", ok,
                  f"bins {len(i)}: VA-analytic {va_ok.sum()}, MOP-analytic {mop_ok.sum()}, "
                  f"VA-MOP {pair_ok.sum()}")


@pytest.mark.slow
def test_c8_whole_liquid_balance(case3):
    b = case3.balance
    res = case3.balance_residual_max
    cov = {k: envelope_coverage(b[k], b[k + "_sem"], b[k + "_analytic"], b["t0"])
           for k in ("rate", "top", "bottom")}
    ok = res <= 1e-10 and all(c >= 0.85 for c in cov.values())
    assert report("C8 balance residual <= 1e-10, analytic inside 2 SEM envelope", ok,
                  f"residual {res:.3e}, coverage "
                  + ", ".join(f"{k} {c:.2f}" for k, c in cov.items()))
