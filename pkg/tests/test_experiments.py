"""Loss, limit-constant, and escape experiments plus the bound report."""

import math

import numpy as np
import pytest

from fracrig.experiments import (
    BUDGETS,
    Budget,
    ConstantMode,
    axial_escape_check,
    escape_bound,
    estimate_constant,
    estimate_loss,
    full_report,
)
from fracrig.spectral import bound_constants, rigidity_cylinder
from fracrig.stochastic import RngStream, StartMode


def test_budget_presets_are_ordered():
    assert set(BUDGETS) == {"small", "default", "large"}
    for field in ("loss_traces", "const_traces", "kappa_traces",
                  "escape_paths"):
        s, d, l = (getattr(BUDGETS[k], field)
                   for k in ("small", "default", "large"))
        assert s < d < l


# ------------------------------------------------------------------ loss


def test_loss_identity_and_sign():
    est = estimate_loss(8.0, 1.0, StartMode.UNIFORM, RngStream(500),
                        n_traces=8, n_points=512)
    assert est.exact_rigidity == rigidity_cylinder(8.0, 1.0).value
    assert est.value.mean == pytest.approx(
        est.exact_rigidity - est.fractured.mean, rel=1e-12)
    # removing material can only cost rigidity
    assert est.value.mean > -3.0 * est.value.std_error
    assert 0.0 < est.fractured.mean < est.exact_rigidity


def test_loss_mode_validation():
    with pytest.raises(ValueError):
        estimate_loss(8.0, 1.0, StartMode.CENTER, RngStream(1), 4, 128)
    with pytest.raises(ValueError):
        estimate_loss(8.0, 1.0, StartMode.UNIFORM, RngStream(1), 1, 128)


def test_loss_determinism_and_worker_invariance():
    kw = dict(n_traces=4, n_points=128)
    a = estimate_loss(6.0, 1.0, StartMode.AXIS, RngStream(501), **kw)
    b = estimate_loss(6.0, 1.0, StartMode.AXIS, RngStream(501), **kw)
    assert a.value == b.value
    c = estimate_loss(6.0, 1.0, StartMode.AXIS, RngStream(501), workers=2,
                      **kw)
    assert a.value == c.value


def test_loss_scales_as_r_to_the_fifth():
    """Brownian scaling: the whole experiment at (L, R) = (6, 1/2) is the
    (12, 1) experiment shrunk by 1/2, so the loss carries R^5."""
    n, m = 12, 768
    big = estimate_loss(12.0, 1.0, StartMode.UNIFORM, RngStream(502), n, m)
    half = estimate_loss(6.0, 0.5, StartMode.UNIFORM, RngStream(503), n, m,
                         eps_tube=0.02, eps_shell=5e-4)
    scaled = half.value.mean / 0.5 ** 5
    se = math.hypot(big.value.std_error, half.value.std_error / 0.5 ** 5)
    assert abs(big.value.mean - scaled) < 3.0 * se


# ------------------------------------------------------------- constants


def test_constant_estimate_diagnostics():
    est = estimate_constant(ConstantMode.C, RngStream(504), n_traces=6,
                            n_points=256)
    k = bound_constants()
    assert est.mode is ConstantMode.C
    assert est.truncation_length == 36.0
    assert est.window == 6.0
    assert est.truncation_bound == escape_bound(36.0, 1.0)
    assert est.window_bias_scale == pytest.approx(math.exp(-6.0 * k.j0))
    assert 0.0 <= est.censored_fraction <= 1.0
    assert math.isfinite(est.value.mean)
    # positive within noise, and below the analytic ceiling with slack
    assert est.value.mean > -3.0 * est.value.std_error
    assert est.value.mean < k.c_upper + 3.0 * est.value.std_error + 0.5


def test_constant_modes_run_deterministically():
    a = estimate_constant(ConstantMode.CPRIME, RngStream(505), 4, 192)
    b = estimate_constant(ConstantMode.CPRIME, RngStream(505), 4, 192,
                          workers=2)
    assert a.value == b.value
    assert a.mode is ConstantMode.CPRIME


# ---------------------------------------------------------------- escape


def test_escape_bound_closed_form():
    k = bound_constants()
    for L, R in ((16.0, 1.0), (36.0, 1.0), (8.0, 0.5)):
        expect = (k.j0 + 1.0) * math.sqrt(math.pi) * math.exp(
            -0.5 * k.j0 * math.sqrt(L / R))
        assert escape_bound(L, R) == pytest.approx(expect, rel=1e-15)
    assert escape_bound(36.0, 1.0) < escape_bound(16.0, 1.0)
    # the quoted reference levels for the two lengths used in reports
    assert escape_bound(16.0, 1.0) == pytest.approx(0.0491886, rel=1e-5)
    assert escape_bound(36.0, 1.0) == pytest.approx(4.4408e-3, rel=1e-4)


def test_axial_escape_check_entry():
    entry = axial_escape_check(16.0, 1.0, 800, RngStream(506))
    assert entry.name == "axial-escape-L16-R1"
    assert entry.lower == 0.0
    assert entry.upper == pytest.approx(escape_bound(16.0, 1.0))
    assert 0.0 <= entry.value <= 1.0
    assert entry.passed
    with pytest.raises(ValueError):
        axial_escape_check(3.0, 1.0, 100, RngStream(1))


# ---------------------------------------------------------------- report


def test_full_report_structure():
    tiny = Budget(loss_traces=4, loss_points=256, const_traces=4,
                  const_points=192, kappa_traces=6, kappa_walkers=48,
                  escape_paths=600)
    report = full_report(RngStream(507), budget=tiny)
    names = [e.name for e in report.entries]
    assert names == [
        "torsion-sandwich-L2-R1", "torsion-sandwich-L5-R1",
        "torsion-sandwich-L10-R1", "torsion-sandwich-L20-R1",
        "torsion-sandwich-L8-R0.5", "loss-upper-L12-R1",
        "loss-upper-L24-R1", "kappa-window", "kappa-scaling",
        "constant-membership", "constant-prime-membership",
        "constant-vs-loss-L24", "axis-dominance",
        "axial-escape-L16-R1", "axial-escape-L36-R1",
    ]
    info = {e.name for e in report.entries if e.informational}
    assert info == {"loss-upper-L24-R1", "constant-vs-loss-L24",
                    "axis-dominance"}
    # spectral entries are certified regardless of budget
    for name in names[:5]:
        assert report.entry(name).passed
    # the window entry always carries the analytic 4 pi ceiling
    kw = report.entry("kappa-window")
    assert kw.upper == pytest.approx(4.0 * math.pi)
    assert kw.lower == 0.0
    d = report.entry("loss-upper-L12-R1").as_dict()
    assert set(d) >= {"name", "lower", "value", "se", "upper", "tol",
                      "pass", "margin", "informational"}
    with pytest.raises(KeyError):
        report.entry("no-such-entry")
