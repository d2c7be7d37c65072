"""Reduced-energy maximization, scaling study, and Newton certification."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from multibump import (
    ContractionError,
    NumericalError,
    ValidationError,
    admissible_radii,
    build_reduction_context,
    energy_functional,
    maximize_reduced_energy,
    polish_and_certify,
    reduced_energy,
    riesz_lk,
    scaling_study,
)


def ring_formula(k, a_const=1.0, b1=1.0, b2=1.0, m=2.0):
    return lambda r: k * (a_const + b1 / r**m - b2 * math.exp(-2.0 * math.pi * r / k))


def test_formula_mode_finds_the_analytic_maximum(potential):
    """Golden-section argmax agrees with a root solve on the derivative."""
    k = 8
    f = ring_formula(k)
    curve = maximize_reduced_energy(None, potential, k, n_samples=21,
                                    evaluator=f, refine_frac=1e-5)
    window = admissible_radii(k, potential.m, beta=0.1)
    dfdr = lambda r: -2.0 / r**3 + (2.0 * math.pi / k) * math.exp(
        -2.0 * math.pi * r / k
    )
    r_star = brentq(dfdr, window.lower, window.upper, xtol=1e-12)
    assert curve.interior
    assert curve.r_max == pytest.approx(r_star, abs=1e-3)
    assert curve.f_max == pytest.approx(f(r_star), rel=1e-10)
    assert np.all(np.isnan(curve.asymptotics))


def test_formula_mode_without_interaction_hugs_the_lower_edge(potential):
    # b2 = 0 leaves k (A + B1/r^m), strictly decreasing in r
    k = 8
    curve = maximize_reduced_energy(None, potential, k, n_samples=11,
                                    evaluator=ring_formula(k, b2=0.0))
    assert not curve.interior
    assert curve.r_max - curve.lower <= 0.01 * (curve.upper - curve.lower)


def test_failed_scan_radii_are_reported(potential):
    k = 8
    window = admissible_radii(k, potential.m, beta=0.1)
    cut = window.lower + 0.3 * window.width
    base = ring_formula(k)

    def flaky(r):
        if r < cut:
            raise ContractionError("no correction here")
        return base(r)

    curve = maximize_reduced_energy(None, potential, k, n_samples=11,
                                    evaluator=flaky)
    assert len(curve.failed_radii) >= 1
    assert all(r < cut for r in curve.failed_radii)
    assert curve.radii.size + len(curve.failed_radii) >= 11
    assert np.all(curve.radii >= cut)


def test_maximize_validation(profile2d, potential):
    with pytest.raises(ValidationError):
        maximize_reduced_energy(profile2d, potential, 8, n_samples=5)
    with pytest.raises(ValidationError):
        maximize_reduced_energy(profile2d, potential, 1)


def test_reduced_energy_tracks_the_asymptotic_value(profile2d, potential,
                                                    constants2d, law2d):
    k = 8
    window = admissible_radii(k, potential.m, beta=0.1)
    res = reduced_energy(profile2d, potential, k, window.midpoint,
                         constants=constants2d, law=law2d, h=0.2)
    assert res.method in ("picard", "newton")
    assert res.correction.norm > 0.0
    assert abs(res.value - res.asymptotic) / abs(res.value) <= 0.05


def test_correction_barely_moves_the_ansatz_energy(profile2d, potential,
                                                   constants2d, law2d):
    """|I(W + phi) - I(W)| obeys the first-order bound |l(phi)| <= |l| |phi|.

    The sign of the shift is not fixed at desk scale: the constrained
    critical point trades the quadratic gain against a cubic remainder
    of comparable size.
    """
    k = 8
    window = admissible_radii(k, potential.m, beta=0.1)
    r = window.upper
    res = reduced_energy(profile2d, potential, k, r,
                         constants=constants2d, law=law2d, h=0.2)
    ctx = build_reduction_context(profile2d, potential, k, r, h=0.2)
    i_w = energy_functional(ctx.field(ctx.w_ansatz), potential, profile2d.exponent)
    shift = abs(res.value - i_w)
    assert shift <= 1.0 / k
    assert shift <= riesz_lk(ctx).norm * res.correction.norm


def test_desk_scale_curve_is_monotone(profile2d, potential, constants2d, law2d):
    """At these k the window is short of the turnover: F climbs across it.

    The argmax therefore clamps to the upper edge and the normalized
    radius reports the band edge value m/(2 pi) + beta.
    """
    curve = maximize_reduced_energy(profile2d, potential, 8, n_samples=9,
                                    constants=constants2d, law=law2d, h=0.2)
    assert np.all(np.diff(curve.values) > 0.0)
    assert not curve.interior
    assert not curve.extended
    assert curve.r_max == pytest.approx(curve.upper, abs=1e-6)
    assert curve.normalized == pytest.approx(1.0 / np.pi + 0.1, abs=1e-6)


def test_boundary_extension_reaches_the_turnover(profile2d, potential,
                                                 constants2d, law2d):
    curve = maximize_reduced_energy(profile2d, potential, 8, n_samples=9,
                                    constants=constants2d, law=law2d, h=0.2,
                                    extend_on_boundary=True)
    assert curve.extended
    assert curve.r_max > curve.upper
    # frozen from an independent fixed-grid scan of the same setup
    assert curve.r_max == pytest.approx(9.20, abs=0.05)


def test_curve_csv(profile2d, potential, constants2d, law2d, tmp_path):
    curve = maximize_reduced_energy(profile2d, potential, 8, n_samples=9,
                                    constants=constants2d, law=law2d, h=0.2)
    path = tmp_path / "curve.csv"
    curve.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,f_reduced,f_asymptotic"
    assert len(lines) == 1 + curve.radii.size


def test_study_single_bump_row(profile2d, potential, constants2d, law2d):
    constants = {"A": constants2d.A, "B1": constants2d.B1}
    table = scaling_study(profile2d, potential, (1,), constants=constants,
                          law=law2d, h=0.25, n_samples=9)
    row = table.rows[0]
    assert row.k == 1
    assert math.isnan(row.normalized)
    assert row.interior
    assert row.rho_hat > 0.0
    assert row.phi_norm < 0.1  # one off-center bump needs a small correction
    assert table.trends() == []


def test_study_ladder_structure(study_table, tmp_path):
    table, _ = study_table
    ks = [row.k for row in table.rows]
    assert ks == [6, 8, 10, 12]
    trends = table.trends()
    assert math.isnan(trends[0][1])
    for k, step, gap in trends[1:]:
        assert abs(step) <= 1e-12  # every argmax clamps to the same band edge
        assert gap == pytest.approx(0.1, abs=1e-12)
    path = tmp_path / "study.csv"
    table.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("k,r_k,normalized,")
    assert len(lines) == 1 + len(table.rows)


def test_study_parallel_rows_match_serial(profile2d, potential, constants2d, law2d):
    constants = {"A": constants2d.A, "B1": constants2d.B1}
    kwargs = dict(constants=constants, law=law2d, h=0.25, n_samples=9)
    serial = scaling_study(profile2d, potential, (6,), jobs=1, **kwargs)
    parallel = scaling_study(profile2d, potential, (6,), jobs=2, **kwargs)
    assert serial.rows == parallel.rows


@pytest.fixture(scope="module")
def cert6(profile2d, potential):
    return polish_and_certify(profile2d, potential, 6, 6.2, tol=1e-8, h=0.15)


def test_polish_certifies_six_bumps(cert6):
    assert cert6.residual_norm <= 1e-8
    assert cert6.steps <= 10
    assert cert6.min_value > 0.0
    assert cert6.nonradiality >= 0.1
    # the pinned radius stays inside the probe bracket around the start
    assert abs(cert6.r_k - 6.2) <= 0.2
    assert np.isfinite(cert6.energy)


def test_polish_basin_covers_amplitude_errors(profile2d, potential, cert6):
    """Starts at 0.75 W and 1.25 W certify the same ring of bumps.

    The landing point can be a neighboring pinned equilibrium a short
    slide along the soft ring mode away, so fields agree to a few
    percent and energies to about 1e-3, not to solver precision.
    """
    ctx = build_reduction_context(profile2d, potential, 6, cert6.r_k, h=0.15)
    for scale in (-0.25, 0.25):
        cert2 = polish_and_certify(profile2d, potential, 6, cert6.r_k,
                                   phi=scale * ctx.w_ansatz, tol=1e-6,
                                   h=0.15, max_steps=60)
        assert cert2.r_k == cert6.r_k
        assert cert2.min_value > 0.0
        assert cert2.nonradiality >= 0.1
        assert np.max(np.abs(cert6.u.values - cert2.u.values)) <= 0.05
        assert cert2.energy == pytest.approx(cert6.energy, abs=1e-3)


def test_polish_certificate_catches_basin_escape(profile2d, potential, cert6):
    """From half amplitude Newton hops to the sign-flipped ring.

    The scalar caricature shows why: for x - x^3 a start at 0.5 steps
    exactly to -1. The positivity certificate refuses that branch
    instead of returning it.
    """
    ctx = build_reduction_context(profile2d, potential, 6, cert6.r_k, h=0.15)
    with pytest.raises(NumericalError, match="not positive"):
        polish_and_certify(profile2d, potential, 6, cert6.r_k,
                           phi=-0.5 * ctx.w_ansatz, tol=1e-8, h=0.15)


def test_polish_free_single_bump(profile2d, free_potential):
    """With a = 0 the interpolated bump is already the discrete solution
    up to the O(h^2) symmetry-breaking floor of the polar grid."""
    cert = polish_and_certify(profile2d, free_potential, 1, 10.0, tol=1e-3,
                              h=0.2, pin_radius=False)
    assert cert.steps <= 2
    assert cert.residual_norm <= 1e-3
    assert cert.min_value > 0.0


def test_certificate_json(cert6):
    import json

    data = json.loads(cert6.to_json())
    assert data["k"] == 6
    assert data["steps"] == cert6.steps
    assert data["residual_norm"] == cert6.residual_norm
