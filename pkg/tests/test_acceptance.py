"""End-to-end checks of the headline numerical claims at desk scale.

Each numbered test is one claim and prints one verdict under pytest -v.
Two of them document known desk-scale limits honestly instead of hiding
them: test_04 fails its 5 percent band at k = 6, where the neighboring
bumps sit close enough that the neglected terms of the three-term
energy expansion are still about 8 percent of the total, and test_07
fails its interiority clause because the maximizer of the reduced
energy clamps to the upper window edge for every ladder k we can
afford. The failure messages carry the measured numbers.
"""

import math
import time

import numpy as np
import pytest

from multibump import (
    admissible_radii,
    build_reduction_context,
    coercivity_probe,
    fit_interaction_law,
    interaction_integral,
    polish_and_certify,
    radial_integral,
    reduced_energy,
    riesz_lk,
    solve_correction,
    solve_ground_state,
)
from multibump.interactions import ring_energy_numeric, single_bump_energy_report

LADDER = (6, 8, 10)


def window_midpoint(k, m=2.0):
    return admissible_radii(k, m, beta=0.1).midpoint


def test_01_ground_state_matches_the_closed_form():
    t0 = time.monotonic()
    profile = solve_ground_state(1, 3.0)
    elapsed = time.monotonic() - t0
    exact = np.sqrt(2.0) / np.cosh(profile.s)
    assert np.max(np.abs(profile.values - exact)) <= 1e-6
    assert abs(radial_integral(profile, 2.0) - 4.0) <= 1e-5 * 4.0
    assert abs(radial_integral(profile, 4.0) - 16.0 / 3.0) <= 1e-5 * (16.0 / 3.0)
    assert elapsed < 1.0, f"line solve took {elapsed:.2f}s"


def test_02_pair_interaction_decays_like_exp_over_sqrt(profile2d):
    t0 = time.monotonic()
    samples = [(d, interaction_integral(profile2d, d)) for d in (8.0, 10.0, 12.0, 14.0, 16.0)]
    law = fit_interaction_law(samples)
    elapsed = time.monotonic() - t0
    assert abs(law.lam - 1.0) <= 0.01
    assert abs(law.nu - 0.5) <= 0.05
    assert elapsed < 60.0, f"fit took {elapsed:.1f}s"


def test_03_single_bump_tail_has_an_extra_power(profile2d, potential):
    rep = single_bump_energy_report(profile2d, potential, (20.0, 30.0, 40.0))
    scaled = np.abs(rep.scaled_residuals)
    # the r^m-scaled deviation from A + B1/r^m must keep falling
    assert scaled[0] >= 1.8 * scaled[2]


def test_04_ring_energy_matches_the_expansion_at_window_midpoints(
    profile2d, potential, constants2d, law2d
):
    mm = []
    for k in LADDER:
        r = window_midpoint(k)
        num = ring_energy_numeric(profile2d, potential, k, r, h=0.1)
        d_nn = 2.0 * r * math.sin(math.pi / k)
        asym = k * (constants2d.A + constants2d.B1 / r**2 - float(law2d.predict(d_nn)))
        mm.append(abs(num - asym) / abs(num))
    assert mm[2] <= mm[1] <= mm[0], f"mismatch not non-increasing: {mm}"
    assert mm[1] <= 0.05 and mm[2] <= 0.05, f"mismatch at k=8,10: {mm[1:]}"
    if mm[0] > 0.05:
        pytest.fail(
            "three-term expansion misses the 5 percent band at the k = 6 "
            "window midpoint: mismatches are {:.2%} / {:.2%} / {:.2%} for "
            "k = 6 / 8 / 10 (non-increasing, and within band from k = 8 on). "
            "At k = 6 the midpoint radius 3.42 puts neighboring bumps at "
            "separation 3.42, where the terms the expansion neglects are "
            "still large: the fitted pair law agrees with the directly "
            "computed pair integral to 0.8 percent there, the ring energy "
            "is grid-converged to 1e-5 relative across h = 0.15 / 0.1 / "
            "0.05, and even adding the next-nearest-neighbor pairs by hand "
            "only brings the mismatch down to about 6.5 percent. The gap "
            "is genuine higher-order content at that separation, not "
            "numerical error; the band only opens from k = 8 onward.".format(*mm)
        )


def test_05_linearization_stays_coercive_across_the_ladder(
    profile2d, potential, study_table
):
    # probe the window midpoint and the branch radius for each k
    for k in LADDER:
        w = admissible_radii(k, potential.m, beta=0.1)
        for r in (w.midpoint, w.upper):
            ctx = build_reduction_context(profile2d, potential, k, r, h=0.1)
            rho = coercivity_probe(ctx)
            assert rho > 0.0, f"rho_hat = {rho} at k={k}, r={r:.3f}"
    table, _ = study_table
    ladder = [row.rho_hat for row in table.rows if row.k in LADDER]
    assert min(ladder) >= 0.5 * max(ladder), f"ladder rho_hat: {ladder}"


def test_06_correction_contracts_and_decays_in_k(profile2d, potential, study_table):
    table, _ = study_table
    for k in LADDER:
        row = next(r for r in table.rows if r.k == k)
        ctx = build_reduction_context(profile2d, potential, k, row.r_k, h=0.1)
        res = solve_correction(ctx)
        assert res.ratios, f"no outer iterations recorded at k={k}"
        assert max(res.ratios) < 1.0, f"ratios at k={k}: {res.ratios}"
    ks = np.array([row.k for row in table.rows], dtype=float)
    phis = np.array([row.phi_norm for row in table.rows], dtype=float)
    slope = np.polyfit(np.log(ks), np.log(phis), 1)[0]
    assert -slope >= 0.5, f"phi norm decay exponent {-slope:.3f}"


def test_07_maximizer_scales_like_k_log_k_over_pi(study_table):
    table, _ = study_table
    target = 1.0 / math.pi
    for row in table.rows:
        assert abs(row.normalized - target) <= 0.1 + 1e-9, (
            f"r_k/(k ln k) = {row.normalized:.6f} at k={row.k}"
        )
    gaps = [gap for _, _, gap in table.trends()]
    assert all(b <= a + 1e-9 for a, b in zip(gaps, gaps[1:])), f"gaps: {gaps}"
    clamped = [row.k for row in table.rows if not row.interior]
    if clamped:
        pytest.fail(
            "the maximizer of the reduced energy is not interior for k = "
            f"{clamped}: the argmax clamps to the upper window edge, where "
            "r_k/(k ln k) equals 1/pi + 0.1 exactly (hence the band and "
            "shrinking-gap checks above pass at the clamp). Scanning past "
            "the edge finds the true turnover well outside the window: "
            "r/(k ln k) is about 0.58 / 0.55 / 0.55 / 0.54 at k = 6 / 8 / "
            "10 / 12, and a formula-mode scan at k = 100 still gives about "
            "0.48, so the coefficient drifts toward 1/pi = 0.318 only far "
            "beyond this ladder. Interior maxima at these k would need a "
            "wider window than the one the scaling claim is stated on."
        )


def test_08_polish_certifies_a_positive_nonradial_solution(cert_k6):
    cert, elapsed = cert_k6
    assert cert.k == 6
    assert cert.steps <= 10
    assert cert.residual_norm <= 1e-6
    assert cert.min_value > 0.0
    assert cert.nonradiality >= 0.1
    assert elapsed <= 600.0, f"certification took {elapsed:.0f}s"


def test_09_free_single_bump_short_circuits(profile2d, free_potential, constants2d):
    ctx = build_reduction_context(profile2d, free_potential, 1, 10.0, h=0.2)
    assert riesz_lk(ctx).norm == 0.0
    res = solve_correction(ctx, tol=1e-8)
    assert res.norm == 0.0
    assert res.iterations == 1
    values = [
        reduced_energy(profile2d, free_potential, 1, r, h=0.2).value
        for r in (8.0, 10.0, 12.0)
    ]
    for v in values:
        assert abs(v - constants2d.A) <= 5e-2
    assert max(values) - min(values) <= 1e-2
    cert = polish_and_certify(
        profile2d, free_potential, 1, 10.0, tol=1e-3, h=0.2, pin_radius=False
    )
    assert cert.steps <= 2
    assert cert.residual_norm <= 1e-3
    assert cert.min_value > 0.0
