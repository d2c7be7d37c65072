"""Constrained correction solve around the k-bump ansatz.

Writing u = W_r + phi with phi in the constrained space

    E = { v symmetric : c(v) = integral of U_{x1}^{p-1} Z_1 v = 0 },

the energy expands as J(phi) = J(0) + l(phi) + <L phi, phi>/2 - R(phi),
and the correction solves the projected equation l_k + L phi = R'(phi)
by a contraction iteration.  Everything here acts on flat arrays of
sector cell values; the weighted H^1 inner product is carried by the
sparse Gram operator G = K + diag(area * V), factored once per context.

Two linear functionals enter:

* the constraint c, represented on the sector by the symmetrized weight
  (1/k) sum_j U_j^{p-1} Z_j, which reproduces the single full-space
  constraint exactly for symmetric test fields;
* the first variation of the energy at W, assembled from the identity
  I'(W) v = integral of ((V-1) W - (W^p - sum_j U_j^p)) v, which each
  bump's own equation makes exact.  At a = 0 with one bump both pieces
  vanish identically, so the zero correction is reproduced without any
  grid-resolution floor.

Two projectors onto E coexist on purpose.  The public ``project_to_E``
subtracts a multiple of the radial direction field Z = dW/dr, matching
the splitting v = phi + t Z used by the reduction.  The internal
projector is orthogonal in the H^1_V inner product; composing the
operator with it keeps apply_L self-adjoint, which the Krylov solver
and the eigenvalue probe rely on.  Both have the same range, so the
solve is indifferent to the choice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ContractionError, ConvergenceError, ValidationError
from .geometry import admissible_radii, place_bumps
from .grid import Field, build_aligned_sector_grid, stiffness_matrix
from .solvers import lanczos_smallest, minres

__all__ = [
    "ReductionContext",
    "ConstraintSpec",
    "RieszReport",
    "CorrectionResult",
    "build_reduction_context",
    "project_to_E",
    "riesz_lk",
    "apply_L",
    "coercivity_probe",
    "nonlinear_remainder",
    "energy_gradient",
    "solve_correction",
]


@dataclass(frozen=True)
class ConstraintSpec:
    """Sector data of the constraint functional c(v) = int U^{p-1} Z_1 v.

    Attributes
    ----------
    weight : ndarray
        Symmetrized weight on sector cells; pairing v against it with
        the cell areas and the 2k sector factor evaluates c(v).
    z_direction : ndarray
        The field Z = dW/dr used by the oblique projector.
    gamma : float
        c(Z), the pairing of the constraint with the Z direction.
    """

    weight: np.ndarray
    z_direction: np.ndarray
    gamma: float


class ReductionContext:
    """Precomputed grid, ansatz, and factorization data for one (k, r).

    Instances are immutable in practice and safe to use from parallel
    workers, each worker holding its own context.

    Parameters
    ----------
    profile : RadialProfile
    potential : PotentialSpec
    k : int
        Number of bumps.
    r : float
        Ring radius.
    h : float
        Target grid spacing; the actual spacing aligns the ring radius
        with a radial cell center.
    margin : float
        Distance kept between the ring and the outer Dirichlet wall.
    drop_nonlinear : bool
        Test hook; pretend W = 0 inside the linearized operator, which
        turns L into the identity on E.
    constrained : bool
        Test hook; False removes the projection from apply_L and the
        eigenvalue probe.
    grid : SectorGrid, optional
        Reuse a prebuilt grid instead of aligning a new one to r. Lets
        nearby radii be compared on an identical mesh, which is what a
        certification pass needs when it pins down the discrete
        critical radius before polishing.
    reuse : ReductionContext, optional
        Another context on the same grid and potential; its assembled
        operator and factorization are shared instead of refactored,
        which makes a radius scan on one grid cheap.
    """

    def __init__(
        self,
        profile,
        potential,
        k,
        r,
        h=0.1,
        margin=15.0,
        drop_nonlinear=False,
        constrained=True,
        grid=None,
        reuse=None,
    ):
        if k < 1 or k != int(k):
            raise ValidationError(f"bump count must be a positive integer, got {k}")
        k = int(k)
        self.profile = profile
        self.potential = potential
        self.k = k
        self.r = float(r)
        self.h = float(h)
        self.drop_nonlinear = bool(drop_nonlinear)
        self.constrained = bool(constrained)

        if grid is None:
            grid = build_aligned_sector_grid(k, self.r, self.h, margin=margin)
        self.grid = grid
        g = self.grid
        pts = g.mesh().reshape(-1, 2)
        self.weights = g.cell_areas().reshape(-1).copy()
        self.v_values = np.repeat(
            np.asarray(potential(g.rho), dtype=float), g.n_theta
        )

        centers = place_bumps(k, self.r).centers
        p = profile.exponent
        w_sum = np.zeros(len(pts))
        sum_up = np.zeros(len(pts))
        z_dir = np.zeros(len(pts))
        wc = np.zeros(len(pts))
        for c in centers:
            diff = pts - c
            dist = np.hypot(diff[:, 0], diff[:, 1])
            u_j = profile(dist)
            safe = np.where(dist > 1e-14, dist, 1.0)
            cosine = (diff @ (c / self.r)) / safe
            z_j = np.where(dist > 1e-14, -profile.deriv(dist) * cosine, 0.0)
            w_sum += u_j
            sum_up += u_j**p
            z_dir += z_j
            wc += u_j ** (p - 1.0) * z_j
        wc /= k
        self.w_ansatz = w_sum
        self.sum_up = sum_up
        self.exponent = p

        if reuse is not None and reuse.grid is g and reuse.potential == potential:
            self.gram = reuse.gram
            self.lu = reuse.lu
        else:
            gram = stiffness_matrix(g) + sp.diags(self.weights * self.v_values)
            self.gram = gram.tocsc()
            self.lu = splu(self.gram)

        q = self.weights * wc
        gamma = 2.0 * k * float(q @ z_dir)
        if abs(gamma) < 1e-30:
            raise ValidationError(
                "constraint pairing with the Z direction vanished; "
                "degenerate profile or radius"
            )
        self.constraint = ConstraintSpec(weight=wc, z_direction=z_dir, gamma=gamma)
        self._q = q
        self._z_orth = self.lu.solve(q)
        self._cz_orth = 2.0 * k * float(q @ self._z_orth)

    # -- inner product and constraint -------------------------------------

    def inner(self, u, v):
        """Full-space H^1_V inner product of sector cell arrays."""
        return 2.0 * self.k * float(u @ (self.gram @ v))

    def norm(self, v):
        return float(np.sqrt(max(self.inner(v, v), 0.0)))

    def constraint_value(self, v):
        """c(v), the full-space pairing of v with U_{x1}^{p-1} Z_1."""
        return 2.0 * self.k * float(self._q @ v)

    # -- projections -------------------------------------------------------

    def project_oblique(self, v):
        """Projection onto E along the Z direction."""
        c = self.constraint_value(v)
        return v - (c / self.constraint.gamma) * self.constraint.z_direction

    def project_orth(self, v):
        """H^1_V-orthogonal projection onto E (keeps operators symmetric)."""
        c = self.constraint_value(v)
        return v - (c / self._cz_orth) * self._z_orth

    # -- operator pieces -----------------------------------------------------

    def _mass_image(self, v):
        """Riesz image of v -> p int W^{p-1} v (.) ; zero under the test hook."""
        if self.drop_nonlinear:
            return np.zeros_like(v)
        dual = self.weights * (self.exponent * self.w_ansatz ** (self.exponent - 1.0) * v)
        return self.lu.solve(dual)

    def apply_l_operator(self, v):
        """Image of the linearized-form Riesz operator, projected on E."""
        if self.constrained:
            v = self.project_orth(v)
            out = v - self._mass_image(v)
            return self.project_orth(out)
        return v - self._mass_image(v)

    def field(self, values):
        return Field(self.grid, np.asarray(values).reshape(self.grid.shape))

    def flat(self, field):
        if isinstance(field, Field):
            return field.values.reshape(-1)
        return np.asarray(field, dtype=float).reshape(-1)


def build_reduction_context(profile, potential, k, r, **kwargs):
    """Build a :class:`ReductionContext`; see the class for parameters."""
    return ReductionContext(profile, potential, k, r, **kwargs)


def project_to_E(ctx, v):
    """Project a field onto the constrained space along the Z direction.

    Returns a field with c = 0 to round-off; idempotent.
    """
    flat = ctx.flat(v)
    out = ctx.project_oblique(flat)
    return ctx.field(out) if isinstance(v, Field) else out


@dataclass
class RieszReport:
    """Riesz representative of the energy's first variation at W.

    Attributes
    ----------
    field : Field
        The representative l_k, projected into E.
    norm : float
        H^1_V dual norm of the functional (norm of the representative).
    potential_norm : float
        Weighted L^2 norm of the density (V - 1) W alone; exactly
        linear in the potential amplitude a.
    interaction_norm : float
        Weighted L^2 norm of the density W^p - sum U_j^p alone;
        independent of a.
    """

    field: Field
    norm: float
    potential_norm: float
    interaction_norm: float


def riesz_lk(ctx):
    """Compute l_k in E with <l_k, v> = I'(W) v for discrete v in E.

    The two pieces of the first variation are reported separately as
    plain L^2 magnitudes; measuring them through the a-dependent H^1_V
    metric would break the exact proportionality of the potential part
    to a.
    """
    w = ctx.w_ansatz
    dens_pot = (ctx.v_values - 1.0) * w
    dens_int = np.abs(w) ** ctx.exponent * np.sign(w) - ctx.sum_up
    b = ctx.weights * (dens_pot - dens_int)
    l_full = ctx.project_orth(ctx.lu.solve(b))
    l2 = lambda dens: float(
        np.sqrt(2.0 * ctx.k * np.sum(ctx.weights * dens * dens))
    )
    return RieszReport(
        field=ctx.field(l_full),
        norm=ctx.norm(l_full),
        potential_norm=l2(dens_pot),
        interaction_norm=l2(dens_int),
    )


def apply_L(ctx, v):
    """Apply the projected linearized operator to a field or flat array."""
    flat = ctx.flat(v)
    out = ctx.apply_l_operator(flat)
    return ctx.field(out) if isinstance(v, Field) else out


def coercivity_probe(ctx, n_probe=60, seed=0):
    """Smallest singular value of L on E by Lanczos on L squared.

    Parameters
    ----------
    ctx : ReductionContext
    n_probe : int
        Lanczos steps, at least 20.
    seed : int
        Seed of the randomized start vector.

    Returns
    -------
    float
        The estimate rho; positive when L is invertible on E.
    """
    if n_probe < 20:
        raise ValidationError(f"need at least 20 probe iterations, got {n_probe}")
    project = ctx.project_orth if ctx.constrained else None

    def squared(v):
        return ctx.apply_l_operator(ctx.apply_l_operator(v))

    template = np.zeros(ctx.grid.n_cells)
    val, _ = lanczos_smallest(
        squared, template, ctx.inner, n_steps=n_probe, seed=seed, project=project
    )
    return float(np.sqrt(max(val, 0.0)))


def nonlinear_remainder(ctx, phi):
    """Remainder beyond quadratic order and its projected gradient.

    Evaluates R(phi) = 1/(p+1) int (|W+phi|^{p+1} - W^{p+1}
    - (p+1) W^p phi - (p+1)p/2 W^{p-1} phi^2) together with the Riesz
    representative of its derivative, projected into E.
    """
    flat = ctx.flat(phi)
    w = ctx.w_ansatz
    p = ctx.exponent
    tot = w + flat
    dens = (
        np.abs(tot) ** (p + 1.0)
        - w ** (p + 1.0)
        - (p + 1.0) * w**p * flat
        - 0.5 * (p + 1.0) * p * w ** (p - 1.0) * flat**2
    )
    value = 2.0 * ctx.k * float((ctx.weights * dens).sum()) / (p + 1.0)
    dual = ctx.weights * (
        np.abs(tot) ** p * np.sign(tot) - w**p - p * w ** (p - 1.0) * flat
    )
    grad = ctx.project_orth(ctx.lu.solve(dual))
    if isinstance(phi, Field):
        return value, ctx.field(grad)
    return value, grad


def energy_gradient(ctx, phi):
    """Unconstrained Riesz gradient of the energy at W + phi.

    Returns the flat array g with <g, v> = d/dt I(W + phi + t v) at
    t = 0 for every discrete v; used by finite-difference consistency
    checks and as the Newton residual direction.
    """
    flat = ctx.flat(phi)
    u = ctx.w_ansatz + flat
    dual = ctx.weights * (np.abs(u) ** ctx.exponent * np.sign(u))
    return u - ctx.lu.solve(dual)


@dataclass
class CorrectionResult:
    """Converged correction phi with its run record.

    Attributes
    ----------
    phi : Field
    norm : float
        H^1_V norm of phi.
    iterations : int
        Outer fixed-point iterations performed.
    ratios : list of float
        Successive update-norm ratios (contraction measurements).
    residual : float
        Norm of the projected gradient of the energy at W + phi.
    constraint_value : float
        c(phi), for the preservation check.
    """

    phi: Field
    norm: float
    iterations: int
    ratios: list
    residual: float
    constraint_value: float

    def to_json(self):
        return json.dumps(
            {
                "norm": self.norm,
                "iterations": self.iterations,
                "ratios": list(self.ratios),
                "residual": self.residual,
                "constraint_value": self.constraint_value,
            },
            indent=2,
            sort_keys=True,
        )


def _projected_gradient(ctx, l_field, phi):
    """Residual of the projected Euler-Lagrange equation at phi."""
    _, r_grad = nonlinear_remainder(ctx, phi)
    return l_field + ctx.apply_l_operator(phi) - r_grad


def solve_correction(ctx, tol=1e-8, max_outer=30, inner_rtol=1e-11, validate_window=True):
    """Solve the constrained correction equation by contraction.

    Starting from phi = 0, each outer step solves the projected linear
    problem L phi_new = -(l_k - R'(phi)) with a constraint-preserving
    MINRES, stopping when both the update norm and the projected
    gradient fall below tol.

    Parameters
    ----------
    ctx : ReductionContext
    tol : float
        Convergence tolerance in the H^1_V norm.
    max_outer : int
        Outer iteration cap.
    inner_rtol : float
        Relative tolerance of the inner Krylov solves.
    validate_window : bool
        Check that r lies in the admissible window (k >= 2 only).

    Returns
    -------
    CorrectionResult
    """
    if validate_window and ctx.k >= 2:
        window = admissible_radii(
            ctx.k, ctx.potential.m, beta=0.95 * ctx.potential.m / (2.0 * np.pi)
        )
        if not (window.lower - 1e-9 <= ctx.r <= window.upper + 1e-9):
            raise ValidationError(
                f"radius {ctx.r} outside the admissible window "
                f"[{window.lower:.4f}, {window.upper:.4f}] for k={ctx.k}"
            )
    rep = riesz_lk(ctx)
    l_flat = ctx.flat(rep.field)
    phi = np.zeros_like(l_flat)
    if rep.norm == 0.0:
        return CorrectionResult(
            phi=ctx.field(phi),
            norm=0.0,
            iterations=1,
            ratios=[],
            residual=0.0,
            constraint_value=0.0,
        )

    ratios = []
    prev_update = None
    bad_ratio_streak = 0
    residual = np.inf
    for outer in range(1, max_outer + 1):
        _, r_grad = nonlinear_remainder(ctx, phi)
        rhs = ctx.project_orth(-(l_flat - r_grad))
        sol = minres(
            ctx.apply_l_operator,
            rhs,
            ctx.inner,
            rtol=inner_rtol,
            maxiter=400,
            project=ctx.project_orth,
        )
        if not sol.converged:
            raise ConvergenceError(
                "inner linear solve did not converge",
                iterations=sol.iterations,
                residual=sol.residual_norm,
            )
        update = ctx.norm(sol.x - phi)
        if prev_update is not None and prev_update > 0.0:
            ratio = update / prev_update
            ratios.append(ratio)
            if ratio >= 1.0:
                bad_ratio_streak += 1
                if bad_ratio_streak >= 2:
                    raise ContractionError(
                        "correction updates stopped contracting", ratios=ratios
                    )
            else:
                bad_ratio_streak = 0
        prev_update = update
        phi = sol.x
        residual = ctx.norm(_projected_gradient(ctx, l_flat, phi))
        if update <= tol and residual <= tol:
            return CorrectionResult(
                phi=ctx.field(phi),
                norm=ctx.norm(phi),
                iterations=outer,
                ratios=ratios,
                residual=residual,
                constraint_value=ctx.constraint_value(phi),
            )
    raise ConvergenceError(
        "correction iteration ran out of outer steps",
        iterations=max_outer,
        residual=residual,
    )
