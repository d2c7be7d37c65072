"""Ground state of the limit problem and its radial integrals.

The limit equation is the radial ODE

    -U'' - ((N-1)/s) U' + U = U^p,   U'(0) = 0,  U(s) -> 0 as s -> inf,

whose positive decreasing solution U is the building block of every
multi-bump ansatz.  U decays like c s^{-(N-1)/2} e^{-s}; the stored
profile covers [0, S_max] on a uniform grid and carries the matched
far-field amplitude c so evaluation beyond S_max follows the decay law.

The solve proceeds in two passes.  A shooting pass integrates from the
origin with an adaptive RK45 scheme and bisects on U(0): too large an
initial height makes the trajectory cross zero, too small makes it turn
upward while still positive.  Pure shooting cannot carry the decaying
separatrix to s = 30 in double precision (departures grow like e^{+s}),
so a collocation pass then solves the two-point problem on [0, S_max]
with the far-field Robin condition U' + (1 + (N-1)/(2s)) U = 0 at the
right end, using the shooting trajectory as the initial guess.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import quad, simpson, solve_bvp, solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import BracketError, ConvergenceError, ValidationError

SPHERE_MEASURE = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}

# 6th order central second-difference stencil, denominator 180 h^2.
_D2_STENCIL = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0])


def _check_parameters(dimension: int, exponent: float) -> None:
    if dimension not in SPHERE_MEASURE:
        raise ValidationError(f"dimension must be 1, 2 or 3, got {dimension}")
    if exponent <= 1.0:
        raise ValidationError(f"exponent must exceed 1, got {exponent}")
    if dimension >= 3 and exponent >= (dimension + 2) / (dimension - 2):
        raise ValidationError(
            f"exponent {exponent} is Sobolev-supercritical for dimension {dimension} "
            f"(needs p < {(dimension + 2) / (dimension - 2)})"
        )


def _nonlinearity(u, exponent):
    """Sign-safe |u|^(p-1) u."""
    return np.sign(u) * np.abs(u) ** exponent


@dataclass
class RadialProfile:
    """Sampled radial ground state with far-field continuation.

    Attributes
    ----------
    dimension, exponent : problem parameters N and p.
    s : uniform nodes on [0, s_max], spacing h.
    values, derivatives : U and U' at the nodes.
    far_field_amplitude : c in U ~ c s^{-(N-1)/2} e^{-s}, matched at s_max.
    residual : solver-reported ODE residual (max collocation rms).
    """

    dimension: int
    exponent: float
    s: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    far_field_amplitude: float
    residual: float = 0.0

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    @property
    def h(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def u0(self) -> float:
        return float(self.values[0])

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.s, self.values, self.derivatives)

    @cached_property
    def _spline_deriv(self):
        return self._spline.derivative()

    def _law(self, s):
        n = self.dimension
        return self.far_field_amplitude * s ** (-(n - 1) / 2.0) * np.exp(-s)

    def __call__(self, s):
        """Evaluate U at s (scalar or array), far-field law beyond s_max."""
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        inside = s <= self.s_max
        out[inside] = self._spline(s[inside])
        if np.any(~inside):
            out[~inside] = self._law(s[~inside])
        return out if out.ndim else float(out)

    def deriv(self, s):
        """Evaluate U' at s, far-field law beyond s_max."""
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        inside = s <= self.s_max
        out[inside] = self._spline_deriv(s[inside])
        if np.any(~inside):
            tail = s[~inside]
            out[~inside] = -self._law(tail) * (1.0 + (self.dimension - 1) / (2.0 * tail))
        return out if out.ndim else float(out)

    def ode_residual_fd(self) -> float:
        """Max-norm ODE residual from a 6th order difference of the samples.

        An independent consistency check: U'' is rebuilt from the stored
        values (even extension across s = 0), U' is taken from the stored
        derivative samples.  Nodes within three steps of s_max are skipped.
        """
        u = np.concatenate([self.values[3:0:-1], self.values])
        d2 = np.convolve(u, _D2_STENCIL[::-1], mode="valid") / (180.0 * self.h**2)
        core = slice(1, len(self.values) - 3)
        s, v, dv = self.s[core], self.values[core], self.derivatives[core]
        res = -d2[core] - (self.dimension - 1) / s * dv + v - v**self.exponent
        return float(np.max(np.abs(res)))

    def log_derivative_at_end(self) -> float:
        """-(ln U)'(s_max), which tends to 1 in the far field."""
        return float(-self.derivatives[-1] / self.values[-1])

    def validate(self) -> None:
        if not np.all(self.values > 0.0):
            raise ValidationError("profile values must be strictly positive")
        if not np.all(np.diff(self.values) < 0.0):
            raise ValidationError("profile must be strictly decreasing")
        if not self.far_field_amplitude > 0.0:
            raise ValidationError("far-field amplitude must be positive")

    def to_csv(self, path) -> None:
        buf = io.StringIO()
        buf.write("# multibump radial profile\n")
        buf.write(
            f"# dimension={self.dimension} exponent={self.exponent!r} "
            f"far_field_amplitude={self.far_field_amplitude!r} residual={self.residual!r}\n"
        )
        buf.write("s,value,derivative\n")
        for s, v, d in zip(self.s, self.values, self.derivatives):
            buf.write(f"{s:.17e},{v:.17e},{d:.17e}\n")
        with open(path, "w") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def from_csv(cls, path) -> "RadialProfile":
        with open(path) as fh:
            lines = fh.read().splitlines()
        meta = {}
        body_start = 0
        for i, line in enumerate(lines):
            if line.startswith("#"):
                for chunk in line[1:].split():
                    if "=" in chunk:
                        key, val = chunk.split("=", 1)
                        meta[key] = val
            elif line.startswith("s,"):
                body_start = i + 1
                break
        data = np.loadtxt(lines[body_start:], delimiter=",")
        return cls(
            dimension=int(meta["dimension"]),
            exponent=float(meta["exponent"]),
            s=data[:, 0],
            values=data[:, 1],
            derivatives=data[:, 2],
            far_field_amplitude=float(meta["far_field_amplitude"]),
            residual=float(meta.get("residual", 0.0)),
        )


@dataclass(frozen=True)
class ExpansionConstants:
    """Leading constants of the reduced-energy expansion.

    A is the energy of one bump at infinity, (1/2 - 1/(p+1)) * int U^{p+1};
    B1 = (a/2) * int U^2 multiplies the r^{-m} potential term.
    """

    A: float
    B1: float


def _series_start(alpha: float, s0: float, dimension: int, exponent: float):
    """Series values (U, U') at small s0 from the regular expansion at 0."""
    f = alpha - alpha**exponent
    a2 = f / (2.0 * dimension)
    a4 = a2 * (1.0 - exponent * alpha ** (exponent - 1.0)) / (4.0 * (dimension + 2.0))
    u = alpha + a2 * s0**2 + a4 * s0**4
    du = 2.0 * a2 * s0 + 4.0 * a4 * s0**3
    return u, du


def classify_trajectory(alpha: float, dimension: int, exponent: float,
                        s_end: float = 45.0) -> str:
    """Classify the shooting trajectory started at U(0) = alpha > 1.

    Returns "crosses" when U reaches zero with negative slope (alpha too
    large) and "turns" when U' vanishes while U > 0 (alpha too small).
    """

    def rhs(s, y):
        u, du = y
        friction = (dimension - 1) / s * du if s > 0 else 0.0
        return [du, u - _nonlinearity(u, exponent) - friction]

    def ev_cross(s, y):
        return y[0]

    ev_cross.terminal = True
    ev_cross.direction = -1

    def ev_turn(s, y):
        return y[1]

    ev_turn.terminal = True
    ev_turn.direction = 1

    s0 = 1e-3
    y0 = _series_start(alpha, s0, dimension, exponent)
    sol = solve_ivp(rhs, (s0, s_end), y0, method="RK45", rtol=1e-10, atol=1e-12,
                    events=(ev_cross, ev_turn))
    if sol.t_events[0].size:
        return "crosses"
    if sol.t_events[1].size:
        return "turns"
    # Ran to s_end hugging the separatrix: the sign of the growing mode
    # U' + U (1 + (N-1)/(2s)) says which side we are on.
    u, du = sol.y[:, -1]
    grow = du + u * (1.0 + (dimension - 1) / (2.0 * s_end))
    return "turns" if grow > 0 else "crosses"


def _bisect_alpha(dimension: int, exponent: float, tol: float,
                  classify) -> tuple[float, float]:
    lo = 1.0 + 1e-9
    if classify(lo) != "turns":
        raise BracketError("low shooting height fails to turn upward", lo=lo)
    hi = 4.0
    while classify(hi) != "crosses":
        hi *= 2.0
        if hi > 1024.0:
            raise BracketError("no crossing trajectory found", lo=lo, hi=hi)
    while hi - lo > max(tol, 1e-13 * hi):
        mid = 0.5 * (lo + hi)
        if classify(mid) == "crosses":
            hi = mid
        else:
            lo = mid
    return lo, hi


def shooting_alpha(dimension: int, exponent: float, h: float,
                   s_max: float = 20.0, tol: float = 1e-12) -> float:
    """U(0) from bisection with a fixed-step classical RK4 integrator.

    The fixed step ties the answer to the grid spacing h, which is what a
    grid-convergence measurement needs; the production path is adaptive
    and does not see h.
    """
    _check_parameters(dimension, exponent)
    n_steps = int(round(s_max / h))

    def rhs(s, u, du):
        friction = (dimension - 1) / s * du if s > 0 else 0.0
        return du, u - _nonlinearity(u, exponent) - friction

    def classify(alpha):
        u, du = _series_start(alpha, h, dimension, exponent)
        s = h
        for _ in range(n_steps):
            k1u, k1v = rhs(s, u, du)
            k2u, k2v = rhs(s + h / 2, u + h / 2 * k1u, du + h / 2 * k1v)
            k3u, k3v = rhs(s + h / 2, u + h / 2 * k2u, du + h / 2 * k2v)
            k4u, k4v = rhs(s + h, u + h * k3u, du + h * k3v)
            u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
            du += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
            s += h
            if u < 0.0:
                return "crosses"
            if du > 0.0:
                return "turns"
        grow = du + u * (1.0 + (dimension - 1) / (2.0 * s))
        return "turns" if grow > 0 else "crosses"

    lo, hi = _bisect_alpha(dimension, exponent, tol, classify)
    return 0.5 * (lo + hi)


def solve_ground_state(dimension: int, exponent: float, tol: float = 1e-10,
                       s_max: float = 30.0, h: float = 0.01) -> RadialProfile:
    """Solve for the radial ground state to the requested tolerance.

    Parameters
    ----------
    dimension : N in {1, 2, 3}.
    exponent : p > 1, Sobolev-subcritical for N = 3.
    tol : bisection width on U(0) and collocation residual target.
    s_max : extent of the stored profile, in decay lengths.
    h : spacing of the output grid.

    Returns
    -------
    RadialProfile with positive strictly decreasing values, matched
    far-field amplitude, and solver residual at most tol.
    """
    _check_parameters(dimension, exponent)
    if s_max < 10.0:
        raise ValidationError("s_max below 10 decay lengths cannot anchor the tail")

    classify = lambda a: classify_trajectory(a, dimension, exponent)
    lo, hi = _bisect_alpha(dimension, exponent, max(tol, 1e-13), classify)
    alpha = 0.5 * (lo + hi)

    # Trace the best trajectory out to where it still tracks the separatrix,
    # then extend the initial guess with the decay law.
    def rhs(s, y):
        u, du = y
        friction = (dimension - 1) / s * du if s > 0 else 0.0
        return [du, u - _nonlinearity(u, exponent) - friction]

    s0 = 1e-3
    trace = solve_ivp(rhs, (s0, s_max), _series_start(alpha, s0, dimension, exponent),
                      method="RK45", rtol=1e-10, atol=1e-12, dense_output=True)
    s_track = s_max
    samples = trace.sol(np.linspace(s0, trace.t[-1], 2000))
    bad = np.where((samples[0] < 1e-9 * alpha) | (samples[0] < 0) | (samples[1] > 0))[0]
    if bad.size:
        s_track = s0 + (trace.t[-1] - s0) * bad[0] / 1999.0
    s_track = min(s_track, trace.t[-1])

    mesh_lo = np.linspace(s0, s_track, 240)
    guess_lo = trace.sol(mesh_lo)
    c_track = guess_lo[0, -1] * s_track ** ((dimension - 1) / 2.0) * np.exp(s_track)
    mesh = np.concatenate([[0.0], mesh_lo, np.linspace(s_track, s_max, 120)[1:]])
    tail = mesh[len(mesh_lo) + 1:]
    law = c_track * tail ** (-(dimension - 1) / 2.0) * np.exp(-tail)
    guess = np.empty((2, mesh.size))
    guess[0] = np.concatenate([[alpha], guess_lo[0], law])
    guess[1] = np.concatenate([[0.0], guess_lo[1],
                               -law * (1.0 + (dimension - 1) / (2.0 * tail))])

    def bvp_rhs(x, y):
        u, du = y
        f = u - _nonlinearity(u, exponent)
        out = np.empty_like(y)
        out[0] = du
        with np.errstate(divide="ignore", invalid="ignore"):
            friction = np.where(x > 0, (dimension - 1) * du / np.where(x > 0, x, 1.0), 0.0)
        out[1] = f - friction
        at0 = x == 0.0
        if np.any(at0):
            out[1, at0] = f[at0] / dimension
        return out

    def bc(ya, yb):
        robin = yb[1] + yb[0] * (1.0 + (dimension - 1) / (2.0 * s_max))
        return np.array([ya[1], robin])

    bvp_tol = min(tol, 1e-10)
    sol = solve_bvp(bvp_rhs, bc, mesh, guess, tol=bvp_tol, max_nodes=200000)
    if sol.status != 0:
        raise ConvergenceError(f"collocation pass failed: {sol.message}")

    n = int(round(s_max / h))
    grid = np.linspace(0.0, s_max, n + 1)
    vals = sol.sol(grid)
    amplitude = vals[0, -1] * s_max ** ((dimension - 1) / 2.0) * np.exp(s_max)
    profile = RadialProfile(
        dimension=dimension,
        exponent=float(exponent),
        s=grid,
        values=vals[0],
        derivatives=vals[1],
        far_field_amplitude=float(amplitude),
        residual=float(np.max(sol.rms_residuals)),
    )
    profile.validate()
    return profile


def radial_integral(profile: RadialProfile, q: float) -> float:
    """Integral of U^q over R^N, far-field tail included.

    Simpson quadrature on the stored grid plus the exact integral of the
    decay-law tail on [s_max, inf).
    """
    if q < 1.0:
        raise ValidationError(f"power q must be at least 1, got {q}")
    n = profile.dimension
    body = simpson(profile.values**q * profile.s ** (n - 1), x=profile.s)
    c = profile.far_field_amplitude
    if c > 0.0:
        law = lambda s: (c * s ** (-(n - 1) / 2.0) * np.exp(-s)) ** q * s ** (n - 1)
        tail, _ = quad(law, profile.s_max, np.inf)
    else:
        tail = 0.0
    return float(SPHERE_MEASURE[n] * (body + tail))


def expansion_constants(profile: RadialProfile, potential) -> ExpansionConstants:
    """Constants A and B1 of the energy expansion for a given potential.

    The potential only enters through its amplitude a: A depends on the
    profile alone, B1 = (a/2) int U^2.
    """
    p = profile.exponent
    a_const = (0.5 - 1.0 / (p + 1.0)) * radial_integral(profile, p + 1.0)
    b1 = 0.5 * potential.a * radial_integral(profile, 2.0)
    return ExpansionConstants(A=float(a_const), B1=float(b1))
