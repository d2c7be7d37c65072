"""Ring geometry of the k-bump ansatz and the algebraic potential.

Bumps sit at the vertices of a regular k-gon of radius r in the plane,

    x_j = r (cos(2(j-1)pi/k), sin(2(j-1)pi/k)),  j = 1..k,

and the ansatz W_r is the sum of ground-state copies centered there.
The admissible radius window S_k = [(m/2pi - beta) k ln k,
(m/2pi + beta) k ln k] is where the potential pull and the neighbour
repulsion balance.  Z_1 is the derivative of the first bump with respect
to the ring radius, the direction the reduction constrains away.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class PotentialSpec:
    """Radial potential V(rho) = 1 + a (1 + rho^2)^(-m/2).

    The far field is V = 1 + a rho^-m + O(rho^-(m+2)), the algebraic
    class the expansion needs, with V0 normalized to 1.
    """

    a: float = 1.0
    m: float = 2.0

    def __post_init__(self):
        if self.a < 0.0:
            raise ValidationError(f"potential amplitude a must be >= 0, got {self.a}")
        if self.m <= 1.0:
            raise ValidationError(f"potential decay m must exceed 1, got {self.m}")

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = 1.0 + self.a * (1.0 + rho**2) ** (-self.m / 2.0)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class AdmissibleInterval:
    """Radius window S_k for a given bump count."""

    k: int
    lower: float
    upper: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, r: float) -> bool:
        return self.lower <= r <= self.upper


def admissible_radii(k: int, m: float, beta: float = 0.1) -> AdmissibleInterval:
    """Window [(m/2pi - beta) k ln k, (m/2pi + beta) k ln k].

    beta = 0 degenerates to the single point (m/2pi) k ln k; beta must
    stay below m/2pi so the window keeps positive radii.
    """
    if k < 2:
        raise ValidationError(f"need at least 2 bumps for a ring, got k={k}")
    if beta < 0.0 or beta >= m / (2.0 * np.pi):
        raise ValidationError(
            f"beta must lie in [0, m/2pi) = [0, {m / (2 * np.pi):.6f}), got {beta}"
        )
    scale = k * np.log(k)
    center = m / (2.0 * np.pi)
    return AdmissibleInterval(k=k, lower=(center - beta) * scale,
                              upper=(center + beta) * scale)


@dataclass(frozen=True)
class BumpConfiguration:
    """k bump centers on the ring of radius r."""

    k: int
    r: float
    centers: np.ndarray

    @property
    def nearest_neighbour_distance(self) -> float:
        return 2.0 * self.r * np.sin(np.pi / self.k)


def place_bumps(k: int, r: float) -> BumpConfiguration:
    """Vertices of the regular k-gon of radius r, first on the positive axis."""
    if k < 1:
        raise ValidationError(f"bump count must be positive, got {k}")
    if r <= 0.0:
        raise ValidationError(f"ring radius must be positive, got {r}")
    angles = 2.0 * np.pi * np.arange(k) / k
    centers = r * np.column_stack([np.cos(angles), np.sin(angles)])
    return BumpConfiguration(k=k, r=float(r), centers=centers)


def eval_ansatz(config: BumpConfiguration, profile, points) -> np.ndarray:
    """W_r = sum of profile copies at the bump centers, at points (..., 2)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    total = np.zeros(pts.shape[0])
    for center in config.centers:
        total += profile(np.linalg.norm(pts - center, axis=-1))
    return total if np.asarray(points).ndim > 1 else float(total[0])


def eval_z1(config: BumpConfiguration, profile, points) -> np.ndarray:
    """Derivative of the first bump with respect to the ring radius.

    Z_1(y) = -U'(|y - x_1|) <(y - x_1)/|y - x_1|, x_1/r>; the removable
    0/0 at the center itself evaluates to 0 since U'(0) = 0.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x1 = config.centers[0]
    diff = pts - x1
    dist = np.linalg.norm(diff, axis=-1)
    safe = np.where(dist > 1e-14, dist, 1.0)
    cosine = (diff @ (x1 / config.r)) / safe
    out = np.where(dist > 1e-14, -profile.deriv(dist) * cosine, 0.0)
    return out if np.asarray(points).ndim > 1 else float(out[0])


@dataclass(frozen=True)
class TailBoundReport:
    """Measured constant for the neighbour-tail bound on the first sector.

    The bound is sum_{j>=2} U(|y - x_j|) <= C exp(-eta r pi / k)
    exp(-(1-eta)|y - x_1|) for y in the sector around x_1; c_bar is the
    smallest C that works on the sampled points.
    """

    k: int
    r: float
    eta: float
    c_bar: float
    worst_point: np.ndarray
    n_samples: int

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.c_bar))


def tail_bound_check(config: BumpConfiguration, profile, eta: float,
                     samples) -> TailBoundReport:
    """Measure the tail-bound constant on sample points in the first sector.

    Samples must lie in the angular sector |angle(y)| <= pi/k around the
    first center (the origin counts as boundary).
    """
    if not 0.0 < eta < 1.0:
        raise ValidationError(f"eta must lie in (0, 1), got {eta}")
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    norms = np.linalg.norm(pts, axis=-1)
    x1_hat = config.centers[0] / config.r
    with np.errstate(invalid="ignore", divide="ignore"):
        cosines = np.where(norms > 0, (pts @ x1_hat) / np.where(norms > 0, norms, 1.0), 1.0)
    if np.any(cosines < np.cos(np.pi / config.k) - 1e-12):
        raise ValidationError("sample points must lie in the first angular sector")

    tail = np.zeros(pts.shape[0])
    for center in config.centers[1:]:
        tail += profile(np.linalg.norm(pts - center, axis=-1))
    d1 = np.linalg.norm(pts - config.centers[0], axis=-1)
    bound = np.exp(-eta * config.r * np.pi / config.k) * np.exp(-(1.0 - eta) * d1)
    ratios = tail / bound
    worst = int(np.argmax(ratios)) if ratios.size else 0
    c_bar = float(ratios[worst]) if ratios.size else 0.0
    return TailBoundReport(k=config.k, r=config.r, eta=eta, c_bar=c_bar,
                           worst_point=pts[worst] if ratios.size else np.zeros(2),
                           n_samples=pts.shape[0])
