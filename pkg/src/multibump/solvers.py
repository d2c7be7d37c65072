"""Krylov iterations in a user-supplied inner product.

The correction equation of the reduction scheme is self-adjoint with
respect to a weighted H^1 inner product, not the Euclidean one, so the
standard library solvers do not apply directly.  This module carries a
minimal MINRES (Paige and Saunders recurrences with the inner product
swapped in) and a Lanczos routine for the smallest eigenvalue of a
symmetric positive operator.  Both accept an optional projection that is
re-applied every iteration to keep the Krylov basis inside a constraint
subspace despite round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

__all__ = ["MinresResult", "minres", "lanczos_smallest"]


@dataclass
class MinresResult:
    """Outcome of a MINRES solve.

    Attributes
    ----------
    x : ndarray
        Approximate solution.
    residual_norm : float
        Norm (in the supplied inner product) of b - A x, tracked by the
        recurrence.
    iterations : int
    converged : bool
    """

    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool


def _default_ip(u, v):
    return float(np.dot(np.ravel(u), np.ravel(v)))


def minres(apply_a, b, inner, rtol=1e-10, maxiter=500, project=None):
    """Solve A x = b for a self-adjoint operator in the given inner product.

    Parameters
    ----------
    apply_a : callable
        Action of the operator on a vector (any ndarray shape).
    b : ndarray
        Right-hand side.
    inner : callable or None
        Inner product ``inner(u, v) -> float`` with respect to which
        ``apply_a`` is self-adjoint.  None means Euclidean.
    rtol : float
        Stop when the residual norm falls below rtol * |b|.
    maxiter : int
    project : callable, optional
        Idempotent map applied to b and to every Lanczos vector; use it
        to confine the iteration to an invariant subspace.

    Returns
    -------
    MinresResult
    """
    ip = inner if inner is not None else _default_ip
    if project is not None:
        b = project(b)
    x = np.zeros_like(b)
    b_norm = np.sqrt(max(ip(b, b), 0.0))
    if b_norm == 0.0:
        return MinresResult(x=x, residual_norm=0.0, iterations=0, converged=True)

    v_prev = np.zeros_like(b)
    v = b / b_norm
    beta = 0.0
    # QR of the tridiagonal via Givens rotations.
    c_prev, s_prev = 1.0, 0.0
    c_cur, s_cur = 1.0, 0.0
    w_prev = np.zeros_like(b)
    w_cur = np.zeros_like(b)
    phi = b_norm

    for it in range(1, maxiter + 1):
        av = apply_a(v)
        if project is not None:
            av = project(av)
        alpha = ip(av, v)
        av = av - alpha * v - beta * v_prev
        if project is not None:
            av = project(av)
        beta_next = np.sqrt(max(ip(av, av), 0.0))

        # Apply the two previous rotations to the new column of the
        # tridiagonal, then compute the rotation that zeroes beta_next.
        diag = c_cur * alpha - c_prev * s_cur * beta
        superdiag = s_cur * alpha + c_prev * c_cur * beta
        epsilon = s_prev * beta

        rho = np.hypot(diag, beta_next)
        if rho == 0.0:
            raise NumericalError("minres breakdown: singular tridiagonal factor")
        c_next = diag / rho
        s_next = beta_next / rho

        w_next = (v - superdiag * w_cur - epsilon * w_prev) / rho
        x = x + (c_next * phi) * w_next
        phi = -s_next * phi

        if beta_next > 0.0:
            v_prev, v = v, av / beta_next
        beta = beta_next
        w_prev, w_cur = w_cur, w_next
        c_prev, s_prev = c_cur, s_cur
        c_cur, s_cur = c_next, s_next

        if abs(phi) <= rtol * b_norm:
            return MinresResult(
                x=x, residual_norm=abs(phi), iterations=it, converged=True
            )
        if beta_next == 0.0:
            break

    return MinresResult(x=x, residual_norm=abs(phi), iterations=it, converged=False)


def lanczos_smallest(apply_a, shape_like, inner, n_steps=60, seed=0, project=None):
    """Smallest eigenvalue of a self-adjoint operator by the Lanczos method.

    Full reorthogonalization is used; the basis sizes involved here are
    tiny compared to the operator dimension, so the cost is dominated by
    operator applications anyway.

    Parameters
    ----------
    apply_a : callable
        Operator action.
    shape_like : ndarray
        Any array with the shape and dtype of the operator's vectors.
    inner : callable or None
        Inner product; None means Euclidean.
    n_steps : int
        Number of Lanczos steps (matrix applications).
    seed : int
        Seed for the randomized start vector.
    project : callable, optional
        Constraint projection applied to the start vector and to every
        new basis vector.

    Returns
    -------
    value : float
        Ritz estimate of the smallest eigenvalue.
    vector : ndarray
        Corresponding Ritz vector (normalized in the inner product).
    """
    ip = inner if inner is not None else _default_ip
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(np.shape(shape_like))
    if project is not None:
        q = project(q)
    nrm = np.sqrt(max(ip(q, q), 0.0))
    if nrm == 0.0:
        raise NumericalError("lanczos start vector vanished under projection")
    q = q / nrm

    basis = [q]
    alphas, betas = [], []
    for _ in range(n_steps):
        w = apply_a(basis[-1])
        if project is not None:
            w = project(w)
        alpha = ip(w, basis[-1])
        alphas.append(alpha)
        w = w - alpha * basis[-1]
        if len(basis) > 1:
            w = w - betas[-1] * basis[-2]
        # Full reorthogonalization, twice for safety.
        for _pass in range(2):
            for qi in basis:
                w = w - ip(w, qi) * qi
        if project is not None:
            w = project(w)
        beta = np.sqrt(max(ip(w, w), 0.0))
        if beta < 1e-14:
            break
        betas.append(beta)
        basis.append(w / beta)

    n = len(alphas)
    t = np.zeros((n, n))
    t[np.arange(n), np.arange(n)] = alphas
    if n > 1:
        off = np.asarray(betas[: n - 1])
        t[np.arange(n - 1), np.arange(1, n)] = off
        t[np.arange(1, n), np.arange(n - 1)] = off
    vals, vecs = np.linalg.eigh(t)
    coeff = vecs[:, 0]
    ritz = np.zeros_like(basis[0])
    for ci, qi in zip(coeff, basis[: n]):
        ritz = ritz + ci * qi
    nr = np.sqrt(max(ip(ritz, ritz), 0.0))
    if nr > 0.0:
        ritz = ritz / nr
    return float(vals[0]), ritz
