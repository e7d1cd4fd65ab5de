"""Deterministic inner minimizers for the per-node subproblems.

Two solvers cover every subproblem in the simulator:

* ``minimize_l2_composite`` handles smooth-plus-``lam*||x||_2`` objectives by
  steepest descent with Barzilai-Borwein trial steps and Armijo backtracking.
  The l2 norm term is differentiable away from the origin and has minimal
  subgradient ``max(0, ||g|| - lam)`` at the origin, which the residual uses
  so convergence at 0 is detected correctly.
* ``fista_box_l1`` handles smooth-plus-l1 objectives over a box via fixed-step
  proximal gradient with momentum ``(l - 1)/(l + 2)`` and the progress
  residual ``||z - x_new|| / (rho * sqrt(dim))``.

Both are allocation-light and fully deterministic.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "InnerSolverError",
    "SolveInfo",
    "minimize_l2_composite",
    "fista_box_l1",
    "soft_threshold",
]

_ARMIJO_C1 = 1e-4
_STEP_FLOOR = 1e-18
_STEP_CAP = 1e12
# near a minimum the true decrease drops below one ulp of f, where an exact
# sufficient-decrease test rejects every step; allow that much noise
_F_NOISE = 1e-14


class InnerSolverError(RuntimeError):
    """Iteration budget exhausted before reaching the requested residual."""

    def __init__(self, solver: str, residual: float, tol: float, iters: int):
        super().__init__(
            f"{solver}: residual {residual:.3e} > tol {tol:.3e} "
            f"after {iters} iterations"
        )
        self.residual = residual
        self.tol = tol
        self.iters = iters


class SolveInfo:
    """Termination record: iterations used and final residual."""

    __slots__ = ("iterations", "residual")

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual


def _composite_grad(g: np.ndarray, x: np.ndarray, lam: float):
    """Minimal-norm (sub)gradient of smooth + lam*||x||_2 and its norm."""
    if lam == 0.0:
        return g, float(np.linalg.norm(g))
    xn = float(np.linalg.norm(x))
    if xn > 0.0:
        full = g + (lam / xn) * x
        return full, float(np.linalg.norm(full))
    gn = float(np.linalg.norm(g))
    if gn <= lam:
        return np.zeros_like(g), 0.0
    scale = (gn - lam) / gn
    return scale * g, scale * gn


def minimize_l2_composite(
    value_and_grad,
    x0: np.ndarray,
    l2_lam: float = 0.0,
    tol: float = 1e-7,
    max_iters: int = 100_000,
) -> tuple[np.ndarray, SolveInfo]:
    """Minimize ``smooth(x) + l2_lam * ||x||_2`` to (sub)gradient norm <= tol.

    ``value_and_grad(x)`` returns the smooth part's value and gradient.
    Raises :class:`InnerSolverError` if the budget runs out.
    """
    x = np.array(x0, dtype=float, copy=True)
    f, g = value_and_grad(x)
    f = f + l2_lam * float(np.linalg.norm(x))
    direction, res = _composite_grad(g, x, l2_lam)
    step = 1.0 / max(res, 1.0)
    for it in range(max_iters):
        if res <= tol:
            return x, SolveInfo(it, res)
        # Armijo backtracking along the negative composite gradient
        dec = _ARMIJO_C1 * res * res
        noise = _F_NOISE * (abs(f) + 1.0)
        while True:
            x_new = x - step * direction
            f_s, g_s = value_and_grad(x_new)
            f_new = f_s + l2_lam * float(np.linalg.norm(x_new))
            if f_new <= f - step * dec + noise or step <= _STEP_FLOOR:
                break
            step *= 0.5
        if l2_lam > 0.0:
            # the origin is the one nonsmooth point; when a step lands closer
            # to it than the step length, probe it to avoid orbiting the kink
            move = x - x_new
            if float(x_new @ x_new) < float(move @ move):
                f0, g0 = value_and_grad(np.zeros_like(x))
                if f0 <= f_new:
                    x_new, f_new, g_s = np.zeros_like(x), f0, g0
        d_new, res_new = _composite_grad(g_s, x_new, l2_lam)
        # BB1 trial step from the accepted move
        s_vec = x_new - x
        y_vec = d_new - direction
        sy = float(s_vec @ y_vec)
        if sy > 0.0:
            step = min(max(float(s_vec @ s_vec) / sy, _STEP_FLOOR), _STEP_CAP)
        else:
            step = min(step * 2.0, _STEP_CAP)
        x, f, direction, res = x_new, f_new, d_new, res_new
    if res <= tol:
        return x, SolveInfo(max_iters, res)
    raise InnerSolverError("minimize_l2_composite", res, tol, max_iters)


def soft_threshold(v: np.ndarray, threshold: float) -> np.ndarray:
    """Elementwise shrinkage sign(v) * max(|v| - threshold, 0)."""
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def fista_box_l1(
    grad,
    x0: np.ndarray,
    rho: float,
    l1_threshold: float,
    box_bound: float | None,
    prg_tol: float,
    max_iters: int = 200_000,
) -> tuple[np.ndarray, SolveInfo]:
    """Accelerated proximal gradient for smooth + l1 over a box.

    Each step shrinks ``z - rho * grad(z)`` by ``l1_threshold`` (already
    scaled by the caller), clamps to ``[-box_bound, box_bound]`` when a box
    is given, then applies momentum ``(l - 1)/(l + 2)``. Stops when
    ``prg = ||z - x_new||_2 / (rho * sqrt(dim)) < prg_tol``.
    """
    x_prev = np.array(x0, dtype=float, copy=True)
    z = x_prev.copy()
    denom = rho * math.sqrt(len(x_prev))
    prg = math.inf
    for l in range(1, max_iters + 1):
        v = z - rho * grad(z)
        x_new = soft_threshold(v, l1_threshold)
        if box_bound is not None:
            np.clip(x_new, -box_bound, box_bound, out=x_new)
        prg = float(np.linalg.norm(z - x_new)) / denom
        z = x_new + ((l - 1.0) / (l + 2.0)) * (x_new - x_prev)
        x_prev = x_new
        if prg < prg_tol:
            return x_prev, SolveInfo(l, prg)
    raise InnerSolverError("fista_box_l1", prg, prg_tol, max_iters)
