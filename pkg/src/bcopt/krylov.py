"""Preconditioned conjugate gradient on a face of the nonnegative orthant.

Solves min  1/2 w' B_FF w + w' g_F  over the free coordinates of a mask,
optionally preconditioned by the principal submatrix P_FF of a scaling
metric (applied scatter -> P -> gather, never materialized) and optionally
constrained to a trust-region ball, with Steihaug-style boundary and
nonpositive-curvature exits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ops import FaceMask


@dataclass
class CGConfig:
    rtol: float = 1e-3
    maxiter: int = 500
    radius: float | None = None

    def __post_init__(self):
        if not (0.0 < self.rtol < 1.0):
            raise ValueError("rtol must lie in (0, 1)")
        if self.maxiter < 1:
            raise ValueError("maxiter must be at least 1")


@dataclass
class CGOutcome:
    step: np.ndarray
    iterations: int
    status: str  # converged | maxiter | boundary-hit | bound-hit | negative-curvature | numerical-failure


def _to_boundary(w, p, radius):
    """tau >= 0 with ||w + tau p|| = radius (exists when ||w|| <= radius)."""
    pp = float(p @ p)
    wp = float(w @ p)
    ww = float(w @ w)
    disc = wp * wp + pp * (radius * radius - ww)
    return (-wp + math.sqrt(max(disc, 0.0))) / pp


def cg_face(B, g, mask: FaceMask, precond=None, cfg: CGConfig | None = None,
            orthant_base=None) -> CGOutcome:
    """Approximately minimize the quadratic model over the face's free space.

    Parameters
    ----------
    B : object with ``apply(v)`` on full vectors (symmetric PSD on the face).
    g : full-space gradient vector; only its free part enters the problem.
    precond : optional object with ``apply(v)`` on full vectors, an SPD
        approximation of the *inverse* of B (e.g. the scaling metric P); its
        face restriction is used directly as the CG preconditioner.
    orthant_base : optional full-space feasible point; iteration stops with
        status ``bound-hit`` at the first step for which base + w leaves the
        nonnegative orthant (the caller then runs a projected search along
        the returned w).
    """
    cfg = cfg or CGConfig()
    g_f = mask.restrict(np.asarray(g, dtype=float))
    m = g_f.size
    w = np.zeros(m)
    if m == 0:
        return CGOutcome(step=w, iterations=0, status="converged")

    def b_ff(v):
        return mask.restrict(B.apply(mask.prolong(v)))

    def m_ff(v):
        if precond is None:
            return v.copy()
        return mask.restrict(precond.apply(mask.prolong(v)))

    base_f = None if orthant_base is None else mask.restrict(orthant_base)
    r = -g_f  # residual of B_FF w + g_F at w = 0
    norm_r0 = float(np.linalg.norm(r))
    if norm_r0 == 0.0:
        return CGOutcome(step=w, iterations=0, status="converged")
    z = m_ff(r)
    p = z.copy()
    rz = float(r @ z)
    tol = cfg.rtol * norm_r0
    for it in range(1, cfg.maxiter + 1):
        bp = b_ff(p)
        if not np.all(np.isfinite(bp)):
            return CGOutcome(step=w, iterations=it, status="numerical-failure")
        curv = float(p @ bp)
        if curv <= 0.0:
            if cfg.radius is not None:
                w = w + _to_boundary(w, p, cfg.radius) * p
                return CGOutcome(step=w, iterations=it, status="negative-curvature")
            return CGOutcome(step=w, iterations=it, status="negative-curvature")
        alpha = rz / curv
        w_next = w + alpha * p
        if cfg.radius is not None and float(w_next @ w_next) >= cfg.radius**2:
            w = w + _to_boundary(w, p, cfg.radius) * p
            return CGOutcome(step=w, iterations=it, status="boundary-hit")
        if base_f is not None and np.any(base_f + w_next < 0.0):
            return CGOutcome(step=w_next, iterations=it, status="bound-hit")
        w = w_next
        r = r - alpha * bp
        if float(np.linalg.norm(r)) <= tol:
            return CGOutcome(step=w, iterations=it, status="converged")
        z = m_ff(r)
        rz_next = float(r @ z)
        p = z + (rz_next / rz) * p
        rz = rz_next
    return CGOutcome(step=w, iterations=cfg.maxiter, status="maxiter")
