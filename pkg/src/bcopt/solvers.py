"""Bound-constrained solvers over x >= 0 with optional nondiagonal scaling.

Three solvers share the projected-path machinery in this module:

* ``solve_lbfgsb``: linesearch method with a compact L-BFGS model;
* ``solve_tron``:   trust-region projected Newton with minor iterates;
* ``solve_spg``:    spectral projected gradient (Barzilai-Borwein).

Scaling is injected as a metric object (see :mod:`bcopt.scaling`): gradient
directions become -Pbar g with the binding rows/columns of P zeroed, face
CG is preconditioned with P_FF, and the L-BFGS initial operator becomes
theta * P^{-1}. The optimality measure ||x - Proj(x - grad f)|| does not
depend on the scaling, so traces from scaled and unscaled runs are directly
comparable. With the identity scaling each scaled code path reproduces its
unscaled twin decision for decision.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .krylov import CGConfig, cg_face
from .lbfgs import CompactLBFGS
from .ops import FaceMask, masked_scaled_direction
from .scaling import IdentityScaling


def project(x: np.ndarray) -> np.ndarray:
    """Projection onto the nonnegative orthant, componentwise max with 0."""
    return np.maximum(x, 0.0)


def pg_norm(x: np.ndarray, g: np.ndarray) -> float:
    """First-order optimality residual ||x - Proj(x - g)||."""
    return float(np.linalg.norm(x - np.maximum(x - g, 0.0)))


def binding_mask(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Indices at the bound whose gradient pushes further out."""
    return (x == 0.0) & (g > 0.0)


# -- configuration ---------------------------------------------------------


@dataclass
class CauchyConfig:
    mu0: float = 0.01
    beta: float = 0.5
    max_backtracks: int = 30

    def __post_init__(self):
        if not (0.0 < self.mu0 < 0.5):
            raise ValueError("mu0 must lie in (0, 1/2)")
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")


@dataclass
class WolfeConfig:
    mu: float = 1e-4
    eta: float = 0.9
    max_evals: int = 25

    def __post_init__(self):
        if not (0.0 < self.mu < self.eta < 1.0):
            raise ValueError("need 0 < mu < eta < 1")


@dataclass
class TRConfig:
    delta0: float | None = None  # None -> ||grad f(x0)||
    eta0: float = 1e-3
    sigma1: float = 0.25
    sigma2: float = 0.5
    sigma3: float = 4.0
    max_minor: int = 20


@dataclass
class SPGConfig:
    alpha_min: float = 1e-30
    alpha_max: float = 1e30
    memory: int = 10
    gamma: float = 1e-4
    max_backtracks: int = 60


@dataclass
class CGSettings:
    rtol: float | None = None  # None -> per-solver default
    maxiter: int = 500


@dataclass
class SolverConfig:
    max_iter: int = 200
    pg_rtol: float = 1e-5
    max_time: float | None = None
    scaled: bool = False
    cg: CGSettings = field(default_factory=CGSettings)
    cauchy: CauchyConfig = field(default_factory=CauchyConfig)
    wolfe: WolfeConfig = field(default_factory=WolfeConfig)
    tr: TRConfig = field(default_factory=TRConfig)
    spg: SPGConfig = field(default_factory=SPGConfig)
    lbfgs_memory: int = 5
    cauchy_mode: str = "auto"  # auto | exact | backtrack   (L-BFGS-B only)
    subspace: str = "auto"  # auto | smw | cg               (L-BFGS-B only)


# -- tracing ---------------------------------------------------------------

TRACE_COLUMNS = ("iter", "f", "pg_norm", "cg_cum", "time_s", "step_kind")


@dataclass
class TraceRecord:
    iter: int
    f: float
    pg_norm: float
    cg_cum: int
    time_s: float
    step_kind: str


class SolverTrace:
    """Per-iteration history; rows convert 1:1 into trace.csv lines."""

    def __init__(self):
        self.records: list[TraceRecord] = []

    def append(self, **kw):
        self.records.append(TraceRecord(**kw))

    def __len__(self):
        return len(self.records)

    @property
    def pg_ratio(self) -> float:
        first = self.records[0].pg_norm
        last = self.records[-1].pg_norm
        return last / first if first > 0 else 0.0

    @property
    def cg_total(self) -> int:
        return self.records[-1].cg_cum if self.records else 0

    def write_csv(self, fh, label: str | None = None) -> None:
        cols = TRACE_COLUMNS if label is None else ("label",) + TRACE_COLUMNS
        fh.write(",".join(cols) + "\n")
        for r in self.records:
            row = [str(r.iter), repr(r.f), repr(r.pg_norm), str(r.cg_cum),
                   f"{r.time_s:.6f}", r.step_kind]
            if label is not None:
                row.insert(0, label)
            fh.write(",".join(row) + "\n")


@dataclass
class SolverResult:
    x: np.ndarray
    trace: SolverTrace
    status: str  # converged | max_iter | stalled | max_time
    f: float
    pg_ratio: float


# -- quadratic model of f about an iterate ---------------------------------


class LocalQuadModel:
    """m(p) = f0 + g0'(p - x0) + 1/2 (p - x0)' B (p - x0) about a base point."""

    def __init__(self, f0: float, g0: np.ndarray, B, x0: np.ndarray):
        self.f0 = float(f0)
        self.g0 = g0
        self.B = B
        self.x0 = x0

    def value(self, p) -> float:
        z = p - self.x0
        return self.f0 + float(self.g0 @ z) + 0.5 * float(z @ self.B.apply(z))

    def grad(self, p) -> np.ndarray:
        return self.g0 + self.B.apply(p - self.x0)

    def value_grad(self, p):
        z = p - self.x0
        bz = self.B.apply(z)
        val = self.f0 + float(self.g0 @ z) + 0.5 * float(z @ bz)
        return val, self.g0 + bz


# -- Cauchy points along the projected path ---------------------------------


def cauchy_exact(quad: LocalQuadModel, x: np.ndarray, d: np.ndarray):
    """First local minimizer of the model along t -> Proj(x + t d).

    Walks the breakpoints in ascending order; on each segment the model is a
    scalar quadratic whose minimizer is available in closed form. Coincident
    breakpoints are processed as one boundary. Costs one operator product
    with B per segment visited.
    """
    g = quad.g0
    if float(g @ d) >= 0.0:
        raise ValueError("Cauchy search needs a descent direction")
    neg = d < 0.0
    t_break = np.full(x.size, np.inf)
    t_break[neg] = x[neg] / (-d[neg])
    ts = np.unique(t_break[np.isfinite(t_break) & (t_break > 0.0)])
    p = np.where(t_break <= 0.0, 0.0, d)  # coords already at bound are frozen
    t_a = 0.0
    z_a = np.zeros_like(x)
    boundaries = list(ts) + [math.inf]
    for t_b in boundaries:
        bp = quad.B.apply(p)
        slope = float(g @ p) + float(z_a @ bp)
        curv = float(p @ bp)
        if slope >= 0.0:
            break  # model nonincreasing ended at the segment start
        if curv > 0.0:
            dt = -slope / curv
            if t_a + dt < t_b:
                t_a = t_a + dt
                z_a = np.maximum(x + t_a * d, 0.0) - x
                break
        elif math.isinf(t_b):
            raise ValueError("model unbounded below along the projected path")
        # decreasing through the whole segment: advance to the breakpoint
        if math.isinf(t_b):
            break
        t_a = t_b
        z_a = np.maximum(x + t_a * d, 0.0) - x
        p = np.where(t_break <= t_b, 0.0, d)
        if not np.any(p):
            break
    return x + z_a, t_a


def cauchy_backtrack(
    quad: LocalQuadModel,
    x: np.ndarray,
    d: np.ndarray,
    mu0: float = 0.01,
    beta: float = 0.5,
    t0: float = 1.0,
    max_backtracks: int = 30,
    radius: float | None = None,
):
    """Armijo-style inexact Cauchy point on the projected path.

    Accepts the first t with m(Proj(x + t d)) <= f + mu0 * g'(Proj(x+td) - x)
    (and within the trust region when a radius is given); if the initial t
    passes, extrapolates forward by 1/beta while acceptance holds. Returns
    ``(x_c, t, stalled)`` with a zero step and the stalled flag when the
    backtrack budget runs out.
    """
    g = quad.g0
    if not np.any(d):
        return x.copy(), 0.0, True
    if float(g @ d) >= 0.0:
        raise ValueError("Cauchy search needs a descent direction")

    def trial(t):
        xc = np.maximum(x + t * d, 0.0)
        z = xc - x
        if radius is not None and np.linalg.norm(z) > radius:
            return None
        decrease = float(g @ z) + 0.5 * float(z @ quad.B.apply(z))
        if decrease <= mu0 * float(g @ z) and np.any(z):
            return xc
        return None

    t = float(t0)
    xc = trial(t)
    if xc is not None:
        for _ in range(max_backtracks):
            t_next = t / beta
            xc_next = trial(t_next)
            if xc_next is None or np.array_equal(xc_next, xc):
                break
            t, xc = t_next, xc_next
        return xc, t, False
    for _ in range(max_backtracks):
        t *= beta
        xc = trial(t)
        if xc is not None:
            return xc, t, False
    return x.copy(), 0.0, True


def projected_search(
    quad: LocalQuadModel,
    x_j: np.ndarray,
    w: np.ndarray,
    mu0: float = 0.01,
    beta: float = 0.5,
    max_backtracks: int = 30,
):
    """Backtrack along t -> Proj(x_j + t w) until the model decrease suffices.

    The acceptance test uses the model gradient at x_j, so the search stays
    entirely inside the quadratic subproblem. Returns ``(point, accepted)``.
    """
    m_j, gm = quad.value_grad(x_j)
    if float(gm @ w) >= 0.0:
        return x_j, False
    t = 1.0
    for _ in range(max_backtracks):
        xn = np.maximum(x_j + t * w, 0.0)
        z = xn - x_j
        if np.any(z):
            if quad.value(xn) <= m_j + mu0 * float(gm @ z):
                return xn, True
        t *= beta
    return x_j, False


# -- strong Wolfe linesearch -------------------------------------------------


@dataclass
class LineSearchResult:
    alpha: float
    x: np.ndarray
    f: float
    g: np.ndarray
    status: str  # wolfe | capped | decrease-only | stalled


def strong_wolfe(
    model,
    x: np.ndarray,
    d: np.ndarray,
    f0: float | None = None,
    g0: np.ndarray | None = None,
    mu: float = 1e-4,
    eta: float = 0.9,
    max_evals: int = 25,
) -> LineSearchResult:
    """Strong Wolfe linesearch along the ray x + alpha d, capped at the bounds.

    alpha never exceeds the largest feasible step, so iterates stay in the
    orthant. When the cap is hit with sufficient decrease before the
    curvature condition can be met, the capped step is returned (the bound
    takes precedence over the curvature test).
    """
    if f0 is None or g0 is None:
        f0, g0 = model.eval_fg(x)
    der0 = float(g0 @ d)
    if der0 >= 0.0:
        raise ValueError("linesearch needs a descent direction")
    neg = d < 0.0
    cap = float(np.min(x[neg] / -d[neg])) if np.any(neg) else math.inf
    if cap == 0.0:
        return LineSearchResult(0.0, x.copy(), f0, g0.copy(), "stalled")

    evals = 0

    def point(a):
        # the cap keeps x + a*d in the orthant up to roundoff; clip the ulp
        return np.maximum(x + a * d, 0.0)

    def phi(a):
        nonlocal evals
        evals += 1
        fx, gx = model.eval_fg(point(a))
        return fx, gx, float(gx @ d)

    def decrease_ok(a, fa):
        return fa <= f0 + mu * a * der0

    best = None  # best point satisfying sufficient decrease

    def remember(a, fa, ga):
        nonlocal best
        if best is None or fa < best[1]:
            best = (a, fa, ga)

    def result(a, fa, ga, status):
        return LineSearchResult(a, point(a), fa, ga, status)

    def zoom(lo, f_lo, g_lo, hi, f_hi):
        # invariant: lo satisfies sufficient decrease, interval brackets a
        # strong Wolfe point
        der_lo = float(g_lo @ d)
        while evals < max_evals:
            a = 0.5 * (lo + hi)
            fa, ga, dera = phi(a)
            if not decrease_ok(a, fa) or fa >= f_lo:
                hi, f_hi = a, fa
            else:
                remember(a, fa, ga)
                if abs(dera) <= eta * abs(der0):
                    return result(a, fa, ga, "wolfe")
                if dera * (hi - lo) >= 0.0:
                    hi, f_hi = lo, f_lo
                lo, f_lo, g_lo, der_lo = a, fa, ga, dera
            if abs(hi - lo) <= 1e-14 * max(1.0, abs(lo)):
                break
        if best is not None:
            return result(*best, "decrease-only")
        return LineSearchResult(0.0, x.copy(), f0, g0.copy(), "stalled")

    a_prev, f_prev, g_prev = 0.0, f0, g0
    a = min(1.0, cap)
    first = True
    while evals < max_evals:
        fa, ga, dera = phi(a)
        if not decrease_ok(a, fa) or (not first and fa >= f_prev):
            return zoom(a_prev, f_prev, g_prev, a, fa)
        remember(a, fa, ga)
        if abs(dera) <= eta * abs(der0):
            return result(a, fa, ga, "wolfe")
        if dera >= 0.0:
            return zoom(a, fa, ga, a_prev, f_prev)
        if a >= cap:
            return result(a, fa, ga, "capped")
        a_prev, f_prev, g_prev = a, fa, ga
        a = min(2.0 * a, cap)
        first = False
    if best is not None:
        return result(*best, "decrease-only")
    return LineSearchResult(0.0, x.copy(), f0, g0.copy(), "stalled")


# -- solver drivers ----------------------------------------------------------


class _Run:
    """Shared bookkeeping: trace rows, stopping tests, budgets."""

    def __init__(self, cfg: SolverConfig, x, f, g):
        self.cfg = cfg
        self.trace = SolverTrace()
        self.t0 = time.perf_counter()
        self.cg_cum = 0
        self.pg0 = pg_norm(x, g)
        self.trace.append(iter=0, f=f, pg_norm=self.pg0, cg_cum=0,
                          time_s=0.0, step_kind="init")

    def record(self, k, f, pg, kind):
        self.trace.append(iter=k, f=f, pg_norm=pg, cg_cum=self.cg_cum,
                          time_s=time.perf_counter() - self.t0, step_kind=kind)

    def converged(self, pg) -> bool:
        return pg <= self.cfg.pg_rtol * self.pg0

    def out_of_time(self) -> bool:
        return (
            self.cfg.max_time is not None
            and time.perf_counter() - self.t0 > self.cfg.max_time
        )

    def finish(self, x, f, status) -> SolverResult:
        return SolverResult(x=x, trace=self.trace, status=status, f=f,
                            pg_ratio=self.trace.pg_ratio)


def _direction(g, binding, scaling):
    if scaling is None:
        return -g
    return masked_scaled_direction(scaling.P, g, binding)


def solve_lbfgsb(model, x0, cfg: SolverConfig | None = None, scaling=None) -> SolverResult:
    """L-BFGS-B: Cauchy point, face identification, subspace solve, Wolfe step.

    Unscaled (scaling=None): exact Cauchy search along -grad f and an SMW
    subspace solve, the classic diagonal-B0 algorithm. Scaled: backtracking
    Cauchy search along -Pbar grad f and a face CG solve preconditioned with
    P_FF, with B0 = theta * P^{-1}. Both choices can be overridden through
    ``cfg.cauchy_mode`` / ``cfg.subspace``.
    """
    cfg = cfg or SolverConfig()
    cauchy_mode = cfg.cauchy_mode
    if cauchy_mode == "auto":
        cauchy_mode = "backtrack" if scaling is not None else "exact"
    subspace = cfg.subspace
    if subspace == "auto":
        subspace = "cg" if scaling is not None else "smw"
    if subspace == "smw" and scaling is not None and not isinstance(
        scaling, IdentityScaling
    ):
        raise ValueError(
            "the SMW subspace solve needs a diagonal initial operator; "
            "use subspace='cg' with a nontrivial scaling"
        )

    x = project(np.asarray(x0, dtype=float))
    f, g = model.eval_fg(x)
    B = CompactLBFGS(x.size, memory=cfg.lbfgs_memory, scaling=scaling)
    run = _Run(cfg, x, f, g)
    if run.converged(run.pg0):
        return run.finish(x, f, "converged")
    t_warm = 1.0
    stalls = 0
    for k in range(1, cfg.max_iter + 1):
        binding = binding_mask(x, g)
        d = _direction(g, binding, scaling)
        quad = LocalQuadModel(f, g, B, x)
        stalled_cauchy = False
        if not np.any(d) or float(g @ d) >= 0.0:
            x_c, t_c, stalled_cauchy = x.copy(), 0.0, True
        elif cauchy_mode == "exact":
            x_c, t_c = cauchy_exact(quad, x, d)
        else:
            x_c, t_c, stalled_cauchy = cauchy_backtrack(
                quad, x, d, cfg.cauchy.mu0, cfg.cauchy.beta,
                t0=t_warm, max_backtracks=cfg.cauchy.max_backtracks,
            )
        if t_c > 0.0:
            t_warm = t_c

        active = (x_c == 0.0) & (g > 0.0)
        mask = FaceMask(~active)
        step_kind = "wolfe"
        if mask.n_free == 0:
            x_bar = x_c
        else:
            r_bar = quad.grad(x_c)
            if subspace == "smw":
                z = mask.prolong(B.smw_subspace_solve(mask.restrict(r_bar), mask))
            else:
                r_nrm = float(np.linalg.norm(mask.restrict(r_bar)))
                rtol = cfg.cg.rtol if cfg.cg.rtol is not None else min(
                    0.1, math.sqrt(r_nrm)
                )
                rtol = min(max(rtol, 1e-12), 0.999)
                outcome = cg_face(
                    B, r_bar, mask,
                    precond=scaling.P if scaling is not None else None,
                    cfg=CGConfig(rtol=rtol, maxiter=cfg.cg.maxiter),
                )
                run.cg_cum += outcome.iterations
                z = mask.prolong(outcome.step)
            # pull the subspace step back to the feasible box
            push = z < 0.0
            if np.any(push):
                with np.errstate(divide="ignore"):
                    a_plus = min(1.0, float(np.min(x_c[push] / -z[push])))
            else:
                a_plus = 1.0
            x_bar = np.maximum(x_c + a_plus * z, 0.0)

        d_ls = x_bar - x
        if not np.any(d_ls) or float(g @ d_ls) >= 0.0:
            d_ls = x_c - x  # fall back to the guaranteed descent step
            step_kind = "cauchy"
        ls = None
        if np.any(d_ls) and float(g @ d_ls) < 0.0:
            ls = strong_wolfe(
                model, x, d_ls, f0=f, g0=g,
                mu=cfg.wolfe.mu, eta=cfg.wolfe.eta, max_evals=cfg.wolfe.max_evals,
            )
        if ls is None or ls.status == "stalled" or ls.alpha == 0.0:
            # discard the quasi-Newton memory once and retry from the
            # (scaled) gradient before declaring a stall
            if B.k > 0:
                B = CompactLBFGS(x.size, memory=cfg.lbfgs_memory, scaling=scaling)
                run.record(k, f, pg_norm(x, g), "reset")
                continue
            stalls += 1
            run.record(k, f, pg_norm(x, g), "stall")
            if stalls >= 2:
                return run.finish(x, f, "stalled")
            continue
        stalls = 0
        x_new = np.maximum(ls.x, 0.0)
        s = x_new - x
        y = ls.g - g
        B.lbfgs_update(s, y)
        x, f, g = x_new, ls.f, ls.g
        pg = pg_norm(x, g)
        run.record(k, f, pg, step_kind)
        if run.converged(pg):
            return run.finish(x, f, "converged")
        if run.out_of_time():
            return run.finish(x, f, "max_time")
    return run.finish(x, f, "max_iter")


def solve_tron(model, x0, cfg: SolverConfig | None = None, scaling=None) -> SolverResult:
    """Trust-region projected Newton with projected-search minor iterates.

    Each outer iteration computes an inexact Cauchy point along the (scaled)
    projected-gradient path, then improves it by face CG steps followed by
    projected searches, growing the active set monotonically, until the
    minor-iterate optimality test or the trust region stops the sequence.
    """
    cfg = cfg or SolverConfig()
    eps_minor = cfg.cg.rtol if cfg.cg.rtol is not None else 1e-3
    x = project(np.asarray(x0, dtype=float))
    f, g = model.eval_fg(x)
    run = _Run(cfg, x, f, g)
    if run.converged(run.pg0):
        return run.finish(x, f, "converged")
    delta = cfg.tr.delta0 if cfg.tr.delta0 is not None else float(np.linalg.norm(g))
    delta0 = max(delta, 1e-300)
    t_warm = 1.0
    stalls = 0
    for k in range(1, cfg.max_iter + 1):
        binding = binding_mask(x, g)
        d = _direction(g, binding, scaling)
        B = model.hess_operator(x)
        quad = LocalQuadModel(f, g, B, x)
        if not np.any(d) or float(g @ d) >= 0.0:
            run.record(k, f, pg_norm(x, g), "stall")
            stalls += 1
            if stalls >= 2:
                return run.finish(x, f, "stalled")
            continue
        x_c, t_c, stalled_cauchy = cauchy_backtrack(
            quad, x, d, cfg.cauchy.mu0, cfg.cauchy.beta,
            t0=t_warm, max_backtracks=cfg.cauchy.max_backtracks, radius=delta,
        )
        if stalled_cauchy:
            delta *= cfg.tr.sigma1
            stalls += 1
            run.record(k, f, pg_norm(x, g), "stall")
            if stalls >= 2 or delta < 1e-14 * delta0:
                return run.finish(x, f, "stalled")
            continue
        t_warm = t_c

        pg_outer = pg_norm(x, g)
        active = (x_c == 0.0) & (g > 0.0)
        x_j = x_c
        for _ in range(cfg.tr.max_minor):
            gm = quad.grad(x_j)
            if pg_norm(x_j, gm) <= eps_minor * pg_outer:
                break
            step_norm = float(np.linalg.norm(x_j - x))
            rem_sq = delta**2 - step_norm**2
            if rem_sq <= (1e-8 * delta) ** 2:
                break  # at the trust-region boundary
            mask = FaceMask(~active)
            if mask.n_free == 0:
                break
            outcome = cg_face(
                B, gm, mask,
                precond=scaling.P if scaling is not None else None,
                cfg=CGConfig(rtol=eps_minor, maxiter=cfg.cg.maxiter,
                             radius=math.sqrt(rem_sq)),
                orthant_base=x_j,
            )
            run.cg_cum += outcome.iterations
            if outcome.status == "numerical-failure":
                return run.finish(x, f, "stalled")
            w = mask.prolong(outcome.step)
            if not np.any(w):
                break
            x_next, ok = projected_search(
                quad, x_j, w, cfg.cauchy.mu0, cfg.cauchy.beta,
                max_backtracks=cfg.cauchy.max_backtracks,
            )
            if not ok:
                break
            newly_active = (x_next == 0.0) & (w < 0.0) & mask.free
            active |= newly_active
            full_step = np.array_equal(x_next, np.maximum(x_j + w, 0.0))
            x_j = x_next
            if outcome.status in ("boundary-hit", "negative-curvature"):
                break
            if outcome.status == "converged" and full_step and not newly_active.any():
                break  # face subproblem solved to tolerance; nothing to add

        s = x_j - x
        s_norm = float(np.linalg.norm(s))
        if s_norm == 0.0:
            delta *= cfg.tr.sigma1
            stalls += 1
            run.record(k, f, pg_norm(x, g), "null")
            if stalls >= 2 or delta < 1e-14 * delta0:
                return run.finish(x, f, "stalled")
            continue
        f_new, g_new = model.eval_fg(x_j)
        pred = quad.value(x_j) - f
        rho = (f_new - f) / pred if pred < 0.0 else -math.inf

        if rho > cfg.tr.eta0:
            x, f, g = x_j, f_new, g_new
            kind = "accept"
            stalls = 0
        else:
            kind = "reject"
        # radius update (reference trust-region constants)
        if rho <= cfg.tr.eta0:
            delta = cfg.tr.sigma1 * min(delta, s_norm)
        elif rho < 0.25:
            delta = cfg.tr.sigma2 * delta
        elif rho > 0.75:
            delta = max(delta, cfg.tr.sigma3 * s_norm)
        if delta < 1e-14 * delta0:
            run.record(k, f, pg_norm(x, g), kind)
            return run.finish(x, f, "stalled")

        pg = pg_norm(x, g)
        run.record(k, f, pg, kind)
        if run.converged(pg):
            return run.finish(x, f, "converged")
        if run.out_of_time():
            return run.finish(x, f, "max_time")
    return run.finish(x, f, "max_iter")


def solve_spg(model, x0, cfg: SolverConfig | None = None, scaling=None) -> SolverResult:
    """Spectral projected gradient with nonmonotone backtracking.

    Steps are x+ = Proj(x - alpha_BB * D * grad f) with D = Pbar when scaled
    and the identity otherwise; the Barzilai-Borwein steplength is computed
    in the same metric as the direction (s'P^{-1}s / s'y, which is s's / s'y
    without scaling), clamped to [alpha_min, alpha_max], and acceptance
    references the largest of the last `memory` objective values.
    """
    cfg = cfg or SolverConfig()
    x = project(np.asarray(x0, dtype=float))
    f, g = model.eval_fg(x)
    run = _Run(cfg, x, f, g)
    if run.converged(run.pg0):
        return run.finish(x, f, "converged")
    spg = cfg.spg
    pg_inf = float(np.max(np.abs(x - np.maximum(x - g, 0.0))))
    alpha = 1.0 if pg_inf == 0.0 else min(spg.alpha_max, max(spg.alpha_min, 1.0 / pg_inf))
    f_hist = [f]
    for k in range(1, cfg.max_iter + 1):
        binding = binding_mask(x, g)
        d = _direction(g, binding, scaling)
        f_ref = max(f_hist)
        t = 1.0
        accepted = None
        for _ in range(spg.max_backtracks):
            x_new = np.maximum(x + (t * alpha) * d, 0.0)
            z = x_new - x
            if not np.any(z):
                break
            f_new = model.eval_f(x_new)
            if f_new <= f_ref + spg.gamma * float(g @ z):
                accepted = (x_new, f_new)
                break
            t *= 0.5
        if accepted is None:
            run.record(k, f, pg_norm(x, g), "stall")
            return run.finish(x, f, "stalled")
        x_new, f_new = accepted
        g_new = model.eval_grad(x_new)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 0.0:
            ss = float(s @ s) if scaling is None else float(s @ scaling.apply_Pinv(s))
            alpha = min(spg.alpha_max, max(spg.alpha_min, ss / sy))
        else:
            alpha = spg.alpha_max
        x, f, g = x_new, f_new, g_new
        f_hist.append(f)
        if len(f_hist) > spg.memory:
            f_hist.pop(0)
        pg = pg_norm(x, g)
        run.record(k, f, pg, "spg")
        if run.converged(pg):
            return run.finish(x, f, "converged")
        if run.out_of_time():
            return run.finish(x, f, "max_time")
    return run.finish(x, f, "max_iter")


SOLVERS = {
    "lbfgsb": solve_lbfgsb,
    "tron": solve_tron,
    "spg": solve_spg,
}
