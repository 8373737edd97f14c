"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict lines.
Criteria A1-A6 and A10 are property/oracle suites at desk scale; A7-A9 run
the end-to-end reconstruction experiments.
"""

import time

import numpy as np
import pytest

from bcopt.circulant import block_diagonalize, dense_dft_matrix
from bcopt.ct import PolarGrid, default_phantom, make_problem
from bcopt.lbfgs import CompactLBFGS
from bcopt.model import QuadraticModel, hessian_approx_bc
from bcopt.ops import MatrixOp, masked_scaled_direction
from bcopt.scaling import DenseScaling, IdentityScaling, build_scaling
from bcopt.solvers import SOLVERS, SolverConfig, solve_spg, solve_tron

from util import (
    enumerate_box_qp,
    make_box_quadratic,
    rand_spd,
    random_bc,
    random_spd_bc,
    recursive_bfgs_dense,
)


def verdict(name, ok, detail):
    line = f"{name} {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


# -- A1: spectral correctness -------------------------------------------------


def test_a1_spectral_correctness():
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    worst_off = 0.0
    worst_route = 0.0
    for _ in range(50):
        n_b = int(rng.integers(2, 17))
        s_in = int(rng.integers(1, 9))
        s_out = int(rng.integers(1, 9))
        a = random_bc(rng, n_b, s_in, s_out, density=float(rng.uniform(0.2, 0.9)))
        dense = a.dense()
        norm_a = np.linalg.norm(dense)
        f_out = dense_dft_matrix(n_b, s_out)
        f_in = dense_dft_matrix(n_b, s_in)
        conj = f_out @ dense @ f_in.conj().T
        sb = block_diagonalize(a)
        for k in range(n_b):
            blk = conj[k * s_out:(k + 1) * s_out, k * s_in:(k + 1) * s_in]
            assert np.abs(blk - sb.blocks[k]).max() <= 1e-10 * max(norm_a, 1.0)
            conj[k * s_out:(k + 1) * s_out, k * s_in:(k + 1) * s_in] = 0.0
        off = np.linalg.norm(conj)
        worst_off = max(worst_off, off / max(norm_a, 1e-300))
        x = rng.standard_normal(a.ncols)
        route = np.abs(a.apply(x) - sb.apply(x)).max()
        worst_route = max(worst_route, route)
        assert off <= 1e-10 * norm_a
        assert route <= 1e-10 * max(1.0, np.abs(a.apply(x)).max())
    elapsed = time.perf_counter() - t0
    verdict(
        "A1", elapsed < 10.0,
        f"50 ops: off-block mass <= {worst_off:.2e}*||A||_F, "
        f"route mismatch <= {worst_route:.2e}, runtime {elapsed:.1f}s < 10s",
    )


# -- A2: scaling algebra -------------------------------------------------------


def test_a2_scaling_algebra():
    rng = np.random.default_rng(1002)
    worst_inv = worst_sqrt = 0.0
    s = build_scaling(random_spd_bc(rng, n_b=10, s=5))
    n = 50
    for _ in range(100):
        x = rng.standard_normal(n)
        scale = max(np.abs(x).max(), 1.0)
        worst_inv = max(
            worst_inv, np.abs(s.apply_Pinv(s.apply_P(x)) - x).max() / scale
        )
        px = s.apply_P(x)
        worst_sqrt = max(
            worst_sqrt,
            np.abs(s.apply_C(s.apply_C(x)) - px).max() / max(np.abs(px).max(), 1.0),
        )
    assert worst_inv <= 1e-12 and worst_sqrt <= 1e-12
    conds = []
    for trial in range(10):
        h = random_spd_bc(rng, n_b=int(rng.integers(4, 9)), s=int(rng.integers(2, 6)),
                          scale_spread=2.5)
        sc = build_scaling(h)
        hd = h.dense()
        cd = np.column_stack([sc.apply_C(e) for e in np.eye(h.ncols)])
        c_h = np.linalg.cond(hd)
        c_s = np.linalg.cond(cd.T @ hd @ cd)
        conds.append((c_s, c_h))
        assert c_s < c_h
    best = min(ch / cs for cs, ch in conds)
    verdict(
        "A2", True,
        f"P/Pinv and C^2=P to {max(worst_inv, worst_sqrt):.2e} on 100 vectors; "
        f"cond improved in 10/10 trials (min factor {best:.1f}x)",
    )


# -- A3: derivative checks ------------------------------------------------------


def test_a3_derivative_checks():
    from bcopt.model import ReconModel

    rng = np.random.default_rng(1003)
    n = 60
    worst_g = worst_h = 0.0
    for kind in ("quadratic", "recon"):
        a = MatrixOp(rng.standard_normal((n + 10, n)))
        k = MatrixOp(rng.standard_normal((n - 5, n)))
        if kind == "quadratic":
            m = QuadraticModel(a, rng.standard_normal(n + 10), k, lam=1e-2)
        else:
            m = ReconModel(a, rng.uniform(0, 2, n + 10), k, lam=1e-4, delta=0.1)
        for _ in range(20):
            x = rng.standard_normal(n)
            g = m.eval_grad(x)
            gfd = np.zeros(n)
            h = 1e-6
            for i in range(n):
                e = np.zeros(n)
                e[i] = h
                gfd[i] = (m.eval_f(x + e) - m.eval_f(x - e)) / (2 * h)
            rel_g = np.abs(g - gfd).max() / max(np.abs(g).max(), 1.0)
            v = rng.standard_normal(n)
            hv = m.hess_vec(x, v)
            eps = 1e-6
            hfd = (m.eval_grad(x + eps * v) - m.eval_grad(x - eps * v)) / (2 * eps)
            rel_h = np.abs(hv - hfd).max() / max(np.abs(hv).max(), 1.0)
            worst_g = max(worst_g, rel_g)
            worst_h = max(worst_h, rel_h)
            assert rel_g <= 1e-6 and rel_h <= 1e-5
    verdict(
        "A3", True,
        f"gradient vs central differences <= {worst_g:.2e} (tol 1e-6), "
        f"hess_vec vs differenced gradients <= {worst_h:.2e} (tol 1e-5), "
        "20 points x 2 models",
    )


# -- A4: compact L-BFGS oracle equivalence ---------------------------------------


def test_a4_lbfgs_oracle_equivalence():
    rng = np.random.default_rng(1004)
    worst_or = worst_sec = 0.0
    for trial in range(5):
        n = int(rng.integers(20, 51))
        p = rand_spd(rng, n, 0.5, 2.0)
        sc = DenseScaling(p)
        op = CompactLBFGS(n, memory=5, scaling=sc)
        pairs = []
        for _ in range(8):
            s_vec = rng.standard_normal(n)
            y_vec = rand_spd(rng, n, 0.5, 3.0) @ s_vec
            if op.lbfgs_update(s_vec, y_vec):
                pairs.append((s_vec, y_vec))
                sec = np.abs(op.apply(s_vec) - y_vec).max() / max(
                    np.abs(y_vec).max(), 1.0
                )
                worst_sec = max(worst_sec, sec)
                assert sec <= 1e-9
        oracle = recursive_bfgs_dense(op.theta * np.linalg.inv(p), pairs[-5:])
        dense = np.column_stack([op.apply(e) for e in np.eye(n)])
        err = np.abs(dense - oracle).max() / max(np.abs(oracle).max(), 1.0)
        worst_or = max(worst_or, err)
        assert err <= 1e-10
    # scaled-space identity at n <= 20
    worst_id = 0.0
    for trial in range(5):
        n = int(rng.integers(8, 21))
        p = rand_spd(rng, n, 0.5, 2.0)
        sc = DenseScaling(p)
        c = np.column_stack([sc.apply_C(e) for e in np.eye(n)])
        scaled_op = CompactLBFGS(n, memory=4, scaling=sc)
        plain_op = CompactLBFGS(n, memory=4)
        for _ in range(6):
            s_vec = rng.standard_normal(n)
            y_vec = rand_spd(rng, n, 0.5, 3.0) @ s_vec
            scaled_op.lbfgs_update(s_vec, y_vec)
            plain_op.lbfgs_update(np.linalg.solve(c, s_vec), c.T @ y_vec)
        b = np.column_stack([scaled_op.apply(e) for e in np.eye(n)])
        b_prime = np.column_stack([plain_op.apply(e) for e in np.eye(n)])
        err = np.abs(b_prime - c.T @ b @ c).max() / max(np.abs(b_prime).max(), 1.0)
        worst_id = max(worst_id, err)
        assert err <= 1e-8
    verdict(
        "A4", True,
        f"compact vs dense recursive BFGS <= {worst_or:.2e} (tol 1e-10); "
        f"scaled-space identity <= {worst_id:.2e} (tol 1e-8); "
        f"secant residual <= {worst_sec:.2e} (tol 1e-9)",
    )


# -- A5: solver correctness oracle ----------------------------------------------


def test_a5_solver_oracle():
    rng = np.random.default_rng(1005)
    t0 = time.perf_counter()
    worst = {name: 0.0 for name in SOLVERS}
    for trial in range(100):
        n = int(rng.integers(4, 13))
        model, b_mat, c, _ = make_box_quadratic(rng, n)
        x_star = enumerate_box_qp(b_mat, c)
        scaling = DenseScaling(rand_spd(rng, n, 0.5, 2.0))
        cfg = SolverConfig(pg_rtol=1e-12, max_iter=3000)
        for name, solve in SOLVERS.items():
            for sc in (None, scaling):
                res = solve(model, np.zeros(n), cfg, scaling=sc)
                err = float(np.abs(res.x - x_star).max())
                worst[name] = max(worst[name], err)
                assert err <= 1e-8, (trial, name, sc is not None, err)
    elapsed = time.perf_counter() - t0
    detail = ", ".join(f"{k}<= {v:.1e}" for k, v in worst.items())
    verdict(
        "A5", elapsed < 60.0,
        f"100 instances x 3 solvers x 2 modes vs active-set enumeration: "
        f"{detail} (tol 1e-8); runtime {elapsed:.1f}s < 60s",
    )


# -- A6: descent property of the masked metric ----------------------------------


def test_a6_masked_direction_descent():
    rng = np.random.default_rng(1006)
    checked = 0
    trials = 0
    while checked < 200 and trials < 2000:
        trials += 1
        n = int(rng.integers(4, 16))
        b_mat = rand_spd(rng, n, 0.3, 4.0)
        c = rng.standard_normal(n)
        x = np.maximum(rng.standard_normal(n), 0.0)
        x[rng.integers(0, n)] = 0.0  # encourage a nonempty binding set
        g = b_mat @ x + c
        binding = (x == 0.0) & (g > 0.0)
        if not binding.any():
            continue
        p = MatrixOp(rand_spd(rng, n, 0.4, 3.0))
        d = masked_scaled_direction(p, g, binding)
        if not np.any(d):
            continue
        alpha = 1e-8

        def f(v):
            return 0.5 * v @ b_mat @ v + c @ v

        x_new = np.maximum(x + alpha * d, 0.0)
        assert f(x_new) < f(x), trials
        checked += 1
    verdict(
        "A6", checked == 200,
        f"f(Proj(x + 1e-8 d)) < f(x) in {checked}/200 masked-direction trials "
        "with nonempty binding sets",
    )


# -- desk-scale experiment fixtures ----------------------------------------------


@pytest.fixture(scope="module")
def desk_quadratic():
    grid = PolarGrid(32, 64, r_max=3.5)
    prob = make_problem(grid, 48, default_phantom(grid), kind="quadratic", lam=1e-2)
    scaling = build_scaling(hessian_approx_bc(prob.model))
    return prob, scaling


@pytest.fixture(scope="module")
def desk_recon():
    grid = PolarGrid(32, 64, r_max=3.5)
    prob = make_problem(grid, 48, default_phantom(grid), kind="recon", lam=1e-4,
                        delta=1e-1)
    scaling = build_scaling(hessian_approx_bc(prob.model))
    cfg = SolverConfig(max_iter=100, pg_rtol=1e-7)
    tron = solve_tron(prob.model, prob.x0, cfg, scaling=scaling)
    spg = solve_spg(prob.model, prob.x0,
                    SolverConfig(max_iter=100, pg_rtol=1e-30), scaling=scaling)
    return prob, tron, spg


# -- A7: scaling benefit on the quadratic problem --------------------------------


def test_a7_scaling_benefit(desk_quadratic):
    prob, scaling = desk_quadratic
    t0 = time.perf_counter()
    results = {}
    for label, sc in (("scaled", scaling), ("unscaled", None)):
        cfg = SolverConfig(max_iter=200, pg_rtol=1e-6)
        cfg.cg.rtol = 1e-3
        cfg.cg.maxiter = 10000
        results[label] = solve_tron(prob.model, prob.x0, cfg, scaling=sc)
    elapsed = time.perf_counter() - t0
    for label, res in results.items():
        assert res.status == "converged", (label, res.status)
        assert res.pg_ratio <= 1e-6
    cg_s = results["scaled"].trace.cg_total
    cg_u = results["unscaled"].trace.cg_total
    ratio = cg_s / cg_u
    verdict(
        "A7", ratio <= 0.20 and elapsed < 120.0,
        f"scaled TRON used {cg_s} CG iterations vs {cg_u} unscaled "
        f"(ratio {ratio:.3f} <= 0.20) to pg_ratio 1e-6; runtime {elapsed:.1f}s < 120s",
    )


# -- A8: edge-preserving reconstruction end to end -------------------------------


def test_a8_recon_end_to_end(desk_recon):
    prob, tron, _ = desk_recon
    outer = tron.trace.records[-1].iter
    nonneg = float(tron.x.min()) >= 0.0
    support = prob.supported_pixels()
    err = float(
        np.linalg.norm((tron.x - prob.x_true)[support])
        / np.linalg.norm(prob.x_true[support])
    )
    ok = (
        tron.status == "converged"
        and tron.pg_ratio <= 1e-7
        and outer <= 100
        and nonneg
        and err <= 0.10
    )
    verdict(
        "A8", ok,
        f"scaled TRON pg_ratio {tron.pg_ratio:.2e} <= 1e-7 in {outer} <= 100 "
        f"iterations; image nonnegative: {nonneg}; relative image error "
        f"{err:.3f} <= 0.10 on the data-supported region",
    )


# -- A9: first-order contrast ------------------------------------------------------


def test_a9_first_order_contrast(desk_recon):
    _, tron, spg = desk_recon
    contrast = spg.pg_ratio / max(tron.pg_ratio, 1e-300)
    verdict(
        "A9", contrast >= 100.0,
        f"at a 100-outer-iteration budget scaled TRON pg_ratio "
        f"{tron.pg_ratio:.2e} vs scaled SPG {spg.pg_ratio:.2e} "
        f"({contrast:.1e}x >= 100x smaller)",
    )


# -- A10: identity-scaling reduction ------------------------------------------------


def test_a10_identity_scaling_reduction():
    rng = np.random.default_rng(1010)
    checked = 0
    for trial in range(10):
        n = int(rng.integers(4, 10))
        model, _, _, _ = make_box_quadratic(rng, n)
        ident = IdentityScaling(n)
        for name, solve in SOLVERS.items():
            kw = dict(pg_rtol=1e-10, max_iter=300)
            if name == "lbfgsb":
                kw.update(cauchy_mode="backtrack", subspace="cg")
            r_u = solve(model, np.zeros(n), SolverConfig(**kw), scaling=None)
            r_s = solve(model, np.zeros(n), SolverConfig(**kw), scaling=ident)
            assert r_u.status == r_s.status
            assert len(r_u.trace) == len(r_s.trace), (trial, name)
            for a, b in zip(r_u.trace.records, r_s.trace.records):
                assert a.f == b.f and a.pg_norm == b.pg_norm, (trial, name, a.iter)
                assert a.cg_cum == b.cg_cum and a.step_kind == b.step_kind
            assert np.array_equal(r_u.x, r_s.x)
        checked += 1
    verdict(
        "A10", checked == 10,
        "identity-scaled runs reproduce unscaled iterate sequences exactly "
        f"(f, pg, cg counts, final x) on {checked}/10 instances x 3 solvers",
    )
