"""Shared test oracles: finite differences, small KKT solvers, run loops.

Everything here is deliberately independent of the library's own gradient
and flow machinery so the tests have a second route to the same numbers.
"""

from __future__ import annotations

import itertools

import numpy as np

import saddleflow as sf


def fd_gradient(f, x, scale: float = 1e-6) -> np.ndarray:
    """Central differences with step scale*(1 + ||x||)."""
    x = np.asarray(x, dtype=float)
    h = scale * (1.0 + np.linalg.norm(x))
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def check_gradients(problem: sf.SaddleProblem, rng, probes: int = 10,
                    tol: float = 1e-6, radius: float = 2.0) -> None:
    """Assert both block gradients match finite differences of the value."""
    for _ in range(probes):
        x = rng.uniform(-radius, radius, size=problem.n)
        y = rng.uniform(-radius, radius, size=problem.m)
        if problem.y_set is not None:
            y = np.clip(y, problem.y_set.lower, problem.y_set.upper)
        gx = problem.grad_x(x, y)
        gy = problem.grad_y(x, y)
        gx_fd = fd_gradient(lambda v: problem.value(v, y), x)
        gy_fd = fd_gradient(lambda v: problem.value(x, v), y)
        err_x = np.linalg.norm(gx - gx_fd) / (1.0 + np.linalg.norm(gx))
        err_y = np.linalg.norm(gy - gy_fd) / (1.0 + np.linalg.norm(gy))
        assert err_x <= tol, f"grad_x off by {err_x:.3e} at x={x}, y={y}"
        assert err_y <= tol, f"grad_y off by {err_y:.3e} at x={x}, y={y}"


def second_difference(f, x, d, h: float = 1e-4) -> float:
    """Directional second derivative of a scalar function."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    return (f(x + h * d) - 2.0 * f(x) + f(x - h * d)) / h**2


def bisect_root(f, lo: float, hi: float, iters: int = 200) -> float:
    """Plain bisection; f(lo) and f(hi) must bracket a sign change."""
    flo = f(lo)
    assert flo * f(hi) <= 0, "bisection bracket does not straddle a root"
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) * flo <= 0:
            hi = mid
        else:
            lo = mid
            flo = f(lo)
    return 0.5 * (lo + hi)


def qp_kkt_oracle(Q, p, A, b, eta: float = 1.0, tol: float = 1e-9):
    """Active-set enumeration for min 0.5 x'Qx + p'x s.t. Ax <= b.

    Returns (x, y) where y is the eta-weighted multiplier, i.e. the saddle
    of f(x) + eta*y'(Ax - b).
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    m, n = A.shape
    for k in range(m + 1):
        for active in itertools.combinations(range(m), k):
            act = list(active)
            Aw = A[act]
            kkt = np.block([[Q, eta * Aw.T], [Aw, np.zeros((k, k))]])
            rhs = np.concatenate((-p, b[act]))
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            x, yw = sol[:n], sol[n:]
            if np.any(yw < -tol):
                continue
            if np.any(A @ x - b > tol * (1.0 + np.abs(b))):
                continue
            y = np.zeros(m)
            y[act] = yw
            return x, y
    raise AssertionError("no KKT point found by enumeration")


def lasso_saddle(bundle: sf.LassoBundle, alpha: float, tol: float = 1e-12):
    """Exact transformed-space saddle (u*, v*) built from the Lasso oracle.

    The dual comes from stationarity of the lifted Lagrangian: the coupling
    multiplier is -grad(fhat) and the sign multipliers are lam -+ that
    gradient; the (u, v) point follows from the change of variables.
    """
    x_orc = sf.lasso_oracle(bundle, tol=tol)
    ghat = bundle.fhat.grad(x_orc)
    y_star = np.concatenate((-ghat, bundle.lam + ghat, bundle.lam - ghat))
    x_full = np.concatenate((x_orc, np.maximum(x_orc, 0.0), np.maximum(-x_orc, 0.0)))
    kkt_err = float(np.abs(bundle.f.grad(x_full) + bundle.A.T @ y_star).max())
    assert kkt_err <= 1e-8, f"lasso KKT residual {kkt_err:.3e}"
    u_star = x_full + alpha * (bundle.A.T @ y_star)
    return x_orc, np.concatenate((u_star, y_star))


def run_until(flow: sf.Flow, z0, config: sf.IntegratorConfig, tol: float,
              max_chunks: int = 20):
    """Integrate in horizon-sized chunks until the flow residual is small.

    Returns (final_state, elapsed_time, residual); asserts the tolerance was
    reached within the chunk budget.
    """
    z = np.asarray(z0, dtype=float)
    elapsed = 0.0
    residual = np.inf
    for _ in range(max_chunks):
        traj = sf.integrate(flow, z, config)
        z = traj.final_state
        elapsed += config.horizon
        residual = flow.residual(z)
        if residual <= tol:
            return z, elapsed, residual
    raise AssertionError(
        f"flow '{flow.label}' did not reach residual {tol:g} within "
        f"t={elapsed:g} (last residual {residual:.3e})"
    )
