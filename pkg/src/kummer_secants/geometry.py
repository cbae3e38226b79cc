"""Degenerate secant search, translated secant configurations and the
finite intersection Theta_u . Theta_{-u} used for restriction checks."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .epsilon_series import delta_coefficients, partition_orders
from .errors import DegenerateInput, DegenerateIterate, NoPointsFound, RadiusCapExceeded, SearchFailed, ValidationError
from .hierarchy import (
    HierarchyState,
    affine_block,
    expected_rank,
    initial_state,
    make_grid,
    min_norm_lstsq,
    q_values,
    r_coefficients,
    solve_order,
)
from .kummer import SecantConfig, center_config, config_from_centered
from .parallel import pmap
from .theta_core import DEFAULT_POLICY, SiegelMatrix, TruncationPolicy, random_points, theta_derivatives, theta_gradient, theta_values

log = logging.getLogger(__name__)

FD_STEP = 1e-6
DEDUP_TOL = 1e-6
MAX_RESTARTS = 5
SUPPORTED = {(1, 1), (2, 1)}


@dataclass(frozen=True, eq=False)
class SecantSearchResult:
    config: SecantConfig
    d1: np.ndarray  # unit norm
    d1_scale: float  # D_1 = d1_scale * d1 in the gauge alpha_{m+2} = eps
    alpha1_1: complex
    alpha_j_1: tuple  # alpha_{3,1} .. alpha_{m+1,1}
    final_residual: float
    iterations: int
    seed: int
    state: HierarchyState  # order 1 solved (or best candidate)


def _levenberg_marquardt(fun, x0, max_iters, stop):
    """Minimize ||fun(x)||^2 with forward-difference Jacobians; returns (x, r, iterations)."""
    x = np.array(x0, dtype=float)
    r = fun(x)
    lam = 1e-3
    it = 0
    for it in range(1, max_iters + 1):
        if np.max(np.abs(r)) <= stop:
            return x, r, it - 1
        J = np.empty((len(r), len(x)))
        for k in range(len(x)):
            e = np.zeros_like(x)
            e[k] = FD_STEP
            J[:, k] = (fun(x + e) - r) / FD_STEP
        JtJ, Jtr = J.T @ J, J.T @ r
        improved = False
        while lam < 1e12:
            step = np.linalg.solve(JtJ + lam * np.diag(np.maximum(np.diag(JtJ), 1e-12)), -Jtr)
            r_new = fun(x + step)
            if r_new @ r_new < r @ r:
                x, r = x + step, r_new
                lam = max(lam / 3, 1e-12)
                improved = True
                break
            lam *= 4
        if not improved:
            break
    return x, r, it


def _unpack(p, g, m):
    z = p[: g * (m + 1)] + 1j * p[g * (m + 1):]
    z = z.reshape(m + 1, g)
    return z[0], list(z[1:])


def _order_one_residual(sm, grid, policy, g, m):
    """Variable projection: the order-1 unknowns are eliminated by least squares."""

    def fun(p):
        u, b = _unpack(p, g, m)
        state = initial_state(sm, _raw_config(u, b), grid, policy=policy)
        Z = grid.points
        q = q_values(state, 1, Z, policy)
        A = affine_block(state, Z, policy)
        fit = min_norm_lstsq(A, -q, expected_rank(state))
        r = (q + A @ fit.x) / state.scale
        return np.concatenate([r.real, r.imag])

    return fun


def _raw_config(u, b):
    # unchecked centered config for the search loop; validity is checked after
    return SecantConfig(m=len(b), points_a=(u, -u, *b), centered_u=u, centered_b=tuple(b))


def find_degenerate_secant(
    sm: SiegelMatrix,
    m: int = 1,
    seed: int = 0,
    tol_search: float = 1e-10,
    max_iters: int = 100,
    policy: TruncationPolicy = DEFAULT_POLICY,
    grid_count: int | None = None,
) -> SecantSearchResult:
    """Search for u, b_1..b_m with P_1 = 0 (a degenerate (m+2)-secant).

    Levenberg-Marquardt over the real and imaginary parts of u and the b_j;
    alpha_{1,1}, alpha_{j,1} and D_1 are eliminated by linear least squares
    at every evaluation.  All randomness comes from ``seed``.
    """
    g = sm.g
    if m < 1:
        raise ValidationError("m must be >= 1")
    if (g, m) not in SUPPORTED:
        log.warning("find_degenerate_secant: (g, m) = (%d, %d) is experimental", g, m)
    rng = np.random.default_rng(seed)
    best = None
    for attempt in range(MAX_RESTARTS + 1):
        start = random_points(sm, m + 1, rng)
        grid = make_grid(sm, _raw_config(start[0], list(start[1:])), grid_count, seed=int(rng.integers(2**31)), policy=policy)
        fun = _order_one_residual(sm, grid, policy, g, m)
        p0 = np.concatenate([start.ravel().real, start.ravel().imag])
        p, _, iters = _levenberg_marquardt(fun, p0, max_iters, stop=0.1 * tol_search)
        u, b = _unpack(p, g, m)
        try:
            config = config_from_centered(u, b, sm)
            state = initial_state(sm, config, grid, policy=policy)
            try:
                state = solve_order(state, 1, np.inf, policy)
            except DegenerateInput as exc:
                raise DegenerateIterate(str(exc)) from exc
        except (DegenerateInput, DegenerateIterate) as exc:
            log.info("attempt %d: degenerate iterate (%s), restarting", attempt, exc)
            continue
        d1 = state.w[0]
        scale = float(np.linalg.norm(d1))
        result = SecantSearchResult(
            config=config,
            d1=d1 / scale,
            d1_scale=scale,
            alpha1_1=complex(state.alphas.entries[(1, 1)]),
            alpha_j_1=tuple(complex(state.alphas.entries[(j, 1)]) for j in range(3, m + 2)),
            final_residual=state.residuals[0],
            iterations=iters,
            seed=seed,
            state=state,
        )
        if result.final_residual <= tol_search:
            return result
        if best is None or result.final_residual < best.final_residual:
            best = result
        # a converged-but-inaccurate run is not degenerate; do not restart
        break
    if best is None:
        raise SearchFailed(f"all {MAX_RESTARTS + 1} attempts ended in degenerate iterates")
    raise SearchFailed(
        f"best order-1 residual {best.final_residual:.3e} above tol {tol_search:.1e}", result=best
    )


def translated_configs(u, b) -> list:
    """For mu in {-b_1..-b_{m-1}}: (u, -u, b_1..b_m) shifted by -(b_m + mu)/2."""
    u = np.asarray(u, dtype=complex).ravel()
    b = [np.asarray(x, dtype=complex).ravel() for x in b]
    out = []
    for bj in b[:-1]:
        shift = -0.5 * (b[-1] - bj)
        out.append(center_config([u + shift, -u + shift, *[x + shift for x in b]]))
    return out


@dataclass(frozen=True, eq=False)
class DivisorIntersection:
    u: np.ndarray
    points: tuple
    tol: float


def _newton(sm, u, z0, tol, policy, max_iters=60):
    try:
        return _newton_steps(sm, u, z0, tol, policy, max_iters)
    except RadiusCapExceeded:
        return None


def _newton_steps(sm, u, z0, tol, policy, max_iters):
    # the common zero set is lattice invariant, so iterates are kept reduced
    z = sm.reduce(np.array(z0, dtype=complex))
    pts = lambda z: np.vstack([z - u, z + u])  # noqa: E731
    F = theta_values(sm, pts(z), None, policy)
    for _ in range(max_iters):
        if np.max(np.abs(F)) <= 1e-3 * tol:
            break
        J = theta_gradient(sm, pts(z), None, policy)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        while t > 1e-4:
            F_new = theta_values(sm, pts(z + t * step), None, policy)
            if np.linalg.norm(F_new) < (1 - 0.25 * t) * np.linalg.norm(F):
                break
            t *= 0.5
        else:
            return None
        z = sm.reduce(z + t * step)
        F = theta_values(sm, pts(z), None, policy)
    if np.max(np.abs(F)) <= tol:
        return z
    return None


def divisor_intersection_points(
    sm: SiegelMatrix,
    u,
    n_starts: int = 16,
    tol: float = 1e-10,
    policy: TruncationPolicy = DEFAULT_POLICY,
    seed: int = 0,
) -> DivisorIntersection:
    """Points of Theta_u . Theta_{-u} (g = 2) by multi-start damped Newton.

    Starts run concurrently; merged points are reduced to the fundamental
    domain, deduplicated modulo the lattice and sorted by lattice coordinates.
    """
    if sm.g != 2:
        raise ValidationError("divisor intersection is implemented for g = 2 only")
    u = np.asarray(u, dtype=complex).ravel()
    starts = random_points(sm, n_starts, np.random.default_rng(seed), im_scale=0.5)
    roots = [z for z in pmap(lambda z0: _newton(sm, u, z0, tol, policy), starts) if z is not None]
    found = []
    for z in roots:
        zr = sm.reduce(z)
        if not any(sm.lattice_distance(zr, f) < DEDUP_TOL for f in found):
            found.append(zr)
    if not found:
        raise NoPointsFound(f"no intersection points from {n_starts} starts", starts=starts)
    found.sort(key=lambda z: tuple(np.round(np.concatenate(sm.lattice_coordinates(z)), 6)))
    return DivisorIntersection(u=u, points=tuple(found), tol=tol)


def same_point_set(sm, A, B, tol=1e-8) -> bool:
    A, B = list(A), list(B)
    return len(A) == len(B) and all(any(sm.lattice_distance(a, b) < tol for b in B) for a in A)


def restricted_values(state: HierarchyState, s: int, G: DivisorIntersection, policy=DEFAULT_POLICY):
    """(R_s, gauge * Delta_{s-1} theta(. + b_1) * theta(. - b_1)) at the points of G."""
    if state.g != 2 or state.m != 1:
        raise ValidationError("restriction check is implemented for g = 2, m = 1")
    if not G.points:
        raise NoPointsFound("empty intersection")
    Z = np.array(G.points)
    r = r_coefficients(state, Z, s, policy)[:, s]
    b = state.config.centered_b[0]
    S = s - 1
    orders, _ = partition_orders(S)
    W = state.w_array(S)
    if S == 0:
        plus = theta_values(state.sm, Z + b, None, policy)
    else:
        plus = delta_coefficients(theta_derivatives(state.sm, Z + b, W, orders, None, policy), S, 1)[:, S]
    expected = state.alphas.gauge * plus * theta_values(state.sm, Z - b, None, policy)
    return r, expected


def restriction_check(state: HierarchyState, s: int, G: DivisorIntersection, policy=DEFAULT_POLICY) -> float:
    """max over G of |R_s - Delta_{s-1} theta_{-b_1} theta_{b_1}| / (max magnitude + 1)."""
    r, expected = restricted_values(state, s, G, policy)
    return float(np.max(np.abs(r - expected) / (np.maximum(np.abs(r), np.abs(expected)) + 1)))
