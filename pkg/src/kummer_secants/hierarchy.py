"""Order-by-order solver for the section hierarchy P_s.

With centered points ``u, b_1..b_m`` and ``C(eps) = sum_j W^(j) eps^j``,

    P(z, eps) = alpha_1(eps) theta(z+u+C/2) theta(z-u-C/2)
              - theta(z-u+C/2) theta(z+u-C/2)
              + sum_j alpha_{j+2}(eps) theta(z+b_j+C/2) theta(z-b_j-C/2)

with ``alpha_1 = 1 + O(eps)``, ``alpha_2 = -1`` and ``alpha_{m+2} = eps``.
At order ``s`` the unknowns ``alpha_{1,s}, alpha_{3,s}..alpha_{m+1,s}`` and
``D_s`` enter affinely, so each order is a linear least-squares problem on a
grid of sample points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .epsilon_series import PowerSeries, VectorFieldSeq, delta_coefficients, partition_orders
from .errors import (
    DegenerateInput,
    IllConditioned,
    LowerOrdersUnsolved,
    OrderUnsolvable,
    ValidationError,
)
from .kummer import SecantConfig
from .theta_core import DEFAULT_POLICY, SiegelMatrix, TruncationPolicy, random_points, theta_derivatives, theta_values

log = logging.getLogger(__name__)

COND_LIMIT = 1e12
GRID_MIN_THETA = 1e-4


@dataclass(frozen=True, eq=False)
class AlphaTable:
    """Coefficients alpha_{j,i} for j in {1, 3, ..., m+1}, i >= 1.

    alpha_2 = -1 and alpha_{m+2} = gauge * eps are fixed and never stored.
    """

    m: int
    entries: dict = field(default_factory=dict)
    gauge: complex = 1.0

    def free_rows(self) -> list:
        return [1, *range(3, self.m + 2)]

    def series(self, j: int, S: int) -> np.ndarray:
        out = np.zeros(S + 1, dtype=complex)
        if j == 1:
            out[0] = 1.0
        elif j == 2:
            out[0] = -1.0
            return out
        elif j == self.m + 2:
            if S >= 1:
                out[1] = self.gauge
            return out
        for i in range(1, S + 1):
            out[i] = self.entries.get((j, i), 0.0)
        return out

    def with_order(self, s: int, values) -> "AlphaTable":
        entries = dict(self.entries)
        for j, v in zip(self.free_rows(), values):
            entries[(j, s)] = complex(v)
        return replace(self, entries=entries)

    def order_values(self, s: int) -> np.ndarray:
        return np.array([self.entries.get((j, s), 0.0) for j in self.free_rows()], dtype=complex)


@dataclass(frozen=True, eq=False)
class SampleGrid:
    points: np.ndarray
    seed: int

    @property
    def count(self) -> int:
        return len(self.points)


def make_grid(
    sm: SiegelMatrix,
    config: SecantConfig,
    count: int | None = None,
    seed: int = 0,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> SampleGrid:
    """Random sample points kept away from the divisors of theta(z +- u)."""
    count = 4 * 2**sm.g if count is None else count
    if count < 2 * 2**sm.g:
        raise ValidationError(f"grid needs at least {2 * 2**sm.g} points for genus {sm.g}")
    rng = np.random.default_rng(seed)
    u = config.centered_u
    kept = []
    while len(kept) < count:
        cand = random_points(sm, count, rng)
        th = np.abs(theta_values(sm, np.vstack([cand + u, cand - u]), None, policy))
        ok = (th[:count] >= GRID_MIN_THETA) & (th[count:] >= GRID_MIN_THETA)
        kept.extend(cand[ok])
    return SampleGrid(points=np.array(kept[:count]), seed=seed)


@dataclass(frozen=True, eq=False)
class HierarchyState:
    """Data of the formal curve solved so far plus its per-order certificate.

    ``w[j-1]`` is W^(j); ``residuals[s-1]`` is the normalized max |P_s| over
    the grid after solving order s.
    """

    sm: SiegelMatrix
    config: SecantConfig
    grid: SampleGrid
    alphas: AlphaTable
    w: tuple = ()
    residuals: tuple = ()
    tolerances: tuple = ()
    conditions: tuple = ()
    scale: float = 1.0
    failure: dict | None = None

    @property
    def g(self) -> int:
        return self.sm.g

    @property
    def m(self) -> int:
        return self.config.m

    @property
    def solved(self) -> int:
        return len(self.residuals)

    @property
    def seq(self) -> VectorFieldSeq:
        return VectorFieldSeq(self.g, self.w)

    @property
    def n_unknowns(self) -> int:
        return self.m + self.g

    def w_array(self, S: int) -> np.ndarray:
        out = np.zeros((S, self.g), dtype=complex)
        k = min(S, len(self.w))
        if k:
            out[:k] = np.array(self.w[:k])
        return out

    def unknowns(self, s: int) -> np.ndarray:
        d = self.w[s - 1] if len(self.w) >= s else np.zeros(self.g)
        return np.concatenate([self.alphas.order_values(s), d])

    def with_unknowns(self, s: int, x) -> "HierarchyState":
        """State with the order-s slots replaced by ``x`` (layout: alphas, then D_s)."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.n_unknowns,):
            raise ValidationError(f"expected {self.n_unknowns} unknowns, got shape {x.shape}")
        w = list(self.w) + [np.zeros(self.g, dtype=complex)] * max(0, s - len(self.w))
        w[s - 1] = x[self.m:].copy()
        return replace(self, w=tuple(w), alphas=self.alphas.with_order(s, x[: self.m]))


def initial_state(
    sm: SiegelMatrix,
    config: SecantConfig,
    grid: SampleGrid | None = None,
    gauge: complex = 1.0,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> HierarchyState:
    if config.centered_u.shape != (sm.g,):
        raise ValidationError("config genus does not match the period matrix")
    grid = make_grid(sm, config, policy=policy) if grid is None else grid
    u = config.centered_u
    Z = grid.points
    th = theta_values(sm, np.vstack([Z + u, Z - u]), None, policy)
    scale = float(np.max(np.abs(th[: len(Z)] * th[len(Z):])))
    return HierarchyState(sm=sm, config=config, grid=grid, alphas=AlphaTable(config.m, gauge=gauge), scale=scale)


# -- series evaluation -------------------------------------------------------


class _JetCache:
    """Partition-shaped theta jets at shifted points, shared across signs."""

    def __init__(self, sm, Z, W, S, policy):
        self.sm, self.Z, self.W, self.S, self.policy = sm, Z, W, S, policy
        self.orders, _ = partition_orders(S)
        self._jets = {}

    def _jet(self, x, lam):
        key = (x.tobytes(), lam)
        if key not in self._jets:
            if lam == 0 or self.S == 0:
                vals = theta_values(self.sm, self.Z + x, None, self.policy)
                jet = np.zeros((len(self.Z), len(self.orders)), dtype=complex)
                jet[:, 0] = vals
            else:
                jet = theta_derivatives(self.sm, self.Z + x, lam * self.W, self.orders, None, self.policy)
            self._jets[key] = jet
        return self._jets[key]

    def shifted(self, x, lam, sign):
        """Coefficients of theta(z + x + sign*lam*C(eps)), shape (npts, S+1)."""
        if lam == 0:
            out = np.zeros((len(self.Z), self.S + 1), dtype=complex)
            out[:, 0] = self._jet(x, 0)[:, 0]
            return out
        return delta_coefficients(self._jet(x, lam), self.S, sign)


def _cauchy(a, b, S):
    out = np.zeros((a.shape[0], S + 1), dtype=complex)
    for s in range(S + 1):
        out[:, s] = np.sum(a[:, : s + 1] * b[:, s::-1], axis=1)
    return out


def _section_series(state, Z, S, lam, mu, policy, w=None, alphas=None):
    """Coefficients 0..S of sum_k alpha_k(eps) theta(z + x_k + lam C) theta(z - x_k - mu C).

    (lam, mu) = (1/2, 1/2) gives P, (1, 0) gives R = P(z + C/2) and
    (0, 1) gives T = P(z - C/2).
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    W = state.w_array(S) if w is None else w
    alphas = state.alphas if alphas is None else alphas
    cache = _JetCache(state.sm, Z, W, S, policy)
    u = state.config.centered_u
    bases = [(u, 1), (-u, 2)] + [(bj, j + 3) for j, bj in enumerate(state.config.centered_b)]
    total = np.zeros((len(Z), S + 1), dtype=complex)
    for x, j in bases:
        plus = cache.shifted(x, lam, 1)
        minus = cache.shifted(-x, mu, -1)
        prod = _cauchy(plus, minus, S)
        alpha = alphas.series(j, S)
        total += _cauchy(prod, np.broadcast_to(alpha, (len(Z), S + 1)), S)
    return total


def p_coefficients(state, Z, S, policy=DEFAULT_POLICY, w=None, alphas=None) -> np.ndarray:
    """(npts, S+1) array of P_0..P_S; unsolved slots read as zero."""
    return _section_series(state, Z, S, 0.5, 0.5, policy, w, alphas)


def r_coefficients(state, Z, S, policy=DEFAULT_POLICY) -> np.ndarray:
    return _section_series(state, Z, S, 1.0, 0.0, policy)


def t_coefficients(state, Z, S, policy=DEFAULT_POLICY) -> np.ndarray:
    return _section_series(state, Z, S, 0.0, 1.0, policy)


def p_series_eval(state: HierarchyState, z, S: int, policy: TruncationPolicy = DEFAULT_POLICY) -> PowerSeries:
    return PowerSeries(p_coefficients(state, np.reshape(z, (1, state.g)), S, policy)[0])


def _zeroed(state, s):
    return state.with_unknowns(s, np.zeros(state.n_unknowns))


def q_values(state, s, Z, policy=DEFAULT_POLICY) -> np.ndarray:
    if s < 1:
        raise ValidationError("order must be >= 1")
    if state.solved < s - 1:
        raise LowerOrdersUnsolved(f"Q_{s} needs orders 1..{s - 1} solved, have {state.solved}")
    return p_coefficients(_zeroed(state, s), Z, s, policy)[:, s]


def q_s_eval(state: HierarchyState, s: int, z, policy: TruncationPolicy = DEFAULT_POLICY) -> complex:
    """Q_s(z): P_s(z) with alpha_{1,s}, alpha_{j+2,s} and D_s set to zero."""
    return complex(q_values(state, s, np.reshape(z, (1, state.g)), policy)[0])


def affine_block(state: HierarchyState, Z, policy: TruncationPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Columns multiplying the order-s unknowns in P_s (independent of s).

    alpha_{1,s} -> theta(z+u) theta(z-u); alpha_{j+2,s} -> theta(z+b_j) theta(z-b_j);
    component i of D_s -> d_i theta(z+u) theta(z-u) - theta(z+u) d_i theta(z-u).
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    g, n = state.g, len(Z)
    u = state.config.centered_u
    orders = np.vstack([np.zeros((1, g), int), np.eye(g, dtype=int)])
    jp = theta_derivatives(state.sm, Z + u, np.eye(g), orders, None, policy)
    jm = theta_derivatives(state.sm, Z - u, np.eye(g), orders, None, policy)
    cols = [jp[:, 0] * jm[:, 0]]
    for bj in state.config.centered_b[: state.m - 1]:
        th = theta_values(state.sm, np.vstack([Z + bj, Z - bj]), None, policy)
        cols.append(th[:n] * th[n:])
    for i in range(g):
        cols.append(jp[:, 1 + i] * jm[:, 0] - jp[:, 0] * jm[:, 1 + i])
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class LeastSquaresResult:
    x: np.ndarray
    singular_values: np.ndarray
    rank: int
    condition_number: float


def min_norm_lstsq(A, rhs, rank) -> LeastSquaresResult:
    """Minimum-norm least squares restricted to the leading ``rank`` singular triplets."""
    U, sv, Vh = np.linalg.svd(A, full_matrices=False)
    r = min(rank, len(sv))
    coef = (U[:, :r].conj().T @ rhs) / sv[:r]
    x = Vh[:r].conj().T @ coef
    cond = float(sv[0] / sv[r - 1]) if sv[r - 1] > 0 else np.inf
    return LeastSquaresResult(x=x, singular_values=sv, rank=r, condition_number=cond)


def expected_rank(state: HierarchyState) -> int:
    # every column is a section of 2 Theta, a space of dimension 2^g
    return min(state.n_unknowns, 2**state.g, state.grid.count)


def solve_order(
    state: HierarchyState,
    s: int,
    tol_solve: float = 1e-8,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> HierarchyState:
    """Solve order ``s`` for (alpha_{1,s}, alpha_{3,s}..alpha_{m+1,s}, D_s).

    Raises :class:`OrderUnsolvable` when the best least-squares fit leaves a
    normalized residual above ``tol_solve`` and :class:`IllConditioned` when
    the least-squares matrix has condition number above 1e12.
    """
    if not tol_solve > 0:
        raise ValidationError("tol_solve must be positive")
    if state.solved != s - 1:
        raise LowerOrdersUnsolved(f"cannot solve order {s}: {state.solved} orders solved")
    for k, (res, tol) in enumerate(zip(state.residuals, state.tolerances), start=1):
        if res > tol_solve:
            raise LowerOrdersUnsolved(f"order {k} residual {res:.2e} exceeds tol {tol_solve:.1e}")
    Z = state.grid.points
    q = q_values(state, s, Z, policy)
    A = affine_block(state, Z, policy)
    fit = min_norm_lstsq(A, -q, expected_rank(state))
    candidate = state.with_unknowns(s, fit.x)
    p_s = p_coefficients(candidate, Z, s, policy)[:, s]
    residual = float(np.max(np.abs(p_s)) / state.scale)
    candidate = replace(
        candidate,
        residuals=state.residuals + (residual,),
        tolerances=state.tolerances + (tol_solve,),
        conditions=state.conditions + (fit.condition_number,),
    )
    log.debug("order %d: residual %.3e, cond %.3e", s, residual, fit.condition_number)
    if fit.condition_number > COND_LIMIT:
        raise IllConditioned(s, fit.condition_number, candidate)
    if residual > tol_solve:
        raise OrderUnsolvable(s, residual, tol_solve, candidate)
    if s == 1 and not np.linalg.norm(fit.x[state.m:]) > 1e-12:
        raise DegenerateInput("order 1 solved with D_1 = 0")
    return candidate


def run_hierarchy(
    sm: SiegelMatrix,
    config: SecantConfig,
    S_max: int,
    tol_solve: float = 1e-8,
    grid: SampleGrid | None = None,
    policy: TruncationPolicy = DEFAULT_POLICY,
    state: HierarchyState | None = None,
    gauge: complex = 1.0,
) -> HierarchyState:
    """Solve orders solved+1..S_max in sequence, stopping at the first failure.

    A failure is recorded in ``state.failure`` (order, kind, residual or
    condition number) rather than raised.
    """
    if state is None:
        state = initial_state(sm, config, grid, gauge=gauge, policy=policy)
    for s in range(state.solved + 1, S_max + 1):
        try:
            state = solve_order(state, s, tol_solve, policy)
        except OrderUnsolvable as exc:
            return replace(state, failure={"order": s, "kind": "OrderUnsolvable", "residual": exc.residual})
        except IllConditioned as exc:
            return replace(state, failure={"order": s, "kind": "IllConditioned", "condition_number": exc.condition_number})
        except DegenerateInput as exc:
            return replace(state, failure={"order": s, "kind": "DegenerateInput", "message": str(exc)})
    return state


def rt_cross_check(state: HierarchyState, s: int, z, policy: TruncationPolicy = DEFAULT_POLICY):
    """(|R_s - P_s|, |T_s - P_s|, |R_s^2 - R_s T_s|) at ``z``, normalized by the grid scale.

    All three vanish once orders 1..s-1 are solved.
    """
    Z = np.reshape(np.asarray(z, dtype=complex), (-1, state.g))
    p = p_coefficients(state, Z, s, policy)[:, s]
    r = r_coefficients(state, Z, s, policy)[:, s]
    t = t_coefficients(state, Z, s, policy)[:, s]
    sc = state.scale
    return (
        float(np.max(np.abs(r - p)) / sc),
        float(np.max(np.abs(t - p)) / sc),
        float(np.max(np.abs(r * r - r * t)) / sc**2),
    )
