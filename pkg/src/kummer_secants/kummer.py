"""Second-order theta basis, the Kummer map and secancy rank tests."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AllCoordinatesVanish, DegenerateInput, DuplicatePoints, ValidationError, ZeroDirection
from .theta_core import (
    DEFAULT_POLICY,
    SiegelMatrix,
    ThetaCharacteristic,
    TruncationPolicy,
    theta_derivatives,
    theta_values,
    validate_siegel,
)

POINT_SEPARATION = 1e-8
COINCIDENCE_ANGLE = 1e-8


@lru_cache(maxsize=64)
def _doubled(key: bytes, g: int) -> SiegelMatrix:
    return validate_siegel(2 * np.frombuffer(key, dtype=complex).reshape(g, g))


def basis_characteristics(g: int) -> list:
    """Characteristics [eps/2, 0] with eps running over {0,1}^g lexicographically."""
    return [ThetaCharacteristic(tuple(e / 2 for e in eps), (0.0,) * g) for eps in itertools.product((0, 1), repeat=g)]


def second_order_values(sm: SiegelMatrix, z, policy: TruncationPolicy = DEFAULT_POLICY) -> np.ndarray:
    """(npts, 2^g) array of theta_j(z) = theta[eps_j/2, 0](2z, 2 Omega)."""
    Z = np.atleast_2d(np.asarray(z, dtype=complex))
    sm2 = _doubled(sm.key, sm.g)
    return np.stack([theta_values(sm2, 2 * Z, ch, policy) for ch in basis_characteristics(sm.g)], axis=1)


def second_order_derivatives(sm, z, directions, multi_orders, policy=DEFAULT_POLICY) -> np.ndarray:
    """(npts, nm, 2^g) directional derivatives of the second-order basis in ``z``."""
    Z = np.atleast_2d(np.asarray(z, dtype=complex))
    sm2 = _doubled(sm.key, sm.g)
    V = 2 * np.asarray(directions, dtype=complex).reshape(-1, sm.g)
    return np.stack(
        [theta_derivatives(sm2, 2 * Z, V, multi_orders, ch, policy) for ch in basis_characteristics(sm.g)],
        axis=2,
    )


def second_order_basis(sm: SiegelMatrix, z, policy: TruncationPolicy = DEFAULT_POLICY) -> np.ndarray:
    return second_order_values(sm, np.asarray(z, dtype=complex).reshape(1, sm.g), policy)[0]


def addition_formula_residual(sm: SiegelMatrix, z, w, policy: TruncationPolicy = DEFAULT_POLICY) -> float:
    """|theta(z+w) theta(z-w) - sum_j theta_j(z) theta_j(w)| / (1 + |theta(z+w) theta(z-w)|)."""
    return float(addition_formula_residuals(sm, np.reshape(z, (1, -1)), np.reshape(w, (1, -1)), policy)[0])


def addition_formula_residuals(sm, Z, W, policy=DEFAULT_POLICY) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    th = theta_values(sm, np.vstack([Z + W, Z - W]), None, policy)
    lhs = th[: len(Z)] * th[len(Z):]
    rhs = np.sum(second_order_values(sm, Z, policy) * second_order_values(sm, W, policy), axis=1)
    return np.abs(lhs - rhs) / (1 + np.abs(lhs))


@dataclass(frozen=True, eq=False)
class KummerPoint:
    coords: np.ndarray
    source_z: np.ndarray


def normalize_projective(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    k = int(np.argmax(np.abs(v)))
    if not np.abs(v[k]) > 0:
        raise AllCoordinatesVanish("all second-order theta coordinates vanish")
    return v / v[k]


def kummer_map(sm: SiegelMatrix, z, policy: TruncationPolicy = DEFAULT_POLICY) -> KummerPoint:
    z = np.asarray(z, dtype=complex).reshape(sm.g)
    return KummerPoint(coords=normalize_projective(second_order_basis(sm, z, policy)), source_z=z)


def projective_distance(p, q) -> float:
    """Sine of the angle between two coordinate vectors (0 for equal projective points)."""
    p = np.asarray(getattr(p, "coords", p), dtype=complex)
    q = np.asarray(getattr(q, "coords", q), dtype=complex)
    p = p / np.linalg.norm(p)
    q = q / np.linalg.norm(q)
    # norm of the component of q orthogonal to p; avoids sqrt(1 - c^2) cancellation
    return float(np.linalg.norm(q - p * np.vdot(p, q)))


@dataclass(frozen=True, eq=False)
class SecantConfig:
    m: int
    points_a: tuple
    centered_u: np.ndarray
    centered_b: tuple

    @property
    def a_shift(self) -> np.ndarray:
        """The common shift (a_1 + a_2)/2 removed by centering."""
        return 0.5 * (self.points_a[0] + self.points_a[1])

    def centered_points(self) -> list:
        """(u, -u, b_1, ..., b_m): the a_i shifted by -(a_1 + a_2)/2."""
        return [self.centered_u, -self.centered_u, *self.centered_b]


def _check_distinct(points, sm, what="points"):
    for i, j in itertools.combinations(range(len(points)), 2):
        if sm is not None:
            d = sm.lattice_distance(points[i], points[j])
        else:
            d = float(np.max(np.abs(points[i] - points[j])))
        if d < POINT_SEPARATION:
            raise DuplicatePoints(f"{what} {i + 1} and {j + 1} coincide (distance {d:.2e})")


def center_config(points_a, sm: SiegelMatrix | None = None) -> SecantConfig:
    """Build a :class:`SecantConfig` from the m+2 points a_1..a_{m+2}.

    With ``sm`` given, distinctness and ``2u != 0`` are checked modulo the
    lattice; otherwise plain coordinate differences are used.
    """
    pts = [np.asarray(p, dtype=complex).ravel() for p in points_a]
    if len(pts) < 3:
        raise ValidationError("need at least three points (m >= 1)")
    g = pts[0].shape[0]
    if any(p.shape != (g,) for p in pts):
        raise ValidationError("all points must have the same dimension")
    _check_distinct(pts, sm)
    shift = 0.5 * (pts[0] + pts[1])
    u = pts[0] - shift
    two_u_small = (sm.lattice_distance(2 * u, np.zeros(g)) if sm is not None else float(np.max(np.abs(2 * u)))) < POINT_SEPARATION
    if two_u_small:
        raise DuplicatePoints("2u = a_1 - a_2 vanishes modulo the lattice")
    b = tuple(p - shift for p in pts[2:])
    return SecantConfig(m=len(pts) - 2, points_a=tuple(pts), centered_u=u, centered_b=b)


def config_from_centered(u, b, sm: SiegelMatrix | None = None) -> SecantConfig:
    """Config with a_1 = u, a_2 = -u, a_{j+2} = b_j."""
    u = np.asarray(u, dtype=complex).ravel()
    return center_config([u, -u, *[np.asarray(bj, dtype=complex).ravel() for bj in b]], sm)


@dataclass(frozen=True)
class SecantReport:
    matrix_rows: int
    singular_values: tuple
    rank_estimate: int
    is_secant: bool
    gap_ratio: float


def _rank_report(rows, tol_rank) -> SecantReport:
    if not 0 < tol_rank < 1:
        raise ValidationError("tol_rank must lie in (0, 1)")
    A = np.array([r / np.linalg.norm(r) for r in rows])
    sv = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(sv >= tol_rank * sv[0]))
    gap = float(sv[rank] / sv[rank - 1]) if 0 < rank < len(sv) else 0.0
    m = len(rows) - 2
    return SecantReport(
        matrix_rows=len(rows),
        singular_values=tuple(float(s) for s in sv),
        rank_estimate=rank,
        is_secant=rank <= m + 1,
        gap_ratio=gap,
    )


def honest_secant_test(
    sm: SiegelMatrix,
    config: SecantConfig,
    zeta,
    tol_rank: float = 1e-7,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> SecantReport:
    """Rank test for K(zeta + a_1), ..., K(zeta + a_{m+2}) lying on an m-plane."""
    zeta = np.asarray(zeta, dtype=complex).ravel()
    rows = second_order_values(sm, np.array([zeta + a for a in config.points_a]), policy)
    for i, j in itertools.combinations(range(len(rows)), 2):
        if projective_distance(rows[i], rows[j]) < COINCIDENCE_ANGLE:
            raise DegenerateInput(f"rows {i + 1} and {j + 1} coincide projectively")
    return _rank_report(rows, tol_rank)


def degenerate_secant_test(
    sm: SiegelMatrix,
    u,
    d1,
    b,
    tol_rank: float = 1e-7,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> SecantReport:
    """Rank test for K(u), D_{d1} K(u), K(b_1), ..., K(b_m)."""
    u = np.asarray(u, dtype=complex).ravel()
    d1 = np.asarray(d1, dtype=complex).ravel()
    if not np.linalg.norm(d1) > 0:
        raise ZeroDirection("d1 must be nonzero")
    ku = second_order_values(sm, u[None, :], policy)[0]
    dku = second_order_derivatives(sm, u[None, :], d1[None, :], [[1]], policy)[0, 0]
    kb = second_order_values(sm, np.array([np.asarray(x, dtype=complex).ravel() for x in b]), policy)
    return _rank_report([ku, dku, *kb], tol_rank)
