"""Riemann theta functions with characteristics and directional derivatives.

The series evaluated everywhere is

    theta[a, b](z, Omega) = sum_n exp(i pi (n+a)^T Omega (n+a) + 2 pi i (n+a)^T (z+b))

summed over the lattice points ``n`` inside an ellipsoid whose radius is
chosen from a rigorous tail bound (see :func:`truncation_radius`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import (
    ImaginaryPartNotPositiveDefinite,
    NotSymmetric,
    OrderCeilingExceeded,
    RadiusCapExceeded,
    ValidationError,
)

MAX_JET_ORDER = 12


@dataclass(frozen=True, eq=False)
class SiegelMatrix:
    """Validated period matrix; build it with :func:`validate_siegel`."""

    omega: np.ndarray
    # derived quantities, filled in by validate_siegel
    im: np.ndarray = field(repr=False)
    im_inv: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)  # upper triangular, im = chol^T chol
    shortest: float = field(repr=False)  # shortest nonzero vector of chol Z^g

    @property
    def g(self) -> int:
        return self.omega.shape[0]

    @property
    def key(self) -> bytes:
        return self.omega.tobytes()

    def scaled(self, factor: float) -> "SiegelMatrix":
        return validate_siegel(self.omega * factor)

    def lattice_coordinates(self, z):
        """Real coordinates ``(x, y)`` with ``z = x + Omega y``."""
        z = np.asarray(z, dtype=complex)
        y = z.imag @ self.im_inv.T
        x = z.real - y @ self.omega.real.T
        return x, y

    def reduce(self, z):
        """Representative of ``z`` modulo the lattice with coordinates in [-1/2, 1/2)."""
        x, y = self.lattice_coordinates(z)
        x = x - np.floor(x + 0.5)
        y = y - np.floor(y + 0.5)
        return x + y @ self.omega.T

    def lattice_distance(self, z1, z2) -> float:
        """Distance between ``z1`` and ``z2`` modulo the lattice, in lattice coordinates."""
        x, y = self.lattice_coordinates(np.asarray(z1, dtype=complex) - np.asarray(z2, dtype=complex))
        c = np.concatenate([np.atleast_1d(x), np.atleast_1d(y)])
        return float(np.max(np.abs(c - np.round(c))))


def _shortest_vector(chol):
    g = chol.shape[0]
    rho0 = float(np.min(np.linalg.norm(chol, axis=0)))
    yinv = np.linalg.inv(chol.T @ chol)
    bounds = [int(math.ceil(rho0 * math.sqrt(yinv[j, j]))) for j in range(g)]
    best = rho0
    for n in itertools.product(*[range(-b, b + 1) for b in bounds]):
        if any(n):
            best = min(best, float(np.linalg.norm(chol @ np.array(n, dtype=float))))
    return best


def validate_siegel(omega) -> SiegelMatrix:
    """Check symmetry and positivity of ``Im omega`` and precompute its factors.

    An asymmetry below 1e-14 (relative to the largest entry) is removed by
    symmetrizing; anything larger raises :class:`NotSymmetric`.
    """
    omega = np.array(omega, dtype=complex)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1] or omega.shape[0] == 0:
        raise ValidationError(f"omega must be a nonempty square matrix, got shape {omega.shape}")
    if not np.all(np.isfinite(omega)):
        raise ValidationError("omega has non-finite entries")
    scale = max(float(np.max(np.abs(omega))), 1e-300)
    asym = float(np.max(np.abs(omega - omega.T)))
    if asym > 1e-14 * scale:
        raise NotSymmetric(f"omega is not symmetric (max |O_ij - O_ji| = {asym:.3e})")
    omega = 0.5 * (omega + omega.T)
    im = omega.imag.copy()
    eig = np.linalg.eigvalsh(im)
    if eig[0] <= 0:
        raise ImaginaryPartNotPositiveDefinite(eig[0])
    chol = np.linalg.cholesky(im).T
    return SiegelMatrix(
        omega=omega,
        im=im,
        im_inv=np.linalg.inv(im),
        chol=chol,
        shortest=_shortest_vector(chol),
    )


@dataclass(frozen=True)
class ThetaCharacteristic:
    a: tuple = ()
    b: tuple = ()

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        b = tuple(float(v) for v in self.b)
        if not all(math.isfinite(v) for v in a + b):
            raise ValidationError("characteristic entries must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def zero(cls, g: int) -> "ThetaCharacteristic":
        return cls((0.0,) * g, (0.0,) * g)

    def arrays(self, g):
        a = np.array(self.a) if self.a else np.zeros(g)
        b = np.array(self.b) if self.b else np.zeros(g)
        if a.shape != (g,) or b.shape != (g,):
            raise ValidationError(f"characteristic has wrong length for genus {g}")
        return a, b


@dataclass(frozen=True)
class TruncationPolicy:
    tol: float = 1e-12
    max_radius: float = 15.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if not self.max_radius >= 1:
            raise ValidationError("max_radius must be >= 1")


DEFAULT_POLICY = TruncationPolicy()


@dataclass(frozen=True, eq=False)
class DirectionalJet:
    """Directional derivatives of theta at one point.

    ``values[(n_1, ..., n_k)]`` is ``D_{v_1}^{n_1} ... D_{v_k}^{n_k} theta(point)``.
    """

    point: np.ndarray
    directions: tuple
    values: dict
    max_order: int

    def __getitem__(self, multi_order):
        return self.values[tuple(multi_order)]


def _tail_bound(sm: SiegelMatrix, radius: float, deriv_order: int, z_bound: float) -> float:
    """Upper bound for the omitted terms outside ``||chol (n + c)|| > radius``.

    Works in units x = sqrt(pi) chol (n + c), where each term is at most
    ``exp(pi |Im z|^2_{Y^-1}) * (2 pi |n + a|)^N * exp(-|x|^2)``.  Disjoint
    balls of radius rho/2 around the lattice points turn the sum into a
    radial integral; returns ``inf`` where that comparison is not valid.
    """
    g = sm.g
    N = deriv_order
    rho = math.sqrt(math.pi) * sm.shortest
    rs = math.sqrt(math.pi) * radius
    lower = rs - rho
    if lower < math.sqrt(N / 2.0) or lower < 0:
        return math.inf
    ynorm = float(np.linalg.norm(sm.im_inv, 2))
    exponent = math.pi * ynorm * z_bound**2
    if exponent > 700:
        return math.inf
    prefactor = math.exp(exponent)
    kappa = float(np.linalg.norm(np.linalg.inv(sm.chol), 2)) / math.sqrt(math.pi)
    beta = ynorm * z_bound
    h = rho / 2.0
    a2 = lower * lower

    def moment(p):
        # int_lower^inf t^p exp(-t^2) dt
        s = (p + 1) / 2.0
        return 0.5 * special.gamma(s) * special.gammaincc(s, a2)

    total = 0.0
    for k in range(N + 1):
        poly = math.comb(N, k) * kappa**k * beta ** (N - k)
        if poly == 0.0:
            continue
        integral = sum(math.comb(g - 1, j) * h ** (g - 1 - j) * moment(j + k) for j in range(g))
        total += poly * integral
    return prefactor * (2 * math.pi) ** N * (g / h**g) * total


def truncation_radius(
    sm: SiegelMatrix,
    policy: TruncationPolicy = DEFAULT_POLICY,
    deriv_order: int = 0,
    z_bound: float = 0.0,
) -> float:
    """Smallest radius (to 1e-3) whose certified tail is below ``policy.tol``.

    ``z_bound`` bounds the Euclidean norm of ``Im z`` over the evaluation
    points.  Derivative bounds assume unit direction vectors.
    """
    if deriv_order < 0:
        raise ValidationError("deriv_order must be nonnegative")
    # rounding z_bound up keeps the bound valid and makes the cache effective
    zq = math.ceil(z_bound * 16.0) / 16.0
    return _radius_cached(sm, sm.key, policy.tol, policy.max_radius, deriv_order, zq)


_radius_cache: dict = {}


def _radius_cached(sm, key, tol, max_radius, deriv_order, z_bound):
    ck = (key, tol, max_radius, deriv_order, z_bound)
    if ck not in _radius_cache:
        _radius_cache[ck] = _search_radius(sm, TruncationPolicy(tol, max_radius), deriv_order, z_bound)
    return _radius_cache[ck]


def _search_radius(sm, policy, deriv_order, z_bound):

    def ok(r):
        return _tail_bound(sm, r, deriv_order, z_bound) <= policy.tol

    hi = policy.max_radius
    if not ok(hi):
        # find how far we would have needed to go, for the error message
        need = hi
        while not ok(need) and need < 1e3:
            need *= 1.5
        raise RadiusCapExceeded(need, policy.max_radius)
    lo = (sm.shortest + math.sqrt(deriv_order / (2 * math.pi)))
    if ok(lo):
        return lo
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@lru_cache(maxsize=256)
def _ellipsoid_points(key: bytes, g: int, radius_q: float) -> np.ndarray:
    omega = np.frombuffer(key, dtype=complex).reshape(g, g)
    im = omega.imag
    chol = np.linalg.cholesky(im).T
    yinv = np.linalg.inv(im)
    bounds = [int(math.floor(radius_q * math.sqrt(yinv[j, j]))) for j in range(g)]
    grids = np.meshgrid(*[np.arange(-b, b + 1) for b in bounds], indexing="ij")
    pts = np.stack([gr.ravel() for gr in grids], axis=1).astype(float)
    norms = np.linalg.norm(pts @ chol.T, axis=1)
    pts = pts[norms <= radius_q]
    pts.setflags(write=False)
    return pts


def lattice_points(sm: SiegelMatrix, radius: float) -> np.ndarray:
    """Integer vectors n with ||chol n|| <= radius (rounded up to a 1/4 grid for caching)."""
    radius_q = math.ceil(radius * 4.0) / 4.0
    return _ellipsoid_points(sm.key, sm.g, radius_q)


def _as_points(z, g):
    Z = np.atleast_2d(np.asarray(z, dtype=complex))
    if Z.shape[-1] != g:
        raise ValidationError(f"points must have {g} coordinates, got shape {Z.shape}")
    return Z


def _summation_set(sm, a, Z, policy, deriv_order, radius):
    """Lattice points n covering every per-point ellipsoid ||chol(n + c_i)|| <= R."""
    centers = a + Z.imag @ sm.im_inv.T
    z_bound = float(np.max(np.linalg.norm(Z.imag, axis=1))) if len(Z) else 0.0
    if radius is None:
        radius = truncation_radius(sm, policy, deriv_order, z_bound)
    shift = np.round(centers.mean(axis=0))
    spread = float(np.max(np.linalg.norm((centers - shift) @ sm.chol.T, axis=1)))
    return lattice_points(sm, radius + spread) - shift


def theta_derivatives(
    sm: SiegelMatrix,
    z,
    directions,
    multi_orders,
    char: ThetaCharacteristic | None = None,
    policy: TruncationPolicy = DEFAULT_POLICY,
    radius: float | None = None,
) -> np.ndarray:
    """Batched directional derivatives.

    Parameters
    ----------
    z : (npts, g) complex
    directions : (k, g) complex
    multi_orders : (nm, k) nonnegative int
        Row ``(n_1..n_k)`` requests ``D_{v_1}^{n_1} ... D_{v_k}^{n_k} theta``.

    Returns
    -------
    (npts, nm) complex ndarray
    """
    g = sm.g
    Z = _as_points(z, g)
    V = np.asarray(directions, dtype=complex).reshape(-1, g)
    M = np.asarray(multi_orders, dtype=int).reshape(-1, V.shape[0]) if V.shape[0] else np.zeros((1, 0), int)
    if M.size and M.min() < 0:
        raise ValidationError("multi-orders must be nonnegative")
    total = M.sum(axis=1) if M.size else np.zeros(len(M), int)
    max_order = int(total.max()) if len(total) else 0
    if max_order > MAX_JET_ORDER:
        raise OrderCeilingExceeded(f"derivative order {max_order} exceeds ceiling {MAX_JET_ORDER}")
    a, b = (char or ThetaCharacteristic()).arrays(g)

    # scale the absolute tolerance by the largest direction-norm product
    if V.shape[0]:
        vnorm = np.linalg.norm(V, axis=1)
        growth = float(np.max(np.prod(np.maximum(vnorm, 1e-300)[None, :] ** M, axis=1)))
        if growth > 1.0:
            policy = replace(policy, tol=policy.tol / growth)
    N = _summation_set(sm, a, Z, policy, max_order, radius)
    NA = N + a
    quad = 1j * np.pi * np.einsum("ni,ij,nj->n", NA, sm.omega, NA)
    E = np.exp(quad[None, :] + 2j * np.pi * (Z + b) @ NA.T)  # (npts, nlat)
    if max_order == 0:
        mono = np.ones((len(NA), len(M)), dtype=complex)
    else:
        L = 2j * np.pi * NA @ V.T  # (nlat, k)
        mono = np.prod(L[:, None, :] ** M[None, :, :], axis=2)
    return E @ mono


def theta_values(sm, z, char=None, policy=DEFAULT_POLICY, radius=None) -> np.ndarray:
    """Batched theta values at the rows of ``z``."""
    Z = _as_points(z, sm.g)
    return theta_derivatives(sm, Z, np.zeros((0, sm.g)), np.zeros((1, 0), int), char, policy, radius)[:, 0]


def theta_gradient(sm, z, char=None, policy=DEFAULT_POLICY) -> np.ndarray:
    """(npts, g) array of partial derivatives d theta / d z_i."""
    g = sm.g
    return theta_derivatives(sm, z, np.eye(g), np.eye(g, dtype=int), char, policy)


def theta_eval(sm: SiegelMatrix, char, z, policy: TruncationPolicy = DEFAULT_POLICY) -> complex:
    z = np.asarray(z, dtype=complex).reshape(1, sm.g)
    return complex(theta_values(sm, z, char, policy)[0])


def multi_orders_up_to(k: int, max_order: int) -> list:
    """All multi-orders of length ``k`` with total order <= ``max_order``, graded."""
    out = []
    for total in range(max_order + 1):
        for combo in itertools.combinations_with_replacement(range(k), total):
            mo = [0] * k
            for i in combo:
                mo[i] += 1
            out.append(tuple(mo))
    # combinations_with_replacement gives each multiset once
    return out


def theta_jet(
    sm: SiegelMatrix,
    char,
    z,
    directions,
    max_order: int,
    policy: TruncationPolicy = DEFAULT_POLICY,
    orders=None,
) -> DirectionalJet:
    """Jet of theta at ``z`` along ``directions``.

    By default every multi-order of total order <= ``max_order`` is filled;
    pass ``orders`` to restrict to a subset (the hierarchy only needs the
    partition-shaped entries).
    """
    if max_order > MAX_JET_ORDER:
        raise OrderCeilingExceeded(f"max_order {max_order} exceeds ceiling {MAX_JET_ORDER}")
    if max_order < 0:
        raise ValidationError("max_order must be nonnegative")
    V = [np.asarray(v, dtype=complex).reshape(sm.g) for v in directions]
    if not V and max_order > 0:
        raise ValidationError("directions must be nonempty when max_order > 0")
    if orders is None:
        orders = multi_orders_up_to(len(V), max_order)
    else:
        orders = [tuple(int(n) for n in o) for o in orders]
        if any(sum(o) > max_order for o in orders):
            raise ValidationError("requested multi-order exceeds max_order")
    M = np.array(orders, dtype=int).reshape(len(orders), len(V))
    vals = theta_derivatives(sm, np.asarray(z, dtype=complex).reshape(1, sm.g), np.array(V).reshape(len(V), sm.g), M, char, policy)[0]
    return DirectionalJet(
        point=np.asarray(z, dtype=complex).reshape(sm.g),
        directions=tuple(V),
        values={o: complex(v) for o, v in zip(orders, vals)},
        max_order=max_order,
    )


def random_points(sm: SiegelMatrix, count: int, rng, im_scale: float = 0.5) -> np.ndarray:
    """Points ``x + Omega y`` with ``x`` in [0,1)^g and ``y`` in [-im_scale, im_scale)^g."""
    x = rng.random((count, sm.g))
    y = (2 * rng.random((count, sm.g)) - 1) * im_scale
    return x + y @ sm.omega.T


def random_siegel(g: int, seed: int) -> SiegelMatrix:
    """Seeded period matrix with Im Omega = A A^T / g + I/2 and Re Omega in [-1/2, 1/2)."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(g, g))
    X = rng.random((g, g)) - 0.5
    return validate_siegel((X + X.T) / 2 + 1j * (A @ A.T / g + 0.5 * np.eye(g)))
