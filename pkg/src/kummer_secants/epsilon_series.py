"""Truncated power series in epsilon and the partition operators Delta_s.

``Delta_s`` is the epsilon^s coefficient of ``exp(D(eps))`` with
``D(eps) = sum_{j>=1} D_j eps^j``::

    Delta_s = sum_{i_1 + 2 i_2 + ... + s i_s = s} D_1^{i_1} ... D_s^{i_s} / (i_1! ... i_s!)

and ``Delta_s^-`` is the same sum with every ``D_j`` replaced by ``-D_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import JetTooShallow, OrderCeilingExceeded, ShapeMismatch, ValidationError

MAX_ORDER = 12


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """Coefficients ``coeffs[s]`` of eps^s for s = 0..order (scalars or g-vectors)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim == 0:
            c = c.reshape(1)
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def value_shape(self) -> tuple:
        return self.coeffs.shape[1:]

    def __getitem__(self, s):
        return self.coeffs[s]

    def __add__(self, other):
        return series_add(self, other)

    def __mul__(self, other):
        return series_mul(self, other)

    def __neg__(self):
        return PowerSeries(-self.coeffs)

    @classmethod
    def zeros(cls, order, shape=()):
        return cls(np.zeros((order + 1, *shape), dtype=complex))


def _coerce(x):
    return x if isinstance(x, PowerSeries) else PowerSeries(np.atleast_1d(np.asarray(x, dtype=complex)))


def series_truncate(a: PowerSeries, order: int) -> PowerSeries:
    if order < 0:
        raise ValidationError("order must be nonnegative")
    if order > a.order:
        raise ValidationError(f"cannot truncate a series of order {a.order} to higher order {order}")
    return PowerSeries(a.coeffs[: order + 1].copy())


def _check_shapes(a, b):
    sa, sb = a.value_shape, b.value_shape
    if sa and sb and sa != sb:
        raise ShapeMismatch(f"incompatible coefficient shapes {sa} and {sb}")


def series_add(a: PowerSeries, b: PowerSeries) -> PowerSeries:
    a, b = _coerce(a), _coerce(b)
    _check_shapes(a, b)
    S = min(a.order, b.order)
    return PowerSeries(a.coeffs[: S + 1] + b.coeffs[: S + 1])


def series_mul(a: PowerSeries, b: PowerSeries) -> PowerSeries:
    """Cauchy product, truncated at the smaller declared order."""
    a, b = _coerce(a), _coerce(b)
    _check_shapes(a, b)
    S = min(a.order, b.order)
    ca, cb = a.coeffs[: S + 1], b.coeffs[: S + 1]
    shape = np.broadcast_shapes(ca.shape[1:], cb.shape[1:])
    out = np.zeros((S + 1, *shape), dtype=complex)
    for s in range(S + 1):
        for j in range(s + 1):
            out[s] += ca[j] * cb[s - j]
    return PowerSeries(out)


@dataclass(frozen=True, eq=False)
class VectorFieldSeq:
    """Direction vectors W^(1), ..., W^(S); ``w[j-1]`` defines D_j."""

    g: int
    w: tuple

    def __post_init__(self):
        w = tuple(np.asarray(v, dtype=complex).reshape(self.g) for v in self.w)
        if w and not np.linalg.norm(w[0]) > 0:
            raise ValidationError("W^(1) must be nonzero (D_1 != 0)")
        object.__setattr__(self, "w", w)

    def __len__(self):
        return len(self.w)

    def array(self, order=None) -> np.ndarray:
        """(order, g) array of the directions, zero-padded past the stored ones."""
        order = len(self.w) if order is None else order
        out = np.zeros((order, self.g), dtype=complex)
        k = min(order, len(self.w))
        if k:
            out[:k] = np.array(self.w[:k])
        return out

    def scaled(self, c) -> "VectorFieldSeq":
        return VectorFieldSeq(self.g, tuple(c * v for v in self.w))

    def curve(self, order=None) -> PowerSeries:
        """C(eps) = sum_j W^(j) eps^j as a vector series."""
        order = len(self.w) if order is None else order
        return PowerSeries(np.vstack([np.zeros((1, self.g)), self.array(order)]))


@dataclass(frozen=True)
class WeightedPartition:
    s: int
    multiplicities: tuple
    weight: Fraction

    def __post_init__(self):
        if sum((k + 1) * i for k, i in enumerate(self.multiplicities)) != self.s:
            raise ValidationError("multiplicities violate sum k*i_k = s")


def _partitions(s, largest):
    # partitions of s into parts <= largest, as lists of parts (descending)
    if s == 0:
        yield []
        return
    for p in range(min(s, largest), 0, -1):
        for rest in _partitions(s - p, p):
            yield [p, *rest]


@lru_cache(maxsize=None)
def _weighted(s):
    out = []
    for parts in _partitions(s, s):
        mult = [0] * s
        for p in parts:
            mult[p - 1] += 1
        den = math.prod(math.factorial(i) for i in mult)
        out.append(WeightedPartition(s, tuple(mult), Fraction(1, den)))
    return tuple(out)


def partitions_weighted(s: int) -> list:
    """All (i_1, ..., i_s) with sum k i_k = s, weighted by 1/(i_1! ... i_s!)."""
    if s < 1:
        raise ValidationError("s must be a positive integer")
    if s > MAX_ORDER:
        raise OrderCeilingExceeded(f"s = {s} exceeds ceiling {MAX_ORDER}")
    return list(_weighted(s))


@lru_cache(maxsize=None)
def partition_orders(S: int):
    """Multi-orders (length S) needed for Delta_0..Delta_S plus, per order s,
    the list of (row index, weight, parity) triples assembling Delta_s.

    Parity is sum_k i_k, so Delta_s^- uses the sign (-1)^parity.
    """
    if S > MAX_ORDER:
        raise OrderCeilingExceeded(f"order {S} exceeds ceiling {MAX_ORDER}")
    rows = [(0,) * S]
    recipe = [[(0, 1.0, 0)]]
    for s in range(1, S + 1):
        terms = []
        for p in _weighted(s):
            rows.append(p.multiplicities + (0,) * (S - s))
            terms.append((len(rows) - 1, float(p.weight), sum(p.multiplicities)))
        recipe.append(terms)
    return np.array(rows, dtype=int).reshape(len(rows), S), recipe


def delta_coefficients(jet_values: np.ndarray, S: int, sign: int = 1) -> np.ndarray:
    """Delta_0..Delta_S from a batch of jet values.

    ``jet_values[..., r]`` must hold the derivative for row ``r`` of
    ``partition_orders(S)[0]``.  Returns an array with a trailing axis of
    length S+1.
    """
    _, recipe = partition_orders(S)
    out = np.zeros((*jet_values.shape[:-1], S + 1), dtype=complex)
    for s, terms in enumerate(recipe):
        for row, weight, parity in terms:
            out[..., s] += (weight * (sign**parity)) * jet_values[..., row]
    return out


def delta_apply(s: int, seq: VectorFieldSeq, jet, sign: int = 1) -> complex:
    """Delta_s f (sign=+1) or Delta_s^- f (sign=-1) from a directional jet of f.

    ``jet`` needs ``directions`` starting with W^(1), ..., W^(s) and a
    ``values`` mapping from multi-orders to derivatives.
    """
    if sign not in (1, -1):
        raise ValidationError("sign must be +1 or -1")
    if s == 0:
        key = (0,) * len(jet.directions)
        return complex(jet.values[key])
    if len(jet.directions) < s or len(seq.w) < s:
        raise JetTooShallow(f"Delta_{s} needs {s} directions, jet has {len(jet.directions)}")
    for j in range(s):
        if not np.allclose(jet.directions[j], seq.w[j], rtol=1e-14, atol=1e-300):
            raise ValidationError(f"jet direction {j + 1} does not match W^({j + 1})")
    k = len(jet.directions)
    acc = 0j
    for p in partitions_weighted(s):
        key = p.multiplicities + (0,) * (k - s)
        if key not in jet.values:
            raise JetTooShallow(f"jet lacks multi-order {key}")
        acc += float(p.weight) * sign ** sum(p.multiplicities) * jet.values[key]
    return complex(acc)


def exp_series_oracle(seq: VectorFieldSeq, f: dict, c0, S: int) -> PowerSeries:
    """Taylor coefficients of eps -> f(c0 + C(eps)) by direct polynomial substitution.

    ``f`` maps exponent tuples (length g) to coefficients.  Shares no code
    with the partition machinery.
    """
    if S > MAX_ORDER:
        raise OrderCeilingExceeded(f"order {S} exceeds ceiling {MAX_ORDER}")
    c0 = np.asarray(c0, dtype=complex).reshape(seq.g)
    W = seq.array(S)
    coords = [PowerSeries(np.concatenate([[c0[i]], W[:, i]])) for i in range(seq.g)]
    one = PowerSeries(np.concatenate([[1.0], np.zeros(S)]))
    result = PowerSeries.zeros(S)
    for exps, coef in f.items():
        term = one
        for i, e in enumerate(exps):
            for _ in range(e):
                term = series_mul(term, coords[i])
        result = series_add(result, PowerSeries(coef * term.coeffs))
    return result
