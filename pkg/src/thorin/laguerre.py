"""Tensorized Laguerre basis of L2(R+^d).

The univariate basis functions are ``phi_k(x) = sqrt(2) e^{-x} L_k(2x)``
with ``L_k`` the Laguerre polynomials; the d-variate basis is their
tensor product.  This module evaluates the basis, computes empirical
coefficients from samples, maps ``-1``-shifted moments to coefficients,
and reconstructs truncated densities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from mpmath import mpf

from .numkit import (
    COEFF_DEFAULT,
    MultiIndex,
    PrecisionContext,
    binom_prod,
    box_shape,
    box_size,
    iterate_box,
)

__all__ = [
    "CoeffTensor",
    "phi",
    "empirical_coeffs",
    "coeffs_from_moments",
    "density_eval",
    "density_eval_clamped",
    "l2_norm_sq",
    "phi_univariate",
    "validate_samples",
]

_SQRT2 = math.sqrt(2.0)


@dataclass
class CoeffTensor:
    """Dense tensor of Laguerre coefficients ``a_k`` for ``k <= m``.

    ``a`` has shape ``(m_1+1, ..., m_d+1)``; entries are native floats
    or extended-precision mpf values depending on how the tensor was
    produced.
    """

    m: MultiIndex
    a: np.ndarray

    def __post_init__(self):
        self.m = tuple(int(v) for v in self.m)
        self.a = np.asarray(self.a)
        if self.a.shape != box_shape(self.m):
            raise ValueError(
                f"coefficient array shape {self.a.shape} does not match box {self.m}"
            )
        if self.a.dtype != object and not np.all(np.isfinite(self.a)):
            raise ValueError("coefficient tensor contains non-finite entries")

    @property
    def d(self) -> int:
        return len(self.m)

    def __getitem__(self, k) -> float:
        return self.a[tuple(k)]

    def as_float(self) -> np.ndarray:
        """Coefficients as a float64 array (exact cast of mpf entries)."""
        if self.a.dtype == object:
            return np.array([float(v) for v in self.a.ravel()]).reshape(self.a.shape)
        return self.a.astype(float)

    def to_json(self) -> str:
        return json.dumps(
            {"d": self.d, "m": list(self.m), "a": self.as_float().ravel().tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "CoeffTensor":
        obj = json.loads(text)
        m = tuple(obj["m"])
        a = np.asarray(obj["a"], dtype=float).reshape(box_shape(m))
        return cls(m, a)


def validate_samples(samples) -> np.ndarray:
    """Coerce to an N x d array of finite non-negative observations."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("samples must be an N x d matrix with N >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples contain non-finite entries")
    if np.any(arr < 0):
        i, j = np.argwhere(arr < 0)[0]
        raise ValueError(f"negative sample entry at row {i}, column {j}")
    return arr


def phi_univariate(kmax: int, xs: np.ndarray) -> np.ndarray:
    """Matrix ``phi_k(x)`` for ``k = 0..kmax``, shape ``(kmax+1, len(xs))``.

    Uses the stable three-term recurrence for Laguerre polynomials in the
    variable ``2x``; the defining binomial sum cancels catastrophically
    for large ``k`` and is kept only as a test oracle.
    """
    xs = np.asarray(xs, dtype=float)
    out = np.empty((kmax + 1, xs.size))
    L0 = np.ones(xs.size)
    out[0] = L0
    if kmax >= 1:
        L1 = 1.0 - 2.0 * xs
        out[1] = L1
        for k in range(1, kmax):
            L2 = ((2.0 * k + 1.0 - 2.0 * xs) * L1 - k * L0) / (k + 1.0)
            out[k + 1] = L2
            L0, L1 = L1, L2
    return out * (_SQRT2 * np.exp(-xs))[None, :]


def phi(k: Sequence[int], x) -> float:
    """Basis function ``phi_k(x) = prod_i phi_{k_i}(x_i)`` at one point.

    ``|phi_k(x)| <= sqrt(2)^d`` for every ``x >= 0``.
    """
    k = tuple(int(v) for v in k)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(k) != x.size:
        raise ValueError("index and point must have the same dimension")
    if np.any(x < 0):
        raise ValueError(f"phi domain is x >= 0 componentwise, got {x}")
    out = 1.0
    for ki, xi in zip(k, x):
        out *= phi_univariate(ki, np.array([xi]))[ki, 0]
    return out


def _phi_per_dim(m: MultiIndex, pts: np.ndarray) -> list:
    return [phi_univariate(m[j], pts[:, j]) for j in range(len(m))]


def empirical_coeffs(samples, m: Sequence[int]) -> CoeffTensor:
    """Monte-Carlo coefficients ``a_k = mean_i phi_k(X_i)`` over the box.

    Summation is compensated (Kahan accumulation over sample chunks), so
    the only remaining error is the sampling one.
    """
    arr = validate_samples(samples)
    m = tuple(int(v) for v in m)
    d = len(m)
    if arr.shape[1] != d:
        raise ValueError(f"samples have dimension {arr.shape[1]}, box has {d}")
    shape = box_shape(m)
    total = np.zeros(shape)
    comp = np.zeros(shape)  # Kahan compensation carry
    N = arr.shape[0]
    step = 8192
    for lo in range(0, N, step):
        pts = arr[lo : lo + step]
        mats = _phi_per_dim(m, pts)
        chunk = mats[0]
        for j in range(1, d):
            chunk = chunk[..., None, :] * mats[j]
        chunk = chunk.sum(axis=-1)
        y = chunk - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return CoeffTensor(m, total / N)


@lru_cache(maxsize=64)
def _moment_matrix(m: MultiIndex) -> np.ndarray:
    """Dense transform from shifted moments to coefficients (float64).

    ``M[k, l] = C(k, l) (-2)^{|l|} / l!`` for ``l <= k``, indexed by the
    C-order raveling of the box.
    """
    B = box_size(m)
    shape = box_shape(m)
    M = np.zeros((B, B))
    for k in iterate_box(m):
        kpos = np.ravel_multi_index(k, shape)
        for l in iterate_box(k):
            c = binom_prod(k, l) * (-2.0) ** sum(l)
            for li in l:
                c /= math.factorial(li)
            M[kpos, np.ravel_multi_index(l, shape)] = c
    return M


def coeffs_from_moments(mu, m: Sequence[int] = None, ctx: PrecisionContext = None) -> CoeffTensor:
    """Coefficients from ``-1``-shifted moments over the full box:

    ``a_k = sqrt(2)^d sum_{l <= k} C(k,l) (-2)^{|l|} / l! mu_l``.

    ``mu`` is a dense array over the box (float or mpf entries); mpf
    input keeps extended precision in the output.
    """
    mu = np.asarray(mu)
    if m is None:
        m = tuple(s - 1 for s in mu.shape)
    m = tuple(int(v) for v in m)
    if mu.shape != box_shape(m):
        raise ValueError(f"moment tensor shape {mu.shape} does not match box {m}")
    d = len(m)
    if mu.dtype == object:
        ctx = ctx or COEFF_DEFAULT
        with ctx.workprec():
            scale = mpf(2) ** (mpf(d) / 2)
            out = np.empty(box_shape(m), dtype=object)
            for k in iterate_box(m):
                acc = mpf(0)
                for l in iterate_box(k):
                    c = mpf(binom_prod(k, l)) * mpf(-2) ** sum(l)
                    for li in l:
                        c /= math.factorial(li)
                    acc += c * mu[l]
                out[k] = scale * acc
        return CoeffTensor(m, out)
    M = _moment_matrix(m)
    flat = M @ mu.astype(float).ravel()
    return CoeffTensor(m, 2.0 ** (d / 2.0) * flat.reshape(box_shape(m)))


def density_eval(coeffs: CoeffTensor, x) -> float:
    """Truncated reconstruction ``sum_{k <= m} a_k phi_k(x)`` at a point.

    The value may be negative (truncation artifact); it is returned raw.
    """
    return _density_eval_many(coeffs, np.atleast_2d(np.asarray(x, dtype=float)))[0]


def density_eval_clamped(coeffs: CoeffTensor, x) -> float:
    """Reconstruction clamped to ``max(., 0)`` for plotting paths."""
    return max(density_eval(coeffs, x), 0.0)


def density_grid(coeffs: CoeffTensor, pts) -> np.ndarray:
    """Vectorized raw reconstruction on an ``N x d`` array of points."""
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return _density_eval_many(coeffs, pts)


def _density_eval_many(coeffs: CoeffTensor, pts: np.ndarray) -> np.ndarray:
    if pts.shape[1] != coeffs.d:
        raise ValueError("point dimension does not match the coefficient tensor")
    if np.any(pts < 0):
        raise ValueError("density is supported on the non-negative orthant")
    mats = _phi_per_dim(coeffs.m, pts)
    R = coeffs.as_float()
    # contract one index at a time, carrying the sample axis
    R = np.tensordot(R, mats[0], axes=([0], [0]))
    for j in range(1, coeffs.d):
        R = np.einsum("a...n,an->...n", R, mats[j])
    return np.atleast_1d(R)


def l2_norm_sq(coeffs: CoeffTensor) -> float:
    """Squared L2 norm of the truncated expansion, ``sum_k a_k^2``."""
    flat = coeffs.as_float().ravel()
    return float(flat @ flat)
