"""Convolutions of multivariate gamma distributions.

A model is parametrized by ``n`` shapes ``alpha`` and an ``n x d``
non-negative scale matrix ``s``; row ``s_i`` is the atom of the Thorin
measure ``nu = sum_i alpha_i delta_{s_i}`` and the cumulant generating
function is ``K(t) = -sum_i alpha_i ln(1 - <s_i, t>)``.  Equivalently
``X = s' Z`` for independent unit-scale gamma variables ``Z_i``.

The module provides the cgf, the ``-1``-shifted cumulant and moment
tensors, the recursive computation of Laguerre coefficients, exact
closed forms for the single-atom case (including its inversion), gamma
series baselines and sampling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Tuple

import mpmath
import numpy as np
from mpmath import mpf

from .laguerre import CoeffTensor
from .numkit import (
    COEFF_DEFAULT,
    DOUBLE,
    MultiIndex,
    PrecisionContext,
    binom_prod,
    box_shape,
    iterate_box,
    lambert_w0,
    log_gamma,
)

__all__ = [
    "GgcModel",
    "ShiftedTensors",
    "ModelCoeffs",
    "cgf",
    "simplex_scales",
    "shifted_cumulants",
    "cumulants_to_moments",
    "model_coeffs",
    "gd1_coeffs",
    "gd1_invert",
    "sample",
    "moschopoulos_density",
    "marginal",
    "linear_combination",
    "concatenate",
]


@dataclass
class GgcModel:
    """Shapes ``alpha`` (n positive reals) and scale matrix ``scales``
    (n x d, non-negative, every row carrying at least one positive
    entry)."""

    alpha: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        self.scales = np.asarray(self.scales, dtype=float)
        if self.scales.ndim == 1:
            self.scales = self.scales[:, None]
        if self.alpha.ndim != 1 or self.scales.ndim != 2:
            raise ValueError("alpha must be a vector and scales a matrix")
        if self.alpha.shape[0] != self.scales.shape[0]:
            raise ValueError("alpha and scales must have the same number of atoms")
        if self.n < 1 or self.d < 1:
            raise ValueError("model needs n >= 1 atoms in dimension d >= 1")
        if not np.all(np.isfinite(self.alpha)) or np.any(self.alpha <= 0):
            raise ValueError("shapes must be finite and strictly positive")
        if not np.all(np.isfinite(self.scales)) or np.any(self.scales < 0):
            raise ValueError("scales must be finite and non-negative")
        if np.any(self.scales.sum(axis=1) <= 0):
            raise ValueError("every scale row needs at least one positive entry")

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def d(self) -> int:
        return self.scales.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.alpha.sum())

    def mean(self) -> np.ndarray:
        return self.alpha @ self.scales

    def to_json(self) -> str:
        return json.dumps(
            {"alpha": self.alpha.tolist(), "scales": self.scales.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "GgcModel":
        obj = json.loads(text)
        return cls(np.asarray(obj["alpha"]), np.asarray(obj["scales"]))


@dataclass
class ShiftedTensors:
    """Tensors of ``-1``-shifted cumulants and moments over a box,
    with ``mu_0 = exp(kappa_0)`` exactly at working precision."""

    m: MultiIndex
    kappa: np.ndarray
    mu: np.ndarray


@dataclass
class ModelCoeffs:
    """Result of the coefficient recursion: the Laguerre tensor, the
    shifted cumulant/moment side products and the precision used."""

    coeffs: CoeffTensor
    shifted: ShiftedTensors
    bits_used: int


def cgf(model: GgcModel, t) -> complex:
    """Cumulant generating function ``K(t) = -sum_i alpha_i ln(1 - <s_i, t>)``.

    ``t`` may be real or complex; each ``1 - <s_i, t>`` must stay off the
    branch cut of the logarithm.
    """
    t = np.atleast_1d(np.asarray(t, dtype=complex))
    if t.size != model.d:
        raise ValueError(f"t must have dimension {model.d}")
    z = 1.0 - model.scales @ t
    on_axis = np.abs(z.imag) == 0.0
    if np.any(on_axis & (z.real <= 0.0)):
        raise ValueError("cgf undefined: some <s_i, t> >= 1 on the real axis")
    val = -(model.alpha @ np.log(z))
    return float(val.real) if np.all(np.abs(t.imag) == 0.0) else complex(val)


def simplex_scales(model: GgcModel) -> np.ndarray:
    """Rows mapped into the open unit simplex, ``x_i = s_i / (1 + |s_i|)``."""
    row_sum = model.scales.sum(axis=1, keepdims=True)
    return model.scales / (1.0 + row_sum)


@lru_cache(maxsize=64)
def _recursion_plan(m: MultiIndex):
    """Index machinery for the in-box recursions.

    For each non-zero k (graded order): its flat position, the flat
    positions of the sub-box ``l <= p`` (p = k lowered in its first
    non-zero coordinate), the positions of ``k - l`` and the binomial
    weights ``C(p, l)``.
    """
    shape = box_shape(m)
    d = len(m)
    order = []
    for k in iterate_box(m):
        kpos = int(np.ravel_multi_index(k, shape))
        if sum(k) == 0:
            order.append((k, kpos, None, None, None))
            continue
        first = next(j for j in range(d) if k[j] > 0)
        p = list(k)
        p[first] -= 1
        p = tuple(p)
        l_idx, kl_idx, w = [], [], []
        for l in iterate_box(p):
            l_idx.append(int(np.ravel_multi_index(l, shape)))
            kl_idx.append(
                int(np.ravel_multi_index(tuple(a - b for a, b in zip(k, l)), shape))
            )
            w.append(float(binom_prod(p, l)))
        order.append(
            (k, kpos, np.asarray(l_idx), np.asarray(kl_idx), np.asarray(w))
        )
    return tuple(order)


def shifted_cumulants(
    model: GgcModel, m: Sequence[int], ctx: PrecisionContext = COEFF_DEFAULT
) -> np.ndarray:
    """Tensor of ``-1``-shifted cumulants over the box ``k <= m``.

    ``kappa_0 = sum_i alpha_i ln(1 - |x_i|)`` and, for ``k != 0``,
    ``kappa_k = (|k| - 1)! sum_i alpha_i x_i^k`` with ``x`` the simplex
    scales.  ``kappa_0`` is evaluated from the raw scales as
    ``-sum_i alpha_i log1p(|s_i|)`` to avoid cancellation for tiny rows.
    """
    m = tuple(int(v) for v in m)
    with ctx.workprec():
        out = np.empty(box_shape(m), dtype=object)
        srows = [[mpf(v) for v in row] for row in model.scales]
        row_sums = [sum(r) for r in srows]
        x = [[v / (1 + rs) for v in r] for r, rs in zip(srows, row_sums)]
        al = [mpf(v) for v in model.alpha]
        k0 = -sum(a * mpmath.log1p(rs) for a, rs in zip(al, row_sums))
        for k in iterate_box(m):
            if sum(k) == 0:
                out[k] = k0
                continue
            acc = mpf(0)
            for a, xi in zip(al, x):
                term = a
                for j, kj in enumerate(k):
                    if kj:
                        term *= xi[j] ** kj
                acc += term
            out[k] = mpf(math.factorial(sum(k) - 1)) * acc
    return out


def cumulants_to_moments(
    kappa: np.ndarray, m: Sequence[int] = None, ctx: PrecisionContext = COEFF_DEFAULT
) -> np.ndarray:
    """Shifted moments from shifted cumulants by the exp-derivative
    recursion: ``mu_0 = exp(kappa_0)`` and

    ``mu_k = sum_{l <= p} mu_l kappa_{k-l} C(p, l)``,

    where ``p`` is ``k`` lowered by one in its first non-zero coordinate.
    The result equals the Taylor coefficients of ``exp o K``.
    """
    kappa = np.asarray(kappa)
    if m is None:
        m = tuple(s - 1 for s in kappa.shape)
    m = tuple(int(v) for v in m)
    if kappa.shape != box_shape(m):
        raise ValueError("cumulant tensor does not cover the box")
    plan = _recursion_plan(m)
    kf = kappa.ravel()
    obj = kappa.dtype == object
    with ctx.workprec():
        mu = np.empty(kf.shape, dtype=object if obj else float)
        for k, kpos, l_idx, kl_idx, w in plan:
            if l_idx is None:
                mu[kpos] = mpmath.exp(kf[kpos]) if obj else math.exp(kf[kpos])
                continue
            if obj:
                acc = mpf(0)
                for lp, klp, wi in zip(l_idx, kl_idx, w):
                    acc += mu[lp] * kf[klp] * mpf(wi)
                mu[kpos] = acc
            else:
                mu[kpos] = float(np.dot(mu[l_idx] * w, kf[kl_idx]))
    return mu.reshape(kappa.shape)


def model_coeffs(
    model: GgcModel, m: Sequence[int], ctx: PrecisionContext = COEFF_DEFAULT
) -> ModelCoeffs:
    """Laguerre coefficients of the model over the box ``k <= m``.

    One fused pass computes ``kappa_k``, ``mu_k`` and the coefficient

    ``a_k = sqrt(2)^d sum_{l <= k} C(k,l) (-2)^{|l|} / l!  mu_l``

    in extended precision.  The pass restarts with doubled precision
    whenever an intermediate magnitude exceeds ``2^(bits/2)``, so the
    returned values are always finite and accurate; the final precision
    is reported.
    """
    m = tuple(int(v) for v in m)
    bits = ctx.bits
    while True:
        result = _model_coeffs_at(model, m, bits)
        if result is not None:
            coeffs, shifted = result
            return ModelCoeffs(coeffs, shifted, bits)
        bits *= 2


def _model_coeffs_at(model: GgcModel, m: MultiIndex, bits: int):
    ctx = PrecisionContext(bits)
    shape = box_shape(m)
    d = len(m)
    plan = _recursion_plan(m)
    limit = mpf(2) ** (bits // 2)
    with ctx.workprec():
        kap = shifted_cumulants(model, m, ctx).ravel()
        if any(abs(v) > limit for v in kap):
            return None
        mu = np.empty(kap.shape, dtype=object)
        a = np.empty(kap.shape, dtype=object)
        scale = mpf(2) ** (mpf(d) / 2)
        # coefficient weights c_l = (-2)^{|l|} / l!, shared across k
        cw = np.empty(kap.shape, dtype=object)
        for l in iterate_box(m):
            c = mpf(-2) ** sum(l)
            for li in l:
                c /= math.factorial(li)
            cw[np.ravel_multi_index(l, shape)] = c
        for k, kpos, l_idx, kl_idx, w in plan:
            if l_idx is None:
                mu[kpos] = mpmath.exp(kap[kpos])
                a[kpos] = scale * mu[kpos]
                continue
            acc = mpf(0)
            for lp, klp, wi in zip(l_idx, kl_idx, w):
                acc += mu[lp] * kap[klp] * mpf(wi)
            mu[kpos] = acc
            if abs(acc) > limit:
                return None
            coef = mpf(0)
            for l in iterate_box(k):
                lp = np.ravel_multi_index(l, shape)
                coef += mpf(binom_prod(k, l)) * cw[lp] * mu[lp]
            a[kpos] = scale * coef
        shifted = ShiftedTensors(m, kap.reshape(shape), mu.reshape(shape))
        return CoeffTensor(m, a.reshape(shape)), shifted


def gd1_coeffs(
    alpha: float, s: Sequence[float], m: Sequence[int], ctx: PrecisionContext = DOUBLE
) -> CoeffTensor:
    """Closed-form coefficients of the single-atom model:

    ``a_k = sqrt(2)^d sum_{l <= k} C(k,l) (-2s)^l / l!
    Gamma(alpha + |l|) / Gamma(alpha) (1 + |s|)^{-alpha - |l|}``.
    """
    if alpha <= 0:
        raise ValueError("shape must be positive")
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < 0) or s.sum() == 0:
        raise ValueError("scale vector must be non-negative and non-zero")
    m = tuple(int(v) for v in m)
    d = len(m)
    if s.size != d:
        raise ValueError("scale vector dimension must match the box")
    S = float(s.sum())
    lg_alpha = log_gamma(alpha, ctx)
    out = np.zeros(box_shape(m))
    for k in iterate_box(m):
        acc = 0.0
        for l in iterate_box(k):
            L = sum(l)
            t = binom_prod(k, l) * math.exp(
                float(log_gamma(alpha + L, ctx)) - float(lg_alpha) - (alpha + L) * math.log1p(S)
            )
            for li, si in zip(l, s):
                t *= (-2.0 * si) ** li / math.factorial(li)
            acc += t
        out[k] = 2.0 ** (d / 2.0) * acc
    return CoeffTensor(m, out)


def gd1_invert(a0: float, a1: Sequence[float]) -> Tuple[float, np.ndarray]:
    """Recover ``(alpha, s)`` of a single-atom model from its first
    ``d + 1`` coefficients ``a_0`` and ``a_{e_1}, ..., a_{e_d}``.

    With ``c1 = a_0 sqrt(2)^{-d}`` and
    ``c2 = d/2 - sum_i a_{e_i} / (2 a_0)``, the shape solves
    ``alpha = 1/c2 - W0((ln c1 / c2) e^{ln c1 / c2}) / ln c1``; the ratios
    ``(a_0 - a_{e_i}) / (2 alpha a_0)`` are the simplex scales, inverted
    back to raw scales.  A safeguarded Newton polish removes the
    conditioning loss of the Lambert step near its branch point.
    """
    a1 = np.atleast_1d(np.asarray(a1, dtype=float))
    d = a1.size
    if not a0 > 0:
        raise ValueError("inversion failure: a_0 must be positive")
    c1 = a0 * 2.0 ** (-d / 2.0)
    c2 = d / 2.0 - a1.sum() / (2.0 * a0)
    if not (0.0 < c1 < 1.0) or not c2 > 0 or not np.isfinite(c2):
        raise ValueError("inversion failure: coefficients outside the model image")
    lc = math.log(c1)
    z = lc / c2
    w = float(lambert_w0(z * math.exp(z)))
    alpha = 1.0 / c2 - w / lc
    if not np.isfinite(alpha) or alpha <= 0:
        raise ValueError("inversion failure: non-finite shape")
    # polish the defining relation ln(1 - v)/v = ln(c1)/c2 in v = c2/alpha
    R = z
    v = min(max(c2 / alpha, 1e-300), 1.0 - 1e-16)
    lo, hi = 1e-300, 1.0 - 1e-16
    for _ in range(200):
        f = math.log1p(-v) / v - R
        if f > 0:
            lo = v
        else:
            hi = v
        df = (-v / (1.0 - v) - math.log1p(-v)) / (v * v)
        vn = v - f / df
        v = vn if lo < vn < hi else 0.5 * (lo + hi)
        if hi - lo < 4e-16 * v:
            break
    alpha = c2 / v
    x = (a0 - a1) / (2.0 * alpha * a0)
    if np.any(x < -1e-12) or x.sum() >= 1.0:
        raise ValueError("inversion failure: simplex scales outside the unit simplex")
    x = np.maximum(x, 0.0)
    s = x / (1.0 - x.sum())
    return float(alpha), s


def sample(model: GgcModel, N: int, seed: int) -> np.ndarray:
    """``N`` i.i.d. draws of ``X = s' Z`` with ``Z_i ~ Gamma(alpha_i, 1)``
    independent; deterministic given the seed.  Returns an N x d matrix.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    Z = rng.gamma(model.alpha, 1.0, size=(int(N), model.n))
    return Z @ model.scales


def moschopoulos_density(
    alpha: Sequence[float], s: Sequence[float], x, terms: int = 200
) -> np.ndarray:
    """Classical univariate gamma-series density, anchored on the
    smallest scale ``s_1``:

    ``f(x) = sum_k delta_k gammapdf(x; |alpha| + k, s_1)``,

    with the series normalizer ``prod_i (s_1/s_i)^{alpha_i}`` folded into
    the recursive weights ``delta_k``.  Deliberately evaluated in native
    doubles: when ``s_1`` is tiny the partial sums underflow to zero,
    which is the documented instability this series is kept to exhibit.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if terms < 1:
        raise ValueError("terms must be >= 1")
    if alpha.shape != s.shape or alpha.ndim != 1:
        raise ValueError("alpha and s must be equal-length vectors")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise ValueError("density is supported on x >= 0")
    s1 = s.min()
    rho = alpha.sum()
    C = np.prod((s1 / s) ** alpha)
    gam = np.array(
        [alpha @ (1.0 - s1 / s) ** k / k for k in range(1, terms + 1)]
    )
    delta = np.zeros(terms)
    delta[0] = 1.0
    for k in range(1, terms):
        delta[k] = np.dot(np.arange(1, k + 1) * gam[:k], delta[k - 1 :: -1]) / k
    out = np.zeros_like(x)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        for k in range(terms):
            shape = rho + k
            logpdf = (
                (shape - 1.0) * np.log(x, where=x > 0, out=np.full_like(x, -np.inf))
                - x / s1
                - math.lgamma(shape)
                - shape * math.log(s1)
            )
            out += delta[k] * np.exp(logpdf)
    out = C * out
    return out if out.size > 1 else float(out[0])


def marginal(model: GgcModel, j: int) -> GgcModel:
    """The ``j``-th marginal (1-based), a univariate model on column
    ``j`` of the scales with zero-scale atoms dropped."""
    if not 1 <= j <= model.d:
        raise IndexError(f"marginal index must be in 1..{model.d}, got {j}")
    col = model.scales[:, j - 1]
    keep = col > 0
    return GgcModel(model.alpha[keep], col[keep, None])


def linear_combination(model: GgcModel, c: Sequence[float]) -> GgcModel:
    """Distribution of ``<c, X>`` for ``c >= 0``, ``c != 0``: a univariate
    model with scales ``s c`` (zero atoms dropped)."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.size != model.d:
        raise ValueError("weight vector dimension mismatch")
    if np.any(c < 0) or c.sum() == 0:
        raise ValueError("weights must be non-negative and not all zero")
    proj = model.scales @ c
    keep = proj > 0
    return GgcModel(model.alpha[keep], proj[keep, None])


def concatenate(a: GgcModel, b: GgcModel) -> GgcModel:
    """Model of the independent sum: atoms of both operands side by side."""
    if a.d != b.d:
        raise ValueError("operands must share the dimension")
    return GgcModel(
        np.concatenate([a.alpha, b.alpha]), np.vstack([a.scales, b.scales])
    )
