"""Foundational numerics: configurable extended-precision arithmetic,
special functions and multi-index iteration shared by the other modules.

Extended precision is a runtime parameter carried by a
:class:`PrecisionContext`.  All heavy coefficient work defaults to 256
bits; Monte-Carlo paths run in native doubles where sampling noise
dominates rounding.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence, Tuple

import mpmath
from mpmath import mpf

MultiIndex = Tuple[int, ...]

__all__ = [
    "PrecisionContext",
    "DOUBLE",
    "COEFF_DEFAULT",
    "MultiIndex",
    "iterate_box",
    "box_shape",
    "box_size",
    "binom_prod",
    "lambert_w0",
    "log_gamma",
]


@dataclass(frozen=True)
class PrecisionContext:
    """Significand precision (in bits) of the working real type.

    Arithmetic performed under a context is reproducible given
    ``(bits, round-to-nearest)``; ``bits=53`` reproduces IEEE doubles
    bit for bit on the basic operations.
    """

    bits: int = 53

    def __post_init__(self):
        if self.bits < 53:
            raise ValueError(f"precision must be at least 53 bits, got {self.bits}")

    def workprec(self):
        """mpmath context manager setting this precision."""
        return mpmath.workprec(self.bits)

    def mpf(self, x) -> mpf:
        """Convert ``x`` to an mpmath float at this precision."""
        with mpmath.workprec(self.bits):
            return mpf(x)

    @property
    def eps(self) -> mpf:
        return mpf(2) ** (1 - self.bits)

    @property
    def digits(self) -> int:
        """Approximate decimal digits carried by this precision."""
        return int(self.bits * 0.3010299956639812)


DOUBLE = PrecisionContext(53)
COEFF_DEFAULT = PrecisionContext(256)


def _validate_index(k: Sequence[int]) -> MultiIndex:
    k = tuple(int(v) for v in k)
    if any(v < 0 for v in k):
        raise ValueError(f"multi-index must be componentwise >= 0, got {k}")
    return k


@lru_cache(maxsize=256)
def _box_cache(m: MultiIndex) -> Tuple[MultiIndex, ...]:
    ranges = [range(mi + 1) for mi in m]
    idx = list(itertools.product(*ranges))
    # graded colexicographic: primary |k|, colex tie break.  Any graded
    # order extends the componentwise partial order, which the moment
    # recursion requires.
    idx.sort(key=lambda k: (sum(k), tuple(reversed(k))))
    return tuple(idx)


def iterate_box(m: Sequence[int]) -> Iterator[MultiIndex]:
    """Yield every multi-index ``k <= m`` exactly once, in graded
    colexicographic order.

    Every ``k`` appears after all ``k' < k`` (componentwise), so values
    computed along the iteration may depend on previously visited
    indices.
    """
    return iter(_box_cache(_validate_index(m)))


def box_shape(m: Sequence[int]) -> Tuple[int, ...]:
    return tuple(mi + 1 for mi in _validate_index(m))


def box_size(m: Sequence[int]) -> int:
    return math.prod(box_shape(m))


def binom_prod(x: Sequence[int], y: Sequence[int]) -> int:
    """Product of componentwise binomial coefficients ``prod C(x_i, y_i)``.

    Zero whenever some ``y_i > x_i``.
    """
    if len(x) != len(y):
        raise ValueError("multi-indices must have the same length")
    out = 1
    for a, b in zip(x, y):
        if b > a:
            return 0
        out *= math.comb(a, b)
    return out


_INV_E = -0.3678794411714423216


def _w0_seed(x: float) -> float:
    # series near the branch point, else log asymptotics / rational fit
    if x < -0.25:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    if x < 2.0:
        # w e^w = x  =>  w ~ x(1 - x + 1.5x^2) for small x; fine as a seed
        return x * (1.0 - x + 1.5 * x * x) if abs(x) < 0.5 else 0.5 * math.log1p(x)
    l1 = math.log(x)
    l2 = math.log(l1)
    return l1 - l2 + l2 / l1


def lambert_w0(x, ctx: PrecisionContext = DOUBLE):
    """Principal branch of the Lambert W function, ``w e^w = x``.

    Halley iteration from a series/asymptotic seed; converges cubically
    to ulp-level residual at the context precision.  Domain ``x >= -1/e``.
    Returns a float for the 53-bit context, an mpf otherwise.
    """
    xf = float(x)
    if xf < _INV_E and not math.isclose(xf, _INV_E, rel_tol=4e-16):
        raise ValueError(f"lambert_w0 domain is x >= -1/e, got {x}")
    if xf == 0.0:
        return 0.0 if ctx.bits == 53 else ctx.mpf(0)
    with ctx.workprec():
        w = mpf(_w0_seed(xf))
        xm = mpf(x)
        if xm < mpf(-1) / mpmath.e:
            xm = mpf(-1) / mpmath.e  # clip rounding spill below the branch point
        tol = mpf(2) ** (2 - ctx.bits)
        for _ in range(120):
            ew = mpmath.exp(w)
            f = w * ew - xm
            if f == 0:
                break
            wp1 = w + 1
            # Halley step
            dw = f / (ew * wp1 - (w + 2) * f / (2 * wp1))
            w -= dw
            if abs(dw) <= tol * (1 + abs(w)):
                ew = mpmath.exp(w)
                dw = (w * ew - xm) / (ew * (w + 1))
                w -= dw  # final Newton polish
                break
        if w < -1:
            w = mpf(-1)
        return float(w) if ctx.bits == 53 else w


def log_gamma(x, ctx: PrecisionContext = DOUBLE):
    """``ln Gamma(x)`` for ``x > 0`` at the context precision."""
    if float(x) <= 0.0:
        raise ValueError(f"log_gamma domain is x > 0, got {x}")
    if ctx.bits == 53:
        return math.lgamma(float(x))
    with ctx.workprec():
        return mpmath.loggamma(ctx.mpf(x))
