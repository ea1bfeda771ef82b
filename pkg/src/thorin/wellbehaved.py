"""Diagnostics on the Thorin measure.

A model with total shape mass above one is well-behaved when no
majority subset of its atoms (a subset carrying strictly more than half
of the mass) is rank-deficient, and the unique solutions of the
corresponding linear systems keep the Moebius-transformed singularities
outside the unit polydisc.  The margin by which they stay outside is the
best epsilon reported here; it controls how fast Laguerre coefficients
can decay.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import mpmath
import numpy as np

from .ggc import GgcModel
from .laguerre import CoeffTensor

__all__ = [
    "WbReport",
    "DependenceReport",
    "HalfPlaneImage",
    "mobius_h",
    "disc_image",
    "is_eps_wb",
    "best_eps",
    "classify_dependence",
    "decay_check",
    "SUBSET_ENUMERATION_CAP",
]

SUBSET_ENUMERATION_CAP = 22

_RAY_TOL = 1e-9


@dataclass
class WbReport:
    """Outcome of the well-behavedness analysis.

    ``best_eps`` is the supremum of admissible margins (0 when the model
    is not well-behaved, possibly ``inf``); ``witness`` describes the
    violating atom subset or ray set, if any.  ``undecided`` is set when
    the atom count exceeds the subset-enumeration cap.
    """

    is_wb: bool
    best_eps: float
    total_mass: float
    witness: Optional[str] = None
    undecided: bool = False

    def to_dict(self) -> dict:
        return {
            "is_wb": self.is_wb,
            "best_eps": self.best_eps if math.isfinite(self.best_eps) else "inf",
            "total_mass": self.total_mass,
            "witness": self.witness,
            "undecided": self.undecided,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class DependenceReport:
    kind: str  # independent | comonotonic | general
    ray_count: int
    singular: bool


class HalfPlaneImage(ValueError):
    """Signals the degenerate disc image: the unit disc maps to a half-plane."""


def mobius_h(t) -> complex:
    """The involution ``h(t) = (t + 1) / (t - 1)``; pole at ``t = 1``."""
    t = complex(t)
    if t == 1:
        raise ValueError("mobius_h has a pole at t = 1")
    return (t + 1) / (t - 1)


def _h_modulus(t: complex) -> float:
    if t == 1:
        return math.inf
    return abs(mobius_h(t))


def disc_image(b: float) -> Tuple[float, float]:
    """Center and radius of the image (or complement image) of the disc
    ``D(0, b)`` under ``h``: ``c(b) = (b^2+1)/(b^2-1)``,
    ``r(b) = |2b/(b^2-1)|``.

    For ``b < 1`` the image disc lies in the left half-plane; for
    ``b > 1`` the disc is the complement image and lies in the right
    half-plane.  ``b = 1`` maps to a half-plane and is signalled by
    :class:`HalfPlaneImage`.
    """
    b = float(b)
    if b <= 0:
        raise ValueError("radius must be positive")
    if b == 1.0:
        raise HalfPlaneImage("the unit disc maps onto the left half-plane")
    den = b * b - 1.0
    return (b * b + 1.0) / den, abs(2.0 * b / den)


# ---------------------------------------------------------------------------
# majority-subset machinery


def _subset_masses(alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-bitmask total mass and minimum member mass, chunked to bound
    memory for n up to the enumeration cap."""
    n = alpha.size
    size = 1 << n
    bits = np.arange(n)
    S = np.empty(size)
    Mn = np.empty(size)
    chunk = 1 << 18
    for lo in range(0, size, chunk):
        masks = np.arange(lo, min(lo + chunk, size), dtype=np.int64)
        member = (masks[:, None] >> bits[None, :]) & 1 == 1
        sel = np.where(member, alpha[None, :], 0.0)
        S[lo : lo + masks.size] = sel.sum(axis=1)
        Mn[lo : lo + masks.size] = np.where(member, alpha[None, :], np.inf).min(axis=1)
    return S, Mn


def _minimal_majority_masks(alpha: np.ndarray) -> np.ndarray:
    """Bitmasks of minimal majority subsets: strictly more than half the
    mass, and no single member removable without losing the majority."""
    total = alpha.sum()
    S, Mn = _subset_masses(alpha)
    majority = 2.0 * S > total
    minimal = 2.0 * (S - Mn) <= total
    masks = np.nonzero(majority & minimal)[0]
    return masks[masks > 0]


def _mask_indices(mask: int, n: int) -> Tuple[int, ...]:
    return tuple(i for i in range(n) if (mask >> i) & 1)


def _relative_residual(rows: np.ndarray, t: np.ndarray) -> float:
    """Largest per-equation residual of ``rows @ t = 1``, each measured
    against its own cancellation scale ``1 + sum_j |r_ij t_j|``."""
    resid = np.abs(rows @ t - 1.0)
    scale = 1.0 + np.abs(rows) @ np.abs(t)
    return float((resid / scale).max())


def _mp_rank_and_solve(rows: np.ndarray):
    """128-bit least-squares classification for near-degenerate subsets."""
    with mpmath.workprec(128):
        A = mpmath.matrix(rows.tolist())
        U, Ssv, V = mpmath.svd_r(A)
        smax = max(Ssv[i] for i in range(Ssv.rows)) or mpmath.mpf(1)
        rank = sum(1 for i in range(Ssv.rows) if Ssv[i] > smax * mpmath.mpf("1e-20"))
        if rank < rows.shape[1]:
            return rank, None, None
        one = mpmath.matrix([[1.0]] * rows.shape[0])
        t = mpmath.lu_solve(A.T * A, A.T * one)
        t = np.array([float(t[i]) for i in range(t.rows)])
        return rank, t, _relative_residual(rows, t)


def _subset_geometry(rows: np.ndarray):
    """(rank_ok, t_star or None) for one atom subset.

    ``rank_ok`` is False when the subset's rows do not span the full
    space; ``t_star`` is the unique solution of ``rows @ t = 1`` when the
    system is consistent, else None.  Cleanly conditioned cases run in
    doubles; the gray zone escalates to 128-bit arithmetic.
    """
    d = rows.shape[1]
    sv = np.linalg.svd(rows, compute_uv=False)
    smax = sv[0] if sv[0] > 0 else 1.0
    smin = sv[-1] if sv.size >= d else 0.0
    if smin <= smax * 1e-13:
        if smin > smax * 1e-30:  # gray zone: re-decide at high precision
            rank, t, res = _mp_rank_and_solve(rows)
            if rank < d:
                return False, None
            return True, (t if res <= 1e-9 else None)
        return False, None
    t, *_ = np.linalg.lstsq(rows, np.ones(rows.shape[0]), rcond=None)
    res = _relative_residual(rows, t)
    if res > 1e-6:
        return True, None
    if res > 1e-12:  # ambiguous consistency: re-check tightly
        rank, t_mp, res_mp = _mp_rank_and_solve(rows)
        if rank < d:
            return False, None
        return True, (t_mp if res_mp <= 1e-9 else None)
    return True, t


def _subset_eps(t_star: np.ndarray) -> float:
    """Margin implied by one singular point: ``max_j |h(t_j)| - 1``."""
    return max(_h_modulus(complex(tj)) for tj in t_star) - 1.0


def _interval_eps_1d(scales: np.ndarray) -> float:
    """Univariate margin: every scale must satisfy
    ``eps/(2+eps) < s < (2+eps)/eps``, i.e. ``eps < |h(s)| - 1``."""
    return min(_h_modulus(complex(s)) for s in scales.ravel()) - 1.0


def _best_eps_general(model: GgcModel, include_atoms: bool) -> Tuple[float, Optional[str]]:
    """Supremum margin via subset enumeration.

    Every minimal majority subset is examined (supersets inherit their
    constraints).  With ``include_atoms`` each single atom is examined as
    well, which in one dimension accounts for the poles every atom
    contributes regardless of its mass.
    """
    n = model.n
    masks = [int(m) for m in _minimal_majority_masks(model.alpha)]
    if include_atoms:
        masks = sorted(set(masks) | {1 << i for i in range(n)})
    best = math.inf
    witness = None
    seen = {}
    for mask in masks:
        idx = _mask_indices(mask, n)
        rows = model.scales[list(idx)]
        if model.d == 1:
            # consistent iff the subset shares one scale; the solution is
            # its reciprocal
            t_star = np.array([1.0 / rows[0, 0]]) if np.unique(rows).size == 1 else None
        else:
            key = tuple(sorted(map(tuple, rows.tolist())))
            if key not in seen:
                seen[key] = _subset_geometry(rows)
            rank_ok, t_star = seen[key]
            if not rank_ok:
                # every enumerated subset in d >= 2 carries the majority,
                # so a deficient one settles the matter
                return 0.0, f"rank-deficient majority subset {idx}"
        if t_star is None:
            continue
        eps = _subset_eps(t_star)
        if eps < best:
            best = eps
            witness = f"subset {idx}"
    return best, (witness if math.isfinite(best) else None)


def best_eps(model: GgcModel) -> WbReport:
    """Supremum of margins for which the model passes the subset test.

    Zero means not well-behaved; ``inf`` means no majority subset
    produces a bounded singular point.  Atom counts above
    ``SUBSET_ENUMERATION_CAP`` return an undecided report.
    """
    total = model.total_mass
    if total <= 1.0:
        return WbReport(False, 0.0, total, witness="total shape mass <= 1")
    if model.d == 1:
        eps = _interval_eps_1d(model.scales)
        return WbReport(eps > 0, eps, total)
    if model.n > SUBSET_ENUMERATION_CAP:
        return WbReport(
            False, 0.0, total,
            witness=f"undecided: n > {SUBSET_ENUMERATION_CAP}", undecided=True,
        )
    eps, witness = _best_eps_general(model, include_atoms=False)
    return WbReport(eps > 0, eps, total, witness=witness if eps == 0.0 else None)


def is_eps_wb(model: GgcModel, eps: float) -> WbReport:
    """Whether the model passes the subset test at the given margin.

    ``is_wb`` holds iff the total mass exceeds one and ``eps`` lies
    strictly below the supremum margin.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rep = best_eps(model)
    verdict = (not rep.undecided) and rep.total_mass > 1.0 and eps < rep.best_eps
    witness = rep.witness
    if not verdict and witness is None and not rep.undecided:
        witness = f"margin {eps} >= best {rep.best_eps}"
    return WbReport(verdict, rep.best_eps, rep.total_mass, witness, rep.undecided)


# ---------------------------------------------------------------------------
# dependence structure


def _ray_classes(scales: np.ndarray) -> np.ndarray:
    """Label rows by the ray they span (unit 1-norm representative,
    relative tolerance 1e-9: floating optimizers never produce exactly
    collinear rows)."""
    rays = scales / scales.sum(axis=1, keepdims=True)
    labels = -np.ones(scales.shape[0], dtype=int)
    reps = []
    for i, r in enumerate(rays):
        for j, rep in enumerate(reps):
            if np.abs(r - rep).max() <= _RAY_TOL * (1.0 + np.abs(rep).max()):
                labels[i] = j
                break
        else:
            labels[i] = len(reps)
            reps.append(r)
    return labels


def classify_dependence(model: GgcModel) -> DependenceReport:
    """Structure read off the support of the Thorin measure.

    Independent: every atom loads exactly one margin.  Comonotonic: all
    atoms share one ray.  ``ray_count`` below the dimension flags a
    singular distribution.
    """
    labels = _ray_classes(model.scales)
    D = int(labels.max()) + 1
    singular = D < model.d
    if np.all((model.scales > 0).sum(axis=1) == 1):
        kind = "independent"
    elif D == 1:
        kind = "comonotonic"
    else:
        kind = "general"
    return DependenceReport(kind, D, singular)


# ---------------------------------------------------------------------------
# coefficient decay


def decay_check(coeffs: CoeffTensor, eps_prime: float) -> Tuple[float, bool]:
    """Empirical fit of the decay envelope ``|a_k| <= B (1+eps')^{-|k|}``.

    ``B_fit`` is the largest normalized magnitude
    ``|a_k| (1+eps')^{|k|}``.  The check passes when that maximum is
    attained at small ``|k|``: past total degree 2, the per-degree maxima
    may not rise more than a factor 10 above the early ones.
    """
    if not eps_prime > 0:
        raise ValueError("eps_prime must be positive")
    a = np.abs(coeffs.as_float())
    degsum = np.zeros(a.shape, dtype=int)
    for axis, size in enumerate(a.shape):
        shape = [1] * a.ndim
        shape[axis] = size
        degsum = degsum + np.arange(size).reshape(shape)
    levels = int(degsum.max())
    g = np.zeros(levels + 1)
    norm = a * (1.0 + eps_prime) ** degsum
    for lvl in range(levels + 1):
        sel = norm[degsum == lvl]
        if sel.size:
            g[lvl] = sel.max()
    B_fit = float(g.max())
    base = g[: min(3, g.size)].max()
    tail = g[3:].max() if g.size > 3 else 0.0
    ok = bool(tail <= 10.0 * base) if base > 0 else bool(tail == 0.0)
    return B_fit, ok
