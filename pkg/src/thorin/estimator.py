"""Truncated L2 loss between Laguerre coefficient tensors and its global
minimization by particle swarm.

Two modes: estimation from samples (empirical coefficients) and
projection from a formal density (coefficients from high-precision
shifted moments).  The search runs in an unconstrained parameterization:
log-space for the shapes and simplex-logit space for each scale row (the
logs of the row's simplex coordinates and of the residual), so every
particle decodes to a valid model without clamping.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import mpmath
import numpy as np
from mpmath import mpf

from . import ggc
from .ggc import GgcModel, _recursion_plan
from .laguerre import CoeffTensor, coeffs_from_moments, empirical_coeffs, validate_samples, _moment_matrix
from .numkit import COEFF_DEFAULT, PrecisionContext, box_shape, box_size
from .wellbehaved import best_eps

__all__ = [
    "FitConfig",
    "FitReport",
    "QuadratureError",
    "default_box",
    "loss_Lm",
    "fit_empirical",
    "project_density",
    "theoretical_moments",
]

# constriction-style swarm constants
_INERTIA = 0.72
_COGNITIVE = 1.49
_SOCIAL = 1.49
_STALL_ITERS = 200
_STALL_RTOL = 1e-12
_LOGSHAPE_RANGE = (math.log(1e-2), math.log(1e2))
_SMAG_RANGE = (math.log(1e-3), math.log(1e3))
_LOGIT_RANGE = (-18.0, 0.0)
_NATIVE_LOSS_DEGREE = 25  # above this total degree the report loss is re-done in mp
_ZERO_SCALE_TOL = 1e-10


def default_box(n: int, d: int) -> Tuple[int, ...]:
    """Default truncation: 2n+1 univariate basis functions (max degree
    2n), or max degree n per axis in higher dimension."""
    return (2 * n,) if d == 1 else (n,) * d


@dataclass
class FitConfig:
    """Search configuration.

    ``m`` defaults per :func:`default_box`; ``swarm_size`` defaults to 20
    particles per free parameter.  ``param_floor`` is the smallest shape
    a decoded particle may carry.
    """

    n: int
    m: Optional[Tuple[int, ...]] = None
    swarm_size: Optional[int] = None
    max_iters: int = 2000
    seed: int = 0
    precision_bits: int = 256
    restarts: int = 3
    param_floor: float = 1e-12

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.m is not None:
            self.m = tuple(int(v) for v in self.m)
            if any(v < 0 for v in self.m):
                raise ValueError("m must be componentwise >= 0")
        if self.swarm_size is not None and self.swarm_size < 10:
            raise ValueError("swarm_size must be >= 10")
        if self.max_iters < 1 or self.restarts < 1:
            raise ValueError("max_iters and restarts must be >= 1")
        if not self.param_floor > 0:
            raise ValueError("param_floor must be positive")

    def resolved(self, d: int) -> "FitConfig":
        m = self.m if self.m is not None else default_box(self.n, d)
        swarm = self.swarm_size or 20 * self.n * (d + 2)
        return FitConfig(
            self.n, m, swarm, self.max_iters, self.seed,
            self.precision_bits, self.restarts, self.param_floor,
        )


@dataclass
class FitReport:
    """Fitted model with its final loss, well-behavedness report and the
    bookkeeping needed to reproduce the run bit for bit."""

    model: GgcModel
    loss: float
    wb: "object"
    m: Tuple[int, ...]
    n: int
    seed: int
    iters: int
    restarts_used: int
    bits_used: int
    converged: bool
    empirical_coeffs_hash: str
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        from . import __version__

        return {
            "model": {"alpha": self.model.alpha.tolist(), "scales": self.model.scales.tolist()},
            "loss": self.loss,
            "wb": self.wb.to_dict(),
            "m": list(self.m),
            "n": self.n,
            "seed": self.seed,
            "iters": self.iters,
            "restarts_used": self.restarts_used,
            "bits_used": self.bits_used,
            "converged": self.converged,
            "empirical_coeffs_hash": self.empirical_coeffs_hash,
            "notes": list(self.notes),
            "tool_version": __version__,
        }


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance; the
    achieved relative tolerance is carried along."""

    def __init__(self, message: str, achieved_tol: float):
        super().__init__(message)
        self.achieved_tol = achieved_tol


# ---------------------------------------------------------------------------
# fast batched coefficient evaluation (native doubles, inf-guarded)


def _batch_coeffs(alpha: np.ndarray, x: np.ndarray, m: Tuple[int, ...]) -> np.ndarray:
    """Coefficient tensors for P particles at once: ``alpha`` is P x n,
    ``x`` is P x n x d (simplex scales).  Returns P x B flat tensors in
    the C-order raveling of the box."""
    P, n, d = x.shape
    shape = box_shape(m)
    B = box_size(m)
    plan = _recursion_plan(m)
    karr = np.zeros((B, d), dtype=int)
    facts = np.ones(B)
    for k, kpos, *_ in plan:
        karr[kpos] = k
        if sum(k) > 0:
            facts[kpos] = math.factorial(sum(k) - 1)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        pw = [
            x[:, :, j][:, :, None] ** np.arange(m[j] + 1)[None, None, :]
            for j in range(d)
        ]
        zpow = pw[0][:, :, karr[:, 0]]
        for j in range(1, d):
            zpow = zpow * pw[j][:, :, karr[:, j]]
        kap = facts[None, :] * np.einsum("pnb,pn->pb", zpow, alpha)
        absx = x.sum(axis=2)
        kap[:, np.ravel_multi_index((0,) * d, shape)] = (
            alpha * np.log1p(-absx)
        ).sum(axis=1)
        mu = np.zeros((P, B))
        for k, kpos, l_idx, kl_idx, w in plan:
            if l_idx is None:
                mu[:, kpos] = np.exp(kap[:, kpos])
                continue
            mu[:, kpos] = np.einsum("pl,pl,l->p", mu[:, l_idx], kap[:, kl_idx], w)
        a = 2.0 ** (d / 2.0) * (mu @ _moment_matrix(m).T)
    return a


def _decode(params: np.ndarray, n: int, d: int, floor: float):
    """Particle positions to (shapes, simplex scales).

    The residual logit is kept within exp(-28) of the row maximum so the
    simplex sum stays strictly below one in doubles; this bounds the
    searchable scale magnitudes near 1e12, the scale-side analog of the
    shape floor.
    """
    P = params.shape[0]
    alpha = np.maximum(np.exp(np.minimum(params[:, :n], 50.0)), floor)
    z = params[:, n:].reshape(P, n, d + 1)
    z = z - z.max(axis=2, keepdims=True)
    z[:, :, d] = np.maximum(z[:, :, d], -28.0)
    ez = np.exp(z)
    sm = ez / ez.sum(axis=2, keepdims=True)
    return alpha, sm[:, :, :d]


def _x_to_scales(x_row: np.ndarray) -> np.ndarray:
    return x_row / (1.0 - x_row.sum(axis=-1, keepdims=True))


def _clamp_zero_scales(scales: np.ndarray) -> np.ndarray:
    """Entries indistinguishable from zero are snapped to zero, never
    touching a row's largest entry."""
    out = scales.copy()
    tiny = out < _ZERO_SCALE_TOL
    keep = np.zeros_like(tiny)
    keep[np.arange(out.shape[0]), out.argmax(axis=1)] = True
    out[tiny & ~keep] = 0.0
    return out


def loss_Lm(
    target: CoeffTensor,
    model: GgcModel,
    m: Sequence[int] = None,
    ctx: PrecisionContext = COEFF_DEFAULT,
) -> float:
    """Truncated squared coefficient distance
    ``sum_{k <= m} (target_k - a_k(model))^2``.

    Evaluated in native doubles for shallow boxes; deeper tensors go
    through the extended-precision recursion before the (double) sum.
    """
    m = tuple(int(v) for v in (m if m is not None else target.m))
    if m != target.m:
        raise ValueError("target box does not match m")
    if sum(m) <= _NATIVE_LOSS_DEGREE:
        x = ggc.simplex_scales(model)
        a = _batch_coeffs(model.alpha[None, :], x[None, :, :], m)[0]
        diff = a - target.as_float().ravel()
    else:
        a = ggc.model_coeffs(model, m, ctx).coeffs.as_float().ravel()
        diff = a - target.as_float().ravel()
    return float(diff @ diff)


# ---------------------------------------------------------------------------
# particle swarm


def _init_particles(rng, swarm: int, n: int, d: int):
    pos = np.empty((swarm, n * (d + 2)))
    pos[:, :n] = rng.uniform(*_LOGSHAPE_RANGE, size=(swarm, n))
    ray = rng.dirichlet(np.ones(d), size=(swarm, n))
    smag = np.exp(rng.uniform(*_SMAG_RANGE, size=(swarm, n)))
    xmag = smag / (1.0 + smag)
    simplex = np.concatenate(
        [ray * xmag[:, :, None], (1.0 - xmag)[:, :, None]], axis=2
    )
    pos[:, n:] = np.log(np.maximum(simplex, 1e-300)).reshape(swarm, -1)
    return pos


def _pso_once(target_flat, n, d, m, cfg: FitConfig, rng):
    swarm = cfg.swarm_size
    npar = n * (d + 2)
    lo = np.full(npar, _LOGSHAPE_RANGE[0])
    hi = np.full(npar, _LOGSHAPE_RANGE[1])
    lo[n:], hi[n:] = _LOGIT_RANGE
    vmax = 0.5 * (hi - lo)

    def losses(p):
        alpha, x = _decode(p, n, d, cfg.param_floor)
        a = _batch_coeffs(alpha, x, m)
        with np.errstate(invalid="ignore", over="ignore"):
            val = ((a - target_flat[None, :]) ** 2).sum(axis=1)
        return np.where(np.isfinite(val), val, np.inf)

    pos = _init_particles(rng, swarm, n, d)
    vel = rng.uniform(-1.0, 1.0, size=(swarm, npar)) * (0.1 * vmax)[None, :]
    pbest = pos.copy()
    pbl = losses(pos)
    gi = int(np.argmin(pbl))
    gbest, gbl = pbest[gi].copy(), float(pbl[gi])
    stall, last = 0, gbl
    it = 0
    for it in range(1, cfg.max_iters + 1):
        r1 = rng.random((swarm, npar))
        r2 = rng.random((swarm, npar))
        vel = (
            _INERTIA * vel
            + _COGNITIVE * r1 * (pbest - pos)
            + _SOCIAL * r2 * (gbest[None, :] - pos)
        )
        np.clip(vel, -vmax, vmax, out=vel)
        pos = pos + vel
        cur = losses(pos)
        upd = cur < pbl
        pbest[upd] = pos[upd]
        pbl[upd] = cur[upd]
        gi = int(np.argmin(pbl))
        if pbl[gi] < gbl:
            gbl = float(pbl[gi])
            gbest = pbest[gi].copy()
        if last - gbl <= _STALL_RTOL * max(abs(gbl), 1e-300):
            stall += 1
        else:
            stall = 0
        last = gbl
        if stall >= _STALL_ITERS:
            return gbest, gbl, it, True
    return gbest, gbl, it, False


def _run_swarm(target: CoeffTensor, d: int, cfg: FitConfig, hash_text: str) -> FitReport:
    cfg = cfg.resolved(d)
    target_flat = target.as_float().ravel()
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    best = None
    iters_total = 0
    for r, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        gpos, gloss, iters, converged = _pso_once(target_flat, cfg.n, d, cfg.m, cfg, rng)
        iters_total += iters
        if best is None or gloss < best[1]:
            best = (gpos, gloss, converged)
    gpos, _, converged = best
    alpha, x = _decode(gpos[None, :], cfg.n, d, cfg.param_floor)
    scales = _clamp_zero_scales(_x_to_scales(x[0]))
    model = GgcModel(alpha[0], scales)
    loss = loss_Lm(target, model, cfg.m, PrecisionContext(cfg.precision_bits))
    return FitReport(
        model=model,
        loss=loss,
        wb=best_eps(model),
        m=cfg.m,
        n=cfg.n,
        seed=cfg.seed,
        iters=iters_total,
        restarts_used=cfg.restarts,
        bits_used=cfg.precision_bits,
        converged=converged,
        empirical_coeffs_hash=hash_text,
    )


def _digest(arr: np.ndarray, m) -> str:
    h = hashlib.sha256()
    h.update(repr(tuple(m)).encode())
    h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    return h.hexdigest()


def fit_empirical(samples, cfg: FitConfig) -> FitReport:
    """Fit a model to observations by minimizing the truncated
    coefficient distance to the empirical Laguerre coefficients.

    Deterministic given ``(samples, cfg)``.  Non-convergence of the swarm
    is not an error: the best particle is returned with
    ``converged=False``.
    """
    arr = validate_samples(samples)
    d = arr.shape[1]
    rcfg = cfg.resolved(d)
    target = empirical_coeffs(arr, rcfg.m)
    return _run_swarm(target, d, rcfg, _digest(target.a, rcfg.m))


def project_density(moment_source, cfg: FitConfig, d: int = None) -> FitReport:
    """Same optimization as :func:`fit_empirical`, with the target
    coefficients computed from theoretical ``-1``-shifted moments
    (a dense tensor over the box, mpf or float entries)."""
    mu = np.asarray(moment_source)
    if d is None:
        d = mu.ndim
    rcfg = cfg.resolved(d)
    if mu.shape != box_shape(rcfg.m):
        raise ValueError(f"moment tensor shape {mu.shape} does not cover box {rcfg.m}")
    target = coeffs_from_moments(mu, rcfg.m, PrecisionContext(rcfg.precision_bits))
    target = CoeffTensor(rcfg.m, target.as_float())
    return _run_swarm(target, d, rcfg, _digest(target.a, rcfg.m))


def theoretical_moments(
    density: Callable, m: Sequence[int], ctx: PrecisionContext = COEFF_DEFAULT
) -> np.ndarray:
    """Shifted moments ``mu_k = int x^k e^{-|x|} f(x) dx`` over the box,
    by adaptive quadrature at the context precision.

    ``density`` maps ``d`` scalar arguments (mpf) to the density value;
    supported for ``d <= 2``.  The relative tolerance target is
    ``10^(-bits/8)``; failure raises :class:`QuadratureError` carrying
    the achieved tolerance.
    """
    m = tuple(int(v) for v in m)
    d = len(m)
    if d > 2:
        raise ValueError("quadrature mode supports d <= 2")
    tol = mpf(10) ** (-(ctx.bits // 8))
    out = np.empty(box_shape(m), dtype=object)
    with ctx.workprec():
        split = [0, 1, 10, mpmath.inf]
        for k in np.ndindex(*box_shape(m)):
            if d == 1:
                f = lambda x, _k=k: x ** _k[0] * mpmath.exp(-x) * density(x)
                val, err = mpmath.quad(f, split, error=True, maxdegree=10)
            else:
                f = (
                    lambda x, y, _k=k: x ** _k[0]
                    * y ** _k[1]
                    * mpmath.exp(-x - y)
                    * density(x, y)
                )
                val, err = mpmath.quad(f, split, split, error=True, maxdegree=7)
            scale = abs(val) if val != 0 else mpf(1)
            if err > tol * scale:
                raise QuadratureError(
                    f"moment quadrature at k={k} reached relative tolerance "
                    f"{mpmath.nstr(err / scale, 5)} (requested {mpmath.nstr(tol, 5)})",
                    float(err / scale),
                )
            out[k] = val
    return out
