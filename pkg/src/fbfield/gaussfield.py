"""Exact Gaussian machinery over (time, Hurst) grids.

Covariance assembly, Cholesky factorization with a jitter policy, seeded
sampling, Gaussian conditioning, and assembly of the symmetrized field from
two independent samples of the dependent field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from . import kernels as kn
from .errors import DomainError, GridMismatchError, NotPositiveDefiniteError, ToleranceError
from .kernels import KernelId, Tag
from .rng import check_seed, mixed_paths
from .specfun import check_hurst

__all__ = [
    "CovMatrix",
    "Factor",
    "FieldPoint",
    "PathEnsemble",
    "assemble_fbf",
    "build_cov",
    "condition",
    "factorize",
    "grid_points",
    "kernel_block",
    "sample",
]


@dataclass(frozen=True)
class FieldPoint:
    """A coordinate (t, H) of the field; ``parity`` is used only by FIELD_PARITY kernels."""

    t: float
    h: float
    parity: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "h", check_hurst(self.h))
        if self.parity is not None:
            object.__setattr__(self, "parity", kn._check_parity(self.parity))


def grid_points(times: Sequence[float], hursts: Sequence[float]) -> list[FieldPoint]:
    """Cartesian grid ordered H-major: all times for the first H, then the next H."""
    return [FieldPoint(t, h) for h in hursts for t in times]


@dataclass
class CovMatrix:
    points: list[FieldPoint]
    kernel: KernelId
    entries: np.ndarray
    jitter_applied: float = 0.0

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    @property
    def hursts(self) -> np.ndarray:
        return np.array([p.h for p in self.points])


@dataclass
class PathEnsemble:
    """Sampled paths: ``values[p, k]`` is path p at ``grid[k]``."""

    grid: list[FieldPoint]
    kernel: KernelId
    n_paths: int
    values: np.ndarray
    seed: int | None
    method: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float).reshape(self.n_paths, len(self.grid))

    def column(self, t: float, h: float, parity: str | None = None) -> np.ndarray:
        """Values at the first grid point equal to (t, h[, parity])."""
        for k, p in enumerate(self.grid):
            if p.t == t and p.h == h and (parity is None or p.parity == parity):
                return self.values[:, k]
        raise GridMismatchError(f"point ({t}, {h}) is not on the ensemble grid")


def _expand_parity(points: list[FieldPoint], kernel: KernelId) -> list[FieldPoint]:
    if kernel.tag is not Tag.FIELD_PARITY:
        return points
    if all(p.parity is not None for p in points):
        return points
    if any(p.parity is not None for p in points):
        raise DomainError("either every point or no point must carry a parity")
    i, j = kernel.parity
    first = [FieldPoint(p.t, p.h, i) for p in points]
    if i == j:
        return first
    return first + [FieldPoint(p.t, p.h, j) for p in points]


def kernel_block(kernel: KernelId, hp: float, hq: float, tp, tq, par_p=None, par_q=None):
    """Covariance of kernel ``kernel`` between times ``tp`` at index ``hp`` and ``tq`` at ``hq``.

    FBM kernels on unequal indices use the fBm form with exponent H + H'
    (an fBm with index (H + H')/2); this is not a field covariance and
    exists so that a wrong kernel can be checked against data.
    """
    tag = kernel.tag
    if tag is Tag.FBM:
        return kn.fbm_cov((hp + hq) / 2.0, tp, tq)
    if tag is Tag.FBM_ODD:
        return kn.fbm_parity_cov(kn.ODD, (hp + hq) / 2.0, tp, tq)
    if tag is Tag.FBM_EVEN:
        return kn.fbm_parity_cov(kn.EVEN, (hp + hq) / 2.0, tp, tq)
    if tag is Tag.DFBF:
        return kn.dfbf_cov(hp, hq, tp, tq)
    if tag is Tag.FIELD_PARITY:
        return kn.field_parity_cov(par_p, par_q, hp, hq, tp, tq)
    if tag is Tag.FBF:
        return kn.fbf_cov(hp, hq, tp, tq)
    if tag is Tag.WELL_BALANCED:
        return kn.wb_field_cov(hp, hq, tp, tq)
    raise DomainError(f"unsupported kernel {kernel}")


def build_cov(points: Sequence[FieldPoint], kernel: KernelId) -> CovMatrix:
    """Gram matrix of ``kernel`` over ``points``.

    For a FIELD_PARITY kernel with a mixed pair (i, j) and points that carry
    no parity, the grid is doubled: the points tagged i come first, then the
    same points tagged j, giving the joint covariance of both parity parts.
    """
    points = list(points)
    if not points:
        raise DomainError("build_cov needs at least one point")
    if isinstance(kernel, str):
        kernel = KernelId.parse(kernel)
    points = _expand_parity(points, kernel)
    t = np.array([p.t for p in points])
    if kernel.needs_nonnegative_time and np.any(t < 0):
        raise DomainError(f"kernel {kernel} needs nonnegative times")
    n = len(points)
    entries = np.zeros((n, n))
    groups: dict[tuple, list[int]] = {}
    for k, p in enumerate(points):
        groups.setdefault((p.h, p.parity), []).append(k)
    keys = list(groups)
    for a, key_p in enumerate(keys):
        for key_q in keys[a:]:
            ip = np.array(groups[key_p])
            iq = np.array(groups[key_q])
            block = np.asarray(
                kernel_block(
                    kernel, key_p[0], key_q[0], t[ip][:, None], t[iq][None, :], key_p[1], key_q[1]
                )
            )
            entries[np.ix_(ip, iq)] = block
            entries[np.ix_(iq, ip)] = block.T
    # exact symmetry: keep the upper triangle and mirror it
    entries = np.triu(entries) + np.triu(entries, 1).T
    return CovMatrix(points, kernel, entries, 0.0)


@dataclass
class Factor:
    """Cholesky factor of the nonzero part of a covariance matrix.

    ``active`` lists the coordinates with nonzero variance; the remaining
    coordinates (times t = 0) are identically zero.
    """

    lower: np.ndarray
    jitter: float
    active: np.ndarray
    n: int


def factorize(m: CovMatrix | np.ndarray, max_jitter: float | None = None) -> Factor:
    """Cholesky factorization with geometric jitter escalation.

    Tries the bare matrix first, then adds ``1e-12 * maxdiag`` to the
    diagonal, growing by factors of 10 while the jitter stays at or below
    ``max_jitter`` (default ``1e-6 * maxdiag``).  Rows and columns that are
    exactly zero are left out of the factorization.
    """
    entries = m.entries if isinstance(m, CovMatrix) else np.asarray(m, dtype=float)
    n = entries.shape[0]
    if entries.shape != (n, n):
        raise DomainError("covariance matrix must be square")
    if not np.allclose(entries, entries.T, rtol=0, atol=1e-14 * max(1.0, np.abs(entries).max(initial=0))):
        raise DomainError("covariance matrix is not symmetric")
    active = np.flatnonzero(np.any(entries != 0.0, axis=1))
    sub = entries[np.ix_(active, active)]
    if active.size == 0:
        return Factor(np.zeros((0, 0)), 0.0, active, n)
    scale = float(np.max(np.diag(sub)))
    if scale <= 0:
        raise NotPositiveDefiniteError("matrix has a nonpositive diagonal")
    if max_jitter is None:
        max_jitter = 1e-6 * scale
    jitter = 0.0
    eye = np.eye(active.size)
    while True:
        try:
            lower = np.linalg.cholesky(sub + jitter * eye)
            if np.all(np.isfinite(lower)):
                if isinstance(m, CovMatrix):
                    m.jitter_applied = jitter
                return Factor(lower, jitter, active, n)
        except np.linalg.LinAlgError:
            pass
        jitter = 1e-12 * scale if jitter == 0.0 else jitter * 10.0
        if jitter > max_jitter * (1 + 1e-12):
            raise NotPositiveDefiniteError(
                f"Cholesky failed with jitter up to {max_jitter:.3g}; the kernel/grid combination is not positive semidefinite"
            )


def sample(m: CovMatrix, n_paths: int, seed: int, factor: Factor | None = None) -> PathEnsemble:
    """Exact draws of the centered Gaussian vector with covariance ``m``."""
    seed = check_seed(seed)
    if n_paths < 0:
        raise DomainError("n_paths must be nonnegative")
    factor = factor or factorize(m)
    values = np.zeros((n_paths, m.n))
    if n_paths and factor.active.size:
        values[:, factor.active] = mixed_paths(seed, n_paths, factor.lower)
    return PathEnsemble(
        list(m.points),
        m.kernel,
        n_paths,
        values,
        seed,
        "cholesky",
        {"jitter_applied": factor.jitter},
    )


_JITTER_RESID = 1e-4


def condition(gram: CovMatrix | np.ndarray, cross_cov, factor: Factor | None = None) -> np.ndarray:
    """Projection weights w with ``gram @ w = cross_cov``.

    The conditional expectation of the target given the observations is
    ``w @ observed``.  Observations with zero variance get weight 0.  One
    step of iterative refinement is applied and the residual is checked
    against ``1e-8 * |cross_cov|`` plus a capped allowance for jitter.
    """
    entries = gram.entries if isinstance(gram, CovMatrix) else np.asarray(gram, dtype=float)
    c = np.asarray(cross_cov, dtype=float)
    if c.shape != (entries.shape[0],):
        raise GridMismatchError("cross-covariance length does not match the observations")
    factor = factor or factorize(entries)
    act = factor.active
    w = np.zeros_like(c)
    if act.size:
        cf = (factor.lower, True)
        sub = entries[np.ix_(act, act)]
        w_a = linalg.cho_solve(cf, c[act], check_finite=False)
        w_a = w_a + linalg.cho_solve(cf, c[act] - sub @ w_a, check_finite=False)
        w[act] = w_a
    resid = np.linalg.norm(entries @ w - c)
    c_norm = max(np.linalg.norm(c), np.finfo(float).tiny)
    # jitter shifts the fit by about jitter * |w|; a target outside the range
    # of a singular Gram shows up as a residual of order |c| and must fail
    allowed = 1e-8 * c_norm + min(factor.jitter * np.linalg.norm(w), _JITTER_RESID * c_norm)
    if resid > allowed:
        raise ToleranceError(f"conditioning residual {resid:.3g} exceeds tolerance")
    return w


def assemble_fbf(b_paths: PathEnsemble, w_paths: PathEnsemble) -> PathEnsemble:
    """Symmetrized field from two independent samples of the dependent field.

    With B^e(t) = (B(t) + B(-t))/2 and W^o(t) = (W(t) - W(-t))/2,
    Z(t) = B^e(|t|) + sgn(t) W^o(|t|).  Both ensembles must live on the same
    grid, which must contain -t for every t, and come from different seeds.
    """
    if [(p.t, p.h) for p in b_paths.grid] != [(p.t, p.h) for p in w_paths.grid]:
        raise GridMismatchError("the two ensembles are on different grids")
    if b_paths.n_paths != w_paths.n_paths:
        raise GridMismatchError("the two ensembles have different path counts")
    if b_paths.seed is not None and b_paths.seed == w_paths.seed and b_paths.method == w_paths.method:
        raise GridMismatchError("the two ensembles must come from distinct seeds")
    for e in (b_paths, w_paths):
        if e.kernel.tag is not Tag.DFBF:
            raise DomainError("assemble_fbf expects dependent-field ensembles")
    index = {(p.t, p.h): k for k, p in enumerate(b_paths.grid)}
    mirror = []
    for p in b_paths.grid:
        key = (-p.t, p.h)
        if key not in index:
            raise GridMismatchError(f"grid lacks the mirror point ({-p.t}, {p.h})")
        mirror.append(index[key])
    mirror = np.array(mirror)
    b, w = b_paths.values, w_paths.values
    # as functions of signed t, B^e is even and W^o is odd, so Z = B^e + W^o
    values = (b + b[:, mirror]) / 2.0 + (w - w[:, mirror]) / 2.0
    return PathEnsemble(
        list(b_paths.grid),
        KernelId(Tag.FBF),
        b_paths.n_paths,
        values,
        b_paths.seed,
        b_paths.method,
        {"b_seed": b_paths.seed, "w_seed": w_paths.seed, "assembled": True},
    )
