"""Monte Carlo discretization of the moving-average integrals.

A path at time t with index H is approximated by

    sum_j f_{t,H}(x_j) dW_j / norm_H

over cells of width h covering a truncated domain, with one white-noise
realization shared by every requested (t, H).  This validates the closed-form
covariances from an independent direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, InsufficientPathsError, SchemeError
from .gaussfield import FieldPoint, PathEnsemble, kernel_block
from .kernels import MA_KINDS, KernelId, Tag
from .rng import check_seed, mixed_paths
from .specfun import coef_c, coef_d

__all__ = [
    "CovCheck",
    "MAScheme",
    "VerifyReport",
    "default_scheme",
    "estimate_cov",
    "ma_cov",
    "ma_sample",
    "ma_weights",
    "truncation_tails",
    "verify_against",
]

# Number of paths generated per block when forming Z @ A.T
# Distinct stream id so moving-average noise never coincides with Cholesky draws of the same seed
_MA_STREAM = 1


@dataclass(frozen=True)
class MAScheme:
    """Truncation cutoff ``L``, mesh ``h`` and kernel kind of the discretization.

    The integration domain is ``[min(0, min t) - L, max(0, max t)]`` for the
    nonanticipating kernel; the two-sided kernels also extend ``L`` to the
    right of ``max(0, max t)``.  ``L`` and every time must be integer
    multiples of ``h`` so that the kernel singularities sit on cell edges.
    """

    L: float = 100.0
    h: float = 1.0 / 512.0
    kind: str = "nonanticipating"

    def __post_init__(self) -> None:
        if self.kind not in MA_KINDS:
            raise SchemeError(f"kind must be one of {MA_KINDS}")
        if not (self.L > 0 and self.h > 0):
            raise SchemeError("L and h must be positive")
        if self.h >= self.L:
            raise SchemeError("mesh must be smaller than the cutoff")
        _multiple(self.L, self.h, "L")

    @property
    def kernel_id(self) -> KernelId:
        return KernelId(Tag.DFBF if self.kind == "nonanticipating" else Tag.WELL_BALANCED)

    def domain(self, times) -> tuple[float, float]:
        times = np.asarray(times, dtype=float)
        lo = min(0.0, float(times.min())) - self.L
        hi = max(0.0, float(times.max()))
        if self.kind != "nonanticipating":
            hi += self.L
        return lo, hi


def default_scheme(times, kind: str = "nonanticipating") -> MAScheme:
    """Cutoff 100 max|t| and mesh max|t|/512."""
    span = float(np.max(np.abs(times)))
    if span == 0:
        span = 1.0
    return MAScheme(100.0 * span, span / 512.0, kind)


def _multiple(x: float, h: float, what: str) -> int:
    k = round(x / h)
    if abs(k * h - x) > 1e-9 * max(1.0, abs(x)):
        raise SchemeError(f"{what} = {x} is not a multiple of the mesh {h}")
    return int(k)


def _as_points(grid, h) -> list[FieldPoint]:
    grid = list(grid)
    if grid and isinstance(grid[0], FieldPoint):
        if h is not None:
            raise DomainError("give either FieldPoints or times with Hurst indices, not both")
        return grid
    if np.ndim(h) == 0:
        return [FieldPoint(t, h) for t in grid]
    h = list(h)
    if len(h) != len(grid):
        raise DomainError("per-time Hurst list must match the grid length")
    return [FieldPoint(t, hh) for t, hh in zip(grid, h)]


def _point_kind(kind: str, hh: float) -> str:
    # the two-sided family switches to the log kernel at H = 1/2
    if kind == "well_balanced" and hh == 0.5:
        return "log"
    if kind == "log" and hh != 0.5:
        raise SchemeError("the log kernel needs H = 1/2")
    return kind


def _norm(kind: str, hh: float) -> float:
    return coef_c(hh) if kind == "nonanticipating" else coef_d(hh)


def _kernel_values(kind: str, a: float, t: float, x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "nonanticipating":
            u, v = t - x, -x
            return np.where(u > 0, np.abs(u) ** a, 0.0) - np.where(v > 0, np.abs(v) ** a, 0.0)
        if kind == "well_balanced":
            return np.abs(t - x) ** a - np.abs(x) ** a
        return np.log(np.abs(x)) - np.log(np.abs(t - x))


def _antiderivative(kind: str, a: float, c: float, x: np.ndarray) -> np.ndarray:
    # antiderivative in x of the single term attached to the point c
    d = x - c
    if kind == "nonanticipating":  # (c - x)_+^a
        return -np.where(d < 0, np.abs(d) ** (a + 1.0), 0.0) / (a + 1.0)
    if kind == "well_balanced":  # |c - x|^a
        return np.sign(d) * np.abs(d) ** (a + 1.0) / (a + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):  # log|x - c|
        return np.where(d == 0, 0.0, d * np.log(np.abs(np.where(d == 0, 1.0, d)))) - x


def _cell_average(kind: str, a: float, t: float, x0: np.ndarray, x1: np.ndarray) -> np.ndarray:
    def integral(c):
        return _antiderivative(kind, a, c, x1) - _antiderivative(kind, a, c, x0)

    if kind == "log":  # log|x| - log|t - x|
        total = integral(0.0) - integral(t)
    else:  # term at t minus term at 0
        total = integral(t) - integral(0.0)
    return total / (x1 - x0)


def ma_weights(points: Sequence[FieldPoint], scheme: MAScheme) -> tuple[np.ndarray, tuple[float, float]]:
    """Weight matrix A with path values ``Z @ A.T`` for standard normal Z (one row per point).

    Midpoint kernel values times sqrt(h) over the normalization constant;
    cells touching a singular point of a kernel with H < 1/2 (or the log
    kernel) use the exact cell average instead.
    """
    times = np.array([p.t for p in points])
    for t in times:
        _multiple(t, scheme.h, "time")
    lo, hi = scheme.domain(times)
    n_cells = _multiple(hi - lo, scheme.h, "domain length")
    edges = lo + scheme.h * np.arange(n_cells + 1)
    x0, x1 = edges[:-1], edges[1:]
    mid = (x0 + x1) / 2.0
    a_mat = np.zeros((len(points), n_cells))
    for k, p in enumerate(points):
        if p.t == 0.0:
            continue
        kind = _point_kind(scheme.kind, p.h)
        a = p.h - 0.5
        row = _kernel_values(kind, a, p.t, mid)
        if kind == "log" or a < 0:
            near = np.zeros(n_cells, dtype=bool)
            for c in (0.0, p.t):
                j = int(round((c - lo) / scheme.h))
                near[max(j - 1, 0) : min(j + 1, n_cells)] = True
            row[near] = _cell_average(kind, a, p.t, x0[near], x1[near])
        a_mat[k] = row * math.sqrt(scheme.h) / _norm(kind, p.h)
    return a_mat, (lo, hi)


def ma_cov(points: Sequence[FieldPoint], scheme: MAScheme) -> np.ndarray:
    """Exact covariance of the discretized scheme (no sampling error)."""
    a_mat, _ = ma_weights(points, scheme)
    return a_mat @ a_mat.T


def _tail_integrand(kind: str, a: float, t: float, side: str):
    # squared kernel beyond the truncated domain, written without cancellation
    if side == "left":  # x = -u, u > 0 large
        if kind == "log":
            return lambda u: math.log1p(t / u) ** 2
        return lambda u: (u**a * math.expm1(a * math.log1p(t / u))) ** 2
    if kind == "log":  # x = u > 0 large
        return lambda u: math.log1p(-t / u) ** 2
    return lambda u: (u**a * math.expm1(a * math.log1p(-t / u))) ** 2


def truncation_tails(points: Sequence[FieldPoint], scheme: MAScheme) -> np.ndarray:
    """Normalized squared-kernel mass outside the domain, one value per point.

    The covariance bias of entry (p, q) is bounded by ``sqrt(T_p T_q)``
    (Cauchy-Schwarz).
    """
    times = np.array([p.t for p in points])
    lo, hi = scheme.domain(times)
    out = np.zeros(len(points))
    for k, p in enumerate(points):
        kind = _point_kind(scheme.kind, p.h)
        a = p.h - 0.5
        if p.t == 0.0 or (kind == "nonanticipating" and a == 0.0):
            continue
        total = integrate.quad(_tail_integrand(kind, a, p.t, "left"), -lo, np.inf, limit=200)[0]
        if kind != "nonanticipating":
            total += integrate.quad(_tail_integrand(kind, a, p.t, "right"), hi, np.inf, limit=200)[0]
        out[k] = total / _norm(kind, p.h) ** 2
    return out


def ma_sample(grid, h, scheme: MAScheme, n_paths: int, seed: int) -> PathEnsemble:
    """Moving-average ensemble over all requested (t, H) from one shared noise.

    ``grid`` is a list of times with ``h`` a scalar or per-time list, or a
    list of :class:`FieldPoint` with ``h=None``.
    """
    seed = check_seed(seed)
    points = _as_points(grid, h)
    if not points:
        raise DomainError("ma_sample needs at least one point")
    if scheme.kind == "log" and any(p.h != 0.5 for p in points):
        raise SchemeError("the log kernel needs H = 1/2")
    a_mat, (lo, hi) = ma_weights(points, scheme)
    values = mixed_paths(seed, n_paths, a_mat, stream=_MA_STREAM)
    meta = {
        "L": scheme.L,
        "mesh": scheme.h,
        "kind": scheme.kind,
        "domain": (lo, hi),
        "truncation_tails": truncation_tails(points, scheme),
    }
    return PathEnsemble(points, scheme.kernel_id, n_paths, values, seed, "moving_average", meta)


def estimate_cov(e: PathEnsemble, i: int, j: int) -> tuple[float, float]:
    """Covariance estimate of the centered field at grid points i and j, with standard error.

    The field is known to be centered, so the estimate is the mean of the
    products and its standard error uses their sample variance (a
    fourth-moment estimate).
    """
    if e.n_paths < 2:
        raise InsufficientPathsError("at least two paths are needed")
    d = e.values[:, i] * e.values[:, j]
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(e.n_paths))


@dataclass
class CovCheck:
    i: int
    j: int
    point_i: FieldPoint
    point_j: FieldPoint
    estimate: float
    std_error: float
    closed_form: float
    budget: float
    passed: bool

    @property
    def z_score(self) -> float:
        return (self.estimate - self.closed_form) / self.std_error if self.std_error > 0 else 0.0


@dataclass
class VerifyReport:
    kernel: KernelId
    tolerance_sigmas: float
    checks: list[CovCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def n_failed(self) -> int:
        return sum(not c.passed for c in self.checks)


def verify_against(
    kernel: KernelId | str,
    e: PathEnsemble,
    tolerance_sigmas: float = 4.0,
    pairs: Sequence[tuple[int, int]] | None = None,
) -> VerifyReport:
    """Compare every empirical covariance with the closed form.

    An entry passes when ``|estimate - closed| <= tolerance_sigmas * SE +
    budget``, with the truncation budget ``sqrt(T_i T_j)`` taken from the
    ensemble metadata (zero for exact samples).
    """
    if isinstance(kernel, str):
        kernel = KernelId.parse(kernel)
    n = len(e.grid)
    if pairs is None:
        pairs = [(i, j) for i in range(n) for j in range(i, n)]
    tails = e.meta.get("truncation_tails")
    report = VerifyReport(kernel, tolerance_sigmas)
    for i, j in pairs:
        p, q = e.grid[i], e.grid[j]
        est, se = estimate_cov(e, i, j)
        closed = float(kernel_block(kernel, p.h, q.h, p.t, q.t, p.parity, q.parity))
        budget = math.sqrt(tails[i] * tails[j]) if tails is not None else 0.0
        ok = abs(est - closed) <= tolerance_sigmas * se + budget
        report.checks.append(CovCheck(i, j, p, q, est, se, closed, budget, bool(ok)))
    return report
