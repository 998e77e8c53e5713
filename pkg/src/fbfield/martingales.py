"""Fundamental martingales of the odd and even parts of fBm.

For a dual pair H' = 1 - H the martingale is the conditional expectation of
B^i_{H'}(t) given the path of B^i_H up to t.  Two routes are provided:

``projection``  exact Gaussian projection onto the grid observations up to t;
``stieltjes``   Riemann-Stieltjes sums of the explicit kernels against B^i_H.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, GridMismatchError, SingularityError
from .gaussfield import CovMatrix, FieldPoint, Factor, PathEnsemble, condition, factorize
from .kernels import EVEN, ODD, KernelId, Tag, _check_parity, fbm_parity_cov, field_parity_cov
from .specfun import check_hurst, coef_alpha, gamma_real

__all__ = [
    "AuditReport",
    "MartingaleSpec",
    "build_martingale",
    "dyadic_grid",
    "l2_gap",
    "mart_kernel_even",
    "mart_kernel_odd",
    "martingale_audit",
    "parity_gram",
    "projection_weights",
    "stieltjes_weights",
    "uniform_grid",
]

METHODS = ("projection", "stieltjes")


@dataclass(frozen=True)
class MartingaleSpec:
    h: float
    parity: str
    grid: tuple
    method: str = "projection"

    def __post_init__(self) -> None:
        object.__setattr__(self, "h", check_hurst(self.h))
        object.__setattr__(self, "parity", _check_parity(self.parity))
        grid = tuple(float(t) for t in self.grid)
        if not grid:
            raise DomainError("martingale grid is empty")
        if grid[0] <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError("martingale grid must be strictly increasing and positive")
        object.__setattr__(self, "grid", grid)
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}")
        if self.method == "stieltjes" and self.parity == EVEN and self.h > 0.5:
            raise DomainError("the even-part kernel is not available for H > 1/2; use projection")

    @property
    def h_dual(self) -> float:
        return 1.0 - self.h

    @property
    def times(self) -> np.ndarray:
        return np.array(self.grid)

    @property
    def kernel_id(self) -> KernelId:
        return KernelId(Tag.FBM_ODD if self.parity == ODD else Tag.FBM_EVEN)


def uniform_grid(n: int, t_max: float = 1.0) -> tuple:
    """n equispaced points t_max/n, 2 t_max/n, ..., t_max."""
    return tuple(t_max * np.arange(1, n + 1) / n)


def dyadic_grid(n: int = 64, per_octave: int = 6, t_max: float = 1.0) -> tuple:
    """Geometric grid with ``per_octave`` points per factor 2, ending at ``t_max``.

    Every dyadic time t_max 2^-k with k below n / per_octave is a grid point.
    """
    k = np.arange(n - 1, -1, -1)
    return tuple(t_max * 2.0 ** (-k / per_octave))


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def mart_kernel_odd(h: float, t: float, s):
    """(sqrt(pi) alpha_H / Gamma(1-H)) (t^2 - s^2)^(1/2 - H) for 0 <= s < t; 1 at H = 1/2."""
    h = check_hurst(h)
    t = float(t)
    s = np.asarray(s, dtype=float)
    if t <= 0 or np.any(s < 0) or np.any(s > t):
        raise DomainError("need 0 <= s <= t and t > 0")
    if h == 0.5:
        return _scalar(np.ones_like(s))
    if h > 0.5 and np.any(s == t):
        raise SingularityError("odd kernel is unbounded at s = t for H > 1/2")
    const = math.sqrt(math.pi) * coef_alpha(h) / gamma_real(1.0 - h)
    return _scalar(const * (t * t - s * s) ** (0.5 - h))


def _inner_integral(beta: float, t: float, s: float) -> float:
    # psi(s) = int_s^t (x^2 - s^2)^beta dx with x = s + (t - s) v:
    #        = (t - s)^(1 + beta) int_0^1 v^beta (2 s + (t - s) v)^beta dv
    if s >= t:
        return 0.0
    d = t - s
    val, _ = integrate.quad(
        lambda v: (2.0 * s + d * v) ** beta, 0.0, 1.0, weight="alg", wvar=(beta, 0.0),
        epsabs=0.0, epsrel=1e-13, limit=200,
    )
    return d ** (1.0 + beta) * val


def mart_kernel_even(h: float, t: float, s, fd_step: float | None = None):
    """-(alpha_H / Gamma(3/2 - H)) psi'(s) with psi(s) = int_s^t (x^2 - s^2)^(1/2-H) dx.

    psi is integrated numerically and differentiated by central differences
    with step ``fd_step`` (default ``1e-4 t``, capped at half the distance to
    0 and t), followed by one Richardson extrapolation.  Only H <= 1/2 is
    supported.  At s = 0 the kernel takes its limit value 0 (H < 1/2).
    """
    h = check_hurst(h)
    if h > 0.5:
        raise DomainError("the even-part kernel needs H <= 1/2 (boundary term diverges)")
    t = float(t)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if t <= 0 or np.any(s_arr < 0) or np.any(s_arr >= t):
        raise DomainError("need 0 <= s < t and t > 0")
    if h == 0.5:
        return _scalar(np.ones_like(np.asarray(s, dtype=float)))
    beta = 0.5 - h
    const = -coef_alpha(h) / gamma_real(1.5 - h)
    out = np.empty_like(s_arr)
    for k, sk in enumerate(s_arr):
        if sk == 0.0:
            out[k] = 0.0
            continue
        step = 1e-4 * t if fd_step is None else float(fd_step)
        step = min(step, sk / 2.0, (t - sk) / 2.0)

        def central(d):
            return (_inner_integral(beta, t, sk + d) - _inner_integral(beta, t, sk - d)) / (2.0 * d)

        deriv = (4.0 * central(step / 2.0) - central(step)) / 3.0
        out[k] = const * deriv
    return _scalar(out.reshape(np.shape(s)))


def _scalar(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


def parity_gram(spec: MartingaleSpec) -> CovMatrix:
    """Covariance of B^i_H over the grid."""
    t = spec.times
    entries = np.asarray(fbm_parity_cov(spec.parity, spec.h, t[:, None], t[None, :]))
    entries = np.triu(entries) + np.triu(entries, 1).T
    points = [FieldPoint(tk, spec.h, spec.parity) for tk in t]
    return CovMatrix(points, spec.kernel_id, entries)


def projection_weights(
    spec: MartingaleSpec,
    gram: CovMatrix | None = None,
    factor: Factor | None = None,
    rows: Sequence[int] | None = None,
) -> np.ndarray:
    """Weights W with M(t_k) = sum_j W[r, j] B^i_H(t_j) for k = rows[r] (default: all, giving a lower-triangular W).

    Row k solves the projection of B^i_{H'}(t_k) onto the observations up to
    t_k; the cross-covariance comes from the equal-parity field covariance
    at (H', H).  Leading blocks of one Cholesky factor serve every prefix.
    """
    gram = gram or parity_gram(spec)
    factor = factor or factorize(gram)
    t = spec.times
    n = t.size
    rows = list(range(n)) if rows is None else [int(k) % n for k in rows]
    weights = np.zeros((len(rows), n))
    for r, k in enumerate(rows):
        cross = np.asarray(field_parity_cov(spec.parity, spec.parity, spec.h_dual, spec.h, t[k], t[: k + 1]))
        sub = Factor(factor.lower[: k + 1, : k + 1], factor.jitter, np.arange(k + 1), k + 1)
        weights[r, : k + 1] = condition(gram.entries[: k + 1, : k + 1], cross, sub)
    return weights


def _kernel(spec: MartingaleSpec, t: float, s):
    if spec.parity == ODD:
        return mart_kernel_odd(spec.h, t, s)
    return mart_kernel_even(spec.h, t, s)


def stieltjes_weights(spec: MartingaleSpec, at: Sequence[int] | None = None) -> np.ndarray:
    """Rows of weights on B(t_1..t_n) for left-point Riemann-Stieltjes sums.

    M(t_k) = sum_{j<k} g(s_j) (B(s_{j+1}) - B(s_j)) with s_0 = 0 and
    g = kernel(t_k, .).  For the odd kernel with H > 1/2 the last cell uses
    the midpoint value, since the kernel blows up at s = t_k.
    """
    t = spec.times
    n = t.size
    rows = range(n) if at is None else at
    out = np.zeros((len(rows), n))
    nodes = np.concatenate([[0.0], t])
    for r, k in enumerate(rows):
        left = nodes[: k + 1]  # s_0 .. s_k (left ends of the k+1 cells ending at t_k)
        g = np.asarray(_kernel(spec, t[k], left), dtype=float).reshape(-1)
        if spec.parity == ODD and spec.h > 0.5:
            g[-1] = float(_kernel(spec, t[k], (left[-1] + t[k]) / 2.0))
        # sum_j g_j (B_{j+1} - B_j) = sum_m B_m (g_{m-1} - g_m) for m <= k, with g_{k+1} = 0
        w = g.copy()
        w[:-1] -= g[1:]
        out[r, : k + 1] = w
    return out


def _check_paths(spec: MartingaleSpec, paths: PathEnsemble) -> np.ndarray:
    ts = [p.t for p in paths.grid]
    if len(ts) != len(spec.grid) or any(a != b for a, b in zip(ts, spec.grid)):
        raise GridMismatchError("paths are not sampled on the martingale grid")
    if any(p.h != spec.h for p in paths.grid):
        raise GridMismatchError("paths have a different Hurst index")
    return paths.values


def build_martingale(spec: MartingaleSpec, paths: PathEnsemble, at: Sequence[int] | None = None) -> PathEnsemble:
    """Martingale values along each path, at grid indices ``at`` (default: all)."""
    values = _check_paths(spec, paths)
    idx = list(range(len(spec.grid))) if at is None else [int(k) for k in at]
    if spec.method == "projection":
        w = projection_weights(spec, rows=idx)
    else:
        w = stieltjes_weights(spec, idx)
    grid = [FieldPoint(spec.grid[k], spec.h, spec.parity) for k in idx]
    return PathEnsemble(
        grid,
        spec.kernel_id,
        paths.n_paths,
        values @ w.T,
        paths.seed,
        paths.method,
        {"quantity": "martingale", "route": spec.method, "h_dual": spec.h_dual},
    )


def l2_gap(spec: MartingaleSpec, at: int = -1) -> float:
    """Exact relative L2 distance between the stieltjes and projection values at one grid time."""
    gram = parity_gram(spec)
    k = at % len(spec.grid)
    wp = projection_weights(spec, gram, rows=[k])[0]
    ws = stieltjes_weights(spec, [k])[0]
    d = ws - wp
    return math.sqrt(max(d @ gram.entries @ d, 0.0) / (wp @ gram.entries @ wp))


@dataclass
class AuditReport:
    spec: MartingaleSpec
    martingale_error: float
    slope: float
    slope_expected: float
    orthogonality_error: float
    adaptedness_error: float
    variances: np.ndarray

    def passed(self, rel_tol: float = 1e-10, slope_tol: float = 0.05) -> bool:
        return (
            self.martingale_error <= rel_tol
            and abs(self.slope - self.slope_expected) <= slope_tol
            and self.orthogonality_error <= rel_tol
            and self.adaptedness_error <= rel_tol
        )


def martingale_audit(spec: MartingaleSpec, fit_octaves: float = 6.0) -> AuditReport:
    """Analytic audit of the projection martingale on the grid of ``spec``.

    * martingale property: E M(t) M(u) = E M(u)^2 for u <= t, relative to the
      largest entry;
    * variance scaling: least-squares slope of log Var M(t) against log t over
      grid times within ``fit_octaves`` octaves of the last one, expected 2(1-H);
    * increments orthogonal to the past: E (M(t) - M(u)) B(r) = 0 for r <= u;
    * adaptedness: largest weight on a future observation.
    """
    gram = parity_gram(spec)
    w = projection_weights(spec, gram)
    c = gram.entries
    cov_m = w @ c @ w.T
    scale = np.max(np.abs(cov_m))
    diag = np.diag(cov_m)
    lower = np.tril(np.ones_like(cov_m, dtype=bool))
    # for row k >= column l, E M(t_k) M(t_l) should equal Var M(t_l)
    mart_err = float(np.max(np.abs(np.where(lower, cov_m - diag[None, :], 0.0))) / scale)

    wc = w @ c  # wc[k, r] = E M(t_k) B(t_r); must not depend on k once k >= r
    ref = np.diag(wc)
    orth_err = float(np.max(np.abs(np.where(lower, wc - ref[None, :], 0.0))) / np.max(np.abs(wc)))

    adapt_err = float(np.max(np.abs(np.triu(w, 1)), initial=0.0) / np.max(np.abs(w)))

    t = spec.times
    sel = t >= t[-1] * 2.0 ** (-fit_octaves) * (1 - 1e-12)
    if sel.sum() < 2:
        raise DomainError("the grid needs at least two points in the fitting range")
    slope = float(np.polyfit(np.log(t[sel]), np.log(diag[sel]), 1)[0])
    return AuditReport(spec, mart_err, slope, 2.0 * (1.0 - spec.h), orth_err, adapt_err, diag)
