"""Multifractional Brownian motion along a deterministic Hurst profile.

Two standardized processes share the profile H(t):

``X``  nonanticipating mBm, the diagonal {B_{H(t)}(t)} of the dependent field;
``Y``  well-balanced mBm, the diagonal {W_{H(t)}(t)} of the well-balanced field.

Both have variance |t|^{2H(t)}, yet their laws differ unless H is constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .gaussfield import FieldPoint, PathEnsemble, build_cov, sample
from .kernels import KernelId, Tag, dfbf_cov, wb_coefficient, wb_field_cov
from .specfun import check_hurst

__all__ = [
    "DiscrepancyReport",
    "HurstProfile",
    "PROFILE_EPS",
    "cohen_discrepancy",
    "mbm_cov_x",
    "mbm_cov_y",
    "mbm_sample",
    "parse_profile_table",
]

PROFILE_EPS = 1e-3


@dataclass(frozen=True)
class HurstProfile:
    """Piecewise-linear Hurst function t -> H(t) on [0, inf).

    Built through :meth:`constant`, :meth:`ramp` or :meth:`table`.  Outside
    the knot range the profile is extended by its end values.  ``holder``
    records the Holder exponent of the profile (1 for the piecewise-linear
    forms offered here).
    """

    knots_t: tuple
    knots_h: tuple
    kind: str
    holder: float = 1.0
    eps: float = PROFILE_EPS

    def __post_init__(self) -> None:
        t = tuple(float(x) for x in self.knots_t)
        h = tuple(float(x) for x in self.knots_h)
        if not t or len(t) != len(h):
            raise DomainError("profile needs matching, nonempty knot lists")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise DomainError("profile knots must be strictly increasing in t")
        if not self.holder > 0:
            raise DomainError("Holder exponent must be positive")
        for v in h:
            check_hurst(v)
            if not self.eps < v < 1.0 - self.eps:
                raise DomainError(f"profile value {v} is outside ({self.eps}, {1 - self.eps})")
        object.__setattr__(self, "knots_t", t)
        object.__setattr__(self, "knots_h", h)

    @classmethod
    def constant(cls, h: float) -> "HurstProfile":
        return cls((0.0,), (h,), "constant")

    @classmethod
    def ramp(cls, h0: float, h1: float, t_end: float = 1.0) -> "HurstProfile":
        """Linear from H(0) = h0 to H(t_end) = h1, constant afterwards."""
        if not t_end > 0:
            raise DomainError("ramp length must be positive")
        return cls((0.0, float(t_end)), (h0, h1), "ramp")

    @classmethod
    def table(cls, pairs: Iterable[tuple[float, float]], holder: float = 1.0) -> "HurstProfile":
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), "table", holder)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("the profile is defined for t >= 0")
        val = np.interp(t, self.knots_t, self.knots_h)
        return float(val) if val.ndim == 0 else val


def parse_profile_table(text: str) -> HurstProfile:
    """Read ``t H`` lines (whitespace separated); ``#`` starts a comment.

    A first line that does not parse as two numbers is taken as a header.
    """
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        try:
            if len(parts) != 2:
                raise ValueError
            pairs.append((float(parts[0]), float(parts[1])))
        except ValueError:
            if not pairs and lineno == _first_content_line(text):
                continue
            raise DomainError(f"profile line {lineno}: expected two numbers 't H', got {raw!r}") from None
    if not pairs:
        raise DomainError("profile table is empty")
    return HurstProfile.table(pairs)


def _first_content_line(text: str) -> int:
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw.split("#", 1)[0].strip():
            return lineno
    return 0


def _check_time(*ts) -> None:
    for t in ts:
        if np.any(np.asarray(t) < 0):
            raise DomainError("mBm times must be nonnegative")


def mbm_cov_x(p: HurstProfile, t, s):
    """E X_t X_s = dfbf_cov(H(t), H(s), t, s) (scalar times)."""
    _check_time(t, s)
    return dfbf_cov(p(t), p(s), t, s)


def mbm_cov_y(p: HurstProfile, t, s):
    """E Y_t Y_s = wb_field_cov(H(t), H(s), t, s) (scalar times)."""
    _check_time(t, s)
    return wb_field_cov(p(t), p(s), t, s)


def _diagonal_points(p: HurstProfile, grid: Sequence[float]) -> list[FieldPoint]:
    grid = [float(t) for t in grid]
    _check_time(grid)
    return [FieldPoint(t, p(t)) for t in grid]


def mbm_sample(p: HurstProfile, grid: Sequence[float], which: str, n_paths: int, seed: int) -> PathEnsemble:
    """Exact samples of X or Y on ``grid`` via the (t, H(t)) diagonal of the field."""
    which = which.upper()
    if which not in ("X", "Y"):
        raise DomainError("which must be 'X' or 'Y'")
    tag = Tag.DFBF if which == "X" else Tag.WELL_BALANCED
    m = build_cov(_diagonal_points(p, grid), KernelId(tag))
    e = sample(m, n_paths, seed)
    e.meta.update({"process": which, "profile": p.kind})
    return e


@dataclass
class PairRatio:
    t: float
    s: float
    r_x: float
    r_y: float


@dataclass
class DiscrepancyReport:
    """Covariances of the dual-pair field divided by min(t, s).

    ``r_y`` is a constant multiple of min(t, s) for every pair, so its spread
    is at rounding level; ``r_x`` carries the logarithmic terms of the
    dependent field and changes across pairs unless H = 1/2.
    """

    h: float
    pairs: list[PairRatio]
    r_y_coefficient: float
    spread_x: float
    spread_y: float
    witness_tol: float
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def r_x_varies(self) -> bool:
        return self.spread_x > self.witness_tol

    @property
    def r_y_constant(self) -> bool:
        return self.spread_y <= 1e-12 * max(1.0, abs(self.r_y_coefficient))

    @property
    def witnessed(self) -> bool:
        """True when r_Y is constant while r_X is not across the given pairs."""
        return self.r_x_varies and self.r_y_constant


def cohen_discrepancy(h: float, pairs: Sequence[tuple[float, float]], witness_tol: float = 1e-3) -> DiscrepancyReport:
    """Compare the nonanticipating and well-balanced dual-pair covariances over ``pairs``.

    For each (t, s) with t, s > 0 the report lists
    r_X = dfbf_cov(H, 1-H, t, s) / min(t, s) and
    r_Y = wb_field_cov(H, 1-H, t, s) / min(t, s).
    """
    h = check_hurst(h)
    h2 = 1.0 - h
    pairs = [(float(t), float(s)) for t, s in pairs]
    if not pairs:
        raise DomainError("at least one (t, s) pair is required")
    ratios = []
    for t, s in pairs:
        if t == 0.0 and s == 0.0:
            raise DomainError("t = s = 0 gives no information")
        if t <= 0 or s <= 0:
            raise DomainError("cohen_discrepancy needs t, s > 0")
        lo = min(t, s)
        ratios.append(PairRatio(t, s, float(dfbf_cov(h, h2, t, s)) / lo, float(wb_field_cov(h, h2, t, s)) / lo))
    rx = np.array([r.r_x for r in ratios])
    ry = np.array([r.r_y for r in ratios])
    note = "H = 1/2: both fields reduce to Brownian motion, no discrepancy expected" if h == 0.5 else ""
    return DiscrepancyReport(
        h,
        ratios,
        wb_coefficient(h, h2),
        float(rx.max() - rx.min()),
        float(ry.max() - ry.min()),
        witness_tol,
        note,
    )
