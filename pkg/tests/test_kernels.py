import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fbfield import kernels as kn
from fbfield.errors import DomainError, SingularityError
from fbfield.gaussfield import FieldPoint, build_cov
from fbfield.kernels import KernelId, QuadSpec, Tag
from fbfield.specfun import coef_a, coef_c, coef_cc, coef_d, coef_k, gamma_real

hurst = st.floats(0.02, 0.98)
times = st.floats(-5, 5)
# dyadic times keep shifted arguments t + d exact
dyadic = st.integers(-320, 320).map(lambda k: k / 64)


def xlog(x):
    return 0.0 if x == 0 else x * math.log(abs(x))


def assemble(h, h2, i1, i2):
    phi = (h2 - h) * math.pi / 2
    return coef_cc(h, h2) * (math.cos(phi) * 2 * i1 - math.sin(phi) * i2)


class TestKernelId:
    def test_parity_presence(self):
        with pytest.raises(DomainError):
            KernelId(Tag.FIELD_PARITY)
        with pytest.raises(DomainError):
            KernelId(Tag.FBM, ("odd", "odd"))
        assert KernelId(Tag.FIELD_PARITY, ("e", "o")).parity == ("even", "odd")

    def test_parse(self):
        assert KernelId.parse("field_parity:even,odd") == KernelId(Tag.FIELD_PARITY, ("even", "odd"))
        assert KernelId.parse("wb").tag is Tag.WELL_BALANCED
        assert KernelId.parse("fbm-odd").tag is Tag.FBM_ODD
        assert str(KernelId.parse("field-parity:odd")) == "field_parity:odd,odd"
        with pytest.raises(DomainError):
            KernelId.parse("nope")

    def test_quadspec(self):
        with pytest.raises(DomainError):
            QuadSpec(abs_tol=0)


class TestFbm:
    def test_examples(self):
        assert kn.fbm_cov(0.5, 2, 3) == 2
        for h in (0.1, 0.5, 0.9):
            assert kn.fbm_cov(h, 1, 1) == 1
            assert kn.fbm_cov(h, 0, 5) == 0

    @given(hurst, times, times)
    def test_symmetric(self, h, t, s):
        assert kn.fbm_cov(h, t, s) == kn.fbm_cov(h, s, t)

    def test_parity_examples(self):
        assert kn.fbm_parity_cov("odd", 0.5, 1, 1) == 0.5
        for h in (0.2, 0.7):
            assert kn.fbm_parity_cov("odd", h, 1.5, 1.5) == pytest.approx(2 ** (2 * h - 2) * 1.5 ** (2 * h), rel=1e-14)
            assert kn.fbm_parity_cov("even", h, 0, 2.0) == 0

    def test_parity_sum(self):
        # odd and even parts of one fBm are independent and add up to B(t) B(s) for t, s >= 0
        for h in (0.2, 0.5, 0.8):
            t, s = 0.7, 1.9
            tot = kn.fbm_parity_cov("odd", h, t, s) + kn.fbm_parity_cov("even", h, t, s)
            assert tot == pytest.approx(kn.fbm_cov(h, t, s), rel=1e-14)

    def test_parity_negative_time(self):
        with pytest.raises(DomainError):
            kn.fbm_parity_cov("odd", 0.3, -1, 1)


class TestDfbf:
    def test_reduces_to_fbm(self):
        grid = np.linspace(-3, 3, 20)
        t, s = np.meshgrid(grid, grid)
        for h in (0.1, 0.3, 0.5, 0.7, 0.9):
            assert np.max(np.abs(kn.dfbf_cov(h, h, t, s) - kn.fbm_cov(h, t, s))) <= 1e-10

    def test_dual_diagonal(self):
        for h in (0.2, 0.3, 0.5):
            h2 = 1 - h
            ref = coef_cc(h, h2) * math.cos((h2 - h) * math.pi / 2) * math.pi
            assert kn.dfbf_cov(h, h2, 1, 1) == pytest.approx(ref, rel=1e-14)

    def test_dual_zero(self):
        assert kn.dfbf_cov(0.3, 0.7, 0, 3) == 0
        assert kn.dfbf_cov(0.3, 0.7, 3, 0) == 0

    def test_dual_generic(self):
        h, h2, t, s = 0.3, 0.7, 2.0, 0.5
        phi = (h2 - h) * math.pi / 2
        ref = coef_cc(h, h2) * (
            math.cos(phi) * math.pi / 2 * (abs(t) + abs(s) - abs(t - s))
            - math.sin(phi) * (xlog(t) - xlog(s) - xlog(t - s))
        )
        assert kn.dfbf_cov(h, h2, t, s) == pytest.approx(ref, rel=1e-14)

    @given(hurst, hurst, times, times)
    def test_swap_symmetry(self, h, h2, t, s):
        a = kn.dfbf_cov(h, h2, t, s)
        b = kn.dfbf_cov(h2, h, s, t)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))

    def test_not_symmetric_in_time_alone(self):
        assert abs(kn.dfbf_cov(0.3, 0.6, 1, 2) - kn.dfbf_cov(0.3, 0.6, 2, 1)) > 1e-3

    def test_zero_time(self):
        for h, h2 in ((0.3, 0.6), (0.2, 0.2), (0.3, 0.7), (0.3, 0.7003)):
            assert kn.dfbf_cov(h, h2, 0.0, 1.7) == 0.0

    def test_band_matches_quadrature_not_limit(self):
        # inside the dual band the dual-line limit would be off by about 3e-4
        h, h2, t, s = 0.3, 0.7005, 1.0, 2.0
        quad = assemble(h, h2, kn.freq_quad_oracle("I1", h, h2, t, s), kn.freq_quad_oracle("I2", h, h2, t, s))
        assert abs(kn.dfbf_cov(h, h2, t, s) - quad) < 1e-10
        assert abs(kn.dfbf_cov(0.3, 0.7, t, s) - quad) > 1e-4

    def test_band_continuity(self):
        t, s = 1.3, -0.4
        on = kn.dfbf_cov(0.3, 0.7, t, s)
        for e in (1e-9, 1e-6, -1e-6, 9e-4, -9e-4, 1.1e-3):
            assert abs(kn.dfbf_cov(0.3, 0.7 + e, t, s) - on) < 5 * abs(e) + 1e-12

    def test_assembly_consistency(self):
        # closed covariance formula vs the I1/I2 closed forms: two separate code paths
        rng = np.random.default_rng(11)
        for _ in range(200):
            h, h2 = rng.uniform(0.02, 0.98, 2)
            if rng.random() < 0.2:
                h2 = 1 - h
            t, s = rng.uniform(-4, 4, 2)
            a = kn.dfbf_cov(h, h2, t, s)
            b = assemble(h, h2, kn.i1_closed(h, h2, t, s), kn.i2_closed(h, h2, t, s))
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


class TestIntegrals:
    def test_i1_examples(self):
        assert kn.i1_closed(0.3, 0.4, 0, 2) == 0
        assert kn.i1_closed(0.3, 0.7, 1, 1) == pytest.approx(math.pi / 2, rel=1e-15)
        assert kn.i1_closed(0.3, 0.4, 1, 2) == pytest.approx(kn.freq_quad_oracle("I1", 0.3, 0.4, 1, 2), abs=1e-6)

    def test_i1_diagonal(self):
        h, h2, t = 0.3, 0.4, 1.7
        m = h + h2
        ref = -gamma_real(-m) * math.cos(m * math.pi / 2) * t**m
        assert kn.i1_closed(h, h2, t, t) == pytest.approx(ref, rel=1e-13)

    def test_i2_examples(self):
        assert kn.i2_closed(0.3, 0.4, 7, 7) == 0
        assert kn.i2_closed(0.3, 0.7, 2, 1) == pytest.approx(2 * math.log(2), rel=1e-15)
        assert kn.freq_quad_oracle("I2", 0.3, 0.7, 2, 1) == pytest.approx(2 * math.log(2), abs=1e-8)

    @given(hurst, hurst, times, times)
    def test_i2_antisymmetric(self, h, h2, t, s):
        a, b = kn.i2_closed(h, h2, t, s), kn.i2_closed(h, h2, s, t)
        assert abs(a + b) <= 1e-12 * max(1.0, abs(a))

    def test_oracle_examples(self):
        assert abs(kn.freq_quad_oracle("I1", 0.3, 0.4, 1, 2) - kn.i1_closed(0.3, 0.4, 1, 2)) < 1e-6
        assert abs(kn.freq_quad_oracle("I2", 0.45, 0.55, 2, 1) - kn.i2_closed(0.45, 0.55, 2, 1)) < 1e-6
        assert kn.freq_quad_oracle("I1", 0.3, 0.4, 0, 2.5) == 0

    def test_oracle_random(self):
        rng = np.random.default_rng(5)
        for k in range(60):
            if k < 50:
                while True:
                    h, h2 = rng.uniform(0.02, 0.98, 2)
                    if abs(h + h2 - 1) >= 0.05:
                        break
            else:
                h = rng.uniform(0.02, 0.98)
                h2 = 1 - h
            t, s = rng.uniform(-5, 5, 2)
            assert abs(kn.freq_quad_oracle("I1", h, h2, t, s) - kn.i1_closed(h, h2, t, s)) <= 1e-6
            assert abs(kn.freq_quad_oracle("I2", h, h2, t, s) - kn.i2_closed(h, h2, t, s)) <= 1e-6

    def test_oracle_against_mpmath(self):
        # independent oracle: mpmath on [0, X] plus the tail in incomplete-gamma form
        with mp.workdps(30):
            h, h2, t, s = 0.35, 0.5, 1.0, 2.5
            m = h + h2
            p = 1 + m
            f = lambda x: (mp.sin(t * x / 2) ** 2 + mp.sin(s * x / 2) ** 2 - mp.sin((t - s) * x / 2) ** 2) / x**p
            big = 40 * mp.pi
            head = mp.quad(f, mp.linspace(0, big, 81))

            def cos_tail(w):
                w = abs(w)
                return mp.re((-1j * w) ** (p - 1) * mp.gammainc(1 - p, -1j * w * big))

            tail = big ** (-m) / (2 * m) - cos_tail(t) / 2 - cos_tail(s) / 2 + cos_tail(t - s) / 2
            ref = float(head + tail)
        assert abs(kn.i1_closed(h, h2, t, s) - ref) < 1e-13
        assert abs(kn.freq_quad_oracle("I1", h, h2, t, s) - ref) < 1e-8

    def test_oracle_rejects(self):
        with pytest.raises(DomainError):
            kn.freq_quad_oracle("I3", 0.3, 0.4, 1, 2)


class TestParityField:
    def test_odd_reduces(self):
        for h in (0.2, 0.7):
            assert kn.field_parity_cov("odd", "odd", h, h, 0.6, 1.3) == pytest.approx(
                kn.fbm_parity_cov("odd", h, 0.6, 1.3), rel=1e-12
            )

    def test_mixed_at_half_vanishes(self):
        for t, s in ((1, 1), (0.3, 2.0), (2.0, 0.3)):
            assert abs(kn.field_parity_cov("even", "odd", 0.5, 0.5, t, s)) < 1e-15

    def test_mixed_dual_display(self):
        for h in (0.2, 0.3, 0.4):
            h2 = 1 - h
            coef = coef_cc(h, h2) * math.sin((h2 - h) * math.pi / 2)
            for t, s in ((1, 1), (2, 0.5), (0.5, 2)):
                display = xlog(s) - (xlog(t + s) - xlog(t - s)) / 2
                assert kn.field_parity_cov("even", "odd", h, h2, t, s) == pytest.approx(coef * display, rel=1e-12)
            assert kn.field_parity_cov("even", "odd", h, h2, 1, 1) == pytest.approx(-coef * math.log(2), rel=1e-12)
            assert abs(kn.field_parity_cov("even", "odd", h, h2, 1, 1)) > 1e-3

    def test_reconstruction_pins_amplitude(self):
        # quadrant combination of the dependent covariance == a_{H,H'} formulas
        rng = np.random.default_rng(3)
        for _ in range(100):
            h, h2 = rng.uniform(0.03, 0.97, 2)
            t, s = rng.uniform(0, 4, 2)
            for par in ("odd", "even"):
                quad = kn.parity_quadrant(par, par, h, h2, t, s)
                closed = kn.field_parity_cov(par, par, h, h2, t, s)
                assert abs(quad - closed) <= 1e-10 * max(1.0, abs(closed))

    def test_printed_amplitude_fails_reconstruction(self):
        # with a_{H,H'} multiplied by pi the reconstruction is off by far more than rounding
        h, h2, t, s = 0.3, 0.6, 1.0, 2.0
        m = h + h2
        wrong = math.pi * coef_a(h, h2) * ((t + s) ** m - abs(t - s) ** m) / 4
        assert abs(kn.parity_quadrant("odd", "odd", h, h2, t, s) - wrong) > 0.1


class TestFbf:
    @given(hurst, times, times)
    def test_reduces(self, h, t, s):
        assert kn.fbf_cov(h, h, t, s) == pytest.approx(kn.fbm_cov(h, t, s), rel=1e-12, abs=1e-12)

    def test_dual(self):
        for h in (0.2, 0.35, 0.5, 0.8):
            a = coef_a(h, 1 - h)
            assert kn.fbf_cov(h, 1 - h, 2, -1) == 0
            assert kn.fbf_cov(h, 1 - h, 3, 1) == pytest.approx(a, rel=1e-15)
            assert kn.fbf_cov(h, 1 - h, -3, -1e-3) == pytest.approx(a * 1e-3, rel=1e-15)

    @given(hurst, hurst, times, times)
    def test_fully_symmetric(self, h, h2, t, s):
        assert kn.fbf_cov(h, h2, t, s) == kn.fbf_cov(h2, h, s, t)

    @given(hurst, hurst, st.floats(0.1, 3), st.floats(0.1, 3), st.sampled_from([0.5, 2.0, 10.0]))
    def test_scaling(self, h, h2, t, s, a):
        m = h + h2
        scale = a**m * (t**m + s**m + abs(t - s) ** m) * abs(coef_a(h, h2))
        lhs = kn.fbf_cov(h, h2, a * t, a * s)
        rhs = a**m * kn.fbf_cov(h, h2, t, s)
        assert abs(lhs - rhs) <= 1e-12 * scale

    @given(hurst, hurst, dyadic, dyadic, dyadic)
    def test_stationary_increments(self, h, h2, t, s, d):
        k = lambda x, y: kn.fbf_cov(h, h2, x, y)
        terms = [k(t + d, s + d), k(t + d, d), k(d, s + d), k(d, d), k(t, s)]
        lhs = terms[0] - terms[1] - terms[2] + terms[3]
        assert abs(lhs - terms[4]) <= 1e-12 * max(1.0, max(abs(x) for x in terms))


class TestWellBalanced:
    @given(hurst, times, times)
    def test_reduces(self, h, t, s):
        assert kn.wb_field_cov(h, h, t, s) == pytest.approx(kn.fbm_cov(h, t, s), rel=1e-12, abs=1e-12)

    def test_dual_is_min(self):
        for h in (0.2, 0.3, 0.8):
            coef = kn.wb_coefficient(h, 1 - h)
            for t, s in ((1, 2), (3, 0.5), (0.25, 0.25)):
                assert kn.wb_field_cov(h, 1 - h, t, s) == pytest.approx(coef * min(t, s), rel=1e-14)

    @given(hurst, hurst, times, times)
    def test_swap(self, h, h2, t, s):
        assert kn.wb_field_cov(h, h2, t, s) == kn.wb_field_cov(h2, h, s, t)

    def test_dual_sign(self):
        # k_H / d_H changes sign across 1/2, so a dual pair with H < 1/2 < H' is negatively correlated
        assert kn.wb_coefficient(0.3, 0.7) < 0
        assert kn.wb_coefficient(0.6, 0.7) > 0


def _gram_min_eig(kernel, points):
    m = build_cov(points, kernel)
    ev = np.linalg.eigvalsh(m.entries)
    return ev.min(), np.max(np.diag(m.entries))


@pytest.mark.parametrize(
    "kernel",
    [
        KernelId(Tag.FBM),
        KernelId(Tag.FBM_ODD),
        KernelId(Tag.FBM_EVEN),
        KernelId(Tag.DFBF),
        KernelId(Tag.FIELD_PARITY, ("even", "odd")),
        KernelId(Tag.FIELD_PARITY, ("odd", "odd")),
        KernelId(Tag.FBF),
        KernelId(Tag.WELL_BALANCED),
    ],
    ids=str,
)
def test_gram_psd(kernel):
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(2, 17))
        single_h = kernel.tag in (Tag.FBM, Tag.FBM_ODD, Tag.FBM_EVEN)
        hs = [rng.uniform(0.05, 0.95)] if single_h else rng.uniform(0.05, 0.95, 3)
        nonneg = kernel.needs_nonnegative_time
        pts = [
            FieldPoint(rng.uniform(0 if nonneg else -3, 3), hs[int(rng.integers(len(hs)))])
            for _ in range(n if kernel.tag is not Tag.FIELD_PARITY else max(1, n // 2))
        ]
        lo, top = _gram_min_eig(kernel, pts)
        assert lo >= -1e-8 * top


class TestMovingAverageKernels:
    def test_examples(self):
        for h in (0.2, 0.5, 0.8):
            assert kn.ma_kernel("nonanticipating", h, 2, 3) == 0
            assert np.all(kn.ma_kernel("nonanticipating", h, 0, np.array([-1.0, 0.5])) == 0)
        assert kn.ma_kernel("log", 0.5, 2, 1) == 0

    def test_values(self):
        assert kn.ma_kernel("nonanticipating", 0.7, 1.0, -1.0) == pytest.approx(2**0.2 - 1)
        assert kn.ma_kernel("well_balanced", 0.3, 1.0, 3.0) == pytest.approx(2**-0.2 - 3**-0.2)
        # continuous extension at x = t for H > 1/2
        assert kn.ma_kernel("nonanticipating", 0.7, 1.0, 1.0) == 0.0

    def test_indicator_at_half(self):
        x = np.array([-0.5, 0.5, 1.5])
        assert np.array_equal(kn.ma_kernel("nonanticipating", 0.5, 1.0, x), [0.0, 1.0, 0.0])

    @pytest.mark.parametrize("kind,h,x", [("nonanticipating", 0.3, 1.0), ("nonanticipating", 0.3, 0.0), ("well_balanced", 0.3, 0.0), ("log", 0.5, 1.0)])
    def test_singular(self, kind, h, x):
        with pytest.raises(SingularityError):
            kn.ma_kernel(kind, h, 1.0, x)

    def test_kind_rules(self):
        with pytest.raises(DomainError):
            kn.ma_kernel("log", 0.3, 1, 2)
        with pytest.raises(DomainError):
            kn.ma_kernel("well_balanced", 0.5, 1, 2)
        with pytest.raises(DomainError):
            kn.ma_kernel("other", 0.3, 1, 2)


def _plancherel(k1, h, t, k2, h2, s, x_max=3000.0):
    """(1/2 pi) times the integral of ft1 conj(ft2) over [-x_max, x_max]."""

    def f(x):
        pos = kn.ft_closed(k1, h, t, x) * np.conj(kn.ft_closed(k2, h2, s, x))
        neg = kn.ft_closed(k1, h, t, -x) * np.conj(kn.ft_closed(k2, h2, s, -x))
        return (pos + neg).real

    head = integrate.quad(f, 0, 1, limit=200)[0]
    nodes, weights = np.polynomial.legendre.leggauss(30)
    edges = np.arange(1.0, x_max + 1e-9, 0.25)
    a, b = edges[:-1], edges[1:]
    x = (a + b)[:, None] / 2 + (b - a)[:, None] / 2 * nodes
    body = np.sum((b - a) / 2 * (f(x) @ weights))
    return (head + body) / (2 * math.pi)


def _amp(kind, h):
    return {"nonanticipating": gamma_real(h + 0.5), "well_balanced": abs(coef_k(h)) if h != 0.5 else math.pi, "log": math.pi}[kind]


class TestFourier:
    def test_wb_coefficient(self):
        for h in (0.25, 0.75):
            xi = np.array([0.7, -2.0])
            val = kn.ft_closed("well_balanced", h, 1.3, xi)
            ref = coef_k(h) * np.expm1(1j * 1.3 * xi) / np.abs(xi) ** (h + 0.5)
            assert np.allclose(val, ref, rtol=1e-14)

    def test_nonanticipating_modulus(self):
        for h in (0.2, 0.5, 0.8):
            xi = np.array([-3.0, -0.1, 0.4, 5.0])
            val = kn.ft_closed("nonanticipating", h, 2.0, xi)
            ref = gamma_real(h + 0.5) * np.abs(np.expm1(2j * xi)) / np.abs(xi) ** (h + 0.5)
            assert np.allclose(np.abs(val), ref, rtol=1e-13)

    def test_log_display_positive_frequencies(self):
        xi = np.array([0.3, 1.0, 7.0])
        assert np.allclose(kn.ft_closed("log", 0.5, 1.5, xi), math.pi * np.expm1(1.5j * xi) / xi, rtol=1e-14)

    @pytest.mark.parametrize("kind,h", [("nonanticipating", 0.3), ("well_balanced", 0.7), ("log", 0.5)])
    def test_hermitian(self, kind, h):
        # transforms of real kernels satisfy f(-xi) = conj f(xi)
        xi = np.array([0.2, 1.0, 4.5])
        assert np.allclose(kn.ft_closed(kind, h, 1.2, -xi), np.conj(kn.ft_closed(kind, h, 1.2, xi)), rtol=1e-14)

    def test_log_is_limit_of_power(self):
        # |t-x|^a - |x|^a ~ -a (log|x| - log|t-x|) as a -> 0
        a = 1e-7
        xi = np.array([-2.0, 0.5, 3.0])
        power = kn.ft_closed("well_balanced", 0.5 + a, 1.0, xi) / (-a)
        assert np.allclose(power, kn.ft_closed("log", 0.5, 1.0, xi), rtol=1e-5)

    def test_zero_frequency(self):
        with pytest.raises(DomainError):
            kn.ft_closed("log", 0.5, 1.0, 0.0)

    @pytest.mark.parametrize(
        "kind,h,h2,t,s",
        [
            ("nonanticipating", 0.7, 0.8, 1.0, 2.0),
            ("nonanticipating", 0.6, 0.6, 1.0, -0.5),
            ("nonanticipating", 0.9, 0.55, -1.0, 1.5),
            ("well_balanced", 0.7, 0.8, 1.0, 2.0),
            ("well_balanced", 0.6, 0.5, 1.0, -0.5),
        ],
    )
    def test_plancherel(self, kind, h, h2, t, s):
        k1 = "log" if (kind == "well_balanced" and h == 0.5) else kind
        k2 = "log" if (kind == "well_balanced" and h2 == 0.5) else kind
        x_max = 3000.0
        val = _plancherel(k1, h, t, k2, h2, s, x_max)
        if kind == "nonanticipating":
            norm = coef_c(h) * coef_c(h2)
            ref = kn.dfbf_cov(h, h2, t, s)
        else:
            norm = coef_d(h) * coef_d(h2)
            ref = kn.wb_field_cov(h, h2, t, s)
        m = h + h2
        # |integrand| <= 4 A1 A2 |xi|^(-1-m) beyond x_max on both sides
        tail = 2 * 4 * _amp(k1, h) * _amp(k2, h2) / (m * x_max**m) / (2 * math.pi) / norm
        assert abs(val / norm - ref) <= tail + 1e-8
