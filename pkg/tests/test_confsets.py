import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

import oracles
from splitconf.confsets import (
    MethodKind,
    MethodSpec,
    check_capability,
    clt_threshold,
    contains,
    default_search_radius,
    eb_threshold,
    interval_hull_1d,
    ray_widths,
)
from splitconf.errors import CapabilityError, DomainError
from splitconf.estimators import ols_estimator
from splitconf.losses import (
    DiffStats,
    gaussian_regression_loglik,
    manski_loss,
    mean_loss,
    pinball_loss,
    regression_loss,
    scaled,
)

# EB arithmetic is exercised on unbounded losses by declaring a bound;
# only b0 from the MethodSpec enters the threshold
BOUNDED_REGRESSION = replace(regression_loss(3), uniform_bound=50.0)
BOUNDED_MEAN = replace(mean_loss(1), uniform_bound=1.0)

ALL_REGRESSION_METHODS = [
    MethodSpec(MethodKind.NAIVE),
    MethodSpec(MethodKind.EB, b0=50.0),
    MethodSpec(MethodKind.STUDENTIZED),
    MethodSpec(MethodKind.BC),
]


def _regression_rows(rng, n, d, noise=1.0):
    x = rng.normal(size=(n, d))
    y = x @ np.full(d, d ** -0.5) + noise * rng.normal(size=n)
    return np.column_stack([y, x])


class TestMethodSpec:
    def test_labels(self):
        assert MethodSpec(MethodKind.UI).label == "UI-sigma=1.0"
        assert MethodSpec(MethodKind.UI, sigma=0.1).label == "UI-sigma=0.1"
        assert MethodSpec(MethodKind.EB, b0=2).label == "EB-B0=2.0"
        assert MethodSpec(MethodKind.BC).label == "BiasCorrected"

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5, -0.2])
    def test_alpha_domain(self, alpha):
        with pytest.raises(DomainError, match=r"alpha must lie in \(0,1\)"):
            MethodSpec(MethodKind.STUDENTIZED, alpha)

    def test_eb_needs_bound(self):
        with pytest.raises(DomainError):
            MethodSpec(MethodKind.EB)

    def test_kind_from_string(self):
        assert MethodSpec("Studentized").kind is MethodKind.STUDENTIZED


class TestThresholds:
    def test_eb_second_term(self):
        s = DiffStats(0.0, 0.0, 101)
        assert eb_threshold(s, 2.0, 0.1) == pytest.approx(14 * math.log(20) / 300, rel=1e-14)
        assert eb_threshold(s, 2.0, 0.1) == pytest.approx(0.13980, abs=1e-5)

    def test_eb_first_term(self):
        s = DiffStats(0.0, 1.0, 100)
        value = eb_threshold(s, 1e-300, 0.05)
        assert value == pytest.approx(math.sqrt(2 * math.log(40) / 100), rel=1e-14)
        assert value == pytest.approx(0.27162, abs=1e-5)

    def test_eb_monotone_in_alpha(self):
        s = DiffStats(0.0, 0.7, 40)
        vals = [eb_threshold(s, 1.0, a) for a in (0.5, 0.2, 0.1, 0.05, 0.01)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_clt(self):
        assert clt_threshold(DiffStats(0.0, 0.0, 10), 0.05) == 0.0
        assert clt_threshold(DiffStats(0.0, 1.0, 100), 0.05) == pytest.approx(0.16448536, abs=1e-8)

    @given(
        st.floats(1e-6, 1e3),
        st.integers(2, 10**6),
        st.floats(1e-6, 0.5),
        st.floats(1e-9, 1e3),
    )
    @settings(max_examples=2000)
    def test_chain(self, sd, n, alpha, b0):
        # z_alpha < 0 for alpha > 1/2, where the chain's lower end does not hold
        s = DiffStats(0.0, sd * sd, n)
        clt = clt_threshold(s, alpha)
        assert 0.0 <= clt < eb_threshold(s, b0, alpha)

    def test_domains(self):
        with pytest.raises(DomainError):
            eb_threshold(DiffStats(0.0, 1.0, 1), 1.0, 0.05)
        with pytest.raises(DomainError):
            eb_threshold(DiffStats(0.0, 1.0, 10), 0.0, 0.05)
        with pytest.raises(DomainError):
            clt_threshold(DiffStats(0.0, 1.0, 10), 1.0)


class TestCapability:
    def test_ui_needs_loglik(self):
        with pytest.raises(CapabilityError):
            check_capability(MethodSpec(MethodKind.UI), regression_loss(2))
        check_capability(MethodSpec(MethodKind.UI), gaussian_regression_loglik(2, 1.0))

    def test_eb_needs_bound(self):
        with pytest.raises(CapabilityError):
            check_capability(MethodSpec(MethodKind.EB, b0=1.0), regression_loss(2))
        check_capability(MethodSpec(MethodKind.EB, b0=2.0), manski_loss(2))

    def test_bc_needs_hessian(self):
        with pytest.raises(CapabilityError):
            check_capability(MethodSpec(MethodKind.BC), manski_loss(2))
        with pytest.raises(CapabilityError):
            check_capability(MethodSpec(MethodKind.BC), pinball_loss(0.5))

    def test_contains_checks_capability(self):
        with pytest.raises(CapabilityError):
            contains(MethodSpec(MethodKind.UI), mean_loss(1), [0.0], [0.0], np.zeros((3, 1)))


class TestContains:
    @pytest.mark.parametrize("method", ALL_REGRESSION_METHODS, ids=lambda m: m.label)
    def test_initial_estimate_contained(self, method):
        rows = _regression_rows(np.random.default_rng(0), 60, 3)
        hat = ols_estimator(rows[:30])
        res = contains(method, BOUNDED_REGRESSION, hat, hat, rows[30:])
        assert res.contained is True
        assert res.statistic == 0.0 and res.threshold >= 0.0

    def test_ui_initial_estimate_contained(self):
        rows = _regression_rows(np.random.default_rng(1), 40, 2)
        hat = ols_estimator(rows[:20])
        for sigma in (1.0, 0.1):
            assert contains(MethodSpec(MethodKind.UI, sigma=sigma), gaussian_regression_loglik(2, sigma),
                            hat, hat, rows[20:]).contained

    def test_result_consistency(self):
        rows = _regression_rows(np.random.default_rng(2), 40, 2)
        res = contains(MethodSpec(MethodKind.BC), regression_loss(2), [0.3, 0.1], [0.5, 0.5], rows)
        assert res.contained == (res.statistic <= res.threshold)
        assert res.diff_stats.n == 40

    def test_ui_matches_squared_error_form(self):
        rng = np.random.default_rng(3)
        rows = _regression_rows(rng, 80, 2)
        hat = ols_estimator(rows[:40])
        model = gaussian_regression_loglik(2, 1.0)
        alpha = 0.05
        for _ in range(200):
            theta = hat + rng.normal(scale=0.3, size=2)
            d2 = rows[40:]
            sq = np.sum((d2[:, 0] - d2[:, 1:] @ theta) ** 2 - (d2[:, 0] - d2[:, 1:] @ hat) ** 2)
            expected = sq <= 2 * math.log(1 / alpha)
            assert contains(MethodSpec(MethodKind.UI, alpha), model, theta, hat, d2).contained == expected

    def test_against_straight_line_oracle(self):
        rng = np.random.default_rng(4)
        model = replace(regression_loss(1), uniform_bound=3.0)
        checked = 0
        for _ in range(100):
            rows = rng.normal(size=(4, 2)).round(3)
            hat, theta = float(rng.normal()), float(rng.normal())
            alpha = float(rng.uniform(0.01, 0.4))
            pairs = [tuple(r) for r in rows]
            cases = [
                (MethodSpec(MethodKind.STUDENTIZED, alpha), oracles.studentized_contains(pairs, theta, hat, alpha)),
                (MethodSpec(MethodKind.BC, alpha), oracles.bias_corrected_contains(pairs, theta, hat, alpha)),
                (MethodSpec(MethodKind.NAIVE, alpha), oracles.naive_contains(pairs, theta, hat)),
                (MethodSpec(MethodKind.EB, alpha, b0=3.0), oracles.eb_contains(pairs, theta, hat, alpha, 3.0)),
            ]
            for method, expected in cases:
                res = contains(method, model, [theta], [hat], rows)
                if abs(res.statistic - res.threshold) < 1e-12:
                    continue
                assert res.contained == expected, method.label
                checked += 1
            ui = contains(MethodSpec(MethodKind.UI, alpha, sigma=0.5), gaussian_regression_loglik(1, 0.5),
                          [theta], [hat], rows)
            assert ui.contained == oracles.ui_contains(pairs, theta, hat, alpha, 0.5)
        assert checked > 390

    def test_bc_nested_in_studentized(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            rows = _regression_rows(rng, 30, 3)
            hat = rng.normal(size=3)
            theta = hat + rng.normal(scale=0.5, size=3)
            args = (regression_loss(3), theta, hat, rows)
            if contains(MethodSpec(MethodKind.BC), *args).contained:
                assert contains(MethodSpec(MethodKind.STUDENTIZED), *args).contained

    def test_studentized_scale_invariant(self):
        rng = np.random.default_rng(6)
        base = regression_loss(2)
        big = scaled(base, 7.5)
        for _ in range(200):
            rows = _regression_rows(rng, 20, 2)
            hat, theta = rng.normal(size=2), rng.normal(size=2)
            a = contains(MethodSpec(MethodKind.STUDENTIZED), base, theta, hat, rows)
            b = contains(MethodSpec(MethodKind.STUDENTIZED), big, theta, hat, rows)
            if abs(a.statistic - a.threshold) > 1e-12:
                assert a.contained == b.contained

    def test_ui_not_scale_invariant(self):
        rng = np.random.default_rng(7)
        rows = _regression_rows(rng, 200, 2)
        hat = ols_estimator(rows[:100])
        d2 = rows[100:]
        differ = False
        for _ in range(200):
            theta = hat + rng.normal(scale=0.2, size=2)
            a = contains(MethodSpec(MethodKind.UI, sigma=1.0), gaussian_regression_loglik(2, 1.0), theta, hat, d2)
            b = contains(MethodSpec(MethodKind.UI, sigma=0.1), gaussian_regression_loglik(2, 0.1), theta, hat, d2)
            differ |= a.contained != b.contained
        assert differ

    def test_ties_are_contained(self):
        rows = np.array([[1.0], [1.0], [1.0]])
        res = contains(MethodSpec(MethodKind.STUDENTIZED), mean_loss(1), [1.0], [1.0], rows)
        assert res.statistic == res.threshold == 0.0 and res.contained

    def test_needs_two_d2_rows(self):
        with pytest.raises(DomainError):
            contains(MethodSpec(MethodKind.STUDENTIZED), mean_loss(1), [0.0], [0.0], np.zeros((1, 1)))

    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=15), st.floats(-3, 3), st.floats(0.01, 0.5))
    @settings(max_examples=300)
    def test_hat_always_contained(self, xs, hat, alpha):
        rows = np.array(xs).reshape(-1, 1)
        for kind in (MethodKind.NAIVE, MethodKind.STUDENTIZED, MethodKind.BC):
            assert contains(MethodSpec(kind, alpha), mean_loss(1), [hat], [hat], rows).contained
        assert contains(MethodSpec(MethodKind.STUDENTIZED, alpha), pinball_loss(0.3), [hat], [hat], rows).contained

    @given(st.integers(0, 10**6), st.floats(0.01, 0.5))
    @settings(max_examples=100, deadline=None)
    def test_method_nesting(self, seed, alpha):
        # Naive within Studentized within EB whenever the EB bound dominates
        rng = np.random.default_rng(seed)
        rows = rng.normal(size=(12, 1))
        hat, theta = float(rng.normal()), float(rng.normal())
        model = BOUNDED_MEAN
        naive = contains(MethodSpec(MethodKind.NAIVE, alpha), model, [theta], [hat], rows).contained
        std = contains(MethodSpec(MethodKind.STUDENTIZED, alpha), model, [theta], [hat], rows)
        eb = contains(MethodSpec(MethodKind.EB, alpha, b0=1.0), model, [theta], [hat], rows).contained
        assume(abs(std.statistic) > 1e-12)
        assert naive <= std.contained <= eb


class TestGeometry:
    def test_degenerate_rows(self):
        rows = np.full((6, 1), 2.5)
        hull = interval_hull_1d(MethodSpec(MethodKind.STUDENTIZED), mean_loss(1), [2.5], rows)
        assert hull.lo == hull.hi == 2.5
        assert hull.width == 0.0 and not hull.truncated

    def test_mean_interval_closed_form(self):
        # studentized mean set is a quadratic inequality in theta; compare endpoints by root finding
        rng = np.random.default_rng(8)
        x = rng.normal(size=(200, 1))
        hat = np.array([0.1])
        method = MethodSpec(MethodKind.STUDENTIZED)
        hull = interval_hull_1d(method, mean_loss(1), hat, x)

        def f(t):
            r = contains(method, mean_loss(1), [t], hat, x)
            return r.statistic - r.threshold

        from scipy.optimize import brentq

        # f vanishes at hat too, so bracket each endpoint away from it
        lo = brentq(f, hull.lo - 0.05, 0.5 * (hull.lo + hat[0]), xtol=1e-14)
        hi = brentq(f, 0.5 * (hull.hi + hat[0]), hull.hi + 0.05, xtol=1e-14)
        assert hull.lo == pytest.approx(lo, abs=1e-9)
        assert hull.hi == pytest.approx(hi, abs=1e-9)

    def test_contains_endpoints(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(50, 1))
        method = MethodSpec(MethodKind.STUDENTIZED)
        hull = interval_hull_1d(method, pinball_loss(0.5), [0.05], x)
        assert hull.lo <= 0.05 <= hull.hi
        assert contains(method, pinball_loss(0.5), [hull.lo], [0.05], x).contained
        assert contains(method, pinball_loss(0.5), [hull.hi], [0.05], x).contained

    def test_truncation_flag(self):
        x = np.random.default_rng(10).normal(size=(20, 1))
        hull = interval_hull_1d(MethodSpec(MethodKind.EB, b0=1e4), BOUNDED_MEAN, [0.0], x, search_radius=0.5)
        assert hull.truncated

    def test_studentized_hull_scale_invariant(self):
        x = np.random.default_rng(11).normal(size=(80, 1))
        method = MethodSpec(MethodKind.STUDENTIZED)
        a = interval_hull_1d(method, mean_loss(1), [0.2], x, search_radius=2.0)
        b = interval_hull_1d(method, scaled(mean_loss(1), 2.0), [0.2], x, search_radius=2.0)
        assert a == b

    def test_ray_symmetry(self):
        x = np.random.default_rng(12).normal(size=(60, 2))
        hat = np.array([0.1, -0.2])
        e1 = np.array([1.0, 0.0])
        method = MethodSpec(MethodKind.STUDENTIZED)
        radius = default_search_radius(method, mean_loss(2), hat, x, direction=e1)
        fwd, back = ray_widths(method, mean_loss(2), hat, x, [e1, -e1], search_radius=radius)
        assert fwd.width == pytest.approx(back.width, abs=1e-12)
        assert fwd.width >= 0.0

    def test_ray_coordinates_exchangeable(self):
        rng = np.random.default_rng(13)
        method = MethodSpec(MethodKind.STUDENTIZED)
        w1, w2 = [], []
        for _ in range(60):
            x = rng.normal(size=(400, 2))
            hat = x[:200].mean(axis=0)
            a, b = ray_widths(method, mean_loss(2), hat, x[200:], np.eye(2))
            w1.append(a.width)
            w2.append(b.width)
        assert np.median(w1) == pytest.approx(np.median(w2), rel=0.2)

    def test_bad_direction(self):
        with pytest.raises(DomainError):
            ray_widths(MethodSpec(MethodKind.STUDENTIZED), mean_loss(2), [0, 0], np.zeros((4, 2)), [[1.0, 1.0]])

    def test_one_dimensional_only(self):
        with pytest.raises(DomainError):
            interval_hull_1d(MethodSpec(MethodKind.STUDENTIZED), mean_loss(2), [0, 0], np.zeros((4, 2)))


def test_eb_invariant_to_joint_rescaling():
    rng = np.random.default_rng(14)
    x = rng.normal(size=(120, 2))
    z = np.column_stack([np.where(x[:, 0] + rng.normal(size=120) >= 0, 1.0, -1.0), x])
    hat = np.array([1.0, 0.0])
    for _ in range(200):
        phi = rng.uniform(0, 2 * np.pi)
        theta = np.array([np.cos(phi), np.sin(phi)])
        full = contains(MethodSpec(MethodKind.EB, b0=2.0), manski_loss(2), theta, hat, z)
        half = contains(MethodSpec(MethodKind.EB, b0=1.0), scaled(manski_loss(2), 0.5), theta, hat, z)
        assert full.contained == half.contained
