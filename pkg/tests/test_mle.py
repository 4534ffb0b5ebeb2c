import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from raretype.mle import (
    LoglikSurface,
    SurfaceGrid,
    fit_mle,
    loglik_surface,
    phi_of,
    symmetry_diagnostic,
    theta_alpha_of,
)
from raretype.partitions import IntegerPartition, SetPartition, to_integer_partition
from raretype.pitman import PdParams, crp_sample, eppf_log
from raretype.workbench import dutch_fixture


@pytest.fixture(scope="module")
def dutch_fit():
    return fit_mle(dutch_fixture())


class TestPhi:
    def test_reference_values(self):
        # direct arithmetic: phi = n (1 - alpha) / (n + 1 + theta)
        phi = phi_of(PdParams(0.51, 216.0), 18925)
        assert phi == pytest.approx(18925 * 0.49 / 19142, abs=1e-12)
        assert round(phi, 4) == 0.4844

    def test_alpha_near_one_sends_phi_to_zero(self):
        assert phi_of(PdParams(1 - 1e-9, 5.0), 100) == pytest.approx(0.0, abs=1e-9)

    @given(
        st.floats(0.05, 0.95),
        st.floats(0.0, 500.0),
        st.integers(1, 10**6),
    )
    def test_round_trip(self, alpha, theta, n):
        phi = phi_of(PdParams(alpha, theta), n)
        back = theta_alpha_of(phi, theta, n)
        assert back.alpha == pytest.approx(alpha, abs=1e-12)
        assert phi_of(back, n) == pytest.approx(phi, abs=1e-12)

    def test_inverse_domain_error(self):
        with pytest.raises(ValueError):
            theta_alpha_of(2.0, 0.0, 10)  # alpha would go negative
        with pytest.raises(ValueError):
            theta_alpha_of(-0.1, 0.0, 10)


class TestFit:
    def test_dutch_fixture(self, dutch_fit):
        assert dutch_fit.converged
        assert 0.59 <= dutch_fit.alpha_hat <= 0.65
        assert 17.0 <= dutch_fit.theta_hat <= 27.0
        assert dutch_fit.hessian is not None
        assert dutch_fit.phi_hat == pytest.approx(
            phi_of(dutch_fit.params(), dutch_fit.n), abs=1e-12
        )
        # n = 2085 is small enough to carry the small-database warning
        assert any("Gaussian" in w for w in dutch_fit.warnings) is False or dutch_fit.n < 500

    def test_single_pair_degenerate(self):
        fit = fit_mle(SetPartition.from_blocks([[1, 2]]))
        assert not fit.converged
        assert "single-block" in fit.diagnosis

    def test_all_singletons_degenerate(self):
        fit = fit_mle(IntegerPartition((1,), (40,)))
        assert not fit.converged
        assert "no coincidences" in fit.diagnosis

    def test_one_observation_degenerate(self):
        fit = fit_mle(IntegerPartition((1,), (1,)))
        assert not fit.converged

    def test_small_n_warning_threshold(self):
        pi = IntegerPartition((1, 2), (5, 3))
        assert any("not validated" in w for w in fit_mle(pi).warnings)
        assert fit_mle(pi, small_n_threshold=5).warnings == ()

    def test_maximum_dominates_random_probes(self, dutch_fit):
        pi = dutch_fixture()
        rng = np.random.default_rng(7)
        for _ in range(100):
            alpha = rng.uniform(0.01, 0.99)
            theta = rng.uniform(-alpha + 0.01, 500.0)
            assert eppf_log(pi, PdParams(alpha, theta)) <= dutch_fit.loglik_at_max + 1e-9

    def test_doubled_database_smoke(self):
        pi = dutch_fixture()
        doubled = IntegerPartition(pi.a, tuple(2 * x for x in pi.r))
        fit = fit_mle(doubled)
        assert fit.converged
        assert math.isfinite(fit.loglik_at_max)

    def test_recovery_quick(self):
        # seed-averaged recovery of the generating discount at modest n
        hats = []
        for seed in range(3):
            plan = crp_sample(4000, PdParams(0.5, 50.0), seed=seed)
            fit = fit_mle(to_integer_partition(plan.to_set_partition()))
            assert fit.converged
            hats.append(fit.alpha_hat)
        assert abs(np.mean(hats) - 0.5) < 0.06

    def test_params_accessor_raises_on_degenerate(self):
        fit = fit_mle(IntegerPartition((1,), (3,)))
        with pytest.raises(ValueError):
            fit.params()

    def test_to_dict_round_trips_json(self, dutch_fit):
        import json

        payload = json.dumps(dutch_fit.to_dict())
        back = json.loads(payload)
        assert back["converged"] is True
        assert back["alpha_hat"] == dutch_fit.alpha_hat


class TestGradientKernel:
    @given(
        st.floats(0.1, 0.9),
        st.floats(0.5, 60.0),
    )
    def test_analytic_gradient_matches_direct_sum_differences(self, alpha, theta):
        # cross-route check: digamma-based gradient against forward
        # differences of the rising-factorial evaluation
        from raretype.mle import _loglik_and_grad, _loglik_terms

        pi = IntegerPartition((1, 2, 3, 7), (6, 3, 2, 1))
        n, k, a_big, r_big = _loglik_terms(pi)

        def direct(al, th):
            return eppf_log(pi, PdParams(al, th))

        _, ga, gt = _loglik_and_grad(n, k, a_big, r_big, alpha, theta)
        h = 1e-6
        fd_a = (direct(alpha + h, theta) - direct(alpha, theta)) / h
        fd_t = (direct(alpha, theta + h) - direct(alpha, theta)) / h
        assert ga == pytest.approx(fd_a, rel=1e-3, abs=1e-5)
        assert gt == pytest.approx(fd_t, rel=1e-3, abs=1e-5)

    def test_tight_central_difference_agreement(self):
        from raretype.mle import _loglik_and_grad, _loglik_terms

        pi = IntegerPartition((1, 2, 5), (9, 4, 2))
        n, k, a_big, r_big = _loglik_terms(pi)
        rng = np.random.default_rng(5)
        for _ in range(10):
            alpha = rng.uniform(0.15, 0.85)
            theta = rng.uniform(0.5, 40.0)
            _, ga, gt = _loglik_and_grad(n, k, a_big, r_big, alpha, theta)
            h = 1e-5
            fd_a = (
                eppf_log(pi, PdParams(alpha + h, theta)) - eppf_log(pi, PdParams(alpha - h, theta))
            ) / (2 * h)
            fd_t = (
                eppf_log(pi, PdParams(alpha, theta + h)) - eppf_log(pi, PdParams(alpha, theta - h))
            ) / (2 * h)
            assert ga == pytest.approx(fd_a, rel=1e-5, abs=1e-8)
            assert gt == pytest.approx(fd_t, rel=1e-5, abs=1e-8)


def _strict_local_maxima(surface):
    vals, valid = surface.rel_loglik, surface.valid
    out = []
    ni, nj = vals.shape
    for i in range(ni):
        for j in range(nj):
            if not valid[i, j]:
                continue
            neigh = [
                vals[x, y]
                for x in (i - 1, i, i + 1)
                for y in (j - 1, j, j + 1)
                if (x, y) != (i, j) and 0 <= x < ni and 0 <= y < nj and valid[x, y]
            ]
            if neigh and all(vals[i, j] > v for v in neigh):
                out.append((i, j))
    return out


class TestSurface:
    def test_mode_value_zero_and_centered(self, dutch_fit):
        surf = loglik_surface(dutch_fixture(), dutch_fit)
        ci, cj = len(surf.phi) // 2, len(surf.theta) // 2
        assert surf.rel_loglik[ci, cj] == 0.0
        assert np.nanmax(surf.rel_loglik) == 0.0

    def test_unimodal_on_default_grid(self, dutch_fit):
        surf = loglik_surface(dutch_fixture(), dutch_fit)
        assert _strict_local_maxima(surf) == [(len(surf.phi) // 2, len(surf.theta) // 2)]

    def test_gaussian_overlay_taylor_agreement(self, dutch_fit):
        # at the four nearest neighbours of the mode the quadratic should
        # match the surface up to the cubic remainder
        surf = loglik_surface(dutch_fixture(), dutch_fit, SurfaceGrid(5, 5, 0.5))
        ci, cj = 2, 2
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            rel = surf.rel_loglik[ci + di, cj + dj]
            overlay = surf.gauss_overlay[ci + di, cj + dj]
            assert rel == pytest.approx(overlay, rel=0.2, abs=5e-4)

    def test_wide_grid_flags_invalid_points(self, dutch_fit):
        surf = loglik_surface(dutch_fixture(), dutch_fit, SurfaceGrid(21, 21, 6.0))
        assert not surf.valid.all()
        assert np.isnan(surf.rel_loglik[~surf.valid]).all()

    def test_requires_converged_fit(self):
        degenerate = fit_mle(IntegerPartition((1,), (5,)))
        with pytest.raises(ValueError):
            loglik_surface(IntegerPartition((1,), (5,)), degenerate)

    def test_grid_spec_validation(self):
        with pytest.raises(ValueError):
            SurfaceGrid(n_phi=10)
        with pytest.raises(ValueError):
            SurfaceGrid(half_width_sd=0)

    def test_csv_shape(self, dutch_fit, tmp_path):
        surf = loglik_surface(dutch_fixture(), dutch_fit, SurfaceGrid(5, 5, 1.0))
        out = tmp_path / "surface.csv"
        with out.open("w") as fh:
            surf.write_csv(fh)
        lines = out.read_text().splitlines()
        assert lines[0] == "phi,theta,rel_loglik,gauss_overlay,valid"
        assert len(lines) == 1 + 25


def _quadratic_surface(c=0.0):
    phis = np.linspace(-1, 1, 9)
    thetas = np.linspace(-2, 2, 9)
    hess = np.array([[-2.0, 0.3], [0.3, -1.0]])
    vals = np.empty((9, 9))
    for i, p in enumerate(phis):
        for j, t in enumerate(thetas):
            d = np.array([p, t])
            vals[i, j] = 0.5 * d @ hess @ d + c
    return LoglikSurface(
        phi=phis,
        theta=thetas,
        rel_loglik=vals,
        gauss_overlay=vals.copy(),
        valid=np.ones((9, 9), dtype=bool),
        mode=(0.0, 0.0),
        hessian=hess,
        covariance=np.linalg.inv(-hess),
    )


class TestSymmetry:
    def test_quadratic_scores_zero(self):
        assert symmetry_diagnostic(_quadratic_surface()).score == pytest.approx(0.0, abs=1e-12)

    def test_invariant_under_constant_shift(self, dutch_fit):
        surf = loglik_surface(dutch_fixture(), dutch_fit, SurfaceGrid(9, 9, 2.0))
        base = symmetry_diagnostic(surf).score
        shifted = LoglikSurface(
            phi=surf.phi,
            theta=surf.theta,
            rel_loglik=surf.rel_loglik + 17.5,
            gauss_overlay=surf.gauss_overlay,
            valid=surf.valid,
            mode=surf.mode,
            hessian=surf.hessian,
            covariance=surf.covariance,
        )
        assert symmetry_diagnostic(shifted).score == pytest.approx(base, rel=1e-12)

    def test_dutch_score_reported(self, dutch_fit):
        surf = loglik_surface(dutch_fixture(), dutch_fit)
        rep = symmetry_diagnostic(surf)
        assert rep.score >= 0.0 and math.isfinite(rep.score)
        assert rep.pairs_checked > 0
