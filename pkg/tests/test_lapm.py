
import numpy as np
import pytest

from lineuplab.errors import AdaptationWarning, DomainError
from lineuplab.lapm import (
    LapmConfig,
    MalaSchedule,
    batch_means_se,
    grad_log_posterior,
    lapm,
    lapm_cv,
    lapm_map,
    lapm_rank,
    log_posterior,
    mala_sample,
    select_tau,
    spectral_basis,
)
from lineuplab.model import AggregatedRecord, as_lineup, build_line_graph


def graph_of(*specs):
    return build_line_graph([AggregatedRecord(as_lineup(s), pm, 60.0) for s, pm in specs])


@pytest.fixture(scope="module")
def path3():
    # A -- AB -- B, weights 1/2
    return graph_of(("A", 3), ("A;B", 1), ("B", -2))


@pytest.fixture(scope="module")
def small():
    return graph_of(("A", 4), ("B", 1), ("C", -3), ("A;B", 2), ("B;C", -1), ("A;C", 0))


def posterior_moments(lg, lam, sigma2):
    P = np.eye(lg.n) / sigma2 + lam * lg.laplacian
    cov = np.linalg.inv(P)
    return cov @ lg.y / sigma2, cov


class TestTau:
    def test_gap_rule(self):
        assert select_tau([0, 0.1, 0.2, 5.0, 5.1], min_tau=1) == 3

    def test_floor(self):
        assert select_tau([0, 0.1, 0.2, 5.0, 5.1]) == 5
        assert select_tau([0, 9.0, 9.1]) == 3

    def test_equal_gaps_take_last(self):
        assert select_tau(np.arange(8.0), min_tau=1) == 7

    def test_toy_spectrum(self, toy_graph):
        xi = toy_graph.eigenvalues
        gaps = [xi[i + 1] - xi[i] for i in range(len(xi) - 1)]
        best = max(i for i, g in enumerate(gaps) if g == max(gaps)) + 1
        assert select_tau(xi, min_tau=1) == best
        assert spectral_basis(toy_graph).tau == max(best, 5)

    def test_basis(self, toy_graph):
        b = spectral_basis(toy_graph, 7)
        assert b.phi.shape == (20, 7)
        assert np.abs(b.phi.T @ b.phi - np.eye(7)).max() < 1e-8
        assert spectral_basis(toy_graph, "full").tau == 20
        with pytest.raises(ValueError):
            spectral_basis(toy_graph, 21)


class TestMap:
    def test_unpenalized_full(self, toy_graph):
        b = spectral_basis(toy_graph, "full")
        np.testing.assert_allclose(lapm_map(toy_graph, b, 0.0).beta_map, toy_graph.y, atol=1e-10)

    def test_null_direction_unshrunk(self, toy_graph):
        b = spectral_basis(toy_graph, "full")
        fit = lapm_map(toy_graph, b, 5.0)
        assert fit.theta_map[0] == pytest.approx(b.phi[:, 0] @ toy_graph.y)

    @pytest.mark.parametrize("kappa", [0.1, 1.0, 2.0, 10.0])
    def test_dense_solve(self, toy_graph, kappa):
        b = spectral_basis(toy_graph, "full")
        direct = np.linalg.solve(np.eye(toy_graph.n) + kappa * toy_graph.laplacian, toy_graph.y)
        np.testing.assert_allclose(lapm_map(toy_graph, b, kappa).beta_map, direct, atol=1e-8)

    def test_beta_is_phi_theta(self, toy_graph):
        b = spectral_basis(toy_graph)
        fit = lapm_map(toy_graph, b, 1.0)
        np.testing.assert_allclose(fit.beta_map, b.phi @ fit.theta_map, atol=1e-10)

    def test_optimality(self, toy_graph):
        b = spectral_basis(toy_graph, "full")
        kappa = 1.5
        fit = lapm_map(toy_graph, b, kappa)

        def obj(beta):
            r = toy_graph.y - beta
            return r @ r + kappa * beta @ toy_graph.laplacian @ beta

        best = obj(fit.beta_map)
        rng = np.random.default_rng(0)
        for _ in range(200):
            d = rng.normal(size=toy_graph.n)
            assert obj(fit.beta_map + 1e-3 * d / np.linalg.norm(d)) >= best

    def test_smoothing(self, toy_graph):
        b = spectral_basis(toy_graph, "full")
        L = toy_graph.laplacian
        raw = toy_graph.y @ L @ toy_graph.y
        for kappa in (0.0, 0.01, 0.5, 3.0, 100.0):
            beta = lapm_map(toy_graph, b, kappa).beta_map
            assert beta @ L @ beta <= raw + 1e-9

    def test_cv(self, toy_graph):
        b = spectral_basis(toy_graph, "full")
        k1, curve = lapm_cv(toy_graph, b, folds=5, seed=3)
        k2, _ = lapm_cv(toy_graph, b, folds=5, seed=3)
        assert k1 == k2 and k1 in [k for k, _ in curve]

    def test_weighted_cv_path_matches_direct(self, toy_graph):
        # held-out vertices get weight zero; compare with a direct solve
        from lineuplab.lapm import _kappa_path, solve_theta

        b = spectral_basis(toy_graph, 9)
        w = np.ones(toy_graph.n)
        w[[2, 7, 11]] = 0
        for kappa, beta in zip([0.3, 4.0], _kappa_path(b, toy_graph.y, w, [0.3, 4.0])):
            direct = b.phi @ solve_theta(b.phi, b.xi, toy_graph.y, kappa, w)
            np.testing.assert_allclose(beta, direct, atol=1e-8)


class TestGradient:
    def test_stationary_at_map(self, toy_graph):
        b = spectral_basis(toy_graph)
        lam, s2 = 0.8, 2.5
        fit = lapm_map(toy_graph, b, lam * s2)
        g, _ = grad_log_posterior(fit.theta_map, s2, toy_graph, b, lam)
        assert np.abs(g).max() < 1e-8

    def test_finite_difference(self, toy_graph):
        b = spectral_basis(toy_graph, 8)
        rng = np.random.default_rng(2)
        theta, s2, lam = rng.normal(size=8), 1.7, 0.6
        y = toy_graph.y
        g, gs = grad_log_posterior(theta, s2, y, b, lam)
        h = 1e-6
        fd = np.array([
            (log_posterior(theta + h * e, s2, y, b, lam) - log_posterior(theta - h * e, s2, y, b, lam)) / (2 * h)
            for e in np.eye(8)
        ])
        np.testing.assert_allclose(g, fd, rtol=1e-5)
        fds = (log_posterior(theta, s2 + h, y, b, lam) - log_posterior(theta, s2 - h, y, b, lam)) / (2 * h)
        assert gs == pytest.approx(fds, rel=1e-5)

    def test_lambda_zero(self, toy_graph):
        b = spectral_basis(toy_graph, 6)
        theta = np.linspace(-1, 1, 6)
        g, _ = grad_log_posterior(theta, 2.0, toy_graph, b, 0.0)
        np.testing.assert_allclose(g, b.phi.T @ (toy_graph.y - b.phi @ theta) / 2.0)

    def test_domain(self, toy_graph):
        b = spectral_basis(toy_graph)
        with pytest.raises(DomainError):
            grad_log_posterior(np.zeros(b.tau), 0.0, toy_graph, b, 1.0)


class TestMala:
    def test_schedule(self):
        s = MalaSchedule()
        assert (s.retained, s.thin, s.burn_in_fraction) == (1000, 5, 0.10)
        assert s.total_iters == 5556 and s.burn_in == 556
        assert s.total_iters - s.burn_in == 5 * 1000

    def test_gaussian_mean(self, small):
        lam, s2 = 0.7, 1.3
        b = spectral_basis(small, "full")
        smp = mala_sample(small, b, lam, seed=4, sigma2=s2, sigma2_update="fixed")
        beta = smp.beta_draws(b)
        assert beta.shape == (1000, small.n)
        mean, _ = posterior_moments(small, lam, s2)
        se = batch_means_se(beta)
        assert np.all(np.abs(beta.mean(axis=0) - mean) < 3 * se)

    def test_path_variance(self, path3):
        lam, s2 = 1.0, 1.0
        b = spectral_basis(path3, "full")
        smp = mala_sample(path3, b, lam, seed=5, sigma2=s2, sigma2_update="fixed")
        _, cov = posterior_moments(path3, lam, s2)
        var = smp.beta_draws(b).var(axis=0, ddof=1)
        np.testing.assert_allclose(var, np.diag(cov), rtol=0.2)

    def test_unpreconditioned(self, small):
        lam, s2 = 0.7, 1.3
        b = spectral_basis(small, "full")
        smp = mala_sample(small, b, lam, seed=6, sigma2=s2, sigma2_update="fixed", precondition=False)
        mean, _ = posterior_moments(small, lam, s2)
        beta = smp.beta_draws(b)
        assert np.all(np.abs(beta.mean(axis=0) - mean) < 3 * batch_means_se(beta))

    def test_deterministic(self, small):
        b = spectral_basis(small, "full")
        a = mala_sample(small, b, 1.0, MalaSchedule(200), seed=9)
        c = mala_sample(small, b, 1.0, MalaSchedule(200), seed=9)
        assert np.array_equal(a.theta_draws, c.theta_draws)
        assert np.array_equal(a.sigma2_draws, c.sigma2_draws)

    @pytest.mark.parametrize("mode", ["gibbs", "mala"])
    def test_sigma2_modes(self, small, mode):
        b = spectral_basis(small, "full")
        smp = mala_sample(small, b, 1.0, MalaSchedule(300), seed=1, sigma2_update=mode)
        assert np.all(smp.sigma2_draws > 0) and 0 < smp.acceptance_rate < 1

    def test_strong_prior_flattens(self, small):
        b = spectral_basis(small, "full")
        smp = mala_sample(small, b, 1e4, MalaSchedule(300), seed=2, sigma2=1.0, sigma2_update="fixed")
        beta = smp.beta_draws(b)
        assert beta.std(axis=1).mean() < 0.05 * small.y.std()

    def test_adaptation_warning(self, small):
        b = spectral_basis(small, "full")
        sched = MalaSchedule(100, 1, 0.0)
        with pytest.warns(AdaptationWarning):
            mala_sample(small, b, 1.0, sched, seed=0, sigma2=1.0, sigma2_update="fixed", step_size=50.0)

    def test_bad_mode(self, small):
        with pytest.raises(ValueError):
            mala_sample(small, spectral_basis(small, "full"), 1.0, sigma2_update="hmc")


class TestRank:
    def test_kappa_zero_is_pm(self, toy_ext):
        res, fit, basis, lg = lapm(toy_ext, LapmConfig(tau="full", kappa=0.0))
        assert lapm_rank(fit, 1).order() == [as_lineup(p) for p in "ABCDE"]
        assert [r.score for r in lapm_rank(fit, 1).rows] == pytest.approx([5, 3, 2, -1, -3])

    def test_dense_ranking(self, toy_ext, toy_graph):
        _, fit, _, _ = lapm(toy_ext, LapmConfig(tau="full", kappa=2.0))
        direct = np.linalg.solve(np.eye(20) + 2.0 * toy_graph.laplacian, toy_graph.y)
        expect = sorted((g for g in toy_graph.nodes if g.size == 2),
                        key=lambda g: -direct[toy_graph.index(g)])
        assert lapm_rank(fit, 2).order() == expect

    def test_empty(self, toy_ext):
        _, fit, _, _ = lapm(toy_ext, LapmConfig(kappa=1.0))
        assert len(lapm_rank(fit, 4)) == 0

    def test_samples(self, small):
        b = spectral_basis(small, "full")
        smp = mala_sample(small, b, 1.0, MalaSchedule(200), seed=3)
        t = lapm_rank(smp, 1, b)
        assert len(t) == 3
        with pytest.raises(ValueError):
            lapm_rank(smp, 1)

    def test_config_meta(self, toy_ext):
        res, fit, basis, lg = lapm(toy_ext)
        assert res.meta["kappa_policy"] == "cv" and res.meta["tau"] == basis.tau == 5
        assert res.method == "LAPM" and len(res.per_unit) == 20
