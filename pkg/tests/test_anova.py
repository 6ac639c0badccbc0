import numpy as np
import pytest

from skimfa import ridge
from skimfa.anova import (
    AnovaDecomposition,
    change_basis,
    decompose,
    empirical_joint_sampler,
    empirical_product_anova,
    empirical_product_sampler,
    extract_effect,
    select,
    variance_decomposition,
)
from skimfa.basis import PolynomialSpec, SplineSpec, build_library
from skimfa.kernel import SkimHyperParams
from skimfa.trainer import TrainConfig, fit


@pytest.fixture(scope="module")
def small_model():
    """Interaction model fit on x0 + x1*x2 with 6 covariates."""
    rng = np.random.default_rng(0)
    n = 150
    X = rng.uniform(-1, 1, (n, 6))
    Y = X[:, 0] + X[:, 1] * X[:, 2] + 0.05 * rng.normal(size=n)
    model, _ = fit(X, Y, spec=SplineSpec(4), Q=2, config=TrainConfig(num_iters=150, seed=1))
    return X, Y, model


class TestSelect:
    def test_support_of_kappa(self):
        hp = SkimHyperParams.from_kappa([0.0, 0.3, 0.0], np.ones(3), 0.1)
        assert select(hp) == (1,)

    def test_empty_support(self):
        hp = SkimHyperParams.from_kappa(np.zeros(4), np.ones(3), 0.1)
        assert select(hp) == ()

    def test_unselected_coordinates_do_not_move_predictions(self, small_model):
        X, _, model = small_model
        chosen = set(select(model.hp))
        unselected = [i for i in range(6) if i not in chosen]
        if not unselected:
            pytest.skip("run selected everything")
        before = ridge.predict(model, X[:20])
        Xp = X[:20].copy()
        Xp[:, unselected] += 0.37
        np.testing.assert_array_equal(ridge.predict(model, Xp), before)


class TestExtractEffect:
    def test_zero_theta_gives_zero_function(self, small_model):
        X, _, model = small_model
        kappa = model.hp.kappa.copy()
        kappa[0] = 0.0
        hp0 = SkimHyperParams.from_kappa(kappa, model.hp.eta, model.hp.sigma_noise)
        model0 = ridge.FittedModel(model.alpha, model.train_X, hp0, model.lib, model.Q)
        fn = extract_effect(model0, (0,))
        np.testing.assert_array_equal(fn(np.linspace(-1, 1, 9)), np.zeros(9))

    def test_order_cap(self, small_model):
        _, _, model = small_model
        with pytest.raises(ValueError, match="interaction order"):
            extract_effect(model, (0, 1, 2))

    def test_sum_identity(self, small_model):
        X, _, model = small_model
        rng = np.random.default_rng(2)
        pts = rng.uniform(-1, 1, (100, 6))
        decomp = decompose(model)
        np.testing.assert_allclose(
            decomp.predict(pts), ridge.predict(model, pts), atol=1e-10
        )

    def test_product_measure_orthogonality_mc(self, small_model):
        X, _, model = small_model
        decomp = decompose(model)
        rng = np.random.default_rng(3)
        sample = empirical_product_sampler(X, rng)(40_000)
        for V, fn in decomp.effects.items():
            vals = fn(sample[:, list(V)])
            se = vals.std(ddof=1) / np.sqrt(vals.size)
            assert abs(vals.mean()) <= 3.0 * se + 1e-12
        # pair effects uncorrelated with their own mains
        for V, fn in decomp.effects.items():
            if len(V) != 2:
                continue
            pair_vals = fn(sample[:, list(V)])
            for i in V:
                main = decomp.effects.get((i,))
                if main is None:
                    continue
                main_vals = main(sample[:, i])
                cov = np.mean(pair_vals * main_vals)
                se = np.std(pair_vals * main_vals, ddof=1) / np.sqrt(sample.shape[0])
                assert abs(cov) <= 3.0 * se + 1e-12


class TestVarianceDecomposition:
    def test_single_effect_owns_all_variance(self, small_model):
        X, _, model = small_model
        effect = extract_effect(model, (0,))
        decomp = AnovaDecomposition(
            measure="product", intercept=0.0, effects={(0,): effect}
        )
        out = variance_decomposition(decomp, X)
        assert out.shares[(0,)] == pytest.approx(1.0)

    def test_constant_model_all_zero(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(-1, 1, (30, 3))
        lib = build_library(X, PolynomialSpec(1))
        hp = SkimHyperParams.from_kappa(np.zeros(3), np.ones(3), 0.3)
        model = ridge.solve(lib, hp, X, rng.normal(size=30), 2)
        out = variance_decomposition(decompose(model), X)
        assert out.sum_of_variances == 0.0
        assert all(v == 0.0 for v in out.shares.values())

    def test_additive_variance_identity(self, small_model):
        X, _, model = small_model
        decomp = decompose(model)
        rng = np.random.default_rng(5)
        sample = empirical_product_sampler(X, rng)(100_000)
        out = variance_decomposition(decomp, sample)
        rel = abs(out.sum_of_variances - out.variance_of_sum) / out.variance_of_sum
        assert rel <= 0.02

    def test_empty_sample_rejected(self, small_model):
        _, _, model = small_model
        with pytest.raises(ValueError):
            variance_decomposition(decompose(model), np.zeros((0, 6)))


def fit_product_toy(rho=0.0, n=400, seed=0, coef=100.0, offset=-50.0):
    """Ridge fit of coef * x0 * x1 + offset on (optionally correlated) normals."""
    rng = np.random.default_rng(seed)
    cov = np.array([[1.0, rho], [rho, 1.0]])
    X2 = rng.multivariate_normal([0.0, 0.0], cov, size=n)
    X = np.column_stack([X2, rng.normal(size=n)])  # third covariate, Q < p
    Y = coef * X[:, 0] * X[:, 1] + offset
    lib = build_library(X, PolynomialSpec(1))
    hp = SkimHyperParams.from_kappa(np.array([0.9, 0.9, 0.0]), np.ones(3), 1e-4)
    model = ridge.solve(lib, hp, X, Y, 2)
    return X, model


class TestChangeBasis:
    def test_joint_reconstruction_exact(self):
        X, model = fit_product_toy(rho=0.6, seed=6)
        decomp = decompose(model)
        rng = np.random.default_rng(7)
        joint = change_basis(model, decomp, empirical_joint_sampler(X, rng), 5000)
        pts = X[:100]
        np.testing.assert_allclose(
            joint.predict(pts), ridge.predict(model, pts), atol=1e-8
        )
        assert joint.measure == "joint"

    def test_projection_satisfies_normal_equations(self):
        X, model = fit_product_toy(rho=0.5, seed=30)
        rng = np.random.default_rng(31)
        joint = change_basis(
            model, decompose(model), empirical_joint_sampler(X, rng), 4000
        )
        for coeffs in joint.pair_projections.values():
            assert coeffs.normal_eq_residual <= 1e-8

    def test_product_sampler_is_near_identity(self):
        # With mu equal to the product of the marginals the projections are
        # pure Monte Carlo noise, so the grid deviation between the two
        # decompositions must shrink with W (monotone within 2 standard
        # errors across replicates).
        X, model = fit_product_toy(rho=0.0, seed=8)
        decomp = decompose(model)
        rng = np.random.default_rng(9)
        grid = rng.uniform(-1.5, 1.5, (200, 3))
        base = {V: fn(grid[:, list(V)]) for V, fn in decomp.effects.items()}

        def max_grid_dev(joint):
            dev = 0.0
            for V, fn in joint.effects.items():
                dev = max(dev, float(np.max(np.abs(fn(grid[:, list(V)]) - base[V]))))
            return dev

        means, ses = [], []
        for w in (1_000, 10_000, 100_000):
            devs = [
                max_grid_dev(
                    change_basis(model, decomp, empirical_product_sampler(X, rng), w)
                )
                for _ in range(6)
            ]
            means.append(np.mean(devs))
            ses.append(np.std(devs, ddof=1) / np.sqrt(len(devs)))
        assert means[1] <= means[0] + 2.0 * np.hypot(ses[0], ses[1])
        assert means[2] <= means[1] + 2.0 * np.hypot(ses[1], ses[2])
        assert means[2] < means[0]

    def test_correlated_intercept_shift(self):
        # E_mu[100 x0 x1 - 50] = 100 rho - 50 = 40 at rho = 0.9, while the
        # product-measure intercept stays near -50.
        X, model = fit_product_toy(rho=0.9, n=4000, seed=10)
        decomp = decompose(model)
        assert decomp.intercept == pytest.approx(-50.0, abs=1.0)
        rng = np.random.default_rng(11)

        def gaussian_mu(size):
            cov = np.array([[1.0, 0.9], [0.9, 1.0]])
            first = rng.multivariate_normal([0.0, 0.0], cov, size=size)
            return np.column_stack([first, rng.normal(size=size)])

        joint = change_basis(model, decomp, gaussian_mu, 100_000)
        assert joint.intercept == pytest.approx(40.0, abs=1.0)

    def test_requires_pairwise_model(self):
        rng = np.random.default_rng(12)
        X = rng.uniform(-1, 1, (30, 3))
        lib = build_library(X, PolynomialSpec(1))
        hp = SkimHyperParams.from_kappa(np.full(3, 0.5), np.ones(2), 0.3)
        model = ridge.solve(lib, hp, X, rng.normal(size=30), 1)
        with pytest.raises(ValueError, match="Q = 2"):
            change_basis(model, decompose(model), empirical_joint_sampler(X, rng), 100)

    def test_sample_count_floor(self):
        X, model = fit_product_toy(seed=13)
        decomp = decompose(model)
        rng = np.random.default_rng(13)
        with pytest.raises(ValueError, match="Monte Carlo samples"):
            change_basis(model, decomp, empirical_joint_sampler(X, rng), 3)

    def test_rank_deficient_design_names_pair(self):
        X, model = fit_product_toy(seed=14)
        decomp = decompose(model)

        def degenerate_sampler(size):
            rows = np.zeros((size, 3))
            rows[:, 2] = np.random.default_rng(0).normal(size=size)
            return rows  # columns 0 and 1 constant -> collinear design

        with pytest.raises(ValueError, match=r"pair \(0, 1\)"):
            change_basis(model, decomp, degenerate_sampler, 500)


class TestEmpiricalProductAnova:
    def test_constant_predictor(self):
        X = np.random.default_rng(15).uniform(-1, 1, (40, 3))
        decomp = empirical_product_anova(lambda rows: np.full(rows.shape[0], 7.0), X)
        assert decomp.intercept == pytest.approx(7.0, abs=1e-12)
        for V, fn in decomp.effects.items():
            vals = fn(X[:6, list(V)])
            np.testing.assert_allclose(vals, 0.0, atol=1e-12)

    def test_linear_predictor_recovers_centered_main(self):
        rng = np.random.default_rng(16)
        X = rng.uniform(-1, 1, (50, 3))
        m = X[:, 0].mean()
        decomp = empirical_product_anova(lambda rows: rows[:, 0], X)
        grid = np.linspace(-1, 1, 7)
        np.testing.assert_allclose(decomp.effects[(0,)](grid), grid - m, atol=1e-12)
        np.testing.assert_allclose(decomp.effects[(1,)](grid), 0.0, atol=1e-12)

    def test_pure_interaction_recovered_exactly(self):
        # Zero-mean, empirically orthogonal columns make the lower-order
        # terms vanish, so the pair effect is the product itself.
        rng = np.random.default_rng(17)
        a = rng.normal(size=24)
        b = rng.normal(size=24)
        a -= a.mean()
        b -= b.mean() + (a @ b) / (a @ a) * a  # orthogonalize b against a and 1
        b -= b.mean()
        X = np.column_stack([a, b])
        assert abs(a @ b) < 1e-10 and abs(a.sum()) < 1e-10 and abs(b.sum()) < 1e-10
        decomp = empirical_product_anova(lambda rows: rows[:, 0] * rows[:, 1], X)
        grid = rng.uniform(-1, 1, (30, 2))
        np.testing.assert_allclose(
            decomp.effects[(0, 1)](grid), grid[:, 0] * grid[:, 1], atol=1e-10
        )
        np.testing.assert_allclose(decomp.effects[(0,)](grid[:, 0]), 0.0, atol=1e-10)
        np.testing.assert_allclose(decomp.effects[(1,)](grid[:, 1]), 0.0, atol=1e-10)

    def test_sum_identity_for_pairwise_predictor(self):
        rng = np.random.default_rng(18)
        X = rng.uniform(-1, 1, (35, 3))

        def predictor(rows):
            return 1.5 + rows[:, 0] - 2.0 * rows[:, 1] * rows[:, 2]

        decomp = empirical_product_anova(predictor, X)
        pts = rng.uniform(-1, 1, (20, 3))
        np.testing.assert_allclose(decomp.predict(pts), predictor(pts), atol=1e-10)

    def test_order_validation(self):
        X = np.random.default_rng(19).uniform(-1, 1, (10, 2))
        with pytest.raises(ValueError):
            empirical_product_anova(lambda r: r[:, 0], X, order=3)
