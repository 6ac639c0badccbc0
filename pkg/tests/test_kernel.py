import numpy as np
import pytest

from skimfa.basis import SplineSpec, build_library
from skimfa.kernel import (
    SkimHyperParams,
    bruteforce_from_k1,
    elementary_symmetric,
    eval_skim,
    eval_skim_bruteforce,
    gram_matrix,
    skim_kernel_from_k1,
)


def random_instance(rng, p=None, Q=None, n=14):
    p = p if p is not None else int(rng.integers(3, 9))
    Q = Q if Q is not None else int(rng.integers(1, min(4, p)))
    X = rng.uniform(-1, 1, (n, p))
    lib = build_library(X, SplineSpec(int(rng.integers(3, 6))))
    hp = SkimHyperParams.from_kappa(
        rng.uniform(0.0, 0.9, p), rng.uniform(-1.5, 1.5, Q + 1), rng.uniform(0.1, 1.0)
    )
    return lib, hp, X, Q


class TestHyperParams:
    def test_raw_consistency_enforced(self):
        with pytest.raises(ValueError, match="inconsistent"):
            SkimHyperParams(kappa=np.array([0.5]), eta=[1.0, 1.0],
                            sigma_noise=0.1, raw=np.array([0.0]))

    def test_from_raw_reparameterization(self):
        # raw = 1 gives U = 1/2; with c = 0 every kappa is 1/2.
        hp = SkimHyperParams.from_raw(np.ones(4), np.ones(3), 0.5, trunc_level=0.0)
        np.testing.assert_allclose(hp.kappa, 0.5, atol=1e-15)
        hp = SkimHyperParams.from_raw(np.ones(4), np.ones(3), 0.5, trunc_level=0.3)
        np.testing.assert_allclose(hp.kappa, 0.2, atol=1e-15)

    def test_truncation_zeroes_survive_round_trip(self):
        hp = SkimHyperParams.from_raw(np.array([0.1, 2.0]), np.ones(3), 0.5, 0.4)
        assert hp.kappa[0] == 0.0
        assert hp.kappa[1] > 0.0

    def test_negative_kappa_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            SkimHyperParams.from_kappa([-0.1, 0.2], np.ones(3), 0.1)

    def test_trunc_level_range(self):
        with pytest.raises(ValueError, match="trunc_level"):
            SkimHyperParams.from_kappa([0.1], np.ones(2), 0.1, trunc_level=1.0)

    def test_theta_factorization(self):
        hp = SkimHyperParams.from_kappa([0.5, 0.0, 2e-1], [2.0, 3.0, 0.5], 0.1)
        assert hp.theta(()) == pytest.approx(4.0)
        assert hp.theta((0,)) == pytest.approx(9.0 * 0.25)
        assert hp.theta((0, 1)) == 0.0
        assert hp.theta((0, 2)) == pytest.approx(0.25 * 0.25 * 0.04)
        with pytest.raises(ValueError):
            hp.theta((0, 1, 2))


class TestWorkedExamples:
    def test_three_covariate_enumeration(self):
        # mains: 1*2 + 0.25*1 + 0 = 2.25; only surviving pair (0,1):
        # 1 * 0.25 * 2 * 1 = 0.5; intercept 1.  Total 3.75.
        k1 = np.array([2.0, 1.0, 3.0])
        kappa = np.array([1.0, 0.5, 0.0])
        eta = np.ones(3)
        assert skim_kernel_from_k1(k1, kappa, eta, 2) == pytest.approx(3.75, abs=1e-12)
        assert bruteforce_from_k1(k1, kappa, eta, 2) == pytest.approx(3.75, abs=1e-12)

    def test_two_covariate_bruteforce(self):
        # Subsets {0}, {1}, {0,1} with unit weights: (3 + 4) + 3*4 = 19.
        got = bruteforce_from_k1([3.0, 4.0], [1.0, 1.0], [0.0, 1.0, 1.0], 2)
        assert got == pytest.approx(19.0, abs=1e-12)

    def test_zero_kappa_gives_intercept_only(self):
        rng = np.random.default_rng(0)
        lib, hp, X, _ = random_instance(rng, p=5, Q=2)
        hp0 = SkimHyperParams.from_kappa(np.zeros(5), hp.eta, hp.sigma_noise)
        got = eval_skim(lib, hp0, X[0], X[1], 2)
        assert got == hp.eta[0] ** 2

    def test_order_one_closed_form(self):
        rng = np.random.default_rng(1)
        k1 = rng.normal(size=6)
        kappa = rng.uniform(0, 1, 6)
        eta = rng.normal(size=2)
        expected = eta[0] ** 2 + eta[1] ** 2 * np.sum(kappa**2 * k1)
        assert bruteforce_from_k1(k1, kappa, eta, 1) == pytest.approx(expected, rel=1e-12)
        assert skim_kernel_from_k1(k1, kappa, eta, 1) == pytest.approx(expected, rel=1e-12)


class TestRecursionOracle:
    def test_matches_bruteforce_on_random_instances(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            lib, hp, X, Q = random_instance(rng)
            x, y = X[0], X[1]
            fast = eval_skim(lib, hp, x, y, Q)
            slow = eval_skim_bruteforce(lib, hp, x, y, Q)
            assert abs(fast - slow) <= 1e-10 * (1.0 + abs(slow))

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(3)
        lib, hp, X, Q = random_instance(rng, p=6, Q=3)
        a = eval_skim(lib, hp, X[2], X[5], Q)
        b = eval_skim(lib, hp, X[5], X[2], Q)
        assert a == pytest.approx(b, rel=1e-12)

    def test_q2_closed_form(self):
        # 0.5 * eta2^2 * [(sum kappa^2 k)^2 - sum kappa^4 k^2]
        #   + eta1^2 * sum kappa^2 k + eta0^2
        rng = np.random.default_rng(4)
        for _ in range(100):
            p = int(rng.integers(3, 12))
            k1 = rng.normal(size=p)
            kappa = rng.uniform(0, 1, p)
            eta = rng.normal(size=3)
            z = kappa**2 * k1
            closed = (
                0.5 * eta[2] ** 2 * (z.sum() ** 2 - np.sum(z**2))
                + eta[1] ** 2 * z.sum()
                + eta[0] ** 2
            )
            got = skim_kernel_from_k1(k1, kappa, eta, 2)
            assert got == pytest.approx(closed, abs=1e-12 * max(1.0, abs(closed)))

    def test_zeroed_covariate_is_exactly_ignored(self):
        rng = np.random.default_rng(5)
        lib, hp, X, _ = random_instance(rng, p=6, Q=2)
        kappa = hp.kappa.copy()
        kappa[3] = 0.0
        hp = SkimHyperParams.from_kappa(kappa, hp.eta, hp.sigma_noise)
        x, y = X[0].copy(), X[1].copy()
        base = eval_skim(lib, hp, x, y, 2)
        x[3], y[3] = -0.77, 0.31
        assert eval_skim(lib, hp, x, y, 2) == base

    def test_elementary_symmetric_identity(self):
        # On scalars, e_q from power sums must match direct enumeration.
        import itertools

        rng = np.random.default_rng(6)
        z = rng.normal(size=7)
        psums = [np.sum(z**s) for s in range(1, 4)]
        e = elementary_symmetric(psums, 3)
        for q in range(1, 4):
            direct = sum(np.prod(c) for c in itertools.combinations(z, q))
            assert float(e[q]) == pytest.approx(direct, rel=1e-12)


class TestGramMatrix:
    def test_single_row_matches_eval(self):
        rng = np.random.default_rng(7)
        lib, hp, X, Q = random_instance(rng, p=5, Q=2)
        K = gram_matrix(lib, hp, X[:1], X[:1], Q)
        assert K.shape == (1, 1)
        assert K[0, 0] == pytest.approx(eval_skim(lib, hp, X[0], X[0], Q), rel=1e-12)

    def test_zero_kappa_constant_matrix(self):
        rng = np.random.default_rng(8)
        lib, hp, X, _ = random_instance(rng, p=4, Q=2)
        hp0 = SkimHyperParams.from_kappa(np.zeros(4), hp.eta, hp.sigma_noise)
        K = gram_matrix(lib, hp0, X, X, 2)
        np.testing.assert_array_equal(K, np.full_like(K, hp0.eta[0] ** 2))

    @pytest.mark.parametrize("Q", [1, 2, 3])
    def test_symmetry(self, Q):
        rng = np.random.default_rng(9)
        lib, hp, X, _ = random_instance(rng, p=5, Q=Q, n=20)
        K = gram_matrix(lib, hp, X, X, Q)
        assert np.max(np.abs(K - K.T)) < 1e-12

    @pytest.mark.parametrize("Q", [1, 2, 3])
    def test_psd(self, Q):
        rng = np.random.default_rng(10)
        lib, hp, X, _ = random_instance(rng, p=6, Q=Q, n=25)
        K = gram_matrix(lib, hp, X, X, Q)
        eig = np.linalg.eigvalsh(K)
        assert eig.min() >= -1e-8 * np.trace(K)

    def test_matches_pairwise_eval(self):
        rng = np.random.default_rng(11)
        lib, hp, X, Q = random_instance(rng, p=4, Q=3, n=6)
        K = gram_matrix(lib, hp, X, X[:3], Q)
        for i in range(6):
            for j in range(3):
                assert K[i, j] == pytest.approx(eval_skim(lib, hp, X[i], X[j], Q), rel=1e-12)


class TestErrors:
    def test_order_must_be_below_dimension(self):
        rng = np.random.default_rng(12)
        lib, hp, X, _ = random_instance(rng, p=3, Q=2)
        with pytest.raises(ValueError, match="1 <= Q < p"):
            eval_skim(lib, hp, X[0], X[1], 3)

    def test_bruteforce_dimension_cap(self):
        rng = np.random.default_rng(13)
        p = 25
        X = rng.uniform(-1, 1, (30, p))
        lib = build_library(X, SplineSpec(3))
        hp = SkimHyperParams.from_kappa(np.full(p, 0.5), np.ones(3), 0.1)
        with pytest.raises(ValueError, match="p <= 20"):
            eval_skim_bruteforce(lib, hp, X[0], X[1], 2)

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(14)
        lib, hp, X, Q = random_instance(rng, p=5, Q=2)
        with pytest.raises(ValueError):
            eval_skim(lib, hp, X[0][:4], X[1], Q)
        with pytest.raises(ValueError):
            gram_matrix(lib, hp, X[:, :4], X, Q)
