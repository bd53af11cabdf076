import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from fougmm import gmm
from fougmm.covmodel import EstimationBox, FouModel, FouParams, fou_var0
from fougmm.errors import DomainError, NonConvergence, NonConvergentTail, RankDeficient
from fougmm.filters import FilterBank, build_bank, finite_difference_filter
from fougmm.gmm import (GmmFit, Identity, MomentSpec, OptimizerConfig, OracleEfficient, Trajectory,
                        TwoStep, estimate, filtered_series, g_gradient, g_hat, objective, omega,
                        auto_weighting, rate_diagnostic, rate_limits, v_theta)
from fougmm.sampler import SeedPlan, factorize, sample_path

from conftest import OuModel, WhiteNoiseModel, ZeroModel

TRUTH = np.array([0.55, 1.0, 1.0])

# Omega at (0.55, 1, 1), alpha = 0.1, orders (1, 2, 3); frozen from the
# gamma-sum evaluation after checking convergence of the lag window
OMEGA_REF = np.array([
    [0.0112831819, 0.0216310988, 0.0631480979],
    [0.0216310988, 0.0631480979, 0.2078827711],
    [0.0631480979, 0.2078827711, 0.7224778104],
])


@pytest.fixture(scope="module")
def spec3():
    return MomentSpec(build_bank((1, 2, 3), p=3), FouModel(), 0.1)


def _path(theta, N, alpha, rep, seed=7, model=None):
    model = model or FouModel()
    return sample_path(factorize(model, theta, N, alpha), SeedPlan(seed, (1,)), rep)


def test_trajectory_validation():
    with pytest.raises(DomainError):
        Trajectory([1.0], 0.1)
    with pytest.raises(DomainError):
        Trajectory([1.0, np.nan], 0.1)
    with pytest.raises(DomainError):
        Trajectory([1.0, 2.0], 0.0)
    assert Trajectory(np.arange(5), 0.1).N == 4


def test_filtered_series_examples():
    traj = Trajectory([0.0, 1.0, 2.0, 3.0], 1.0)
    assert_array_equal(filtered_series(traj, finite_difference_filter(1)), [1.0, 1.0, 1.0])
    assert_array_equal(filtered_series(Trajectory(np.full(9, 4.0), 1.0), finite_difference_filter(1)), 0.0)
    ramp = Trajectory(3.0 + 0.5 * np.arange(12), 1.0)
    assert_array_equal(filtered_series(ramp, finite_difference_filter(2)), 0.0)
    with pytest.raises(DomainError):
        filtered_series(Trajectory([1.0, 2.0], 1.0), finite_difference_filter(3))


def test_v_theta_ou_first_difference():
    spec = MomentSpec(build_bank((1,)), FouModel(fixed={"H": 0.5, "sigma": 1.0}), 0.1)
    expected = 1.0 - math.exp(-0.1)
    assert_allclose(v_theta(spec, [1.0]), [expected], rtol=1e-13)
    assert_allclose(expected, 0.0951626, atol=5e-8)


def test_v_theta_order_zero_and_scaling():
    spec = MomentSpec(build_bank((0,)), FouModel(fixed={"H": 0.7, "lambda": 1.3}), 0.5)
    assert_allclose(v_theta(spec, [0.8]), [fou_var0(FouParams(0.7, 1.3, 0.8))], rtol=1e-13)
    spec3 = MomentSpec(build_bank((1, 2, 3)), FouModel(), 0.1)
    assert_allclose(v_theta(spec3, [0.7, 1.0, 2.5]), 6.25 * v_theta(spec3, [0.7, 1.0, 1.0]), rtol=1e-13)
    assert_allclose(v_theta(spec3, FouParams(0.7, 1.0, 1.0)), v_theta(spec3, [0.7, 1.0, 1.0]))


def test_moment_spec_rank_check():
    with pytest.raises(RankDeficient):
        MomentSpec(build_bank((1, 2)), FouModel(), 0.1)
    spec = MomentSpec(build_bank((1, 2)), FouModel(fixed={"lambda": 1.0}), 0.1)
    assert spec.n_params == 2 and spec.n_moments == 2


def test_g_hat_zero_model():
    spec = MomentSpec(build_bank((1,)), ZeroModel(), 1.0)
    assert_array_equal(g_hat(spec, Trajectory(np.zeros(10), 1.0), [1.0]), [0.0])


def test_g_hat_four_points(white_noise):
    spec = MomentSpec(build_bank((1,)), white_noise, 1.0)
    traj = Trajectory([1.0, 3.0, 2.0, 5.0], 1.0)
    # differences 2, -1, 3; mean of squares 14/3; V = 2 s
    assert_allclose(g_hat(spec, traj, [0.5]), [14.0 / 3.0 - 1.0], rtol=1e-15)
    assert spec.n_terms(traj) == 3


def test_objective_quadratic_form_value():
    # g = (1, 1) with A = diag(1, 4) gives 5
    spec = MomentSpec(FilterBank((finite_difference_filter(1), finite_difference_filter(2))), ZeroModel(), 1.0)
    traj = Trajectory([0.0, 0.0, 1.0], 1.0)  # phi_1 over i = 2: 1; phi_2: 1
    g = g_hat(spec, traj, [0.0])
    assert_array_equal(g, [1.0, 1.0])
    A = np.diag([1.0, 4.0])
    assert objective(spec, traj, [0.0], A) == 5.0
    with pytest.raises(DomainError):
        objective(spec, traj, [0.0], np.eye(3))


def test_objective_nonnegative_random(spec3):
    rng = np.random.default_rng(0)
    traj = Trajectory(rng.standard_normal(200), 0.1)
    for _ in range(20):
        M = rng.standard_normal((3, 3))
        A = M @ M.T + 1e-3 * np.eye(3)
        theta = [rng.uniform(0.5, 0.99), rng.uniform(0.1, 2.5), rng.uniform(0.1, 5)]
        assert objective(spec3, traj, theta, A) >= 0.0


def test_omega_white_noise(white_noise):
    spec = MomentSpec(build_bank((1,)), white_noise, 1.0)
    res = omega(spec, [1.0], full_output=True)
    assert_allclose(res.matrix, [[12.0]], rtol=1e-15)
    assert res.converged


def test_omega_fou_reference(spec3):
    res = omega(spec3, TRUTH, full_output=True)
    assert_allclose(res.matrix, OMEGA_REF, rtol=5e-9)
    assert_array_equal(res.matrix, res.matrix.T)
    np.linalg.cholesky(res.matrix)
    assert res.error_estimate <= 1e-10


def test_omega_brute_force_small_window(spec3):
    # direct double sum over coefficients with a finite window
    K = 300
    r = FouModel().rho_grid(TRUTH, 0.1, K + 10)
    A = spec3.bank.coeff_matrix
    def gam(i, j, k):
        return sum(A[i, q] * A[j, s] * r[abs(k - q + s)] for q in range(4) for s in range(4))
    direct = np.array([[2 * sum(gam(i, j, k) ** 2 for k in range(-K, K + 1)) for j in range(3)] for i in range(3)])
    assert_allclose(direct, OMEGA_REF, rtol=1e-6)


def test_omega_nonconvergent_tail():
    # order-0 moments at H = 0.7 decay like k^-1.2 when squared: slow
    spec = MomentSpec(build_bank((0,)), FouModel(fixed={"H": 0.7, "lambda": 1.0}), 0.1)
    with pytest.raises(NonConvergentTail):
        omega(spec, [1.0], K_max=1024)


class ProductModel(WhiteNoiseModel):
    """Two parameters that only enter through their product."""

    param_names = ("a", "b")

    def rho(self, theta, t):
        a, b = theta
        return a * b * super().rho([1.0], t)


def test_g_gradient_rank_deficiency():
    spec = MomentSpec(build_bank((1, 2)), ProductModel(), 1.0)
    with pytest.raises(RankDeficient):
        g_gradient(spec, [1.0, 2.0])
    with pytest.raises(RankDeficient):
        MomentSpec(build_bank((1,)), FouModel(fixed={"H": 0.5}), 0.1)


def test_g_gradient_sigma_column(spec3):
    theta = np.array([0.7, 1.0, 1.5])
    G = g_gradient(spec3, theta)
    assert_allclose(G[:, 2], -2.0 * v_theta(spec3, theta) / theta[2], rtol=1e-6)


def test_g_gradient_ou_lambda():
    lam, sig, a = 1.3, 0.8, 0.1
    dV = -sig ** 2 / lam ** 2 * (1 - math.exp(-lam * a)) + sig ** 2 / lam * a * math.exp(-lam * a)
    spec_l = MomentSpec(build_bank((1,)), FouModel(fixed={"H": 0.5, "sigma": sig}), a)
    assert_allclose(-g_gradient(spec_l, [lam])[0, 0], dV, rtol=1e-6)


def test_g_gradient_step_halving(spec3):
    theta = np.array([0.65, 1.1, 0.9])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        G = g_gradient(spec3, theta, check=True)
    G2 = -gmm._v_jacobian(spec3, theta, scale=0.5)
    assert np.max(np.abs(G2 - G)) / np.max(np.abs(G)) < 1e-5


def test_noiseless_recovery(spec3, monkeypatch):
    target = v_theta(spec3, [0.7, 1.2, 0.8])
    monkeypatch.setattr(gmm, "sample_moments", lambda spec, traj: target.copy())
    traj = Trajectory(np.zeros(10), 0.1)
    fit = estimate(spec3, traj, Identity(), optimizer_cfg=OptimizerConfig(compute_cov=False))
    assert_allclose(fit.theta_vector, [0.7, 1.2, 0.8], rtol=1e-5)
    assert fit.objective < 1e-18 and fit.converged and not fit.boundary


def test_estimate_invariants(spec3):
    traj = _path(TRUTH, 1000, 0.1, 0)
    fit = estimate(spec3, traj, OracleEfficient(TRUTH))
    assert isinstance(fit, GmmFit) and fit.weighting == "oracle"
    assert fit.objective >= 0.0
    for rec in fit.trace:
        assert fit.objective <= objective(spec3, traj, rec.start, fit.weighting_used) + 1e-15
    lo, hi = FouModel().bounds(EstimationBox.default())
    assert np.all(fit.theta_vector >= lo) and np.all(fit.theta_vector <= hi)
    assert_allclose(fit.asym_cov, fit.asym_cov.T, rtol=1e-10)
    assert np.all(np.linalg.eigvalsh(fit.asym_cov) > 0)
    assert "theta_ref=(0.55, 1, 1)" in fit.omega_ref
    assert "oracle" in fit.summary()


def test_two_step_records_first_pass(spec3):
    traj = _path(TRUTH, 1000, 0.1, 1)
    fit = estimate(spec3, traj, TwoStep())
    assert fit.weighting == "two-step" and fit.first_pass is not None
    assert fit.first_pass.weighting == "identity"
    assert fit.omega_ref.startswith("first-pass theta=")
    assert fit.iterations >= fit.first_pass.iterations


def test_sandwich_simplifies_with_efficient_weighting():
    rng = np.random.default_rng(4)
    G = rng.standard_normal((4, 2))
    M = rng.standard_normal((4, 4))
    Om = M @ M.T + np.eye(4)
    A = np.linalg.inv(Om)
    assert_allclose(gmm.sandwich_covariance(G, A, Om, 10), np.linalg.inv(G.T @ A @ G) / 10, rtol=1e-10)


def test_auto_weighting(spec3):
    assert isinstance(auto_weighting(spec3, TRUTH), Identity)
    spec4 = MomentSpec(build_bank((1, 2, 3, 4)), FouModel(), 0.1)
    w = auto_weighting(spec4, TRUTH)
    assert isinstance(w, OracleEfficient)


def test_sigma_scaling_equivariance(spec3):
    fact = factorize(FouModel(), TRUTH, 500, 0.1)
    x = sample_path(fact, SeedPlan(11), 0).values
    cfg = OptimizerConfig(compute_cov=False)
    c = 2.5
    box = EstimationBox.from_bounds(sigma=(0.01, 30.0))
    a = estimate(spec3, Trajectory(x, 0.1), Identity(), box=box, optimizer_cfg=cfg)
    b = estimate(spec3, Trajectory(c * x, 0.1), Identity(), box=box, optimizer_cfg=cfg)
    assert_allclose(b.theta_vector[:2], a.theta_vector[:2], rtol=1e-4)
    assert_allclose(b.theta_vector[2], c * a.theta_vector[2], rtol=1e-4)


def test_degenerate_trajectory_is_flagged(spec3):
    fit = estimate(spec3, Trajectory(np.full(200, 3.0), 0.1), Identity())
    assert fit.boundary
    assert fit.theta_vector[2] == pytest.approx(0.01, abs=1e-6)
    assert "boundary" in fit.summary()


def test_non_convergence_carries_fit(spec3):
    traj = _path(TRUTH, 500, 0.1, 2)
    with pytest.raises(NonConvergence) as exc:
        estimate(spec3, traj, Identity(), optimizer_cfg=OptimizerConfig(maxiter=1, n_lhs=0))
    assert isinstance(exc.value.fit, GmmFit) and not exc.value.fit.converged


def test_step_mismatch_rejected(spec3):
    with pytest.raises(DomainError):
        estimate(spec3, Trajectory(np.zeros(50), 0.2))


def test_order_zero_warning_for_high_H():
    spec = MomentSpec(build_bank((0, 1)), FouModel(fixed={"lambda": 1.0}), 0.1)
    traj = _path(TRUTH, 300, 0.1, 0)
    with pytest.warns(RuntimeWarning, match="3/4"):
        estimate(spec, traj, Identity(), optimizer_cfg=OptimizerConfig(compute_cov=False, n_lhs=0))


def test_ergodicity_at_truth(spec3):
    N = 4000
    traj = _path(TRUTH, N, 0.1, 0, seed=99)
    g = g_hat(spec3, traj, TRUTH)
    n = spec3.n_terms(traj)
    assert np.all(np.abs(g) <= 3.0 * np.sqrt(np.diag(OMEGA_REF) / n))


def test_objective_smaller_at_truth(spec3):
    fact = factorize(FouModel(), TRUTH, 1000, 0.1)
    plan = SeedPlan(5)
    far = np.array([0.8, 0.3, 2.0])
    A = np.linalg.inv(OMEGA_REF)
    wins = 0
    for r in range(100):
        traj = sample_path(fact, plan, r)
        wins += objective(spec3, traj, TRUTH, A) < objective(spec3, traj, far, A)
    assert wins >= 95


def test_rate_limits_and_rejection():
    exact, alt = rate_limits(FouParams(0.85, 1.0, 1.0), 0.5)
    assert_allclose(exact, alt)
    assert_allclose(exact, 2 * 0.5 ** (-0.6) * (0.85 * 0.7) ** 2 / (0.7 * 0.4), rtol=1e-14)
    ex, pub = rate_limits(FouParams(0.75, 2.0, 1.0), 0.5)
    assert_allclose(ex, 4 * (0.375 / 4) ** 2 / 0.5) and assert_allclose(pub, 2 * (0.375 / 2) ** 2 / 0.5)
    with pytest.raises(DomainError):
        rate_diagnostic(FouParams(0.6, 1.0, 1.0), 0.5, m=0)


def test_rate_deterministic_sequence_converges():
    rep = rate_diagnostic(FouParams(0.85, 1.0, 1.0), 0.5, N_grid=(1000, 2000, 4000), m=0)
    assert np.all(np.isnan(rep.empirical))
    assert np.all(np.abs(rep.successive_ratios() - 1.0) <= 0.05)
    # approaches the limit from below
    assert np.all(np.diff(rep.deterministic) > 0) and rep.deterministic[-1] < rep.limit_exact
    assert "limit" in rep.table()


def test_deterministic_variance_matches_brute_force():
    p = FouParams(0.8, 1.0, 1.0)
    N, a = 40, 0.5
    r = FouModel().rho([0.8, 1.0, 1.0], a * np.arange(N + 1))
    n = N + 1
    brute = 2.0 / n ** 2 * sum(r[abs(i - j)] ** 2 for i in range(n) for j in range(n))
    assert_allclose(gmm.deterministic_order0_variance(p, a, N), brute, rtol=1e-13)


def test_generic_model_interface(ou_model):
    spec = MomentSpec(build_bank((1, 2)), ou_model, 0.1)
    target = v_theta(spec, [1.3, 0.7])
    r = ou_model.rho([1.3, 0.7], 0.1 * np.arange(3))
    assert_allclose(target[0], 2 * r[0] - 2 * r[1], rtol=1e-13)
    assert np.all(np.isfinite(omega(spec, [1.3, 0.7])))
