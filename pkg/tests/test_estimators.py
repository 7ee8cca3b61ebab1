import numpy as np
import pytest
from scipy import integrate, optimize
from scipy.stats import norm

from fieldest import (
    BitMapper,
    FieldParams,
    GAUSSIAN_BELL,
    SolverConfig,
    amplify_forward,
    em_estimate,
    em_quantities,
    em_step,
    level_probabilities,
    loglik_analog,
    loglik_quantized,
    make_uniform_quantizer,
    newton_ml_analog,
    nr_estimate_quantized,
    q_function,
    quantize,
    quantize_forward,
    sample_observations,
)
from fieldest.estimators import _em_quantities_batch, _em_score, _quantized_loglik_derivs

from conftest import make_network


def _analog_data(truth, area, sigma2, eta2, k=40, seed=100):
    net = make_network(k, area, sigma2, seed)
    obs = sample_observations(net, GAUSSIAN_BELL, truth, np.random.SeedSequence(seed + 1))
    z = amplify_forward(obs, eta2, np.random.SeedSequence(seed + 2))
    return net, z


def _quantized_data(truth, area, sigma2, quantizer, bm, eta2, k=40, seed=200):
    net = make_network(k, area, sigma2, seed)
    obs = sample_observations(net, GAUSSIAN_BELL, truth, np.random.SeedSequence(seed + 1))
    z = quantize_forward(obs, quantizer, bm, eta2, np.random.SeedSequence(seed + 2))
    return net, z


def test_q_function_matches_normal_sf():
    x = np.linspace(-6, 6, 41)
    np.testing.assert_allclose(q_function(x), norm.sf(x), atol=1e-15)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_outer=0)
    with pytest.raises(ValueError):
        SolverConfig(ridge=-1e-9)


# ------------------------------------------------------------- analog ML


def test_loglik_analog_oracle(truth, area):
    net, z = _analog_data(truth, area, sigma2=0.3, eta2=0.5, k=25, seed=4)
    got = loglik_analog(z, net, GAUSSIAN_BELL, truth, 0.5)
    g = GAUSSIAN_BELL.value(truth, net.x, net.y)
    expected = -0.5 * np.sum((z.z - g) ** 2 / (net.sigma2 + 0.5))
    assert got == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        loglik_analog(z, make_network(5, area, 0.3, 1), GAUSSIAN_BELL, truth, 0.5)


def test_newton_analog_recovers_truth_low_noise(truth, area):
    net, z = _analog_data(truth, area, sigma2=1e-4, eta2=1e-4, k=60, seed=55)
    init = FieldParams(9.0, 1.5, 1.5, 3.0, 3.0)
    res = newton_ml_analog(z, net, GAUSSIAN_BELL, 1e-4, init, SolverConfig())
    assert res.converged
    np.testing.assert_allclose(res.theta_hat.as_array(), truth.as_array(), atol=0.02)
    # trace bookkeeping: row 0 is the init, one row per accepted step
    np.testing.assert_array_equal(res.trace[0], init.as_array())
    assert res.trace.shape[0] == res.iterations + 1
    assert res.loglik_trace.shape[0] == res.trace.shape[0]


def test_newton_analog_loglik_monotone(truth, area):
    net, z = _analog_data(truth, area, sigma2=0.4, eta2=0.4, k=40, seed=77)
    init = FieldParams(9.0, 1.5, 1.5, 3.0, 3.0)
    res = newton_ml_analog(z, net, GAUSSIAN_BELL, 0.4, init, SolverConfig())
    assert res.converged
    # the backtracking line search only ever accepts non-decreasing steps
    assert np.all(np.diff(res.loglik_trace) >= -1e-12)


def test_newton_analog_matches_generic_optimizer(truth, area):
    net, z = _analog_data(truth, area, sigma2=0.4, eta2=0.4, k=40, seed=13)
    init = FieldParams(9.0, 1.5, 1.5, 3.0, 3.0)
    res = newton_ml_analog(z, net, GAUSSIAN_BELL, 0.4, init, SolverConfig())
    assert res.converged

    def neg(theta):
        return -loglik_analog(z, net, GAUSSIAN_BELL, FieldParams.from_array(theta), 0.4)

    ref = optimize.minimize(neg, init.as_array(), method="Nelder-Mead",
                            options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 20_000})
    assert ref.success
    np.testing.assert_allclose(res.theta_hat.as_array(), ref.x, atol=2e-4)


# -------------------------------------------------------- quantized loglik


def test_loglik_quantized_oracle(truth, area, quantized_15db, sigma2_15db):
    quantizer, bm, eta2 = quantized_15db
    net, z = _quantized_data(truth, area, sigma2_15db, quantizer, bm, eta2, k=30, seed=8)
    got = loglik_quantized(z, net, quantizer, bm, GAUSSIAN_BELL, truth, eta2)
    # independent mixture reimplementation (same dropped constants)
    g = GAUSSIAN_BELL.value(truth, net.x, net.y)
    total = 0.0
    for k in range(net.k):
        p = level_probabilities(quantizer, float(g[k]), float(np.sqrt(net.sigma2[k])))
        e = np.exp(-np.sum((z.z[k] - bm.codebook) ** 2, axis=1) / (2 * eta2))
        total += np.log(np.sum(p * e))
    assert got == pytest.approx(total, rel=1e-10)


def test_loglik_quantized_shape_checks(truth, area, quantized_15db, sigma2_15db):
    quantizer, bm, eta2 = quantized_15db
    net, z = _quantized_data(truth, area, sigma2_15db, quantizer, bm, eta2, k=10, seed=8)
    wrong_net = make_network(11, area, sigma2_15db, 3)
    with pytest.raises(ValueError):
        loglik_quantized(z, wrong_net, quantizer, bm, GAUSSIAN_BELL, truth, eta2)
    with pytest.raises(ValueError):
        loglik_quantized(z, net, make_uniform_quantizer(4, 0, 12), bm, GAUSSIAN_BELL, truth, eta2)


def test_quantized_loglik_gradient_matches_finite_differences(
    truth, area, quantized_15db, sigma2_15db
):
    quantizer, bm, eta2 = quantized_15db
    net, z = _quantized_data(truth, area, sigma2_15db, quantizer, bm, eta2, k=12, seed=19)
    eta2v = np.full(net.k, eta2)
    rng = np.random.default_rng(3)
    for _ in range(8):
        theta = np.array([
            rng.uniform(4, 11),
            rng.uniform(1.2, 3.0),
            rng.uniform(1.2, 3.0),
            rng.uniform(2, 6),
            rng.uniform(2, 6),
        ])
        grad, hess = _quantized_loglik_derivs(z.z, net, quantizer, bm, GAUSSIAN_BELL, eta2v, theta)
        fd = np.empty(5)
        for s in range(5):
            step = 1e-6 * max(1.0, abs(theta[s]))
            up, dn = theta.copy(), theta.copy()
            up[s] += step
            dn[s] -= step
            fd[s] = (
                loglik_quantized(z, net, quantizer, bm, GAUSSIAN_BELL,
                                 FieldParams.from_array(up), eta2)
                - loglik_quantized(z, net, quantizer, bm, GAUSSIAN_BELL,
                                   FieldParams.from_array(dn), eta2)
            ) / (2 * step)
        scale = max(np.abs(fd).max(), 1e-8)
        assert np.max(np.abs(grad - fd)) / scale < 1e-6
        assert np.allclose(hess, hess.T)


def test_quantized_loglik_hessian_matches_finite_differences(
    truth, area, quantized_15db, sigma2_15db
):
    quantizer, bm, eta2 = quantized_15db
    net, z = _quantized_data(truth, area, sigma2_15db, quantizer, bm, eta2, k=10, seed=23)
    eta2v = np.full(net.k, eta2)
    theta = np.array([7.0, 2.2, 1.9, 4.4, 3.6])
    _, hess = _quantized_loglik_derivs(z.z, net, quantizer, bm, GAUSSIAN_BELL, eta2v, theta)
    fd = np.empty((5, 5))
    for s in range(5):
        step = 1e-6 * max(1.0, abs(theta[s]))
        up, dn = theta.copy(), theta.copy()
        up[s] += step
        dn[s] -= step
        gu, _ = _quantized_loglik_derivs(z.z, net, quantizer, bm, GAUSSIAN_BELL, eta2v, up)
        gd, _ = _quantized_loglik_derivs(z.z, net, quantizer, bm, GAUSSIAN_BELL, eta2v, dn)
        fd[s] = (gu - gd) / (2 * step)
    scale = max(np.abs(fd).max(), 1e-8)
    assert np.max(np.abs(hess - fd)) / scale < 5e-6


# ------------------------------------------------------------------- EM


def _em_quantities_quad_oracle(z_k, quantizer, bm, g, sigma, eta2):
    """A and B by adaptive 1-D quadrature of the posterior over the latent
    reading: the integrand weights the normal density by the bit likelihood
    of whatever cell the reading falls in."""
    d = -np.sum((np.asarray(z_k) - bm.codebook) ** 2, axis=1) / (2.0 * eta2)
    d -= d.max()  # common scaling cancels in every ratio below
    e = np.exp(d)
    lo, hi = g - 10 * sigma, g + 10 * sigma
    pts = [t for t in quantizer.boundaries[1:-1] if lo < t < hi]

    def weight(r):
        return e[quantize(quantizer, float(r)) - 1] * norm.pdf(r, g, sigma)

    mass, _ = integrate.quad(weight, lo, hi, points=pts, limit=200, epsabs=1e-14)
    mean, _ = integrate.quad(lambda r: r * weight(r), lo, hi, points=pts, limit=200, epsabs=1e-14)
    p = level_probabilities(quantizer, g, sigma)
    den = float(p @ e)
    return mean / den, mass / den


@pytest.mark.parametrize("m", [2, 4, 8])
def test_em_quantities_match_quadrature(m):
    quantizer = make_uniform_quantizer(m, 0.0, 12.0)
    bm = BitMapper(int(np.log2(m)))
    rng = np.random.default_rng(m)
    for _ in range(10):
        g = rng.uniform(-1.0, 13.0)
        sigma = rng.uniform(0.3, 2.0)
        eta2 = rng.uniform(0.1, 1.5)
        level = rng.integers(1, m + 1)
        z_k = bm.codebook[level - 1] + np.sqrt(eta2) * rng.standard_normal(bm.alpha)
        a, b = em_quantities(z_k, quantizer, bm, g, sigma, eta2)
        a_ref, b_ref = _em_quantities_quad_oracle(z_k, quantizer, bm, g, sigma, eta2)
        assert a == pytest.approx(a_ref, abs=1e-8)
        assert b == pytest.approx(b_ref, abs=1e-8)


def test_em_quantities_posterior_mass_is_one():
    # B telescopes to exactly 1: it is the posterior expectation of a
    # total probability
    quantizer = make_uniform_quantizer(8, 0.0, 12.0)
    bm = BitMapper(3)
    rng = np.random.default_rng(17)
    for _ in range(25):
        z_k = rng.uniform(-1, 2, size=3)
        _, b = em_quantities(z_k, quantizer, bm, rng.uniform(0, 12), rng.uniform(0.2, 2), 0.6)
        assert b == pytest.approx(1.0, abs=1e-12)


def test_em_quantities_input_check():
    quantizer = make_uniform_quantizer(4, 0.0, 12.0)
    with pytest.raises(ValueError):
        em_quantities(np.zeros(3), quantizer, BitMapper(2), 5.0, 1.0, 0.5)


def test_em_score_equals_incomplete_data_score(truth, area, quantized_15db, sigma2_15db):
    """EM fixed-point identity: with the posterior quantities refreshed at
    theta, the structure-equation score equals the gradient of the received
    log-likelihood at the same theta."""
    quantizer, bm, eta2 = quantized_15db
    net, z = _quantized_data(truth, area, sigma2_15db, quantizer, bm, eta2, k=20, seed=41)
    eta2v = np.full(net.k, eta2)
    for theta in (
        truth.as_array(),
        np.array([9.0, 1.5, 1.5, 3.0, 3.0]),
        np.array([6.5, 2.4, 2.1, 4.8, 3.9]),
    ):
        g = GAUSSIAN_BELL.value(FieldParams.from_array(theta), net.x, net.y)
        a_val, b_val = _em_quantities_batch(z.z, quantizer, bm, g, np.sqrt(net.sigma2), eta2v)
        em_grad = _em_score(net, GAUSSIAN_BELL, a_val, b_val, theta)
        ml_grad, _ = _quantized_loglik_derivs(z.z, net, quantizer, bm, GAUSSIAN_BELL, eta2v, theta)
        np.testing.assert_allclose(em_grad, ml_grad, rtol=1e-8, atol=1e-10)


def test_em_step_fixed_point_short_circuit(truth, area, quantized_15db, sigma2_15db):
    quantizer, bm, eta2 = quantized_15db
    net, z = _quantized_data(truth, area, sigma2_15db, quantizer, bm, eta2, k=40, seed=91)
    res = em_estimate(z, net, quantizer, bm, GAUSSIAN_BELL, eta2,
                      FieldParams(9.0, 1.5, 1.5, 3.0, 3.0), SolverConfig())
    assert res.converged
    # at the EM limit the step operator returns its input unchanged
    again = em_step(z, net, quantizer, bm, GAUSSIAN_BELL, eta2, res.theta_hat, SolverConfig())
    np.testing.assert_allclose(again.as_array(), res.theta_hat.as_array(), atol=1e-8)


def test_em_estimate_ascends_and_recovers(truth, area, quantized_15db, sigma2_15db):
    quantizer, bm, eta2 = quantized_15db
    net, z = _quantized_data(truth, area, sigma2_15db, quantizer, bm, eta2, k=40, seed=47)
    init = FieldParams(8.5, 1.8, 1.8, 4.3, 4.2)  # in the main basin
    res = em_estimate(z, net, quantizer, bm, GAUSSIAN_BELL, eta2, init, SolverConfig())
    assert res.converged
    np.testing.assert_array_equal(res.trace[0], init.as_array())
    assert np.all(np.diff(res.loglik_trace) >= -1e-9)
    # one 15 dB draw at K=40: parameter error well inside one field unit
    assert np.max(np.abs(res.theta_hat.as_array() - truth.as_array())) < 1.5


def test_em_and_nr_find_the_same_optimum(truth, area, quantized_15db, sigma2_15db):
    quantizer, bm, eta2 = quantized_15db
    net, z = _quantized_data(truth, area, sigma2_15db, quantizer, bm, eta2, k=40, seed=91)
    init = FieldParams(9.0, 1.5, 1.5, 3.0, 3.0)
    em = em_estimate(z, net, quantizer, bm, GAUSSIAN_BELL, eta2, init, SolverConfig())
    nr = nr_estimate_quantized(z, net, quantizer, bm, GAUSSIAN_BELL, eta2, init, SolverConfig())
    assert em.converged and nr.converged
    np.testing.assert_allclose(em.theta_hat.as_array(), nr.theta_hat.as_array(), atol=2e-3)
    ll_em = loglik_quantized(z, net, quantizer, bm, GAUSSIAN_BELL, em.theta_hat, eta2)
    ll_nr = loglik_quantized(z, net, quantizer, bm, GAUSSIAN_BELL, nr.theta_hat, eta2)
    assert ll_em == pytest.approx(ll_nr, abs=1e-4)


def test_nr_loglik_monotone(truth, area, quantized_15db, sigma2_15db):
    quantizer, bm, eta2 = quantized_15db
    net, z = _quantized_data(truth, area, sigma2_15db, quantizer, bm, eta2, k=40, seed=62)
    res = nr_estimate_quantized(z, net, quantizer, bm, GAUSSIAN_BELL, eta2,
                                FieldParams(9.0, 1.5, 1.5, 3.0, 3.0), SolverConfig())
    assert res.converged
    assert np.all(np.diff(res.loglik_trace) >= -1e-12)


def test_quiet_channel_reduces_to_quantized_ml(truth, area, sigma2_15db):
    # with (numerically) noiseless bits, the likelihood collapses onto the
    # transmitted levels: log-lik at theta ~ sum_k log p_{level_k}(theta)
    quantizer = make_uniform_quantizer(8, 0.0, 12.0)
    bm = BitMapper(3)
    eta2 = 1e-4
    net, z = _quantized_data(truth, area, sigma2_15db, quantizer, bm, eta2, k=30, seed=71)
    levels = 1 + (np.round(z.z) @ np.array([4, 2, 1])).astype(int)
    g = GAUSSIAN_BELL.value(truth, net.x, net.y)
    p = level_probabilities(quantizer, g, np.sqrt(net.sigma2))
    words = bm.codebook[levels - 1]
    resid = float(np.sum((z.z - words) ** 2)) / (2.0 * eta2)
    expected = float(np.sum(np.log(p[np.arange(net.k), levels - 1]))) - resid
    got = loglik_quantized(z, net, quantizer, bm, GAUSSIAN_BELL, truth, eta2)
    # the word residual term survives, but every cross-level term in the
    # mixture is smaller by exp(-O(1/eta2)) and drops out
    assert got == pytest.approx(expected, abs=1e-6)
