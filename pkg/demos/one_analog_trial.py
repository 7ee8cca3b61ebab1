"""One analog-channel trial, end to end, with the Newton iterate trace.

Sensors take noisy readings of the field, amplify-and-forward them over an
AWGN channel, and the fusion center maximizes the analog log-likelihood by
damped Newton ascent.
"""

import numpy as np

from fieldest import (
    GAUSSIAN_BELL,
    Area,
    FieldParams,
    SolverConfig,
    amplify_forward,
    calibrate_eta_analog,
    calibrate_sigma,
    deploy_uniform,
    loglik_analog,
    newton_ml_analog,
    sample_observations,
)


def main():
    truth = FieldParams(8.0, 2.0, 2.0, 4.0, 4.0)
    area = Area(0.0, 8.0, 0.0, 8.0)
    k = 40

    sigma2 = calibrate_sigma(GAUSSIAN_BELL, truth, area, 15.0)
    eta2 = calibrate_eta_analog(GAUSSIAN_BELL, truth, area, sigma2, 15.0)

    net = deploy_uniform(k, area, np.random.SeedSequence(7)).with_sigma2(np.full(k, sigma2))
    obs = sample_observations(net, GAUSSIAN_BELL, truth, np.random.SeedSequence(8))
    z = amplify_forward(obs, eta2, np.random.SeedSequence(9))

    init = FieldParams(9.0, 1.5, 1.5, 3.0, 3.0)
    print(f"{k} sensors, sigma^2 = {sigma2:.4f}, eta^2 = {eta2:.4f}")
    print(f"log-likelihood at truth: {loglik_analog(z, net, GAUSSIAN_BELL, truth, eta2):.4f}")
    print(f"log-likelihood at init:  {loglik_analog(z, net, GAUSSIAN_BELL, init, eta2):.4f}\n")

    result = newton_ml_analog(z, net, GAUSSIAN_BELL, eta2, init, SolverConfig())

    names = ("h", "rho_x", "rho_y", "x_c", "y_c")
    print("iter  " + "".join(f"{n:>9}" for n in names) + "    loglik")
    for it in range(result.trace.shape[0]):
        vals = "".join(f"{v:9.4f}" for v in result.trace[it])
        print(f"{it:>4}  {vals}  {result.loglik_trace[it]:12.4f}")

    err = result.theta_hat.as_array() - truth.as_array()
    status = "converged" if result.converged else f"stopped: {result.divergence_reason}"
    print(f"\n{status} after {result.iterations} iterations")
    print("estimate:", np.round(result.theta_hat.as_array(), 4))
    print("error:   ", np.round(err, 4), f" (squared error {float(np.sum(err**2)):.5f})")


if __name__ == "__main__":
    main()
