#!/usr/bin/env python
# A non-Gaussian model through the black-box interface.
#
# One-parameter logistic regression with a quadratic penalty: only the
# log-likelihood and the regularizer are supplied, everything else (MAP,
# prior normalizer, evidence, flexibility) is computed numerically.  At one
# parameter the dense-grid quadrature is effectively exact, so it serves as
# the yardstick for the Laplace approximation.

import numpy as np

import evidkit as ek

rng = np.random.default_rng(3)
x = rng.standard_normal(10)
probs = 1.0 / (1.0 + np.exp(-x))
y = (rng.uniform(size=10) < probs).astype(float)


def log_lik(points):
    theta = np.asarray(points)[:, 0]
    eta = np.outer(theta, x)
    return (y[None, :] * eta - np.logaddexp(0.0, eta)).sum(axis=1)


def regularizer(points):
    theta = np.asarray(points)[:, 0]
    return 0.5 * theta**2


model = ek.GenericModelSpec(dim=1, log_lik=log_lik, regularizer=regularizer,
                            support=[[-10.0, 10.0]], vectorized=True)

theta_hat = ek.map_optimize(model, np.zeros(1))
print(f"data: {int(y.sum())} successes in {y.size} trials")
print(f"MAP estimate: {theta_hat[0]:.6f}")

prior = ek.normalize_prior(model, grid_points_per_dim=4001)
print(f"prior log-normalizer: {prior.log_norm_const:.6f} "
      f"(exact would be {0.5 * np.log(2 * np.pi):.6f})")

quad = ek.evidence_quadrature(model, prior, grid_points_per_dim=4001)
laplace = ek.evidence_laplace(model, prior)

print()
print(f"{'estimator':<14}{'log-evidence':>14}{'log-fit':>12}{'flexibility':>13}")
for dec in (quad, laplace):
    print(f"{dec.estimator:<14}{dec.log_evidence:>14.6f}{dec.log_fit:>12.6f}"
          f"{dec.flexibility:>13.6f}")
print()
print(f"Laplace deviation from quadrature: "
      f"{abs(laplace.log_evidence - quad.log_evidence):.2e} nats")

# The decomposed flexibility slots straight into penalty arithmetic: using
# a (d/2) log n penalty instead is implicitly a penalty on log-evidence.
comparison = ek.compare_penalties(
    flexibility=quad.flexibility,
    supplied_penalty=ek.bic_penalty(1, y.size), d=1, n=y.size)
print()
print(f"flexibility:            {comparison.flexibility:.6f}")
print(f"(d/2) log n penalty:    {comparison.bic_penalty:.6f}")
print(f"implied evidence penalty (pen'): {comparison.pen_prime:.6f}")
