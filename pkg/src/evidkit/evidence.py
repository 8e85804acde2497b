"""Evidence estimation for black-box models, and penalty arithmetic.

Three estimators share one output record: dense trapezoid quadrature (the
workhorse at dimension <= 3), a first-order Laplace approximation around the
MAP, and self-normalized-free importance sampling from a Gaussian proposal
centered at the MAP.  Each reports the same fit-minus-flexibility
decomposition, with flexibility defined as ``log_fit - log_evidence``.

The penalty helpers relate flexibility to conventional criteria: the
``(d/2) log n`` penalty, and the induced penalty on log-evidence when a
criterion other than flexibility is applied to the maximized log-likelihood.
Everything is computed in log space end to end; raw evidence values are
never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.special import logsumexp

from .exceptions import AccuracyFailure, CurvatureFailure, DegeneracyFailure
from .generic import (
    GenericModelSpec,
    NormalizedPrior,
    _eval_batch,
    _eval_scalar,
    _objective,
    finite_difference_hessian,
    log_trapezoid_integral,
    map_optimize,
    resolve_integration_box,
)
from .glm import LOG_2PI, GaussianLinearSpec, ObservationSet, flexibility_exact, map_estimate
from .records import EvidenceDecomposition

__all__ = [
    "Decomposition",
    "PenaltyComparison",
    "AsymptoticSweepResult",
    "evidence_quadrature",
    "evidence_laplace",
    "evidence_importance",
    "decompose",
    "bic_penalty",
    "pen_prime",
    "compare_penalties",
    "bic_sweep",
    "polynomial_sweep_family",
]

# Default cross-check grids for the Laplace error estimate, by dimension.
LAPLACE_CHECK_GRID = {1: 2001, 2: 201, 3: 41}

MIN_ESS_FRACTION = 0.01
DEFAULT_INFLATION = 1.5


def _require_finite(name, value):
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value


def _log_prior_fn(model: GenericModelSpec, prior: NormalizedPrior):
    log_z = prior.log_norm_const

    def log_prior(points):
        reg = model.regularizer(points)
        if model.vectorized:
            return -np.asarray(reg, dtype=float) - log_z
        return -float(reg) - log_z

    return log_prior


def _log_joint_fn(model: GenericModelSpec, prior: NormalizedPrior):
    log_z = prior.log_norm_const

    def log_joint(points):
        if model.vectorized:
            return (np.asarray(model.log_lik(points), dtype=float)
                    - np.asarray(model.regularizer(points), dtype=float) - log_z)
        return float(model.log_lik(points)) - float(model.regularizer(points)) - log_z

    return log_joint


def _integration_box(model, prior, log_joint):
    if prior.box is not None:
        return np.asarray(prior.box, dtype=float)
    return resolve_integration_box(model, log_joint)


def _map_start(model: GenericModelSpec, box, start):
    if start is not None:
        return np.asarray(start, dtype=float)
    center = box.mean(axis=1)
    bounds = model.bounds()
    return np.clip(center, bounds[:, 0], bounds[:, 1])


def evidence_quadrature(model: GenericModelSpec, prior: NormalizedPrior,
                        grid_points_per_dim: int, *, start=None,
                        max_err: float | None = None, box=None) -> EvidenceDecomposition:
    """Log-evidence by dense trapezoid quadrature in log space, dim <= 3.

    Integrates ``exp(log_lik - R) / Z_R`` over the prior's integration box
    (or a freshly resolved box when the prior is closed form; ``box``
    overrides both).  The error estimate is a half-resolution Richardson
    comparison, as in :func:`evidkit.generic.normalize_prior`.
    """
    if model.dim > 3:
        raise ValueError("grid quadrature supports dim <= 3")
    grid_points_per_dim = int(grid_points_per_dim)
    if grid_points_per_dim < 5:
        raise ValueError("grid_points_per_dim must be >= 5")

    log_joint = _log_joint_fn(model, prior)
    if box is None:
        box = _integration_box(model, prior, log_joint)
    else:
        box = np.asarray(box, dtype=float)
    theta_hat = map_optimize(model, _map_start(model, box, start))
    log_fit = _eval_scalar(model, model.log_lik, theta_hat)

    log_e = log_trapezoid_integral(model, log_joint, box, grid_points_per_dim)
    coarse = log_trapezoid_integral(model, log_joint, box, (grid_points_per_dim + 1) // 2)
    err = abs(log_e - coarse) / 3.0
    if max_err is not None and err > max_err:
        raise AccuracyFailure(
            f"quadrature error estimate {err:.3e} exceeds tolerance {max_err:.3e} "
            f"(fine {log_e:.12g}, half-resolution {coarse:.12g})",
            value=log_e, coarse_value=coarse, err_estimate=err)

    return EvidenceDecomposition(
        log_evidence=log_e, log_fit=log_fit, flexibility=log_fit - log_e,
        estimator="quadrature", err_estimate=err, theta_hat=theta_hat,
        info={"grid_points_per_dim": grid_points_per_dim, "box": np.asarray(box).tolist()})


def laplace_curvature(model: GenericModelSpec, prior: NormalizedPrior, theta_hat) -> np.ndarray:
    """Negative Hessian of ``log_lik + log prior`` at the MAP.

    The prior's normalizer is constant, so this is the negative Hessian of
    ``log_lik - R``.  Raises :class:`CurvatureFailure` when the result is
    not positive definite.
    """
    psi = _objective(model)
    curvature = -finite_difference_hessian(psi, np.asarray(theta_hat, dtype=float))
    curvature = (curvature + curvature.T) / 2.0
    try:
        np.linalg.cholesky(curvature)
    except LinAlgError as exc:
        raise CurvatureFailure(
            "Hessian at the MAP is not positive definite (saddle or ridge); "
            "the Laplace approximation is undefined here") from exc
    return curvature


def evidence_laplace(model: GenericModelSpec, prior: NormalizedPrior, *, start=None,
                     err_check_grid: int | None = None) -> EvidenceDecomposition:
    """First-order Laplace approximation to the log-evidence.

    ``log E ~ log f(theta_hat) + log prior(theta_hat) + (d/2) log 2 pi
    - 0.5 log det A`` with ``A`` the curvature of the negative log posterior
    at the MAP.  Exact when the posterior is Gaussian, which is what the
    closed-form tests exploit.

    When ``dim <= 3`` the error estimate is the absolute difference from a
    quadrature run (grid size ``err_check_grid`` or a dimension-based
    default); above that no estimate is available and NaN is reported.
    """
    box = _integration_box(model, prior, _log_joint_fn(model, prior))
    theta_hat = map_optimize(model, _map_start(model, box, start))
    curvature = laplace_curvature(model, prior, theta_hat)
    sign, log_det = np.linalg.slogdet(curvature)
    if sign <= 0:
        raise CurvatureFailure("curvature determinant is not positive")

    log_fit = _eval_scalar(model, model.log_lik, theta_hat)
    log_prior_at_map = -_eval_scalar(model, model.regularizer, theta_hat) \
        - prior.log_norm_const
    log_e = log_fit + log_prior_at_map + 0.5 * model.dim * LOG_2PI - 0.5 * log_det

    if model.dim <= 3:
        grid = err_check_grid or LAPLACE_CHECK_GRID[model.dim]
        reference = evidence_quadrature(model, prior, grid, start=theta_hat, box=box)
        err = abs(log_e - reference.log_evidence)
    else:
        err = float("nan")

    return EvidenceDecomposition(
        log_evidence=log_e, log_fit=log_fit, flexibility=log_fit - log_e,
        estimator="laplace", err_estimate=err, theta_hat=theta_hat,
        info={"log_det_curvature": log_det})


def evidence_importance(model: GenericModelSpec, prior: NormalizedPrior,
                        samples: int, seed: int, *, inflation: float = DEFAULT_INFLATION,
                        start=None, theta_hat=None, curvature=None) -> EvidenceDecomposition:
    """Importance-sampling estimate of the log-evidence.

    The proposal is a Gaussian at the MAP whose covariance is the inverse
    Laplace curvature inflated by ``inflation`` (default 1.5, guarding
    against an underdispersed proposal).  The estimate is the log-mean-exp
    of ``log_lik + log prior - log proposal`` over the draws; the error
    estimate maps the weight standard error to the log scale by the delta
    method.  ``theta_hat`` and ``curvature`` override the computed proposal
    center and precision, e.g. to propose from a known exact posterior.

    Draws come from a counter-based Philox stream keyed by ``seed``, so the
    result is reproducible bit for bit and independent of evaluation order.

    Raises
    ------
    DegeneracyFailure
        When the effective sample size falls below 1% of ``samples``.
    """
    samples = int(samples)
    if samples < 2:
        raise ValueError("samples must be >= 2")
    if theta_hat is None:
        box = _integration_box(model, prior, _log_joint_fn(model, prior))
        theta_hat = map_optimize(model, _map_start(model, box, start))
    else:
        theta_hat = np.asarray(theta_hat, dtype=float)
    if curvature is None:
        curvature = laplace_curvature(model, prior, theta_hat)
    else:
        curvature = np.asarray(curvature, dtype=float)
    chol_lower = np.linalg.cholesky(curvature)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol_lower))))
    d = model.dim

    rng = np.random.Generator(np.random.Philox(key=seed))
    z = rng.standard_normal((samples, d))
    # theta = theta_hat + inflation * L^-T z  has covariance inflation^2 A^-1.
    points = theta_hat[None, :] + inflation * solve_triangular(
        chol_lower, z.T, lower=True, trans="T").T
    log_proposal = (-0.5 * d * LOG_2PI + 0.5 * log_det - d * np.log(inflation)
                    - 0.5 * np.einsum("ij,ij->i", z, z))

    log_joint = _log_joint_fn(model, prior)
    log_ratios = _eval_batch(model, log_joint, points) - log_proposal
    top = float(np.max(log_ratios))
    weights = np.exp(log_ratios - top)
    mean_w = float(weights.mean())
    ess = float(weights.sum() ** 2 / (weights @ weights))
    if ess < MIN_ESS_FRACTION * samples:
        raise DegeneracyFailure(
            f"importance weights degenerate: ESS {ess:.1f} of {samples} draws", ess=ess)

    log_e = top + float(np.log(mean_w))
    err = float(weights.std(ddof=1) / (mean_w * np.sqrt(samples)))
    log_fit = _eval_scalar(model, model.log_lik, theta_hat)
    return EvidenceDecomposition(
        log_evidence=log_e, log_fit=log_fit, flexibility=log_fit - log_e,
        estimator="importance-sampling", err_estimate=err, theta_hat=theta_hat,
        info={"samples": samples, "seed": int(seed), "inflation": float(inflation),
              "ess": ess})


# ---------------------------------------------------------------------------
# Decomposition and penalty arithmetic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    """Fit/flexibility split of an externally supplied evidence value.

    ``note`` flags the pathological case of negative flexibility, which
    signals a conflict between the prior and the likelihood (the posterior
    density at the MAP fell below the prior density).
    """

    log_evidence: float
    log_fit: float
    flexibility: float
    note: str | None = None


def decompose(log_evidence: float, log_fit: float) -> Decomposition:
    """Flexibility implied by an evidence value: ``log_fit - log_evidence``."""
    log_evidence = _require_finite("log_evidence", log_evidence)
    log_fit = _require_finite("log_fit", log_fit)
    flexibility = log_fit - log_evidence
    note = None
    if flexibility < 0:
        note = ("negative flexibility: prior-likelihood conflict "
                "(posterior density at the MAP is below the prior density)")
    return Decomposition(log_evidence=log_evidence, log_fit=log_fit,
                         flexibility=flexibility, note=note)


def bic_penalty(d: int, n) -> float:
    """The ``(d/2) log n`` complexity penalty.

    ``n`` may be any real >= 1 so the penalty can be evaluated at analytic
    sample sizes; real uses pass the integer count of observations.
    """
    d = int(d)
    n = float(n)
    if d < 1:
        raise ValueError("d must be >= 1")
    if not n >= 1:
        raise ValueError("n must be >= 1")
    return 0.5 * d * float(np.log(n))


def pen_prime(supplied_penalty: float, flexibility: float) -> float:
    """Penalty induced on log-evidence by a non-flexibility fit penalty.

    Penalizing maximized log-likelihood with ``supplied_penalty`` is
    algebraically identical to penalizing log-evidence with
    ``supplied_penalty - flexibility``.
    """
    return _require_finite("supplied_penalty", supplied_penalty) \
        - _require_finite("flexibility", flexibility)


@dataclass(frozen=True)
class PenaltyComparison:
    """A supplied penalty next to flexibility and the ``(d/2) log n`` value."""

    flexibility: float
    supplied_penalty: float
    d: int
    n: int
    bic_penalty: float
    pen_prime: float


def compare_penalties(flexibility: float, supplied_penalty: float,
                      d: int, n: int) -> PenaltyComparison:
    """Full penalty comparison record for one model."""
    flexibility = _require_finite("flexibility", flexibility)
    supplied_penalty = _require_finite("supplied_penalty", supplied_penalty)
    return PenaltyComparison(
        flexibility=flexibility, supplied_penalty=supplied_penalty,
        d=int(d), n=int(n), bic_penalty=bic_penalty(d, n),
        pen_prime=pen_prime(supplied_penalty, flexibility))


# ---------------------------------------------------------------------------
# Asymptotic sweep: flexibility against the (d/2) log n penalty
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AsymptoticSweepResult:
    """Gap between flexibility and ``(d/2) log n`` along a sample-size sweep.

    ``predicted_constant`` is the large-sample limit of the gap,
    ``0.5 * (-d (log sigma^2 + log lam^2) + log det H + lam^2 ||m||^2)``
    with ``H`` and ``m`` estimated from the largest sample size.
    """

    ns: tuple[int, ...]
    gaps: np.ndarray
    flexibilities: np.ndarray
    H_hat: np.ndarray
    m_hat: np.ndarray
    predicted_constant: float
    d: int
    seed: int


def bic_sweep(family_generator, ns, seed: int) -> AsymptoticSweepResult:
    """Evaluate the flexibility-vs-penalty gap over increasing sample sizes.

    Parameters
    ----------
    family_generator : callable
        ``(n, rng) -> (GaussianLinearSpec, ObservationSet)`` producing a
        fresh draw at the requested sample size.  Covariates are regenerated
        independently at each n (derived child seeds, not nested data).
    ns : sequence of int
        Strictly increasing sample sizes.
    seed : int
        Root seed; each n receives a spawned child stream.
    """
    ns = tuple(int(n) for n in ns)
    if len(ns) < 1:
        raise ValueError("ns must be nonempty")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be strictly increasing")

    children = np.random.SeedSequence(seed).spawn(len(ns))
    gaps = np.empty(len(ns))
    flexibilities = np.empty(len(ns))
    d = None
    last = None
    for k, n in enumerate(ns):
        spec, obs = family_generator(n, np.random.default_rng(children[k]))
        if d is None:
            d = spec.d
        elif spec.d != d:
            raise ValueError(f"family dimension changed from {d} to {spec.d} at n={n}")
        flexibilities[k] = flexibility_exact(spec, obs)
        gaps[k] = flexibilities[k] - bic_penalty(spec.d, n)
        last = (spec, obs)

    spec, obs = last
    H_hat = spec.G.T @ spec.G / spec.n
    m_hat = map_estimate(spec, obs)
    sign, log_det_h = np.linalg.slogdet(H_hat)
    if sign <= 0:
        raise ValueError("empirical design moment matrix is not positive definite")
    predicted = 0.5 * (-d * (2.0 * np.log(spec.sigma) + 2.0 * np.log(spec.lam))
                       + log_det_h + spec.lam**2 * float(m_hat @ m_hat))
    return AsymptoticSweepResult(
        ns=ns, gaps=gaps, flexibilities=flexibilities, H_hat=H_hat, m_hat=m_hat,
        predicted_constant=predicted, d=d, seed=int(seed))


def polynomial_sweep_family(theta_true, sigma: float, lam: float):
    """Family generator for :func:`bic_sweep` with IID standard-normal covariates.

    The design at size n has columns ``1, x, x**2, ...`` up to width
    ``len(theta_true)`` and responses ``G theta_true + sigma * noise``, so
    the empirical moment matrix converges and the MAP estimate tends to
    ``theta_true``.
    """
    theta_true = np.asarray(theta_true, dtype=float)
    if theta_true.ndim != 1 or theta_true.size < 1:
        raise ValueError("theta_true must be a nonempty vector")

    def generate(n, rng):
        x = rng.standard_normal(int(n))
        G = np.column_stack([x**k for k in range(theta_true.size)])
        y = G @ theta_true + sigma * rng.standard_normal(int(n))
        return GaussianLinearSpec(G=G, sigma=sigma, lam=lam), ObservationSet(y=y)

    return generate
