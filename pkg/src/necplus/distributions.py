"""Gaussian, GEV, and Gaussian-mixture fitting, the mixture-density
indicator feature, and a histogram-based fit-quality diagnostic.

Mixtures are univariate: the indicator is computed on the standardized
scalar series. All fitting is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from . import kvtext
from .errors import FitFailureError, InvalidInputError

XI_TOL = 1e-8
VARIANCE_FLOOR = 1e-6
_EULER = 0.57721566490153286


@dataclass(frozen=True)
class GevParams:
    location: float
    scale: float
    shape: float

    def __post_init__(self):
        if not (self.scale > 0):
            raise InvalidInputError("GEV scale must be positive")


@dataclass(frozen=True)
class GmmModel:
    """Univariate M-component Gaussian mixture."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood_trace: np.ndarray = field(repr=False, default_factory=lambda: np.array([]))

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError("mixture weights must sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "variances", np.asarray(self.variances, dtype=np.float64))

    @property
    def n_components(self) -> int:
        return len(self.weights)


# ---------------------------------------------------------------------------
# GEV


def _gev_z(x, p: GevParams):
    return 1.0 + p.shape * (np.asarray(x, dtype=np.float64) - p.location) / p.scale


def gev_cdf(x, p: GevParams):
    """GEV CDF with a Gumbel branch for |shape| < XI_TOL.

    Outside the support the CDF is 0 on the lower tail (shape > 0) and 1 on
    the upper tail (shape < 0).
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("x must be finite")
    if abs(p.shape) < XI_TOL:
        out = np.exp(-np.exp(-(x - p.location) / p.scale))
    else:
        z = np.atleast_1d(_gev_z(x, p))
        out = np.full(z.shape, 1.0 if p.shape < 0 else 0.0)
        inside = z > 0
        with np.errstate(over="ignore"):  # overflow -> inf -> exp(-inf) = 0
            out[inside] = np.exp(-z[inside] ** (-1.0 / p.shape))
        out = out.reshape(np.shape(x))
    return out if out.ndim else float(out)


def gev_pdf(x, p: GevParams):
    """Analytic derivative of :func:`gev_cdf`; zero outside the support."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("x must be finite")
    if abs(p.shape) < XI_TOL:
        t = np.exp(-(x - p.location) / p.scale)
        out = t * np.exp(-t) / p.scale
    else:
        z = np.atleast_1d(_gev_z(x, p))
        out = np.zeros(z.shape)
        inside = z > 0
        # log domain: z**(-1/xi) can overflow near the support edge, where
        # the density limit is 0
        with np.errstate(over="ignore"):
            t = z[inside] ** (-1.0 / p.shape)
            out[inside] = np.exp(
                (-1.0 / p.shape - 1.0) * np.log(z[inside]) - t) / p.scale
        out = out.reshape(np.shape(x))
    return out if out.ndim else float(out)


def _gev_negloglik(theta, xs):
    mu, log_sigma, xi = theta
    sigma = np.exp(log_sigma)
    if abs(xi) < XI_TOL:
        u = (xs - mu) / sigma
        return float(np.sum(np.log(sigma) + u + np.exp(-u)))
    z = 1.0 + xi * (xs - mu) / sigma
    if np.any(z <= 0):
        return 1e12
    return float(np.sum(np.log(sigma) + (1.0 + 1.0 / xi) * np.log(z) + z ** (-1.0 / xi)))


def fit_gev(xs) -> GevParams:
    """Maximum-likelihood GEV fit via Nelder-Mead from a moment start."""
    xs = np.asarray(xs, dtype=np.float64)
    if len(xs) < 50:
        raise FitFailureError("need at least 50 samples to fit a GEV")
    std = float(np.std(xs))
    if std == 0.0:
        raise FitFailureError("degenerate sample: zero variance")
    # Gumbel method-of-moments start, small positive shape to explore both signs
    sigma0 = std * np.sqrt(6.0) / np.pi
    mu0 = float(np.mean(xs)) - _EULER * sigma0
    best = None
    for xi0 in (0.1, -0.1):
        res = minimize(_gev_negloglik, x0=np.array([mu0, np.log(sigma0), xi0]),
                       args=(xs,), method="Nelder-Mead",
                       options={"maxiter": 2000, "xatol": 1e-8, "fatol": 1e-10})
        if best is None or res.fun < best.fun:
            best = res
    mu, log_sigma, xi = best.x
    params = GevParams(float(mu), float(np.exp(log_sigma)), float(xi))
    if abs(params.shape) >= XI_TOL and np.any(_gev_z(xs, params) <= 0):
        raise FitFailureError(
            f"fitted parameters {params} do not cover all samples")
    return params


def sample_gev(p: GevParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling; used for synthetic data and diagnostics."""
    u = rng.uniform(size=size)
    if abs(p.shape) < XI_TOL:
        return p.location - p.scale * np.log(-np.log(u))
    return p.location + p.scale * ((-np.log(u)) ** (-p.shape) - 1.0) / p.shape


# ---------------------------------------------------------------------------
# Gaussian


def fit_gaussian(xs) -> tuple[float, float]:
    """Sample mean and population standard deviation."""
    xs = np.asarray(xs, dtype=np.float64)
    scale = float(np.std(xs))
    if scale == 0.0:
        raise FitFailureError("degenerate sample: zero scale")
    return float(np.mean(xs)), scale


def gaussian_pdf(x, location: float, scale: float):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * ((x - location) / scale) ** 2) / (scale * np.sqrt(2 * np.pi))


# ---------------------------------------------------------------------------
# GMM


def _gmm_log_density(model: GmmModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    lw = np.log(model.weights)[:, None]
    lp = (-0.5 * (x[None, :] - model.means[:, None]) ** 2 / model.variances[:, None]
          - 0.5 * np.log(2 * np.pi * model.variances[:, None]))
    return logsumexp(lw + lp, axis=0)


def fit_gmm(xs, n_components: int, seed: int = 0,
            tol: float = 1e-7, max_iter: int = 500) -> GmmModel:
    """EM fit of a univariate mixture.

    Means start at the (i-0.5)/M quantiles with uniform weights and the
    sample variance for every component; this is deterministic and survives
    the heavy tails that defeat random initialization. A component whose
    variance collapses below the floor is re-seeded at a random data point.
    """
    xs = np.asarray(xs, dtype=np.float64)
    m = int(n_components)
    if m < 1:
        raise InvalidInputError("need at least one component")
    if len(xs) < 10 * m:
        raise FitFailureError(f"need at least {10 * m} samples for M={m}")
    if len(np.unique(xs)) < m:
        raise FitFailureError("more components than distinct values")
    if m == 1:
        # EM fixed point in closed form: the sample moments
        mean = float(np.mean(xs))
        var = max(float(np.mean((xs - mean) ** 2)), VARIANCE_FLOOR)
        model = GmmModel(np.array([1.0]), np.array([mean]), np.array([var]))
        ll = float(np.sum(_gmm_log_density(model, xs)))
        return GmmModel(model.weights, model.means, model.variances, np.array([ll]))
    rng = np.random.default_rng(seed)
    n = len(xs)
    weights = np.full(m, 1.0 / m)
    means = np.quantile(xs, (np.arange(m) + 0.5) / m)
    variances = np.full(m, max(float(np.var(xs)), VARIANCE_FLOOR))
    trace = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        # E step in the log domain: tails sit ~100 sigma out
        lw = np.log(weights)[:, None]
        lp = (-0.5 * (xs[None, :] - means[:, None]) ** 2 / variances[:, None]
              - 0.5 * np.log(2 * np.pi * variances[:, None]))
        joint = lw + lp
        norm = logsumexp(joint, axis=0)
        resp = np.exp(joint - norm[None, :])
        ll = float(np.sum(norm))
        trace.append(ll)
        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll
        # M step
        nk = resp.sum(axis=1)
        weights = nk / n
        means = resp @ xs / nk
        variances = (resp @ xs ** 2 / nk) - means ** 2
        collapsed = variances < VARIANCE_FLOOR
        if collapsed.any():
            for i in np.flatnonzero(collapsed):
                means[i] = xs[rng.integers(n)]
                variances[i] = max(float(np.var(xs)), VARIANCE_FLOOR)
            prev_ll = -np.inf  # restart convergence tracking after re-seeding
        variances = np.maximum(variances, VARIANCE_FLOOR)
    weights = weights / weights.sum()
    return GmmModel(weights, means, variances, np.asarray(trace))


def gmm_indicator(model: GmmModel, x):
    """Mixture density at x: the indicator feature fed to the forecasters."""
    x = np.asarray(x, dtype=np.float64)
    out = np.exp(_gmm_log_density(model, x))
    return out if x.ndim else float(out[0])


# ---------------------------------------------------------------------------
# Fit-quality diagnostic


def freedman_diaconis_bins(xs, minimum: int = 20) -> int:
    xs = np.asarray(xs, dtype=np.float64)
    q75, q25 = np.percentile(xs, [75, 25])
    iqr = q75 - q25
    if iqr <= 0:
        return minimum
    width = 2.0 * iqr / len(xs) ** (1.0 / 3.0)
    bins = int(np.ceil((xs.max() - xs.min()) / width))
    return max(bins, minimum)


def fit_quality(xs, pdf, bins: int | None = None) -> float:
    """RMSE between the normalized histogram of xs and pdf at bin centers.

    Lower is better; comparing the score of a Gaussian fit against a GEV fit
    on the same data diagnoses the presence of extreme-value tails.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if bins is None:
        bins = freedman_diaconis_bins(xs)
    if bins < 1:
        raise InvalidInputError("bins must be >= 1")
    hist, edges = np.histogram(xs, bins=bins, density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return float(np.sqrt(np.mean((hist - np.asarray(pdf(centers))) ** 2)))


# ---------------------------------------------------------------------------
# Serialization


def save_gmm(path: str | Path, model: GmmModel) -> None:
    pairs: dict = {"type": "gmm", "components": model.n_components}
    for i in range(model.n_components):
        pairs[f"weight_{i}"] = float(model.weights[i])
        pairs[f"mean_{i}"] = float(model.means[i])
        pairs[f"variance_{i}"] = float(model.variances[i])
    kvtext.write(path, pairs)


def load_gmm(path: str | Path) -> GmmModel:
    pairs = kvtext.read(path)
    if pairs.get("type") != "gmm":
        raise InvalidInputError(f"{path}: not a GMM model file")
    m = int(pairs["components"])
    return GmmModel(
        weights=np.array([float(pairs[f"weight_{i}"]) for i in range(m)]),
        means=np.array([float(pairs[f"mean_{i}"]) for i in range(m)]),
        variances=np.array([float(pairs[f"variance_{i}"]) for i in range(m)]),
    )


def save_gev(path: str | Path, p: GevParams) -> None:
    kvtext.write(path, {"type": "gev", "location": p.location,
                        "scale": p.scale, "shape": p.shape})


def load_gev(path: str | Path) -> GevParams:
    pairs = kvtext.read(path)
    if pairs.get("type") != "gev":
        raise InvalidInputError(f"{path}: not a GEV parameter file")
    return GevParams(float(pairs["location"]), float(pairs["scale"]),
                     float(pairs["shape"]))
