"""Simulated datasets: correlated Gaussian signal, optional noise, binary outcome.

Four signal variables are drawn from a multivariate normal with unit
variances and a common pairwise correlation ``rho``; twelve optional noise
variables are independent standard normals. The outcome is
``Bernoulli(logistic(beta0 + beta * (V1 + V2 + V3 + V4)))``, with ``beta`` and
``beta0`` calibrated to a target AUROC and prevalence.

Standard normals come from numpy's PCG64 generator (ziggurat method), so a
given seed yields the same data on every platform numpy supports.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import metrics
from .errors import ConvergenceError
from .tabular import Continuous, Dataset

N_SIGNAL = 4
N_NOISE = 12
MAX_STEPS = 60


@dataclass(frozen=True)
class SimSpec:
    """Simulation settings.

    ``calibration_rows`` and ``calibration_seed`` govern the Monte-Carlo
    sample used by :func:`calibrate_coefficients`; ``tolerance`` is its
    stopping rule on the AUROC.
    """

    n_rows: int = 4000
    rho: float = 0.7
    include_noise: bool = False
    auroc: float = 0.75
    prevalence: float = 0.20
    seed: int = 0
    calibration_rows: int = 200_000
    calibration_seed: int = 20_000
    tolerance: float = 0.005

    def __post_init__(self):
        if self.n_rows < 1:
            raise ValueError("n_rows must be >= 1")
        # equicorrelation matrix is positive definite iff -1/(k-1) < rho < 1
        if not -1.0 / (N_SIGNAL - 1) < self.rho < 1.0:
            raise ValueError(f"rho={self.rho} does not give a positive-definite correlation matrix")
        if not 0.5 < self.auroc < 1.0:
            raise ValueError("target AUROC must lie in (0.5, 1)")
        if not 0.0 < self.prevalence < 1.0:
            raise ValueError("prevalence must lie in (0, 1)")
        if self.calibration_rows < 1000:
            raise ValueError("calibration needs at least 1000 rows")

    @property
    def names(self) -> list[str]:
        cols = [f"V{i + 1}" for i in range(N_SIGNAL)]
        if self.include_noise:
            cols += [f"N{i + 1}" for i in range(N_NOISE)]
        return cols + ["outcome"]


@dataclass(frozen=True)
class SimCoefficients:
    beta: float
    beta0: float
    auroc: float
    prevalence: float

    @property
    def noise_beta(self) -> float:
        return 0.0


# Named scenarios; "_noise" variants add the 12 noise columns.
SCENARIOS = {
    "sim_75_1": dict(auroc=0.75, rho=0.1),
    "sim_75_7": dict(auroc=0.75, rho=0.7),
    "sim_90_1": dict(auroc=0.90, rho=0.1),
    "sim_90_7": dict(auroc=0.90, rho=0.7),
}


def scenario(name: str, **overrides) -> SimSpec:
    """SimSpec for a scenario name such as ``sim_75_7`` or ``sim_90_1_noise``."""
    base, noise = name, False
    if name.endswith("_noise"):
        base, noise = name[: -len("_noise")], True
    if base not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}")
    kw = dict(SCENARIOS[base], include_noise=noise)
    kw.update(overrides)
    return SimSpec(**kw)


def equicorrelation(rho: float, k: int = N_SIGNAL) -> np.ndarray:
    return np.full((k, k), rho) + (1.0 - rho) * np.eye(k)


def cholesky_factor(rho: float) -> np.ndarray:
    """Lower-triangular L with L @ L.T equal to the equicorrelation matrix."""
    try:
        return np.linalg.cholesky(equicorrelation(rho))
    except np.linalg.LinAlgError:
        raise ValueError(f"rho={rho} gives a non positive-definite matrix") from None


def _signal(rng: np.random.Generator, n: int, rho: float) -> np.ndarray:
    z = rng.standard_normal((n, N_SIGNAL))
    return z @ cholesky_factor(rho).T


def _intercept(score: np.ndarray, beta: float, prevalence: float) -> float:
    lo, hi = -60.0, 60.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if expit(mid + beta * score).mean() < prevalence:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


@functools.lru_cache(maxsize=32)
def _calibrate(rho, auroc, prevalence, rows, seed, tol) -> SimCoefficients:
    rng = np.random.default_rng(seed)
    score = _signal(rng, rows, rho).sum(axis=1)

    def evaluate(beta):
        b0 = _intercept(score, beta, prevalence)
        p = expit(b0 + beta * score)
        return b0, metrics.weighted_auroc(score, p), float(p.mean())

    lo, hi = 0.0, 1.0
    while evaluate(hi)[1] < auroc:
        hi *= 2.0
        if hi > 1e3:
            raise ConvergenceError("target AUROC not reachable")
    for _ in range(MAX_STEPS):
        beta = 0.5 * (lo + hi)
        b0, auc, prev = evaluate(beta)
        if abs(auc - auroc) < tol:
            return SimCoefficients(beta, b0, auc, prev)
        if auc < auroc:
            lo = beta
        else:
            hi = beta
    raise ConvergenceError(f"calibration did not converge within {MAX_STEPS} bisection steps")


def calibrate_coefficients(spec: SimSpec) -> SimCoefficients:
    """Find ``beta`` (bisection on AUROC) and ``beta0`` (bisection on prevalence).

    Both targets are evaluated on a fixed Monte-Carlo sample of
    ``spec.calibration_rows`` signal draws. The AUROC of the linear predictor
    is taken in expectation over the outcome draw (pairs weighted by their
    case/control probabilities), which is smooth in ``beta``; prevalence is
    the mean event probability. Results are cached per setting.
    """
    return _calibrate(
        float(spec.rho), float(spec.auroc), float(spec.prevalence),
        int(spec.calibration_rows), int(spec.calibration_seed), float(spec.tolerance),
    )


def simulate(spec: SimSpec, coeffs: SimCoefficients | None = None) -> Dataset:
    """Draw ``spec.n_rows`` rows; columns V1..V4, [N1..N12], outcome (0/1)."""
    coeffs = coeffs or calibrate_coefficients(spec)
    rng = np.random.default_rng(spec.seed)
    x = _signal(rng, spec.n_rows, spec.rho)
    parts = [x]
    if spec.include_noise:
        parts.append(rng.standard_normal((spec.n_rows, N_NOISE)))
    p = expit(coeffs.beta0 + coeffs.beta * x.sum(axis=1))
    y = (rng.random(spec.n_rows) < p).astype(np.float64)
    values = np.column_stack(parts + [y])
    names = spec.names
    return Dataset(names, [Continuous()] * len(names), values)


__all__ = [
    "SimSpec",
    "SimCoefficients",
    "SCENARIOS",
    "scenario",
    "equicorrelation",
    "cholesky_factor",
    "calibrate_coefficients",
    "simulate",
]
