"""
Monte Carlo estimation and fitting helpers.

Rules:
- Binomial estimates carry std_err = sqrt(p(1-p)/n); intervals are exact (Clopper-Pearson).
- Log-log fits are weighted least squares with weights 1/Var(log y) ≈ (y/se)²,
  reported with a Student-t 95% interval on the slope.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from nearcrit.scheduler import count_events, run_replicas
from nearcrit.services.seeding import REPLICA

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimateResult:
    """Monte Carlo probability estimate."""
    p_hat: float
    std_err: float
    n_samples: int
    seed: int
    successes: int = 0
    metadata: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_counts(cls, successes: int, n_samples: int, seed: int, metadata: Optional[dict] = None) -> "EstimateResult":
        if n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        p_hat = successes / n_samples
        return cls(
            p_hat=p_hat,
            std_err=binomial_std_err(p_hat, n_samples),
            n_samples=n_samples,
            seed=seed,
            successes=successes,
            metadata=dict(metadata or {}),
        )

    def interval(self, level: float = 0.95) -> Tuple[float, float]:
        return clopper_pearson(self.successes, self.n_samples, level)

    def to_row(self) -> dict:
        row = {
            "p_hat": self.p_hat,
            "std_err": self.std_err,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }
        row.update(self.metadata)
        return row


@dataclass(frozen=True)
class MeanEstimate:
    """Sample mean with its standard error."""
    mean: float
    std_err: float
    n_samples: int
    seed: int


@dataclass(frozen=True)
class SlopeFit:
    """Weighted log-log line fit."""
    slope: float
    intercept: float
    slope_ci: Tuple[float, float]
    n_points: int

    def contains(self, value: float) -> bool:
        return self.slope_ci[0] <= value <= self.slope_ci[1]


def binomial_std_err(p_hat: float, n: int) -> float:
    return math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)


def joint_std_err(*errors: float) -> float:
    """Standard error of a sum or difference of independent estimates."""
    return math.sqrt(sum(e * e for e in errors))


def clopper_pearson(successes: int, n: int, level: float = 0.95) -> Tuple[float, float]:
    """Exact two-sided binomial confidence interval."""
    if n < 1:
        return (0.0, 1.0)
    a = 1.0 - level
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(a / 2, successes, n - successes + 1))
    hi = 1.0 if successes == n else float(stats.beta.ppf(1 - a / 2, successes + 1, n - successes))
    return (lo, hi)


def estimate_event(
    event: Callable[[np.random.Generator], bool],
    n_samples: int,
    seed: int,
    stream: Sequence[int] = (REPLICA,),
    threads: Optional[int] = None,
    metadata: Optional[dict] = None,
) -> EstimateResult:
    """
    Monte Carlo probability of ``event``.

    Replica r evaluates ``event`` with its own generator derived from
    (seed, stream, r); the count is a plain sum, so the result does not
    depend on the worker count.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    successes = count_events(event, n_samples, seed, stream=stream, threads=threads)
    result = EstimateResult.from_counts(successes, n_samples, seed, metadata)
    logger.debug(f"Event estimate {result.p_hat:.6g} ± {result.std_err:.2g} over {n_samples} samples")
    return result


def estimate_mean(
    fn: Callable[[np.random.Generator], float],
    n_samples: int,
    seed: int,
    stream: Sequence[int] = (REPLICA,),
    threads: Optional[int] = None,
) -> MeanEstimate:
    """Monte Carlo mean of a real-valued replica statistic."""
    values = np.asarray(run_replicas(fn, n_samples, seed, stream=stream, threads=threads), dtype=float)
    std_err = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return MeanEstimate(mean=float(values.mean()), std_err=std_err, n_samples=int(values.size), seed=seed)


def fit_loglog(x: Sequence[float], y: Sequence[float], std_err: Sequence[float], level: float = 0.95) -> SlopeFit:
    """
    Weighted least squares fit of log y = a + b log x.

    Points with y <= 0 carry no information on the log scale and are dropped.

    Raises:
        ValueError: if fewer than two usable points remain
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    se = np.asarray(std_err, dtype=float)
    keep = (y > 0) & (x > 0)
    x, y, se = x[keep], y[keep], se[keep]
    if x.size < 2:
        raise ValueError("Need at least two positive points for a log-log fit")

    lx = np.log(x)
    ly = np.log(y)
    sigma = np.maximum(se / y, 1e-12)
    w = 1.0 / sigma ** 2

    design = np.column_stack((np.ones_like(lx), lx))
    xtw = design.T * w
    normal = xtw @ design
    beta = np.linalg.solve(normal, xtw @ ly)
    cov = np.linalg.inv(normal)

    dof = x.size - 2
    if dof > 0:
        resid = ly - design @ beta
        scale = max(float((w * resid ** 2).sum() / dof), 1.0)
        half = float(stats.t.ppf(0.5 + level / 2, dof)) * math.sqrt(cov[1, 1] * scale)
    else:
        half = math.inf
    slope = float(beta[1])
    return SlopeFit(slope=slope, intercept=float(beta[0]), slope_ci=(slope - half, slope + half), n_points=int(x.size))
