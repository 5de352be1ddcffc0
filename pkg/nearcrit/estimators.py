"""
Monte Carlo estimators built on the percolation primitives: characteristic
length, one-arm density, arm and crossing probabilities.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from nearcrit.arms import ArmSpec, detect_arm_event
from nearcrit.errors import UndecidedError
from nearcrit.lattice import BoundarySide, Window, cached_side_mask, window_mask
from nearcrit.messages import L_AT_CRITICALITY
from nearcrit.percolation import (
    Color,
    Orientation,
    SiteConfig,
    detect_crossing,
    label_mask,
    largest_cluster,
    sample,
)
from nearcrit.scheduler import count_events
from nearcrit.services.seeding import REPLICA
from nearcrit.services.stats import EstimateResult, clopper_pearson, estimate_event

logger = logging.getLogger(__name__)

P_C = 0.5

# Characteristic length: smallest n with P(Cv([0,2n]×[0,n])) <= L_THRESHOLD,
# decided from exact 99% intervals against asymmetric guards.
L_THRESHOLD = 0.001
L_UPPER_GUARD = 0.002
L_LOWER_GUARD = 0.0005
L_CONFIDENCE = 0.99
L_BATCH = 2000
L_MAX_N = 1 << 16

# stream tag for the characteristic-length search: (REPLICA, L_STREAM, n, r)
L_STREAM = 101


def l_rectangle(n: int) -> Window:
    return Window.rectangle(0.0, 2.0 * n, 0.0, float(n))


def _vertical_crossing_event(q: float, n: int):
    rect = l_rectangle(n)

    def event(rng: np.random.Generator) -> bool:
        return detect_crossing(sample(rect, q, rng), rect, Orientation.VERTICAL, Color.OCCUPIED)

    return event


def crossing_exceeds(q: float, n: int, mc_budget: int, seed: int, threads: Optional[int] = None) -> bool:
    """
    Decide whether P_q(Cv([0,2n]×[0,n])) exceeds the threshold.

    Samples in batches until the 99% interval clears a guard.

    Raises:
        UndecidedError: if ``mc_budget`` samples do not decide
    """
    event = _vertical_crossing_event(q, n)
    successes = 0
    total = 0
    while total < mc_budget:
        batch = min(L_BATCH, mc_budget - total)
        successes += count_events(event, batch, seed, stream=(REPLICA, L_STREAM, n), start=total, threads=threads)
        total += batch
        lo, hi = clopper_pearson(successes, total, L_CONFIDENCE)
        logger.debug(f"L search q={q} n={n}: {successes}/{total}, interval [{lo:.2e}, {hi:.2e}]")
        if hi < L_UPPER_GUARD:
            return False
        if lo > L_LOWER_GUARD:
            return True
    raise UndecidedError(f"Crossing probability at q={q}, n={n} undecided after {total} samples")


def estimate_L(p: float, mc_budget: int = 40000, seed: int = 0, threads: Optional[int] = None) -> int:
    """
    Characteristic length L(p).

    Searches by doubling then bisection for the smallest n at which the
    easy-way crossing of [0,2n]×[0,n] has probability at most 0.001, by the
    colour of the minority phase. L(p) = L(1-p) holds exactly: both are
    computed at q = min(p, 1-p) from the same streams.

    Raises:
        UndecidedError: at p = 1/2, or when the budget does not decide
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if p == P_C:
        raise UndecidedError(L_AT_CRITICALITY)
    q = min(p, 1.0 - p)

    def exceeds(n: int) -> bool:
        return crossing_exceeds(q, n, mc_budget, seed, threads)

    hi = 1
    while exceeds(hi):
        hi *= 2
        if hi > L_MAX_N:
            raise UndecidedError(f"L({p}) exceeds the search range {L_MAX_N}")
    if hi == 1:
        return 1
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if exceeds(mid):
            lo = mid
        else:
            hi = mid
    logger.info(f"L({p}) = {hi}")
    return hi


def _one_arm_event(p: float, n: int):
    ball = Window.ball(n)
    grid, _ = window_mask(ball)
    boundary = cached_side_mask(ball, BoundarySide.INNER)
    origin = grid.index((0, 0))

    def event(rng: np.random.Generator) -> bool:
        config = sample(ball, p, rng)
        occupied = config.occupied()
        if not occupied[origin]:
            return False
        label, _ = label_mask(occupied)
        return bool(np.any(label[boundary] == label[origin]))

    return event


def estimate_theta(p: float, n: int, n_samples: int, seed: int, threads: Optional[int] = None) -> EstimateResult:
    """Estimate of P_p(0 ↔ inner boundary of ball(n)), the finite-volume proxy of θ(p)."""
    if not P_C < p <= 1.0:
        raise ValueError(f"theta is estimated for supercritical p, got {p}")
    if n < 1:
        raise ValueError("n must be at least 1")
    return estimate_event(
        _one_arm_event(p, n), n_samples, seed, threads=threads,
        metadata={"p": p, "n": n, "estimate": "theta"},
    )


def estimate_one_arm(p: float, n: int, n_samples: int, seed: int, threads: Optional[int] = None) -> EstimateResult:
    """P_p(0 ↔ inner boundary of ball(n)) for any p."""
    return estimate_event(
        _one_arm_event(p, n), n_samples, seed, threads=threads,
        metadata={"p": p, "n": n, "estimate": "one-arm"},
    )


def estimate_arm(
    spec: ArmSpec,
    n1: float,
    n2: float,
    p: float,
    n_samples: int,
    seed: int,
    threads: Optional[int] = None,
) -> EstimateResult:
    """Probability of the arm event ``spec`` across annulus(n1, n2)."""
    annulus = Window.annulus(n1, n2)

    def event(rng: np.random.Generator) -> bool:
        return detect_arm_event(sample(annulus, p, rng), annulus, spec)

    return estimate_event(
        event, n_samples, seed, threads=threads,
        metadata={"sigma": spec.word, "n1": n1, "n2": n2, "p": p},
    )


def estimate_crossing(
    rect: Window,
    p: float,
    n_samples: int,
    seed: int,
    orientation=Orientation.HORIZONTAL,
    color=Color.OCCUPIED,
    threads: Optional[int] = None,
) -> EstimateResult:
    """Probability of a ``color`` crossing of ``rect``."""
    orientation = Orientation.parse(orientation)
    color = Color.parse(color)

    def event(rng: np.random.Generator) -> bool:
        return detect_crossing(sample(rect, p, rng), rect, orientation, color)

    return estimate_event(
        event, n_samples, seed, threads=threads,
        metadata={"window": rect.kind.value, "orientation": orientation.value, "color": color.value, "p": p},
    )


@dataclass(frozen=True)
class QuasiMultiplicativity:
    """π(n1,n3) against π(n1,n2)·π(n2,n3)."""
    outer: EstimateResult
    inner: EstimateResult
    joined: EstimateResult

    @property
    def ratio(self) -> float:
        product = self.inner.p_hat * self.outer.p_hat
        return self.joined.p_hat / product if product > 0 else float("inf")

    def to_row(self) -> Dict[str, float]:
        return {
            "pi_n1_n3": self.joined.p_hat,
            "pi_n1_n2": self.inner.p_hat,
            "pi_n2_n3": self.outer.p_hat,
            "ratio": self.ratio,
        }


def quasi_multiplicativity(
    spec: ArmSpec,
    n1: float,
    n2: float,
    n3: float,
    p: float,
    n_samples: int,
    seed: int,
    threads: Optional[int] = None,
) -> QuasiMultiplicativity:
    """Arm probabilities over (n1, n3), (n1, n2) and (n2, n3), on independent streams."""
    return QuasiMultiplicativity(
        joined=estimate_arm(spec, n1, n3, p, n_samples, seed, threads),
        inner=estimate_arm(spec, n1, n2, p, n_samples, seed + 1, threads),
        outer=estimate_arm(spec, n2, n3, p, n_samples, seed + 2, threads),
    )


def volume_ratio(config: SiteConfig, theta_hat: float) -> float:
    """Largest cluster volume over |window|·θ̂."""
    _, volume = largest_cluster(config)
    denominator = config.n_sites * theta_hat
    return volume / denominator if denominator > 0 else float("inf")
