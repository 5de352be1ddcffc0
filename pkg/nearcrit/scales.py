"""
Near-critical scale calculus.

Time t and occupation probability are linked by p(t) = 1 - e^{-t}, so the
critical time is t_c = ln 2. A backend supplies the characteristic length
L(t) and the density θ(t); from them

    ψ_ζ(t) = t̂  where  L(t)²·θ(t̂)·(t̂ - t_c) = 1/ζ,

its largest fixed point t_∞(ζ), and the exceptional sequence t_0 = 2 t_c,
t_{k+1} = ψ_ζ^{-1}(t_k), m_k = L(t_k).

Everything is computed in the offset ε = t - t_c to keep precision close to
t_c. Root finding is bracketed bisection on log ε only.
"""
import abc
import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.interpolate import PchipInterpolator

from nearcrit.errors import BackendDomainError
from nearcrit.estimators import estimate_L, estimate_theta

logger = logging.getLogger(__name__)

T_C = math.log(2.0)

L_EXPONENT = 4.0 / 3.0
THETA_EXPONENT = 5.0 / 36.0
ONE_ARM_EXPONENT = 5.0 / 48.0
FOUR_ARM_EXPONENT = 5.0 / 4.0
DELTA_INFINITY = Fraction(36, 55)
DELTA_RATIO = Fraction(41, 96)

LOG_EPS_MIN = math.log(1e-250)
LOG_EPS_MAX = math.log(1e250)
BISECT_XTOL = 1e-13
DEFAULT_GRID_PER_DECADE = 20
SCAN_TOP = 64.0 * T_C


# =============================================================================
# TIME AND PARAMETER
# =============================================================================

def p_of_t(t: float) -> float:
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return -math.expm1(-t)


def t_of_p(p: float) -> float:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must lie in [0, 1), got {p}")
    return -math.log1p(-p)


def mirror_offset(t: float) -> float:
    """Offset of the supercritical time with the same L as ``t``: p(t) ↦ 1 - p(t)."""
    if t >= T_C:
        return t - T_C
    return t_of_p(1.0 - p_of_t(t)) - T_C


# =============================================================================
# BACKENDS
# =============================================================================

class ScaleBackend(abc.ABC):
    """L and θ as functions of the supercritical offset ε > 0."""

    kind: str = ""

    @abc.abstractmethod
    def L_eps(self, eps: float) -> float:
        ...

    @abc.abstractmethod
    def theta_eps(self, eps: float) -> float:
        ...

    @abc.abstractmethod
    def to_dict(self) -> dict:
        ...

    def L(self, t: float) -> float:
        """Characteristic length at time t (either side of t_c)."""
        return self.L_eps(self._offset(mirror_offset(t)))

    def theta(self, t: float) -> float:
        if t <= T_C:
            return 0.0
        return self.theta_eps(t - T_C)

    def L_inverse_eps(self, length: float) -> float:
        """The offset ε > 0 with L(t_c + ε) = length."""
        if not length > 0 or not math.isfinite(length):
            raise BackendDomainError(f"Length {length} outside the backend range")
        target = math.log(length)
        return _bisect_log(lambda e: math.log(self.L_eps(e)) - target, decreasing=True)

    def arm_probability(self, n: float, exponent: float) -> float:
        """Power-law arm probability n^-exponent."""
        return n ** (-exponent)

    @staticmethod
    def _offset(eps: float) -> float:
        if not eps > 0 or not math.isfinite(eps):
            raise BackendDomainError(f"Offset {eps} outside the backend domain")
        return eps


@dataclass
class AnalyticBackend(ScaleBackend):
    """L = a_L·ε^{-4/3}, θ = a_θ·ε^{5/36}."""
    a_L: float = 1.0
    a_theta: float = 1.0
    kind: str = field(default="analytic", init=False)

    def L_eps(self, eps: float) -> float:
        return self.a_L * self._offset(eps) ** (-L_EXPONENT)

    def theta_eps(self, eps: float) -> float:
        return self.a_theta * self._offset(eps) ** THETA_EXPONENT

    def L_inverse_eps(self, length: float) -> float:
        if not length > 0:
            raise BackendDomainError(f"Length {length} outside the backend range")
        return (length / self.a_L) ** (-1.0 / L_EXPONENT)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "a_L": self.a_L, "a_theta": self.a_theta}


class EmpiricalBackend(ScaleBackend):
    """
    Monotone interpolation of measured L and θ.

    Tables are (p, value) pairs; p < 1/2 entries of L are mirrored to 1 - p.
    Values are forced monotone (L strictly decreasing, θ strictly increasing in
    ε), interpolated by PCHIP in log-log coordinates and extended outside the
    measured range by the analytic exponents.
    """

    kind = "empirical"

    def __init__(self, L_table: Sequence[Tuple[float, float]], theta_table: Sequence[Tuple[float, float]]) -> None:
        if len(L_table) < 2 or len(theta_table) < 2:
            raise BackendDomainError("Empirical backend needs at least two points per table")
        self.L_table = [(float(row[0]), float(row[1])) for row in L_table]
        self.theta_table = [(float(row[0]), float(row[1])) for row in theta_table]
        self._L = _LogLogMonotone(
            [(_table_offset(max(p, 1.0 - p)), v) for p, v in self.L_table],
            decreasing=True,
            tail_exponent=-L_EXPONENT,
        )
        self._theta = _LogLogMonotone(
            [(_table_offset(p), v) for p, v in self.theta_table if p > 0.5],
            decreasing=False,
            tail_exponent=THETA_EXPONENT,
        )

    def L_eps(self, eps: float) -> float:
        return self._L(self._offset(eps))

    def theta_eps(self, eps: float) -> float:
        return self._theta(self._offset(eps))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "L_table": self.L_table, "theta_table": self.theta_table}


def _table_offset(p: float) -> float:
    if not 0.5 < p < 1.0:
        raise BackendDomainError(f"Table point p={p} is not supercritical")
    return t_of_p(p) - T_C


class _LogLogMonotone:
    """Strictly monotone PCHIP interpolant of log value against log ε with power-law tails."""

    STEP = 1e-9

    def __init__(self, points: Sequence[Tuple[float, float]], decreasing: bool, tail_exponent: float) -> None:
        pts = sorted((e, v) for e, v in points if v > 0)
        if len(pts) < 2:
            raise BackendDomainError("Need at least two positive table values")
        x = np.log([e for e, _ in pts])
        y = np.log([v for _, v in pts])
        keep = np.r_[True, np.diff(x) > 0]
        x, y = x[keep], y[keep]
        if x.size < 2:
            raise BackendDomainError("Need at least two distinct table offsets")
        if decreasing:
            y = np.minimum.accumulate(y)
            for i in range(1, y.size):
                y[i] = min(y[i], y[i - 1] - self.STEP)
        else:
            y = np.maximum.accumulate(y)
            for i in range(1, y.size):
                y[i] = max(y[i], y[i - 1] + self.STEP)
        self.x = x
        self.y = y
        self.tail_exponent = tail_exponent
        self._interp = PchipInterpolator(x, y, extrapolate=False)

    def __call__(self, eps: float) -> float:
        lx = math.log(eps)
        if lx < self.x[0]:
            return math.exp(self.y[0] + self.tail_exponent * (lx - self.x[0]))
        if lx > self.x[-1]:
            return math.exp(self.y[-1] + self.tail_exponent * (lx - self.x[-1]))
        return math.exp(float(self._interp(lx)))


def backend_from_dict(data: dict) -> ScaleBackend:
    kind = data.get("kind", "analytic")
    if kind == "analytic":
        return AnalyticBackend(a_L=float(data.get("a_L", 1.0)), a_theta=float(data.get("a_theta", 1.0)))
    if kind == "empirical":
        return EmpiricalBackend(data["L_table"], data["theta_table"])
    raise BackendDomainError(f"Unknown backend kind: {kind}")


# =============================================================================
# ROOT FINDING
# =============================================================================

def _bisect_log(f, decreasing: bool = False, start: float = 1.0) -> float:
    """
    Root in ε of a monotone function of ε, bracketed by doubling on log ε.

    Raises:
        BackendDomainError: if no sign change exists inside the backend domain
    """
    def g(lx: float) -> float:
        try:
            value = f(math.exp(lx))
        except (OverflowError, ZeroDivisionError) as e:
            raise BackendDomainError(f"Backend evaluation failed at log eps = {lx:.3g}: {e}") from e
        return -value if decreasing else value

    lo = hi = math.log(start)
    g_lo = g_hi = g(lo)
    step = 1.0
    while g_lo > 0:
        lo -= step
        step *= 2
        if lo < LOG_EPS_MIN:
            raise BackendDomainError("Root lies below the backend domain")
        g_lo = g(lo)
    step = 1.0
    while g_hi < 0:
        hi += step
        step *= 2
        if hi > LOG_EPS_MAX:
            raise BackendDomainError("Root lies above the backend domain")
        g_hi = g(hi)
    if g_lo == 0:
        return math.exp(lo)
    if g_hi == 0:
        return math.exp(hi)
    return math.exp(optimize.bisect(g, lo, hi, xtol=BISECT_XTOL, maxiter=400))


def psi_eps(zeta: float, eps: float, backend: ScaleBackend) -> float:
    """ψ_ζ in offsets: the u > 0 with θ(t_c + u)·u = 1 / (ζ·L(t_c + eps)²)."""
    if not zeta > 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    target = -math.log(zeta) - 2.0 * math.log(backend.L_eps(eps))
    return _bisect_log(lambda u: math.log(backend.theta_eps(u)) + math.log(u) - target, start=eps)


def psi(zeta: float, t: float, backend: ScaleBackend) -> float:
    """t̂ = ψ_ζ(t) for t > t_c."""
    if not t > T_C:
        raise BackendDomainError(f"psi is defined for t > t_c, got {t}")
    return T_C + psi_eps(zeta, t - T_C, backend)


def psi_inverse_eps(zeta: float, target_eps: float, backend: ScaleBackend) -> float:
    """The offset ε with ψ_ζ(t_c + ε) = t_c + target_eps."""
    if not target_eps > 0:
        raise BackendDomainError(f"Target offset must be positive, got {target_eps}")
    log_target = math.log(target_eps)
    return _bisect_log(lambda e: math.log(psi_eps(zeta, e, backend)) - log_target, start=target_eps)


def psi_inverse(zeta: float, t_target: float, backend: ScaleBackend) -> float:
    if not t_target > T_C:
        raise BackendDomainError(f"psi_inverse needs a target above t_c, got {t_target}")
    return T_C + psi_inverse_eps(zeta, t_target - T_C, backend)


def t_infinity_eps(zeta: float, backend: ScaleBackend, grid_per_decade: int = DEFAULT_GRID_PER_DECADE) -> float:
    """
    Offset of the largest fixed point of ψ_ζ.

    Scans ψ_ζ(ε) - ε downward on a log grid with ``grid_per_decade`` points per
    decade; the first sign change is refined by bisection.

    Raises:
        BackendDomainError: if the top of the scan is not above every fixed
            point or no sign change is found
    """
    def f(lx: float) -> float:
        return math.log(psi_eps(zeta, math.exp(lx), backend)) - lx

    step = math.log(10.0) / grid_per_decade
    hi = math.log(SCAN_TOP)
    f_hi = f(hi)
    if f_hi <= 0:
        raise BackendDomainError(f"psi(t) <= t at the top of the scan for zeta={zeta}")
    lo = hi
    while True:
        lo = hi - step
        if lo < LOG_EPS_MIN:
            raise BackendDomainError(f"No fixed point of psi found for zeta={zeta}")
        f_lo = f(lo)
        if f_lo <= 0:
            break
        hi, f_hi = lo, f_lo
    if f_lo == 0:
        return math.exp(lo)
    return math.exp(optimize.bisect(f, lo, hi, xtol=BISECT_XTOL, maxiter=400))


def t_infinity(zeta: float, backend: ScaleBackend, grid_per_decade: int = DEFAULT_GRID_PER_DECADE) -> float:
    return T_C + t_infinity_eps(zeta, backend, grid_per_decade)


# =============================================================================
# EXPONENTS
# =============================================================================

def delta_k(k: int) -> Fraction:
    """δ_k = (36/55)·(1 - (41/96)^k), exactly."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return DELTA_INFINITY * (1 - DELTA_RATIO ** k)


def asymptotic_m_k(zeta: float, k: int) -> float:
    """ζ^{-(4/3)·δ_k}."""
    return zeta ** (-(4.0 / 3.0) * float(delta_k(k)))


# =============================================================================
# SCALE TABLE
# =============================================================================

@dataclass(frozen=True)
class ScaleRow:
    k: int
    t_k: float
    eps_k: float
    m_k: float
    delta_k: Fraction
    m_k_asymptotic: float


@dataclass
class ScaleTable:
    """Exceptional times and scales for one ζ."""
    zeta: float
    t_inf: float
    eps_inf: float
    backend: Dict[str, object]
    rows: List[ScaleRow]

    CSV_COLUMNS = ("k", "t_k", "eps_k", "m_k", "delta_k", "m_k_asymptotic")

    def to_rows(self) -> List[dict]:
        return [
            {
                "k": row.k,
                "t_k": row.t_k,
                "eps_k": row.eps_k,
                "m_k": row.m_k,
                "delta_k": float(row.delta_k),
                "m_k_asymptotic": row.m_k_asymptotic,
            }
            for row in self.rows
        ]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=self.CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.to_rows():
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buffer.getvalue()

    def to_dict(self) -> dict:
        return {
            "zeta": self.zeta,
            "t_inf": self.t_inf,
            "eps_inf": self.eps_inf,
            "backend": self.backend,
            "rows": [dict(r, delta_k_exact=str(row.delta_k)) for r, row in zip(self.to_rows(), self.rows)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def exceptional_sequence(
    zeta: float,
    k_max: int,
    backend: ScaleBackend,
    grid_per_decade: int = DEFAULT_GRID_PER_DECADE,
) -> ScaleTable:
    """
    Rows k = 0..k_max of the exceptional sequence.

    Raises:
        BackendDomainError: if t_∞ ≥ 2 t_c or the iteration leaves the domain
    """
    eps_inf = t_infinity_eps(zeta, backend, grid_per_decade)
    if eps_inf >= T_C:
        raise BackendDomainError(f"t_inf({zeta}) >= 2 t_c; no exceptional sequence")
    rows: List[ScaleRow] = []
    eps = T_C
    for k in range(k_max + 1):
        if k > 0:
            eps_next = psi_inverse_eps(zeta, eps, backend)
            if not eps_inf < eps_next < eps:
                raise BackendDomainError(f"Exceptional iteration left (t_inf, t_{k - 1}) at k={k}")
            eps = eps_next
        rows.append(ScaleRow(
            k=k,
            t_k=T_C + eps,
            eps_k=eps,
            m_k=backend.L_eps(eps),
            delta_k=delta_k(k),
            m_k_asymptotic=asymptotic_m_k(zeta, k),
        ))
        logger.debug(f"zeta={zeta} k={k}: eps={eps:.6g}, m={rows[-1].m_k:.6g}")
    return ScaleTable(zeta=zeta, t_inf=T_C + eps_inf, eps_inf=eps_inf, backend=backend.to_dict(), rows=rows)


def recursion_residual(table: ScaleTable, backend: ScaleBackend, k: int) -> float:
    """ζ·ε_{k-1}·m_k²·θ(t_c + ε_{k-1}), equal to 1 on an exact table."""
    prev = table.rows[k - 1]
    row = table.rows[k]
    return table.zeta * prev.eps_k * row.m_k ** 2 * backend.theta_eps(prev.eps_k)


def epsilon_tilde_M(zeta: float, M: float, backend: ScaleBackend) -> Tuple[float, float]:
    """
    ε̃ with t_c + ε̃ = ψ_ζ(L^{-1}(M)), and M̃ = L(t_c + ε̃).
    """
    eps_m = backend.L_inverse_eps(M)
    eps_tilde = psi_eps(zeta, eps_m, backend)
    return eps_tilde, backend.L_eps(eps_tilde)


def arm_scaling_ratio(zeta: float, M: float, backend: ScaleBackend) -> float:
    """ζ·M² / (M̃²·π4(M̃)/π1(M̃)); identically 1 for the unit analytic backend."""
    _, m_tilde = epsilon_tilde_M(zeta, M, backend)
    pi4 = backend.arm_probability(m_tilde, FOUR_ARM_EXPONENT)
    pi1 = backend.arm_probability(m_tilde, ONE_ARM_EXPONENT)
    return zeta * M ** 2 / (m_tilde ** 2 * pi4 / pi1)


def measure_backend_tables(
    p_grid: Sequence[float],
    seed: int,
    mc_budget: int = 40000,
    theta_samples: int = 2000,
    theta_scale: float = 2.0,
    threads: Optional[int] = None,
) -> Tuple[List[Tuple[float, float, float]], List[Tuple[float, float, float]]]:
    """
    Monte Carlo tables for the empirical backend.

    Returns:
        (L rows as (p, L̂, 0.0), θ rows as (p, θ̂, std_err)); θ̂ is measured at
        n = theta_scale·L̂(p)
    """
    L_rows = []
    theta_rows = []
    for i, p in enumerate(p_grid):
        length = estimate_L(p, mc_budget=mc_budget, seed=seed + i, threads=threads)
        n = max(1, int(round(theta_scale * length)))
        theta = estimate_theta(p, n, theta_samples, seed + 1000 + i, threads=threads)
        L_rows.append((p, float(length), 0.0))
        theta_rows.append((p, theta.p_hat, theta.std_err))
        logger.info(f"Empirical table p={p}: L={length}, theta={theta.p_hat:.4f}")
    return L_rows, theta_rows
