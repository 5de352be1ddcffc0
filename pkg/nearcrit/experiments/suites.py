"""
Experiment suites.

Each suite walks a parameter grid, appends one row per grid point (point
value, std error and sample count) and records named checks. Stability suites
use the Domain-I hole law α = 55/48 + υ, β = α + υ′ with unit constants.
"""
import logging
import math
from dataclasses import replace
from typing import List, Optional, Tuple

import numpy as np

from nearcrit.arms import ArmSpec, detect_arm_event
from nearcrit.errors import TooManyHolesError, UndecidedError
from nearcrit.estimators import estimate_arm, estimate_L, estimate_theta, volume_ratio
from nearcrit.estimators import quasi_multiplicativity as measure_quasi_multiplicativity
from nearcrit.experiments.runner import SuiteContext, suite
from nearcrit.forestfire import (
    FireOptions,
    estimate_burning_prob,
    estimate_burning_prob_circuits,
    measure_rho_pi,
    neighbor_table,
    simulate_ffwor,
    simulate_Y,
)
from nearcrit.frozen import simulate_frozen
from nearcrit.impurities import (
    HoleParams,
    HoleVariant,
    analytic_hole_bounds,
    apply_holes,
    describe_domain,
    detect_hole_crossing,
    detect_W4,
    domain_one_defaults,
    sample_holes,
)
from nearcrit.lattice import BoundarySide, Window, cached_side_mask
from nearcrit.percolation import BURNT, OCCUPIED, Color, Orientation, SiteConfig, detect_crossing, detect_net, label_mask, net_window, sample
from nearcrit.scales import T_C, AnalyticBackend, ScaleBackend, p_of_t, t_of_p
from nearcrit.scheduler import run_replicas
from nearcrit.services.cache import load_backend
from nearcrit.services.seeding import child_seed
from nearcrit.services.stats import binomial_std_err, estimate_mean, fit_loglog, joint_std_err

logger = logging.getLogger(__name__)

ONE_ARM = 5.0 / 48.0


# =============================================================================
# HELPERS
# =============================================================================

def expected_arm_exponent(spec: ArmSpec) -> Optional[float]:
    """5/48 for one arm, (k²-1)/12 for polychromatic k arms, unknown for monochromatic k ≥ 2."""
    if spec.k == 1:
        return ONE_ARM
    if spec.is_monochromatic:
        return None
    return (spec.k ** 2 - 1) / 12.0


def slope_window(spec: ArmSpec, windows: dict, tolerance: float) -> Optional[Tuple[float, float]]:
    """Accepted log-log slope range: an explicit window, else the known exponent within a relative tolerance."""
    if spec.word in windows:
        lo, hi = windows[spec.word]
        return float(lo), float(hi)
    expected = expected_arm_exponent(spec)
    if expected is None:
        return None
    return -expected * (1.0 + tolerance), -expected * (1.0 - tolerance)


def supercritical_p_for_length(length: float) -> float:
    """p > 1/2 with analytic L(p) = length."""
    return p_of_t(T_C + AnalyticBackend().L_inverse_eps(length))


def subcritical_eps_for_length(length: float) -> float:
    """ε with analytic L(t_c - ε) = length."""
    p = 1.0 - supercritical_p_for_length(length)
    return T_C - t_of_p(p)


def _hole_params(ctx: SuiteContext, m: float) -> HoleParams:
    return domain_one_defaults(m, ctx.params["upsilon"], ctx.params["upsilon_prime"])


def _backend(ctx: SuiteContext) -> ScaleBackend:
    return load_backend(ctx.params.get("backend", "analytic"))


def arm_to_boundary(config: SiteConfig, color: Color = Color.OCCUPIED) -> bool:
    """Origin has ``color`` and is joined in that colour to the inner boundary of the config's ball."""
    colored = config.color_mask(color)
    origin = config.grid.index((0, 0))
    if not colored[origin]:
        return False
    label, _ = label_mask(colored)
    return bool(np.any(label[cached_side_mask(config.window, BoundarySide.INNER)] == label[origin]))


def _pair_means(pairs: List[Tuple[float, float]]) -> Tuple[float, float, float, float]:
    values = np.asarray(pairs, dtype=float)
    n = values.shape[0]
    means = values.mean(axis=0)
    errs = values.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(2)
    return float(means[0]), float(errs[0]), float(means[1]), float(errs[1])


# =============================================================================
# CLASSICAL PERCOLATION
# =============================================================================

@suite(
    "arm-exponents",
    p=0.5,
    inner=1.0,
    radii=[8, 16, 32, 64, 128, 256],
    sigmas=["o", "ovov"],
    monochromatic=["oo"],
    n_samples=50000,
    windows={"o": [-0.16, -0.06], "ovov": [-1.45, -1.05]},
    tolerance=0.3,
)
def arm_exponents(ctx: SuiteContext) -> None:
    """Log-log slopes of arm probabilities must fall in their acceptance windows."""
    prm = ctx.params
    index = 0
    for word in list(prm["sigmas"]) + list(prm["monochromatic"]):
        spec = ArmSpec.parse(word)
        radii, values, errors = [], [], []
        for n in prm["radii"]:
            ctx.budget.spend()
            est = estimate_arm(spec, prm["inner"], n, prm["p"], prm["n_samples"], ctx.seed_for(index), ctx.threads)
            index += 1
            ctx.rows.append({"sigma": spec.word, "n": n, **est.to_row()})
            if est.p_hat > 0:
                radii.append(n)
                values.append(est.p_hat)
                errors.append(est.std_err)
        window = slope_window(spec, prm["windows"], prm["tolerance"])
        if window is None or len(radii) < 2:
            continue
        fit = fit_loglog(radii, values, errors)
        lo, hi = window
        ctx.extra[f"slope_{spec.word}"] = {"slope": fit.slope, "ci": list(fit.slope_ci), "window": [lo, hi]}
        ctx.check(f"slope {spec.word}", lo <= fit.slope <= hi, f"slope {fit.slope:.3f}, window [{lo:.3f}, {hi:.3f}]")


@suite(
    "kesten-relation",
    p_grid=[0.52, 0.54, 0.56, 0.58, 0.60],
    mc_budget=40000,
    n_samples=2000,
    ratio_tolerance=3.0,
)
def kesten_relation(ctx: SuiteContext) -> None:
    """|p - p_c|·L(p)²·π4(L(p)) across p, with π4 at criticality; its spread stays bounded."""
    prm = ctx.params
    four = ArmSpec.alternating(4)
    products = []
    for i, p in enumerate(prm["p_grid"]):
        ctx.budget.spend()
        try:
            length = estimate_L(p, prm["mc_budget"], ctx.seed_for(i), ctx.threads)
        except UndecidedError as e:
            logger.warning(f"L({p}) undecided: {e}")
            ctx.rows.append({"p": p, "L": "", "status": "undecided"})
            continue
        if length < 2:
            ctx.rows.append({"p": p, "L": length, "status": "too small"})
            continue
        est = estimate_arm(four, 1, length, 0.5, prm["n_samples"], ctx.seed_for(100 + i), ctx.threads)
        product = abs(p - 0.5) * length ** 2 * est.p_hat
        products.append(product)
        ctx.rows.append({
            "p": p, "L": length, "pi4": est.p_hat, "std_err": est.std_err,
            "n_samples": est.n_samples, "product": product, "status": "ok",
        })
    positive = [v for v in products if v > 0]
    if len(positive) >= 2:
        spread = max(positive) / min(positive)
        ctx.extra["spread"] = spread
        ctx.check("product spread", spread <= prm["ratio_tolerance"], f"max/min = {spread:.3f}")


@suite(
    "net-probability",
    p_values=[0.6, 0.65],
    kappas=[4, 8],
    n_over_kappa=3,
    n_samples=200,
    c1=4.0,
    c2=0.5,
    backend="analytic",
)
def net_probability(ctx: SuiteContext) -> None:
    """Failure probability of the mesh-κ net against C1·(n/κ)²·exp(-C2·κ/L(p))."""
    prm = ctx.params
    backend = _backend(ctx)
    xs, ys = [], []
    index = 0
    for p in prm["p_values"]:
        length = backend.L(t_of_p(p))
        for kappa in prm["kappas"]:
            ctx.budget.spend()
            n = prm["n_over_kappa"] * kappa
            window = net_window(n, kappa)

            def event(rng, window=window, n=n, kappa=kappa):
                return not detect_net(sample(window, p, rng), n, kappa)

            failures = sum(run_replicas(event, prm["n_samples"], ctx.seed_for(index), threads=ctx.threads))
            index += 1
            q = failures / prm["n_samples"]
            bound = min(1.0, prm["c1"] * (n / kappa) ** 2 * math.exp(-prm["c2"] * kappa / length))
            ctx.rows.append({
                "p": p, "kappa": kappa, "n": n, "L": length, "failure": q,
                "std_err": binomial_std_err(q, prm["n_samples"]), "n_samples": prm["n_samples"], "bound": bound,
            })
            ctx.check(f"net bound p={p} kappa={kappa}", q <= bound, f"failure {q:.4f} vs bound {bound:.4f}")
            if 0 < q < 1:
                xs.append(kappa / length)
                ys.append(math.log(q / (n / kappa) ** 2))
    if len(xs) >= 2:
        slope, intercept = np.polyfit(xs, ys, 1)
        ctx.extra["fitted_c1"] = float(math.exp(intercept))
        ctx.extra["fitted_c2"] = float(-slope)


# =============================================================================
# IMPURITIES
# =============================================================================

@suite(
    "hole-crossing",
    ms=[16.0, 32.0, 64.0],
    n1s=[4, 8, 16],
    n_samples=10000,
    upsilon=0.02,
    upsilon_prime=0.06,
)
def hole_crossing(ctx: SuiteContext) -> None:
    """Empirical P(H) and P(Hbarbar) on A(n1, 2n1) never exceed their explicit bounds."""
    prm = ctx.params
    index = 0
    for m in prm["ms"]:
        params = _hole_params(ctx, m)
        ctx.extra.setdefault("domain", describe_domain(params.alpha, params.beta))
        for n1 in prm["n1s"]:
            ctx.budget.spend()
            n2 = 2 * n1
            annulus = Window.annulus(n1, n2)
            region = Window.ball(2 * n2)

            def replica(rng, annulus=annulus, region=region, params=params):
                holes = sample_holes(region, params, rng)
                return (
                    detect_hole_crossing(holes, annulus, HoleVariant.H),
                    detect_hole_crossing(holes, annulus, HoleVariant.HBARBAR),
                )

            outcomes = run_replicas(replica, prm["n_samples"], ctx.seed_for(index), threads=ctx.threads)
            index += 1
            bounds = analytic_hole_bounds(params, n1, n2)
            for column, variant, bound in ((0, "H", bounds.bound_H), (1, "Hbarbar", bounds.bound_Hbarbar)):
                hits = sum(o[column] for o in outcomes)
                q = hits / prm["n_samples"]
                ctx.rows.append({
                    "m": m, "n1": n1, "n2": n2, "variant": variant, "p_hat": q,
                    "std_err": binomial_std_err(q, prm["n_samples"]), "n_samples": prm["n_samples"], "bound": bound,
                })
                ctx.check(f"{variant} bound m={m} ({n1},{n2})", q <= bound, f"p_hat {q:.4g} vs bound {bound:.4g}")


@suite(
    "four-arm-stability",
    ms=[16, 32, 64],
    n1=2.0,
    n2_fraction=1.0,
    p=0.5,
    n_samples=400,
    max_holes=20,
    hole_density=0.25,
    max_refused_fraction=0.05,
    ratio_bound=3.0,
    upsilon=0.02,
    upsilon_prime=0.06,
)
def four_arm_stability(ctx: SuiteContext) -> None:
    """
    P̄(W4)/π4 over the annulus (n1, n2 = m) stays bounded as m grows.

    Samples whose exact W4 search is refused are left out of the W4 estimate
    and counted in ``refused``; ``W4_upper`` counts them as successes. A grid
    point refusing more than ``max_refused_fraction`` of its samples is
    undecided and fails the spread check.
    """
    prm = ctx.params
    spec = ArmSpec.alternating(4)
    ratios = []
    undecided = []
    for i, m in enumerate(prm["ms"]):
        ctx.budget.spend()
        params = replace(_hole_params(ctx, m), c3=prm["hole_density"])
        n2 = prm["n2_fraction"] * m
        annulus = Window.annulus(prm["n1"], n2)
        ball = Window.ball(n2)

        def replica(rng, annulus=annulus, ball=ball, params=params):
            config = sample(ball, prm["p"], rng)
            holes = sample_holes(ball, params, rng)
            plain = detect_arm_event(config, annulus, spec)
            if plain:
                return True, True, False
            try:
                return False, detect_W4(config, holes, annulus, prm["max_holes"]), False
            except TooManyHolesError:
                return False, False, True

        outcomes = run_replicas(replica, prm["n_samples"], ctx.seed_for(i), threads=ctx.threads)
        n = len(outcomes)
        refused = sum(o[2] for o in outcomes)
        accepted = n - refused
        plain = sum(o[0] for o in outcomes) / n
        hits = sum(o[1] for o in outcomes)
        w4 = hits / accepted if accepted else math.nan
        ratio = w4 / plain if plain > 0 and accepted else math.inf
        ctx.rows.append({
            "m": m, "n1": prm["n1"], "n2": n2, "pi4": plain, "pi4_std_err": binomial_std_err(plain, n),
            "W4": w4, "W4_std_err": binomial_std_err(w4, accepted) if accepted else math.nan,
            "W4_upper": (hits + refused) / n, "ratio": ratio, "refused": refused, "n_samples": n,
        })
        if refused > prm["max_refused_fraction"] * n:
            undecided.append(m)
        elif plain > 0:
            ratios.append(ratio)
    ctx.extra["undecided_m"] = undecided
    if undecided:
        ctx.check("W4 ratio spread across m", False, f"undecided: too many refused searches at m={undecided}")
    elif len(ratios) >= 2:
        spread = max(ratios) / min(ratios)
        ctx.extra["spread"] = spread
        ctx.check("W4 ratio spread across m", spread <= prm["ratio_bound"], f"max/min = {spread:.3f}")


@suite(
    "one-arm-stability",
    ms=[16, 32, 64],
    n_fraction=1.0,
    p=0.5,
    n_samples=1000,
    tolerance=0.25,
    upsilon=0.02,
    upsilon_prime=0.06,
)
def one_arm_stability(ctx: SuiteContext) -> None:
    """Ratio of the one-arm probability with holes to the one without, on coupled samples."""
    prm = ctx.params
    ratio = math.nan
    for i, m in enumerate(prm["ms"]):
        ctx.budget.spend()
        params = _hole_params(ctx, m)
        ball = Window.ball(prm["n_fraction"] * m)

        def replica(rng, ball=ball, params=params):
            config = sample(ball, prm["p"], rng)
            holes = sample_holes(ball, params, rng)
            return arm_to_boundary(config), arm_to_boundary(apply_holes(config, holes))

        pairs = run_replicas(replica, prm["n_samples"], ctx.seed_for(i), threads=ctx.threads)
        plain, plain_err, holed, holed_err = _pair_means(pairs)
        ratio = holed / plain if plain > 0 else math.nan
        ctx.rows.append({
            "m": m, "n": ball.radius, "plain": plain, "plain_std_err": plain_err,
            "holes": holed, "holes_std_err": holed_err, "ratio": ratio, "n_samples": len(pairs),
        })
        ctx.check(f"holes never help m={m}", all(b <= a for a, b in pairs))
    ctx.check("ratio near 1 at largest m", abs(ratio - 1.0) <= prm["tolerance"], f"ratio {ratio:.3f}")


@suite(
    "crossing-stability",
    ms=[16, 32, 64],
    p=0.5,
    n_samples=1000,
    tolerance=0.05,
    upsilon=0.02,
    upsilon_prime=0.06,
)
def crossing_stability(ctx: SuiteContext) -> None:
    """P_p(Ch) - P̄_p(Ch) on [0,2m]×[0,m], coupled."""
    prm = ctx.params
    diff = math.nan
    for i, m in enumerate(prm["ms"]):
        ctx.budget.spend()
        params = _hole_params(ctx, m)
        rect = Window.rectangle(0.0, 2.0 * m, 0.0, float(m))

        def replica(rng, rect=rect, params=params):
            config = sample(rect, prm["p"], rng)
            holes = sample_holes(rect, params, rng)
            plain = detect_crossing(config, rect, Orientation.HORIZONTAL, Color.OCCUPIED)
            holed = plain and detect_crossing(apply_holes(config, holes), rect, Orientation.HORIZONTAL, Color.OCCUPIED)
            return float(plain), float(holed)

        pairs = run_replicas(replica, prm["n_samples"], ctx.seed_for(i), threads=ctx.threads)
        plain, plain_err, holed, holed_err = _pair_means(pairs)
        diffs = np.asarray([a - b for a, b in pairs])
        diff = float(diffs.mean())
        ctx.rows.append({
            "m": m, "plain": plain, "plain_std_err": plain_err, "holes": holed, "holes_std_err": holed_err,
            "difference": diff, "difference_std_err": float(diffs.std(ddof=1) / math.sqrt(diffs.size)),
            "n_samples": int(diffs.size),
        })
    ctx.check("difference small at largest m", diff <= prm["tolerance"], f"difference {diff:.4f}")


@suite(
    "stretched-exp-decay",
    m=16.0,
    length_fraction=0.5,
    n_multipliers=[1.0, 1.5, 2.0, 3.0, 4.0],
    n_samples=1000,
    upsilon=0.02,
    upsilon_prime=0.06,
)
def stretched_exp_decay(ctx: SuiteContext) -> None:
    """Fit 1 - P̄(Ch([0,2n]×[0,n])) ≈ exp(-λ(n/m)^γ) for supercritical p with L(p) below m."""
    prm = ctx.params
    m = prm["m"]
    p = supercritical_p_for_length(prm["length_fraction"] * m)
    params = _hole_params(ctx, m)
    ctx.extra["p"] = p
    xs, ys = [], []
    previous = None
    for i, mult in enumerate(prm["n_multipliers"]):
        ctx.budget.spend()
        n = mult * m
        rect = Window.rectangle(0.0, 2.0 * n, 0.0, n)

        def event(rng, rect=rect):
            config = apply_holes(sample(rect, p, rng), sample_holes(rect, params, rng))
            return not detect_crossing(config, rect, Orientation.HORIZONTAL, Color.OCCUPIED)

        failures = sum(run_replicas(event, prm["n_samples"], ctx.seed_for(i), threads=ctx.threads))
        q = failures / prm["n_samples"]
        err = binomial_std_err(q, prm["n_samples"])
        ctx.rows.append({"n": n, "n_over_m": mult, "failure": q, "std_err": err, "n_samples": prm["n_samples"]})
        if previous is not None:
            ctx.check(f"failure nonincreasing at n={n}", q <= previous[0] + 3 * joint_std_err(err, previous[1]))
        previous = (q, err)
        if 0 < q < 1:
            xs.append(math.log(mult))
            ys.append(math.log(-math.log(q)))
    if len(xs) >= 2:
        gamma, intercept = np.polyfit(xs, ys, 1)
        ctx.extra["gamma"] = float(gamma)
        ctx.extra["lambda"] = float(math.exp(intercept))


@suite(
    "largest-cluster-concentration",
    ms=[16, 32],
    radius_factor=2.0,
    length_fraction=0.5,
    n_samples=50,
    theta_samples=1000,
    tolerance=0.25,
    upsilon=0.02,
    upsilon_prime=0.06,
)
def largest_cluster_concentration(ctx: SuiteContext) -> None:
    """Largest cluster volume in a ball with holes over |ball|·θ̂(p)."""
    prm = ctx.params
    mean = math.nan
    for i, m in enumerate(prm["ms"]):
        ctx.budget.spend()
        p = supercritical_p_for_length(prm["length_fraction"] * m)
        params = _hole_params(ctx, m)
        ball = Window.ball(prm["radius_factor"] * m)
        theta = estimate_theta(p, m, prm["theta_samples"], ctx.seed_for(100 + i), ctx.threads)

        def statistic(rng, ball=ball, params=params, theta=theta):
            config = apply_holes(sample(ball, p, rng), sample_holes(ball, params, rng))
            return volume_ratio(config, theta.p_hat)

        est = estimate_mean(statistic, prm["n_samples"], ctx.seed_for(i), threads=ctx.threads)
        mean = est.mean
        ctx.rows.append({
            "m": m, "p": p, "theta_hat": theta.p_hat, "theta_std_err": theta.std_err,
            "ratio": est.mean, "std_err": est.std_err, "n_samples": est.n_samples,
        })
    ctx.check("ratio near 1 at largest m", abs(mean - 1.0) <= prm["tolerance"], f"ratio {mean:.3f}")


@suite(
    "vacant-arm-nonstability",
    ms=[16, 32, 64],
    n1=2.0,
    alpha=1.2,
    beta=1.25,
    p=0.5,
    n_samples=1000,
    growth=1.2,
)
def vacant_arm_nonstability(ctx: SuiteContext) -> None:
    """Holes open vacant arms: P̄(one vacant arm across A(n1, m)) over the hole-free probability grows with m."""
    prm = ctx.params
    spec = ArmSpec.parse("v")
    ratios = []
    for i, m in enumerate(prm["ms"]):
        ctx.budget.spend()
        params = HoleParams(m=m, alpha=prm["alpha"], beta=prm["beta"])
        ctx.extra["domain"] = describe_domain(params.alpha, params.beta)
        ball = Window.ball(m)
        annulus = Window.annulus(prm["n1"], m)

        def replica(rng, ball=ball, annulus=annulus, params=params):
            config = sample(ball, prm["p"], rng)
            holed = apply_holes(config, sample_holes(ball, params, rng))
            return detect_arm_event(config, annulus, spec), detect_arm_event(holed, annulus, spec)

        pairs = run_replicas(replica, prm["n_samples"], ctx.seed_for(i), threads=ctx.threads)
        plain, plain_err, holed, holed_err = _pair_means(pairs)
        ratio = holed / plain if plain > 0 else math.inf
        ratios.append(ratio)
        ctx.rows.append({
            "m": m, "n1": prm["n1"], "plain": plain, "plain_std_err": plain_err,
            "holes": holed, "holes_std_err": holed_err, "ratio": ratio, "n_samples": len(pairs),
        })
        ctx.check(f"holes only add vacant arms m={m}", all(b >= a for a, b in pairs))
    for (m_a, a), (m_b, b) in zip(zip(prm["ms"], ratios), zip(prm["ms"][1:], ratios[1:])):
        ctx.check(f"ratio grows from m={m_a} to m={m_b}", b >= prm["growth"] * a, f"{a:.3f} -> {b:.3f}")


@suite(
    "theta-stability",
    ms=[16, 32],
    kappa0=2.0,
    length_fraction=1.0,
    n_samples=1000,
    tolerance=0.2,
    upsilon=0.02,
    upsilon_prime=0.06,
)
def theta_stability(ctx: SuiteContext) -> None:
    """P̄_p(0 ↔ ∂B_n)/P_p(0 ↔ ∂B_n) for L(p) ≍ m and n = κ0·m, coupled."""
    prm = ctx.params
    ratio = math.nan
    for i, m in enumerate(prm["ms"]):
        ctx.budget.spend()
        p = supercritical_p_for_length(prm["length_fraction"] * m)
        params = _hole_params(ctx, m)
        ball = Window.ball(prm["kappa0"] * m)

        def replica(rng, ball=ball, params=params, p=p):
            config = sample(ball, p, rng)
            return arm_to_boundary(config), arm_to_boundary(apply_holes(config, sample_holes(ball, params, rng)))

        pairs = run_replicas(replica, prm["n_samples"], ctx.seed_for(i), threads=ctx.threads)
        plain, plain_err, holed, holed_err = _pair_means(pairs)
        ratio = holed / plain if plain > 0 else math.nan
        ctx.rows.append({
            "m": m, "p": p, "n": ball.radius, "theta_hat": plain, "theta_std_err": plain_err,
            "holes": holed, "holes_std_err": holed_err, "ratio": ratio, "n_samples": len(pairs),
        })
    ctx.check("ratio near 1 at largest m", abs(ratio - 1.0) <= prm["tolerance"], f"ratio {ratio:.3f}")


@suite(
    "quasi-multiplicativity",
    sigmas=["o", "ovov"],
    triples=[[1, 4, 16], [2, 8, 32]],
    p=0.5,
    n_samples=2000,
    constant=4.0,
)
def quasi_multiplicativity(ctx: SuiteContext) -> None:
    """π(n1,n3) against π(n1,n2)·π(n2,n3)."""
    prm = ctx.params
    index = 0
    for word in prm["sigmas"]:
        spec = ArmSpec.parse(word)
        for n1, n2, n3 in prm["triples"]:
            ctx.budget.spend()
            qm = measure_quasi_multiplicativity(spec, n1, n2, n3, prm["p"], prm["n_samples"], ctx.seed_for(index), ctx.threads)
            index += 3
            ctx.rows.append({"sigma": spec.word, "n1": n1, "n2": n2, "n3": n3, **qm.to_row(), "n_samples": prm["n_samples"]})
            if qm.inner.p_hat > 0 and qm.outer.p_hat > 0 and qm.joined.p_hat > 0:
                c = prm["constant"]
                ctx.check(f"{spec.word} ({n1},{n2},{n3})", 1.0 / c <= qm.ratio <= c, f"ratio {qm.ratio:.3f}")


# =============================================================================
# FOREST FIRES
# =============================================================================

@suite(
    "rho-pi-measurement",
    zeta=1e-3,
    m=48.0,
    radius=64.0,
    n_runs=400,
    pad_scales=2.0,
    c1=1.0,
    c2=1.0,
    upsilon=0.0,
    r_points=12,
    slope_tolerance=0.3,
    backend="analytic",
)
def rho_pi_measurement(ctx: SuiteContext) -> None:
    """
    Hole probability and radius tail induced by the ignitions before t_c - ε.

    ε is fixed by the analytic L(t_c - ε) = m; the hole scale used for the
    cluster pads and the radius grid is L(t_c - ε) from the configured backend.
    """
    prm = ctx.params
    eps = subcritical_eps_for_length(prm["m"])
    ctx.budget.spend()
    result = measure_rho_pi(
        prm["zeta"], eps, Window.ball(prm["radius"]), prm["n_runs"], ctx.seed,
        c1=prm["c1"], c2=prm["c2"], upsilon=prm["upsilon"], backend=_backend(ctx), pad_scales=prm["pad_scales"],
    )
    m = result.m
    grid = np.unique(np.round(np.geomspace(1.0, m, prm["r_points"]), 3))
    rho = result.rho_hat(grid)
    samples = result.radii.size
    for row, value in zip(result.rows(grid), rho):
        row["std_err"] = binomial_std_err(float(value), samples) if samples else 0.0
        row["n_samples"] = samples
        ctx.rows.append(row)
    ctx.extra.update({
        "eps": eps, "m": m, "pi_hat": result.pi_hat, "pi_std_err": result.pi_std_err,
        "pi_expected": result.pi_expected, "clipped": result.clipped, "marked_sites": samples,
    })
    ctx.check(
        "pi within 4 std errors",
        abs(result.pi_hat - result.pi_expected) <= 4 * max(result.pi_std_err, 1e-12),
        f"{result.pi_hat:.5f} vs {result.pi_expected:.5f}",
    )
    ctx.check("rho nonincreasing", bool(np.all(np.diff(rho) <= 0)))
    in_range = (grid >= 2.0) & (grid <= m / 4.0) & (rho > 0)
    if in_range.sum() >= 2:
        errs = [max(binomial_std_err(float(v), samples), 1e-9) for v in rho[in_range]]
        fit = fit_loglog(grid[in_range], rho[in_range], errs)
        target = -(2.0 - 55.0 / 48.0)
        ctx.extra["slope"] = fit.slope
        ctx.check("tail slope", abs(fit.slope - target) <= prm["slope_tolerance"], f"slope {fit.slope:.3f}, target {target:.3f}")


@suite(
    "exceptional-scale-burning",
    zetas=[4e-3, 1e-3, 2.5e-4],
    t_lo_offset=0.1,
    t_hi_offset=0.6,
    n_runs=500,
    threshold=0.02,
    between_exponent=0.58,
    circuits=False,
    circuit_count=3,
)
def exceptional_scale_burning(ctx: SuiteContext) -> None:
    """
    Burning probability of the origin in a box of side ζ^(-1/2) stays bounded below,
    while in boxes of side ζ^(-between_exponent), between m1 and m2, it decreases with ζ.
    """
    prm = ctx.params
    between = []
    t_lo = T_C + prm["t_lo_offset"]
    t_hi = T_C + prm["t_hi_offset"]
    for i, zeta in enumerate(prm["zetas"]):
        ctx.budget.spend()
        n = math.ceil(zeta ** -0.5)
        est = estimate_burning_prob(zeta, n, t_lo, t_hi, prm["n_runs"], ctx.seed_for(i), ctx.threads)
        ctx.rows.append({"zeta": zeta, "n": n, "kind": "box", **est.to_row()})
        ctx.check(f"burning at zeta={zeta}", est.p_hat >= prm["threshold"], f"{est.p_hat:.4f}")
        if prm["circuits"]:
            family = estimate_burning_prob_circuits(
                zeta, n / 4.0, n / 2.0, t_lo, t_hi, prm["n_runs"], ctx.seed_for(100 + i), prm["circuit_count"], ctx.threads,
            )
            for row in family.rows():
                ctx.rows.append({"zeta": zeta, "n": n, **row})
            ctx.extra[f"proxy_{zeta}"] = {"min": family.minimum, "max": family.maximum, "label": family.label}
        if prm["between_exponent"]:
            ctx.budget.spend()
            side = math.ceil(zeta ** -prm["between_exponent"])
            est = estimate_burning_prob(zeta, side, t_lo, t_hi, prm["n_runs"], ctx.seed_for(200 + i), ctx.threads)
            ctx.rows.append({"zeta": zeta, "n": side, "kind": "between", **est.to_row()})
            between.append(est.p_hat)
    if len(between) >= 2:
        ctx.check(
            "burning between m1 and m2 decreases",
            all(b <= a for a, b in zip(between, between[1:])),
            " ".join(f"{v:.4f}" for v in between),
        )


def _outer_ring(nbrs: np.ndarray, sites: np.ndarray) -> np.ndarray:
    ring = np.unique(nbrs[sites].ravel())
    ring = ring[ring >= 0]
    return ring[~np.isin(ring, sites)]


@suite(
    "boundary-variant",
    zeta=0.01,
    n=48,
    t_end=2.0,
    n_runs=20,
)
def boundary_variant(ctx: SuiteContext) -> None:
    """Plain forest fire against the variant that also kills the outer boundary of each burnt cluster."""
    prm = ctx.params
    region = Window.box(prm["n"])
    stats = {False: [], True: []}
    scar_ok = True
    for r in range(prm["n_runs"]):
        ctx.budget.spend()
        seed = ctx.seed_for(r)
        for variant in (False, True):
            timeline = simulate_ffwor(FireOptions(prm["zeta"], prm["t_end"], region, burn_boundary=variant), seed)
            final = timeline.final
            n_sites = final.n_sites
            stats[variant].append((
                float((final.state[final.mask] == OCCUPIED).sum()) / n_sites,
                float((final.state[final.mask] == BURNT).sum()) / n_sites,
                len(timeline.burns),
            ))
            if variant:
                nbrs = neighbor_table(final.grid, final.mask)
                state = final.state.reshape(-1)
                for event in timeline.burns:
                    if np.any(state[_outer_ring(nbrs, event.sites)] == OCCUPIED):
                        scar_ok = False
    for variant, values in stats.items():
        if not values:
            continue
        arr = np.asarray(values, dtype=float)
        ctx.rows.append({
            "variant": "burn_boundary" if variant else "plain",
            "occupied": float(arr[:, 0].mean()),
            "burnt": float(arr[:, 1].mean()),
            "burns": float(arr[:, 2].mean()),
            "n_samples": int(arr.shape[0]),
        })
    ctx.check("scarred sites never occupied", scar_ok)


@suite(
    "coupling-domination",
    zeta=0.005,
    n=96,
    t_offsets=[-0.1, 0.0, 0.1],
    n_runs=200,
    pad_cap=96.0,
    backend="analytic",
)
def coupling_domination(ctx: SuiteContext) -> None:
    """Occupied density of the forest fire against the Y-process on a shared birth field."""
    prm = ctx.params
    region = Window.box(prm["n"])
    backend = _backend(ctx)
    for i, offset in enumerate(prm["t_offsets"]):
        ctx.budget.spend()
        t = T_C + offset

        def replica(rng, t=t):
            seed = child_seed(rng)
            fire = simulate_ffwor(FireOptions(prm["zeta"], t, region), seed).final
            y = simulate_Y(region, prm["zeta"], t, seed, pad_cap=prm["pad_cap"], backend=backend)
            return fire.occupied_fraction(), y.config.occupied_fraction(), y.clipped

        outcomes = run_replicas(replica, prm["n_runs"], ctx.seed_for(i), threads=ctx.threads)
        sigma, sigma_err, y, y_err = _pair_means([(a, b) for a, b, _ in outcomes])
        tolerance = 3 * joint_std_err(sigma_err, y_err)
        ctx.rows.append({
            "t": t, "sigma_density": sigma, "sigma_std_err": sigma_err, "y_density": y, "y_std_err": y_err,
            "clipped": int(sum(c for _, _, c in outcomes)), "n_samples": len(outcomes),
        })
        ctx.check(f"domination at t={t:.4f}", sigma >= y - tolerance, f"{sigma:.4f} vs {y:.4f}")


@suite(
    "frozen-percolation",
    thresholds=[1, 4, 16, 64],
    radius=32.0,
    n_runs=5,
)
def frozen_percolation(ctx: SuiteContext) -> None:
    """Frozen cluster sizes against the 6(N-1)+1 cap and the single-merge rule."""
    prm = ctx.params
    window = Window.ball(prm["radius"])
    for i, threshold in enumerate(list(prm["thresholds"]) + [None]):
        ctx.budget.spend()
        sizes, occupied, caps_ok, merges_ok = [], [], True, True
        for r in range(prm["n_runs"]):
            result = simulate_frozen(window, threshold, ctx.seed_for(1000 * i + r))
            occupied.append(result.config.occupied_fraction())
            sizes.extend(result.frozen_sizes())
            if threshold is not None:
                caps_ok &= result.max_cluster_size() <= result.size_cap
                merges_ok &= all(all(part < threshold for part in m.parts) for m in result.merges if m.froze)
        label = "inf" if threshold is None else threshold
        ctx.rows.append({
            "N": label,
            "occupied": float(np.mean(occupied)),
            "frozen_clusters": len(sizes) / prm["n_runs"],
            "mean_frozen_size": float(np.mean(sizes)) if sizes else 0.0,
            "n_samples": prm["n_runs"],
        })
        if threshold is None:
            ctx.check("N = inf occupies everything", all(v == 1.0 for v in occupied))
        else:
            ctx.check(f"size cap N={threshold}", caps_ok)
            ctx.check(f"single merge N={threshold}", merges_ok)


@suite(
    "recovery-comparison",
    zeta=0.01,
    n=32,
    t_lo_offset=0.1,
    t_hi_offset=1.0,
    n_runs=100,
)
def recovery_comparison(ctx: SuiteContext) -> None:
    """Origin burning probability under the plain, burn-boundary and recovery dynamics on the same seeds."""
    prm = ctx.params
    t_lo = T_C + prm["t_lo_offset"]
    t_hi = T_C + prm["t_hi_offset"]
    variants = (("plain", {}), ("burn_boundary", {"burn_boundary": True}), ("recovery", {"recovery": True}))
    for name, kwargs in variants:
        ctx.budget.spend()
        est = estimate_burning_prob(prm["zeta"], prm["n"], t_lo, t_hi, prm["n_runs"], ctx.seed, ctx.threads, **kwargs)
        ctx.rows.append({"variant": name, **est.to_row()})
    ctx.budget.spend()
    timeline = simulate_ffwor(FireOptions(prm["zeta"], t_hi, Window.box(prm["n"]), recovery=True), ctx.seed)
    ctx.extra["recovery_burns"] = len(timeline.burns)
    ctx.extra["recovery_rebirths"] = timeline.rebirths
    ctx.check("recovery reschedules burnt sites", not timeline.burns or timeline.rebirths > 0)
