"""All user-facing texts."""

# =============================================================================
# CLI
# =============================================================================

CLI_DESCRIPTION = (
    "Near-critical percolation on the triangular lattice: sampling, arm events, "
    "heavy-tailed impurities, forest fires, frozen percolation and exceptional scales."
)

CLI_EPILOG = "Options can also be read from --config FILE (JSON or key = value lines); explicit flags win."

RUN_STARTED = "Running {command} with seed {seed}"
RUN_FINISHED = "{command} finished in {seconds:.2f}s"
RUN_FAILED = "Failed to run {command}: {error}"
OUTPUT_WRITTEN = "Wrote {path}"

# =============================================================================
# ESTIMATES
# =============================================================================

L_AT_CRITICALITY = "L(p_c) is infinite"
L_RESULT = "L({p}) = {value}"
ESTIMATE_RESULT = "{name} = {p_hat:.6g} ± {std_err:.2g} ({n_samples} samples, seed {seed})"
PROXY_LABEL = "proxy: minimum and maximum over the boundary circuits of balls on a geometric radius grid"

# =============================================================================
# DOMAINS
# =============================================================================

DOMAIN_BOUNDARY_FLAG = "on a domain boundary (alpha or beta equal to 3/4, or beta equal to alpha)"
DOMAIN_DESCRIPTIONS = {
    "I": "impurities do not affect the near-critical behaviour (stability)",
    "II": "impurities dominate at large scales only",
    "III": "impurities dominate at all scales",
    "IV": "degenerate: holes cover everything",
}

# =============================================================================
# EXPERIMENTS
# =============================================================================

UNKNOWN_SUITE = "Unknown experiment '{name}'. Available: {available}"
SUITE_PASSED = "Experiment {name} passed ({checks} checks)"
SUITE_FAILED = "Experiment {name} failed: {failed}"
SUITE_PARTIAL = "Experiment {name} stopped at its budget of {budget:.0f}s; results are partial"

# =============================================================================
# REGISTRY
# =============================================================================

NO_RUNS = "No experiment runs recorded."
RUN_ROW = "{id:>4}  {name:<32} {status:<8} {seed:>20}  {config_hash}  {finished_at}"
