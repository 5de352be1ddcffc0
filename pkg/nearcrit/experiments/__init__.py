from nearcrit.experiments import suites  # noqa: F401  registers the suites
from nearcrit.experiments.runner import SUITES, ExperimentConfig, RunOutcome, run

__all__ = ["SUITES", "ExperimentConfig", "RunOutcome", "run"]
