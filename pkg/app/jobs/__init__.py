"""Command-line entry point and run configuration files."""

from app.jobs.config import EvalOptions, RunConfig, build_run_config, load_run_config

__all__ = ["EvalOptions", "RunConfig", "build_run_config", "load_run_config"]
