"""Command line front end: run configured studies and render their reports.

A run configuration is one JSON object naming the problem, the study to
run, the output directory, and the seed.  ``RunConfig.from_config``
round-trips ``as_config`` exactly, and the entry point exits zero only
when every verdict of every selected study passes.
"""

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigInvalid
from .experiments import (
    attractor_semidistance_study,
    boundary_average_study,
    eigenvalue_convergence_study,
    equilibria_branch_study,
    evolution_study,
    resolvent_convergence_study,
    wrong_limit_study,
)
from .mesh import QuadratureRule, build_mesh
from .report import render_report, write_summary_json
from .semiflow import ProblemSpec


def _run_resolvent(config):
    return resolvent_convergence_study(config.spec)


def _run_eigs(config):
    return eigenvalue_convergence_study(config.spec)


def _run_wronglimit(config):
    mesh = build_mesh(config.spec.nx, config.spec.ny)
    return wrong_limit_study(mesh, QuadratureRule(2))


def _run_boundary(config):
    return boundary_average_study()


def _run_evolve(config):
    return evolution_study(config.spec, seed=config.seed)


def _run_equilibria(config):
    return equilibria_branch_study(config.spec)


def _run_attractor(config):
    return attractor_semidistance_study(config.spec)


STUDIES = {
    "resolvent": _run_resolvent,
    "eigs": _run_eigs,
    "wronglimit": _run_wronglimit,
    "boundary": _run_boundary,
    "evolve": _run_evolve,
    "equilibria": _run_equilibria,
    "attractor": _run_attractor,
}


@dataclass(frozen=True)
class RunConfig:
    """One reproducible run: problem spec, study selection, output, seed."""

    spec: ProblemSpec = field(default_factory=ProblemSpec)
    study: str = "all"
    output_dir: str = "runs"
    seed: int = 0

    def __post_init__(self):
        if self.study not in STUDIES and self.study != "all":
            raise ConfigInvalid(
                f"study: unknown study {self.study!r}; "
                f"choose one of {sorted(STUDIES)} or 'all'"
            )
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigInvalid(f"seed: expected a nonnegative integer, got {self.seed!r}")

    def selected_studies(self):
        if self.study == "all":
            return tuple(STUDIES)
        return (self.study,)

    def as_config(self):
        return {
            "spec": self.spec.as_config(),
            "study": self.study,
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    @classmethod
    def from_config(cls, entry):
        if not isinstance(entry, dict):
            raise ConfigInvalid("run config: expected a JSON object")
        extra = set(entry) - {"spec", "study", "output_dir", "seed"}
        if extra:
            raise ConfigInvalid(f"run config: unknown keys {sorted(extra)}")
        spec = ProblemSpec.from_config(entry.get("spec", {}))
        return cls(
            spec=spec,
            study=str(entry.get("study", "all")),
            output_dir=str(entry.get("output_dir", "runs")),
            seed=int(entry.get("seed", 0)),
        )


def load_run_config(path):
    """Parse and validate a JSON run configuration file."""
    try:
        with open(path) as fh:
            entry = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config file: not valid JSON ({exc})") from exc
    return RunConfig.from_config(entry)


def run(config, stream=None):
    """Execute the selected studies, render reports, return the exit code.

    Prints one summary line per study; exits zero only when every verdict
    passes.
    """
    out = sys.stdout if stream is None else stream
    config.spec.validate()
    reports = []
    for name in config.selected_studies():
        report = STUDIES[name](config)
        render_report(report, config.output_dir)
        print(report.summary_line(), file=out)
        reports.append(report)
    digest = write_summary_json(reports, Path(config.output_dir) / "summary.json")
    print(f"overall pass={digest['pass']} out={config.output_dir}", file=out)
    return 0 if digest["pass"] else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="oscsquare",
        description="Convergence studies for reaction-diffusion problems on "
                    "oscillating domains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runner = sub.add_parser("run", help="run studies from a JSON config")
    runner.add_argument("--config", required=True, help="path to the JSON run config")
    runner.add_argument("--study", default=None, choices=[*sorted(STUDIES), "all"],
                        help="override the configured study selection")
    runner.add_argument("--out", default=None, help="override the output directory")
    runner.add_argument("--seed", default=None, type=int, help="override the seed")
    args = parser.parse_args(argv)

    try:
        config = load_run_config(args.config)
        overrides = {}
        if args.study is not None:
            overrides["study"] = args.study
        if args.out is not None:
            overrides["output_dir"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            config = replace(config, **overrides)
        return run(config)
    except ConfigInvalid as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
