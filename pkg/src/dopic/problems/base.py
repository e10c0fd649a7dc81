"""Common runner for the benchmark problems.

A problem is one or more transcription stages sharing a chi layout; later
stages warm-start from the previous stage's solution (used to introduce
rate constraints only after an unconstrained solve has converged).  A
failed stage fails the trial.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dopic.solver import SolveReport, SolverOptions, solve
from dopic.transcription import NlpProblem, Transcription

__all__ = ["StagedProblem"]


@dataclass
class StagedProblem:
    name: str
    stages: list  # of Transcription, all with identical chi layouts
    sample_x0: object  # rng -> x0
    default_options: SolverOptions = field(default_factory=SolverOptions)
    presolve: object = None  # optional x0 -> x0 map applied before stage 1

    def __post_init__(self):
        layouts = {
            tuple((k, v.start, v.stop) for k, v in s.chi_layout.items())
            for s in self.stages
        }
        if len(layouts) != 1:
            raise ValueError("all stages must share one chi layout")

    @property
    def transcription(self) -> Transcription:
        return self.stages[-1]

    def nlp(self, stage: int = -1) -> NlpProblem:
        return self.stages[stage].nlp_problem()

    def solve_trial(self, x0, options: SolverOptions | None = None) -> SolveReport:
        """Solve all stages in order from x0; stop at the first failure."""
        options = options or self.default_options
        x = np.asarray(x0, dtype=float)
        if self.presolve is not None:
            x = np.asarray(self.presolve(x), dtype=float)
        total_iters = 0
        total_wall = 0.0
        report = None
        for stage in self.stages:
            report = solve(stage.nlp_problem(), x, options)
            total_iters += report.iterations
            total_wall += report.wall_time
            if not report.converged:
                break
            x = report.chi
        report.iterations = total_iters
        report.wall_time = total_wall
        return report
