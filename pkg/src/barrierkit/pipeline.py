"""End-to-end boundary computation and its machine-readable summary."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .barrier import (
    BarrierCurve,
    TangencyPoint,
    candidate_curves,
    switching_lines,
    ultimate_tangency_points,
)
from .model import Scenario
from .mrpi import mrpi_is_nontrivial
from .region import AdmissibleRegion, AssemblyError, assemble_boundary, filter_candidates

__all__ = [
    "TangencySummary",
    "LineSummary",
    "CurveSummary",
    "AssemblySummary",
    "RunSummary",
    "PipelineResult",
    "run_pipeline",
]


@dataclass
class TangencySummary:
    label: str
    constraint_id: int
    z: list[float]
    lambda_final: list[float]
    in_box: bool
    exists: bool
    existence_value: float

    @classmethod
    def of(cls, tp: TangencyPoint) -> "TangencySummary":
        return cls(tp.label, tp.constraint_id, list(tp.z), list(tp.lambda_final), tp.in_box,
                   tp.exists, tp.existence_value)


@dataclass
class LineSummary:
    label: str
    axis: str
    value: float
    input_index: int
    from_level: float
    to_level: float
    adjoint_index: int
    adjoint_sign: int


@dataclass
class CurveSummary:
    origin: str
    samples: int
    switch_count: int
    switches: list[list[float]]
    termination: str
    start_point: list[float]
    kept: bool
    flagged: bool
    reason: str
    max_hamiltonian: float

    @classmethod
    def of(cls, c: BarrierCurve) -> "CurveSummary":
        return cls(
            origin=c.label,
            samples=len(c.t),
            switch_count=len(c.switches),
            switches=[[float(s.x[0]), float(s.x[1])] for s in c.switches],
            termination=c.termination,
            start_point=[float(v) for v in c.start_point],
            kept=bool(c.kept),
            flagged=c.flagged,
            reason=c.reason,
            max_hamiltonian=c.max_relative_hamiltonian(),
        )


@dataclass
class AssemblySummary:
    status: str
    message: str = ""
    open: bool = False
    kept_origins: list[str] = field(default_factory=list)
    arcs: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


@dataclass
class RunSummary:
    label: str
    tangency_points: list[TangencySummary]
    switching_lines: list[LineSummary]
    curves: list[CurveSummary]
    assembly: AssemblySummary
    mrpi_nontrivial: bool
    artifacts: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "RunSummary":
        return cls(
            label=doc["label"],
            tangency_points=[TangencySummary(**t) for t in doc["tangency_points"]],
            switching_lines=[LineSummary(**s) for s in doc["switching_lines"]],
            curves=[CurveSummary(**c) for c in doc["curves"]],
            assembly=AssemblySummary(**doc["assembly"]),
            mrpi_nontrivial=doc["mrpi_nontrivial"],
            artifacts=dict(doc.get("artifacts", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunSummary":
        return cls.from_dict(json.loads(text))


@dataclass
class PipelineResult:
    scenario: Scenario
    points: list[TangencyPoint]
    curves: list[BarrierCurve]
    region: AdmissibleRegion | None
    summary: RunSummary

    @property
    def complete(self) -> bool:
        return self.region is not None


def run_pipeline(scenario: Scenario) -> PipelineResult:
    """Tangency points, existence, backward curves, filtering and assembly.

    Assembly failures are reported in the summary instead of raised, so the
    computed curves stay available.
    """
    points = ultimate_tangency_points(scenario)
    curves = candidate_curves(scenario, points)
    region = None
    if not curves:
        assembly = AssemblySummary("failed", "no candidate curves")
    else:
        filter_candidates(curves, scenario)
        try:
            region = assemble_boundary(curves, scenario)
        except AssemblyError as exc:
            assembly = AssemblySummary("failed", str(exc),
                                       arcs=[f"{a.kind}:{a.origin_label}" for a in exc.arcs])
        else:
            assembly = AssemblySummary(
                status="closed" if not region.open else "open",
                open=region.open,
                kept_origins=list(region.kept_origins),
                arcs=[f"{a.kind}:{a.origin_label}" for a in region.arcs],
                notes=list(region.notes),
            )
    summary = RunSummary(
        label=scenario.label,
        tangency_points=[TangencySummary.of(tp) for tp in points],
        switching_lines=[LineSummary(**{f.name: getattr(line, f.name) for f in fields(LineSummary)})
                         for line in switching_lines(scenario)],
        curves=[CurveSummary.of(c) for c in curves],
        assembly=assembly,
        mrpi_nontrivial=mrpi_is_nontrivial(scenario.bounds),
    )
    return PipelineResult(scenario, points, curves, region, summary)
