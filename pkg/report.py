"""JSON rendering of certification and oracle runs."""
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from certificates import BoundReport, CertificateKind, CompetingBounds
from certify_state import CertifyState
from oracle import McEstimate


def bound_report_to_dict(report: BoundReport) -> dict:
    return {
        "kind": report.kind.value,
        "outcome": report.outcome,
        "bound": report.bound,
        "raw_bound": report.raw_bound,
        "vacuous": report.vacuous,
        "v": report.v.to_text() if report.v is not None else None,
        "w": report.w.to_text() if report.w is not None else None,
        "alpha": report.alpha,
        "beta": report.beta,
        "M": report.M,
        "v0": report.v0,
        "solver_status": report.solver_status,
        "reconstruction_residual": report.reconstruction_residual,
        "residual_summary": report.residual_summary.to_dict() if report.residual_summary is not None else None,
        "notes": list(report.notes),
    }


def state_to_dict(state: CertifyState) -> dict:
    data = {
        "kind": state.kind.value,
        "outcome": state.outcome,
        "number_of_solves": state.number_of_solves,
        "outcomes": state.outcome_statistic.to_dict(),
        "best": bound_report_to_dict(state.best) if state.best is not None else None,
    }
    return data


@dataclass
class RunReport:
    query: dict
    settings: dict = field(default_factory=dict)
    certificates: dict[CertificateKind, CertifyState] = field(default_factory=dict)
    estimate: McEstimate | None = None
    fd_value: float | None = None
    refinement: list[McEstimate] = field(default_factory=list)
    competing: CompetingBounds | None = None
    warnings: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def verdict(self) -> str:
        """OK iff every certified upper bound is >= ci_low and every lower bound <= ci_high."""
        if self.estimate is None:
            return "UNCHECKED"
        for kind, state in self.certificates.items():
            if state.best is None:
                continue
            if kind.upper and state.best.bound < self.estimate.ci_low:
                return "INCONSISTENT"
            if not kind.upper and state.best.bound > self.estimate.ci_high:
                return "INCONSISTENT"
        return "OK"

    def to_dict(self) -> dict:
        data = {
            "query": self.query,
            "settings": self.settings,
            "certificates": {kind.value: state_to_dict(state) for kind, state in self.certificates.items()},
            "warnings": list(self.warnings),
            "timings": dict(self.timings),
        }
        if self.estimate is not None:
            data["estimate"] = self.estimate.to_dict()
            data["verdict"] = self.verdict()
        if self.fd_value is not None:
            data["fd_value"] = self.fd_value
        if self.refinement:
            data["refinement"] = [e.to_dict() for e in self.refinement]
        if self.competing is not None:
            data["competing_bounds"] = self.competing.to_dict()
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def digest(self) -> str:
        return report_digest(self.to_dict())

    def write(self, path: str | Path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json() + "\n")

    def summary(self) -> str:
        text = "RunReport {\n"
        for state in self.certificates.values():
            text += state.__repr__() + "\n"
        if self.estimate is not None:
            text += f"\testimate: {self.estimate.p_hat} in [{self.estimate.ci_low}, {self.estimate.ci_high}]\n"
            text += f"\tverdict: {self.verdict()}\n"
        if self.fd_value is not None:
            text += f"\tfinite-difference value: {self.fd_value}\n"
        if self.competing is not None:
            text += f"\tcompeting bounds: {self.competing.to_dict()}\n"
        for warning in self.warnings:
            text += f"\twarning: {warning}\n"
        return text + "}"


def report_digest(data: dict) -> str:
    """SHA-256 of the canonical JSON with the timings removed."""
    stripped = {key: value for key, value in data.items() if key != "timings"}
    return hashlib.sha256(json.dumps(stripped, sort_keys=True).encode()).hexdigest()
