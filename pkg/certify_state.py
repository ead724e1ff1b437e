from enum import Enum, auto

from certificates import BoundReport, CertificateKind


class Outcome(Enum):
    Certified = auto()
    NoCertificate = auto()
    NumericalTrouble = auto()
    Rejected = auto()

    @property
    def label(self) -> str:
        return {Outcome.Certified: "certified",
                Outcome.NoCertificate: "no certificate found",
                Outcome.NumericalTrouble: "numerical trouble",
                Outcome.Rejected: "rejected by residual check"}[self]


class OutcomeStatistic:
    def __init__(self):
        self.statistic: dict[Outcome, int] = {}
        for item in list(Outcome):
            self.statistic[item] = 0

    def add(self, item: Outcome) -> None:
        self.statistic[item] += 1

    def to_dict(self) -> dict:
        return {item.name: value for item, value in self.statistic.items()}

    def __repr__(self, tabs: int = 0):
        text = "\t" * tabs + "OutcomeStatistic {\n"
        for item, value in self.statistic.items():
            text += "\t" * tabs + f"\t{item.name}: {value}\n"
        text += "\t" * tabs + "}"
        return text


class State(Enum):
    InSolving = auto()
    Certified = auto()
    NoCertificate = auto()


class CertifyState:
    """Best certified bound of one kind over the alpha grid."""

    def __init__(self, kind: CertificateKind) -> None:
        self.kind = kind
        self.state = State.InSolving
        self.best: BoundReport | None = None
        self.attempts: list[BoundReport] = []
        self.outcome_statistic = OutcomeStatistic()
        self.number_of_solves = 0

    def __better(self, report: BoundReport) -> bool:
        if self.best is None:
            return True
        if report.raw_bound == self.best.raw_bound:
            return abs(report.alpha) < abs(self.best.alpha)
        if self.kind.upper:
            return report.raw_bound < self.best.raw_bound
        return report.raw_bound > self.best.raw_bound

    def update(self, report: BoundReport, outcome: Outcome) -> None:
        self.number_of_solves += 1
        self.outcome_statistic.add(outcome)
        self.attempts.append(report)
        if outcome == Outcome.Certified and self.__better(report):
            self.best = report

    def on_end(self) -> None:
        self.state = State.NoCertificate if self.best is None else State.Certified

    @property
    def outcome(self) -> str:
        if self.best is not None:
            return Outcome.Certified.label
        if self.outcome_statistic.statistic[Outcome.Rejected]:
            return Outcome.Rejected.label
        if self.outcome_statistic.statistic[Outcome.NoCertificate] or not self.number_of_solves:
            return Outcome.NoCertificate.label
        return Outcome.NumericalTrouble.label

    def __repr__(self):
        text = f"CertifyState [{self.kind.value}, {self.state.name}] {{"
        if self.best is None:
            text += f"\n\tbound: None ({self.outcome})"
        else:
            side = "upper" if self.kind.upper else "lower"
            text += f"\n\t{side} bound: {self.best.bound}"
            text += f"\n\traw bound: {self.best.raw_bound}"
            text += f"\n\talpha: {self.best.alpha}"
            if self.best.vacuous:
                text += "\n\tvacuous: True"
            if self.best.residual_summary is not None:
                text += f"\n\tresidual: {self.best.residual_summary.label}"
        text += f"\n\tnumber of solves: {self.number_of_solves}"
        text += "\n" + self.outcome_statistic.__repr__(1)
        text += "\n}"
        return text
