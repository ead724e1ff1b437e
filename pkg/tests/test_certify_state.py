import json

from certificates import BoundReport, CertificateKind
from certify_state import CertifyState, Outcome, State
from oracle import McEstimate
from report import RunReport, report_digest


def certified(kind: CertificateKind, raw: float, alpha: float = 0.0) -> BoundReport:
    return BoundReport(kind=kind, bound=min(1.0, max(0.0, raw)), raw_bound=raw, v=None, w=None, alpha=alpha,
                       beta=0.0, M=0.0, solver_status="optimal")


class TestCertifyState:
    def test_upper_keeps_smallest(self):
        state = CertifyState(CertificateKind.HU2)
        for raw, alpha in ((0.6, 0.0), (0.4, 1.0), (0.5, -1.0)):
            state.update(certified(CertificateKind.HU2, raw, alpha), Outcome.Certified)
        state.on_end()
        assert state.best.raw_bound == 0.4
        assert state.state == State.Certified
        assert state.number_of_solves == 3

    def test_lower_keeps_largest(self):
        state = CertifyState(CertificateKind.HL2)
        for raw in (0.1, 0.3, 0.2):
            state.update(certified(CertificateKind.HL2, raw), Outcome.Certified)
        assert state.best.raw_bound == 0.3

    def test_tie_prefers_smaller_alpha(self):
        state = CertifyState(CertificateKind.HU2)
        state.update(certified(CertificateKind.HU2, 0.5, 2.0), Outcome.Certified)
        state.update(certified(CertificateKind.HU2, 0.5, -0.5), Outcome.Certified)
        assert state.best.alpha == -0.5

    def test_rejected_never_chosen(self):
        state = CertifyState(CertificateKind.HU1)
        rejected = certified(CertificateKind.HU1, 0.01)
        rejected.outcome = Outcome.Rejected.label
        state.update(rejected, Outcome.Rejected)
        state.on_end()
        assert state.best is None
        assert state.state == State.NoCertificate
        assert state.outcome == Outcome.Rejected.label

    def test_no_certificate(self):
        state = CertifyState(CertificateKind.IU1)
        state.update(BoundReport.no_certificate(CertificateKind.IU1, 0.0, "infeasible",
                                                Outcome.NoCertificate.label), Outcome.NoCertificate)
        state.on_end()
        assert state.outcome == "no certificate found"
        assert state.outcome_statistic.to_dict()["NoCertificate"] == 1


class TestRunReport:
    def report(self, upper: float, lower: float, ci=(0.3, 0.4)) -> RunReport:
        report = RunReport(query={"T": 1.0})
        for kind, raw in ((CertificateKind.HU1, upper), (CertificateKind.HL1, lower)):
            state = CertifyState(kind)
            state.update(certified(kind, raw), Outcome.Certified)
            state.on_end()
            report.certificates[kind] = state
        report.estimate = McEstimate(p_hat=0.35, ci_low=ci[0], ci_high=ci[1], n_success=35, n_paths=100)
        return report

    def test_consistent(self):
        assert self.report(0.5, 0.2).verdict() == "OK"

    def test_upper_below_interval(self):
        assert self.report(0.25, 0.2).verdict() == "INCONSISTENT"

    def test_lower_above_interval(self):
        assert self.report(0.9, 0.45).verdict() == "INCONSISTENT"

    def test_unchecked_without_estimate(self):
        report = self.report(0.5, 0.2)
        report.estimate = None
        assert report.verdict() == "UNCHECKED"

    def test_digest_ignores_timings(self):
        report = self.report(0.5, 0.2)
        report.timings["certify"] = 1.0
        first = report.digest()
        report.timings["certify"] = 7.5
        assert report.digest() == first
        assert report_digest(json.loads(report.to_json())) == first
