import numpy as np
import pytest

from certificates import CertificateKind, DegreeSpec, build_condition
from errors import SolverFailure
from helpers.solution import SolveStatus
from sdpa import parse_sdpa_result, read_sdpa, solve_sdpa, write_sdpa
from sos import SdpInstance, SdpRow, compile_problem, solve
from model import load_model_file

RESULT = """\
SDPA start at    Sat Oct 17 10:00:00 2026
phase.value  = {phase}
   Iteration = 12
xVec =
{{+1.000e+00,-2.500e-01}}
xMat =
{{
{{ {{+1.0e+00,+0.0e+00 }}, {{+0.0e+00,+2.0e+00 }} }}
{{ {{+3.0e+00 }} }}
{{+1.5e+00,+0.0e+00,+5.0e-01,+2.5e-01}}
}}
yMat =
{{
{{ {{+1.0e+00,+0.0e+00 }}, {{+0.0e+00,+2.0e+00 }} }}
{{ {{+3.0e+00 }} }}
{{+1.5e+00,+0.0e+00,+5.0e-01,+2.5e-01}}
}}
"""


def two_block_instance() -> SdpInstance:
    return SdpInstance(
        n_free=2, psd_blocks=[2, 1],
        rows=[SdpRow({0: 1.0}, {(0, 0, 0): -1.0, (1, 0, 0): 0.5}, 0.25),
              SdpRow({1: -3.0}, {(0, 0, 1): -2.0}, 0.0),
              SdpRow({}, {(0, 1, 1): -1.0}, -1.0 / 3.0)],
        objective={0: 1.0, 1: -0.1}, objective_constant=0.125)


class TestFormat:
    def test_round_trip(self, tmp_path):
        instance = two_block_instance()
        path = tmp_path / "problem.dat-s"
        write_sdpa(instance, path)
        assert read_sdpa(path) == instance

    def test_layout(self, tmp_path):
        path = tmp_path / "problem.dat-s"
        write_sdpa(two_block_instance(), path)
        lines = path.read_text().splitlines()
        assert lines[2:5] == ["3", "3", "2 1 -4"]
        # off-diagonal coefficient halved for the symmetric matrix
        assert "2 1 1 2 -1" in lines
        # objective on both halves of the split free variable
        assert "0 3 1 1 -1" in lines and "0 3 3 3 1" in lines

    def test_compiled_problem_round_trip(self, tmp_path, benchmark_path):
        model, query = load_model_file(benchmark_path("ou"))
        problem = build_condition(CertificateKind.HU2, model, query, DegreeSpec(2), alpha=0.5)
        instance = compile_problem(problem)
        path = tmp_path / "hu2.dat-s"
        write_sdpa(instance, path)
        assert read_sdpa(path) == instance


class TestResult:
    def test_optimal(self):
        solution = parse_sdpa_result(RESULT.format(phase="pdOPT"), two_block_instance())
        assert solution.status == SolveStatus.Optimal
        np.testing.assert_allclose(solution.free_values, [1.0, -0.25])
        np.testing.assert_allclose(solution.blocks[0], [[1.0, 0.0], [0.0, 2.0]])
        assert solution.objective == pytest.approx(1.0 + 0.025 + 0.125)

    def test_infeasible(self):
        assert parse_sdpa_result(RESULT.format(phase="dINF"), two_block_instance()).is_infeasible()
        assert parse_sdpa_result(RESULT.format(phase="pUNBD"), two_block_instance()).is_infeasible()

    def test_other_phase(self):
        solution = parse_sdpa_result(RESULT.format(phase="pFEAS"), two_block_instance())
        assert solution.status == SolveStatus.NumericalTrouble

    def test_missing_executable(self, tmp_path):
        with pytest.raises(SolverFailure, match="not found"):
            solve_sdpa(two_block_instance(), tmp_path, command="no-such-sdpa-binary")
        assert (tmp_path / "problem.dat-s").exists()

    def test_backend_string(self, tmp_path):
        with pytest.raises(SolverFailure):
            solve(two_block_instance(), backend=f"sdpa:{tmp_path}", solver="no-such-sdpa-binary")
