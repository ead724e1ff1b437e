"""Diagonally-dominant inner approximation of an SdpInstance, solved as an LP by HiGHS.

Each Gram block X is replaced by a symmetric matrix with
``X_ii >= sum_{j != i} |X_ij|``, encoded with auxiliary columns
``u_ij >= |X_ij|``. A diagonally dominant matrix with a nonnegative
diagonal is PSD, so every LP solution is a valid SOS certificate.
"""
import logging

import highspy
import numpy as np

from helpers.solution import SolveStatus, Solution
from sos import SdpInstance

logger = logging.getLogger(__name__)


class HighsDsosModel(highspy.Highs):
    def __init__(self, instance: SdpInstance, primal_tolerance: float = 1e-9):
        super().__init__()
        self.silent()
        self.setOptionValue("primal_feasibility_tolerance", primal_tolerance)
        self.setOptionValue("dual_feasibility_tolerance", primal_tolerance)

        self.instance = instance
        self.num_cols = 0
        inf = highspy.kHighsInf

        for k in range(instance.n_free):
            self.__new_col(instance.objective.get(k, 0.0), -inf, inf)

        # (block, i, j) -> column of the Gram entry, upper triangle only
        self.entry_cols: dict[tuple[int, int, int], int] = {}
        for b, size in enumerate(instance.psd_blocks):
            for i in range(size):
                for j in range(i, size):
                    lower = 0.0 if i == j else -inf
                    self.entry_cols[(b, i, j)] = self.__new_col(0.0, lower, inf)

        for row in instance.rows:
            indices = list(row.free) + [self.entry_cols[key] for key in row.entries]
            values = list(row.free.values()) + list(row.entries.values())
            self.addRow(row.rhs, row.rhs, len(indices), indices, values)

        for b, size in enumerate(instance.psd_blocks):
            self.__add_dominance(b, size)

    def __new_col(self, cost: float, lower: float, upper: float) -> int:
        self.addCol(cost, lower, upper, 0, [], [])
        self.num_cols += 1
        return self.num_cols - 1

    def __add_dominance(self, block: int, size: int) -> None:
        inf = highspy.kHighsInf
        bounds: dict[tuple[int, int], int] = {}
        for i in range(size):
            for j in range(i + 1, size):
                u = self.__new_col(0.0, 0.0, inf)
                x = self.entry_cols[(block, i, j)]
                self.addRow(0.0, inf, 2, [u, x], [1.0, -1.0])
                self.addRow(0.0, inf, 2, [u, x], [1.0, 1.0])
                bounds[(i, j)] = u
        for i in range(size):
            others = [bounds[(min(i, j), max(i, j))] for j in range(size) if j != i]
            indices = [self.entry_cols[(block, i, i)]] + others
            values = [1.0] + [-1.0] * len(others)
            self.addRow(0.0, inf, len(indices), indices, values)

    def solve(self) -> Solution:
        self.run()
        status = self.getModelStatus()
        if status == highspy.HighsModelStatus.kInfeasible:
            return Solution(SolveStatus.Infeasible, backend="dsos")
        if status != highspy.HighsModelStatus.kOptimal:
            logger.warning("HiGHS finished with status %s", self.modelStatusToString(status))
            return Solution(SolveStatus.NumericalTrouble, backend="dsos", message=self.modelStatusToString(status))

        values = np.asarray(self.getSolution().col_value, dtype=float)
        blocks = []
        for b, size in enumerate(self.instance.psd_blocks):
            X = np.zeros((size, size))
            for i in range(size):
                for j in range(i, size):
                    X[i, j] = X[j, i] = values[self.entry_cols[(b, i, j)]]
            blocks.append(X)
        free_values = values[:self.instance.n_free]
        return Solution(SolveStatus.Optimal,
                        objective=self.getInfo().objective_function_value + self.instance.objective_constant,
                        free_values=free_values,
                        blocks=blocks,
                        backend="dsos")

    def __repr__(self):
        return (f"HighsDsosModel {{\n\tcolumns: {self.num_cols}\n\trows: {self.getNumRow()}\n"
                f"\tpsd blocks: {self.instance.psd_blocks}\n}}")
