from enum import Enum, auto

import numpy as np


class SolveStatus(Enum):
    Optimal = auto()
    Infeasible = auto()
    NumericalTrouble = auto()

    @property
    def label(self) -> str:
        return {SolveStatus.Optimal: "optimal",
                SolveStatus.Infeasible: "infeasible",
                SolveStatus.NumericalTrouble: "numerical_trouble"}[self]


class Solution:
    def __init__(self,
                 status: SolveStatus,
                 objective: float | None = None,
                 free_values: np.ndarray | None = None,
                 blocks: list[np.ndarray] | None = None,
                 backend: str = "",
                 message: str = ""):
        self.status = status
        self.objective = objective
        self.free_values = free_values
        self.blocks: list[np.ndarray] = blocks or []
        self.backend = backend
        self.message = message

    def is_feasible(self) -> bool:
        return self.status == SolveStatus.Optimal and self.free_values is not None

    def is_infeasible(self) -> bool:
        return self.status == SolveStatus.Infeasible

    def min_block_eigenvalue(self) -> float:
        return min((float(np.linalg.eigvalsh(block).min()) for block in self.blocks if block.size), default=0.0)

    def __repr__(self):
        text = f"Solution [{self.backend}] {{\n\tstatus: {self.status.label}\n"
        if self.objective is not None:
            text += f"\tobjective: {self.objective}\n"
        if self.message:
            text += f"\tmessage: {self.message}\n"
        return text + "}"
