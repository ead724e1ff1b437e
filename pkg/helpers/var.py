from enum import Enum, auto

from poly import Monomial


class VarRole(Enum):
    TemplateCoefficient = auto()
    Beta = auto()
    M = auto()


class Var:
    """A scalar decision variable of a certificate problem."""

    def __init__(self, index: int, name: str, role: VarRole,
                 owner: str | None = None, monomial: Monomial | None = None) -> None:
        self.index: int = index
        self.name: str = name
        self.role: VarRole = role
        self.owner: str | None = owner
        self.monomial: Monomial | None = monomial

    def __eq__(self, other):
        return isinstance(other, Var) and self.index == other.index

    def __hash__(self):
        return hash(self.index)

    def __repr__(self):
        return f"Var({self.index}) [{self.name}] {{ role: {self.role.name}" + " }"


class VarsInfo:
    def __init__(self):
        self.info: list[Var] = []

    def new(self, name: str, role: VarRole, owner: str | None = None, monomial: Monomial | None = None) -> Var:
        var = Var(len(self.info), name, role, owner, monomial)
        self.info.append(var)
        return var

    def __len__(self):
        return len(self.info)

    def __iter__(self):
        return iter(self.info)
