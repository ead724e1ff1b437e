class Bound:
    """Closed interval [lower, upper]; one per state in a bounding box."""

    def __init__(self, lower: float, upper: float):
        if lower > upper:
            raise ValueError(f"empty bound [{lower}, {upper}]")
        self.lower = lower
        self.upper = upper

    def to_list(self) -> list[float]:
        return [self.lower, self.upper]

    def __repr__(self):
        return f"Bound {{lower: {self.lower}, upper: {self.upper}" + " }"

    def __eq__(self, other):
        return isinstance(other, Bound) and self.lower == other.lower and self.upper == other.upper
