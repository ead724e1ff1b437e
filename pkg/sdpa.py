"""SDPA sparse format (.dat-s) writer, reader and file-exchange backend.

An SdpInstance ``min c.y  s.t.  A_free y + sum <A_b, X_b> = rhs, X_b >= 0``
is the SDPA dual problem ``max F0.Y  s.t.  Fi.Y = ci, Y >= 0`` with
Y = diag(X_1, ..., X_B, y+, y-) and ``y = y+ - y-``. SDPA matrices are
symmetric and only the upper triangle is written, so an off-diagonal
coefficient ``a`` on X_ij becomes ``F_ij = a / 2``.
"""
import logging
import re
import subprocess
from pathlib import Path

import numpy as np

from errors import SolverFailure
from helpers.solution import SolveStatus, Solution
from sos import SdpInstance, SdpRow

logger = logging.getLogger(__name__)

_CONSTANT_TAG = "* objective_constant"


def _fmt(value: float) -> str:
    return "%.17g" % value


def _entries(instance: SdpInstance):
    """Yield (matno, blkno, i, j, value), 1-indexed, upper triangle, canonical order."""
    n = instance.n_free
    diag = len(instance.psd_blocks) + 1
    f0 = []
    for k, c in sorted(instance.objective.items()):
        f0.append((0, diag, k + 1, k + 1, -c))
        f0.append((0, diag, n + k + 1, n + k + 1, c))
    yield from sorted(f0)
    for r, row in enumerate(instance.rows, start=1):
        items = []
        for (b, i, j), c in row.entries.items():
            items.append((r, b + 1, i + 1, j + 1, c if i == j else c / 2.0))
        for k, c in row.free.items():
            items.append((r, diag, k + 1, k + 1, c))
            items.append((r, diag, n + k + 1, n + k + 1, -c))
        yield from sorted(items)


def write_sdpa(instance: SdpInstance, path: str | Path) -> None:
    blocks = list(instance.psd_blocks)
    if instance.n_free:
        blocks.append(-2 * instance.n_free)
    with open(path, "w") as f:
        f.write("* reachability certificate SDP\n")
        f.write(f"{_CONSTANT_TAG} {_fmt(instance.objective_constant)}\n")
        f.write(f"{len(instance.rows)}\n")
        f.write(f"{len(blocks)}\n")
        f.write(" ".join(str(b) for b in blocks) + "\n")
        f.write(" ".join(_fmt(row.rhs) for row in instance.rows) + "\n")
        for matno, blkno, i, j, value in _entries(instance):
            if value != 0.0:
                f.write(f"{matno} {blkno} {i} {j} {_fmt(value)}\n")


def _numbers(line: str) -> list[str]:
    return [tok for tok in re.split(r"[\s,{}()]+", line) if tok]


def read_sdpa(path: str | Path) -> SdpInstance:
    with open(path, "r") as f:
        lines = [line.strip() for line in f if line.strip()]
    constant = 0.0
    body = []
    for line in lines:
        if line.startswith(_CONSTANT_TAG):
            constant = float(line[len(_CONSTANT_TAG):])
        elif line[0] in "*\"":
            continue
        else:
            body.append(line)

    m = int(_numbers(body[0])[0])
    nblocks = int(_numbers(body[1])[0])
    dims = [int(tok) for tok in _numbers(body[2])[:nblocks]]
    rhs = [float(tok) for tok in _numbers(body[3])[:m]] if m else []
    body = body[4:] if m else body[3:]

    psd_blocks = [d for d in dims if d > 0]
    diag = [index + 1 for index, d in enumerate(dims) if d < 0]
    n_free = -dims[diag[0] - 1] // 2 if diag else 0
    instance = SdpInstance(n_free=n_free, psd_blocks=psd_blocks, objective_constant=constant)
    instance.rows = [SdpRow({}, {}, value) for value in rhs]

    for line in body:
        tokens = _numbers(line)
        matno, blkno, i, j = (int(tok) for tok in tokens[:4])
        value = float(tokens[4])
        if diag and blkno == diag[0]:
            if i > n_free:
                continue
            if matno == 0:
                instance.objective[i - 1] = -value
            else:
                instance.rows[matno - 1].free[i - 1] = value
            continue
        if matno == 0:
            continue
        instance.rows[matno - 1].entries[(blkno - 1, i - 1, j - 1)] = value if i == j else 2.0 * value

    instance.objective = dict(sorted(instance.objective.items()))
    for row in instance.rows:
        row.free = dict(sorted(row.free.items()))
        row.entries = dict(sorted(row.entries.items()))
    return instance


def _parse_nested(text: str):
    tokens = re.findall(r"[{}]|[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?", text)
    pos = 0

    def read():
        nonlocal pos
        token = tokens[pos]
        pos += 1
        if token != "{":
            return float(token)
        items = []
        while tokens[pos] != "}":
            items.append(read())
        pos += 1
        return items

    return read() if tokens else []


def _section(text: str, name: str) -> str | None:
    match = re.search(rf"^{name}\s*=\s*", text, re.MULTILINE)
    if match is None:
        return None
    start = text.index("{", match.end())
    depth = 0
    for pos in range(start, len(text)):
        if text[pos] == "{":
            depth += 1
        elif text[pos] == "}":
            depth -= 1
            if depth == 0:
                return text[start:pos + 1]
    return None


def parse_sdpa_result(text: str, instance: SdpInstance) -> Solution:
    phase = re.search(r"phase\.value\s*=\s*(\w+)", text)
    phase = phase.group(1) if phase else "noINFO"
    if phase in ("pUNBD", "dINF"):
        return Solution(SolveStatus.Infeasible, backend="sdpa", message=phase)
    if phase != "pdOPT":
        return Solution(SolveStatus.NumericalTrouble, backend="sdpa", message=phase)

    ymat = _section(text, "yMat")
    if ymat is None:
        return Solution(SolveStatus.NumericalTrouble, backend="sdpa", message="missing yMat")
    blocks = _parse_nested(ymat)
    psd = [np.asarray(block, dtype=float).reshape(size, size)
           for block, size in zip(blocks, instance.psd_blocks)]
    free_values = np.zeros(instance.n_free)
    if instance.n_free:
        split = np.asarray(blocks[len(instance.psd_blocks)], dtype=float)
        if split.ndim == 2:
            split = np.diag(split)
        free_values = split[:instance.n_free] - split[instance.n_free:2 * instance.n_free]
    objective = sum(c * free_values[k] for k, c in instance.objective.items()) + instance.objective_constant
    return Solution(SolveStatus.Optimal, objective=float(objective), free_values=free_values,
                    blocks=psd, backend="sdpa", message=phase)


def solve_sdpa(instance: SdpInstance, workdir: str | Path, command: str = "sdpa") -> Solution:
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    problem_path = workdir / "problem.dat-s"
    result_path = workdir / "problem.out"
    write_sdpa(instance, problem_path)
    logger.info("running %s on %s", command, problem_path)
    try:
        completed = subprocess.run([command, "-ds", str(problem_path), "-o", str(result_path)],
                                   capture_output=True, text=True, check=False)
    except FileNotFoundError:
        raise SolverFailure(f"SDP solver executable '{command}' not found") from None
    if not result_path.exists():
        raise SolverFailure(f"{command} exited with code {completed.returncode} and wrote no result: "
                            f"{completed.stderr.strip()}")
    return parse_sdpa_result(result_path.read_text(), instance)
