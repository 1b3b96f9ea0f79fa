"""Fixed-format MPS export and plain-text solution import.

Names are mangled to 8 characters (``C0000001`` for columns, ``R0000001`` for
rows); the mapping back to model names and symbols goes to a JSON sidecar.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import MipModel


class SolutionImportError(ValueError):
    pass


def column_name(k: int) -> str:
    return f"C{k + 1:07d}"


def row_name(r: int) -> str:
    return f"R{r + 1:07d}"


def mangling_table(model: MipModel) -> dict:
    return {
        "columns": {column_name(k): name for k, name in enumerate(model.var_names)},
        "rows": {row_name(r): row.name for r, row in enumerate(model.rows)},
        "objective": "OBJ",
        "objective_constant": model.objective_constant,
        "annotations": {sym: [column_name(int(k)) for k in idx] for sym, idx in model.annotations.items()},
    }


def _num(v: float) -> str:
    """Shortest decimal that round-trips, else the most digits that fit 12 columns."""
    v = float(v)
    if v == 0.0:
        return "0"
    text = repr(v)
    if len(text) <= 12:
        return text
    for digits in range(12, 0, -1):
        text = f"{v:.{digits}g}"
        if len(text) <= 12:
            return text
    raise ValueError(f"cannot format {v} in 12 columns")


def _line(f1="", f2="", f3="", f4="", f5="", f6="") -> str:
    text = " " + f1.ljust(2) + " " + f2.ljust(8) + "  " + f3.ljust(8) + "  " + f4.rjust(12)
    if f5:
        text += "   " + f5.ljust(8) + "  " + f6.rjust(12)
    return text.rstrip()


def mps_text(model: MipModel) -> str:
    lines = [f"NAME          {model.name[:8].upper() or 'MODEL'}", "ROWS", _line("N", "OBJ")]
    for r, row in enumerate(model.rows):
        lines.append(_line(row.sense, row_name(r)))

    entries: dict[int, list[tuple[str, float]]] = {k: [] for k in range(model.num_vars)}
    for k, c in sorted(model.objective.items()):
        if c != 0.0:
            entries[k].append(("OBJ", c))
    for r, row in enumerate(model.rows):
        for k, c in zip(row.index, row.coef):
            entries[int(k)].append((row_name(r), float(c)))

    lines.append("COLUMNS")
    binaries = set(model.binaries.tolist())
    continuous = [k for k in range(model.num_vars) if k not in binaries]
    integer = [k for k in range(model.num_vars) if k in binaries]

    def emit(k):
        items = entries[k] or [("OBJ", 0.0)]
        for a in range(0, len(items), 2):
            pair = items[a : a + 2]
            if len(pair) == 2:
                lines.append(_line("", column_name(k), pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1])))
            else:
                lines.append(_line("", column_name(k), pair[0][0], _num(pair[0][1])))

    for k in continuous:
        emit(k)
    if integer:
        lines.append(_line("", "MARKER", "'MARKER'", "", "'INTORG'"))
        for k in integer:
            emit(k)
        lines.append(_line("", "MARKER", "'MARKER'", "", "'INTEND'"))

    lines.append("RHS")
    if model.objective_constant:
        lines.append(_line("", "RHS", "OBJ", _num(-model.objective_constant)))
    for r, row in enumerate(model.rows):
        if row.rhs != 0.0:
            lines.append(_line("", "RHS", row_name(r), _num(row.rhs)))

    lines.append("BOUNDS")
    for k in range(model.num_vars):
        name = column_name(k)
        lo, hi = model.lb[k], model.ub[k]
        if k in binaries:
            lines.append(_line("BV", "BND", name))
        elif lo == hi:
            lines.append(_line("FX", "BND", name, _num(lo)))
        else:
            if lo == -np.inf:
                lines.append(_line("MI", "BND", name))
            elif lo != 0.0:
                lines.append(_line("LO", "BND", name, _num(lo)))
            if hi != np.inf:
                lines.append(_line("UP", "BND", name, _num(hi)))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def export_mps(model: MipModel, path, sidecar=None) -> Path:
    """Write ``model`` as fixed MPS plus a ``.names.json`` mangling sidecar.

    Output is byte-identical for identical models.
    """
    path = Path(path)
    path.write_text(mps_text(model))
    sidecar = Path(sidecar) if sidecar else path.with_suffix(".names.json")
    sidecar.write_text(json.dumps(mangling_table(model), indent=2, sort_keys=True) + "\n")
    return path


def import_solution(model: MipModel, path, tol: float = 1e-6) -> np.ndarray:
    """Read ``<name> <value>`` lines (mangled or model names) into an assignment.

    Variables absent from the file are taken as zero. The point is checked
    against the model; a violation above ``tol`` raises with the worst offender.
    """
    text = Path(path).read_text()
    lookup = {column_name(k): k for k in range(model.num_vars)}
    lookup.update({name: k for k, name in enumerate(model.var_names)})
    x = np.zeros(model.num_vars)
    seen = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionImportError(f"line {lineno}: expected '<name> <value>', got {raw!r}")
        name, value = parts
        if name not in lookup:
            raise SolutionImportError(f"line {lineno}: unknown variable {name!r}")
        try:
            x[lookup[name]] = float(value)
        except ValueError:
            raise SolutionImportError(f"line {lineno}: bad value {value!r}") from None
        seen += 1
    if seen == 0:
        raise SolutionImportError(f"{path}: no variable assignments found")
    v = model.violations(x)
    worst = max(v["bounds"], v["rows"], v["integrality"])
    if worst > tol:
        where = v["worst_row"] if v["rows"] >= max(v["bounds"], v["integrality"]) else ("bounds" if v["bounds"] >= v["integrality"] else "integrality")
        raise SolutionImportError(f"imported point is infeasible: worst violation {worst:.3e} at {where}")
    return x


def write_solution(model: MipModel, x, path) -> None:
    """Write an assignment in the import format, using mangled names."""
    lines = [f"{column_name(k)} {float(v)!r}" for k, v in enumerate(np.asarray(x, dtype=float))]
    Path(path).write_text("\n".join(lines) + "\n")
