"""Mixed-integer linear model container."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

SENSES = ("L", "G", "E")


@dataclass(frozen=True)
class Row:
    index: np.ndarray
    coef: np.ndarray
    sense: str
    rhs: float
    name: str


class MipModel:
    """Variables with bounds and kinds, linear rows, a linear objective (minimised).

    ``annotations`` maps a symbol name (``"theta"``, ``"phi"``, ``"mu_plus/p3"``...)
    to the array of variable indices that realise it.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.kinds: list[str] = []
        self.rows: list[Row] = []
        self.objective: dict[int, float] = {}
        self.objective_constant = 0.0
        self.annotations: dict[str, np.ndarray] = {}
        self.meta: dict = {}

    # -- building -----------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    @property
    def binaries(self) -> np.ndarray:
        return np.array([k for k, kind in enumerate(self.kinds) if kind == "binary"], dtype=int)

    def add_var(self, name: str, lb: float, ub: float, kind: str = "continuous") -> int:
        if kind not in ("continuous", "binary"):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == "binary":
            lb, ub = 0.0, 1.0
        if lb > ub:
            raise ValueError(f"variable {name}: lower bound {lb} exceeds upper bound {ub}")
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.kinds.append(kind)
        return len(self.var_names) - 1

    def add_vars(self, symbol: str, labels, lb, ub, kind: str = "continuous") -> np.ndarray:
        """Add one variable per label and annotate the group under ``symbol``."""
        if symbol in self.annotations:
            raise ValueError(f"symbol {symbol!r} already annotated")
        labels = list(labels)
        lb = np.broadcast_to(np.asarray(lb, dtype=float), (len(labels),))
        ub = np.broadcast_to(np.asarray(ub, dtype=float), (len(labels),))
        base = symbol.split("/")[0]
        idx = np.array(
            [self.add_var(f"{base}[{lab}]", lo, hi, kind) for lab, lo, hi in zip(labels, lb, ub)],
            dtype=int,
        )
        self.annotations[symbol] = idx
        return idx

    def add_constr(self, terms, sense: str, rhs: float, name: str | None = None) -> int:
        """Add ``sum coef * x[index] (sense) rhs``; ``terms`` is a dict or (index, coef) pairs."""
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        items = terms.items() if isinstance(terms, dict) else terms
        acc: dict[int, float] = {}
        for k, c in items:
            acc[int(k)] = acc.get(int(k), 0.0) + float(c)
        idx = np.array(sorted(k for k, c in acc.items() if c != 0.0), dtype=int)
        coef = np.array([acc[k] for k in idx], dtype=float)
        self.rows.append(Row(idx, coef, sense, float(rhs), name or f"r{len(self.rows)}"))
        return len(self.rows) - 1

    def set_objective(self, terms, constant: float = 0.0) -> None:
        items = terms.items() if isinstance(terms, dict) else terms
        obj: dict[int, float] = {}
        for k, c in items:
            obj[int(k)] = obj.get(int(k), 0.0) + float(c)
        self.objective = obj
        self.objective_constant = float(constant)

    def copy(self) -> "MipModel":
        return copy.deepcopy(self)

    def fix(self, var: int, value: float) -> None:
        self.lb[var] = self.ub[var] = float(value)

    # -- views -------------------------------------------------------------
    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for k, v in self.objective.items():
            c[k] = v
        return c

    def matrix(self) -> np.ndarray:
        A = np.zeros((self.num_rows, self.num_vars))
        for r, row in enumerate(self.rows):
            A[r, row.index] = row.coef
        return A

    def objective_value(self, x) -> float:
        return float(self.objective_vector() @ np.asarray(x, dtype=float)) + self.objective_constant

    def violations(self, x) -> dict:
        """Worst violation per category for an assignment (0 when satisfied)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.num_vars,):
            raise ValueError(f"assignment has shape {x.shape}, model has {self.num_vars} variables")
        lb, ub = np.array(self.lb), np.array(self.ub)
        bound = float(np.max(np.maximum(np.maximum(lb - x, x - ub), 0.0), initial=0.0))
        worst_row, worst_name = 0.0, None
        for row in self.rows:
            act = float(row.coef @ x[row.index])
            if row.sense == "L":
                v = act - row.rhs
            elif row.sense == "G":
                v = row.rhs - act
            else:
                v = abs(act - row.rhs)
            if v > worst_row:
                worst_row, worst_name = v, row.name
        b = self.binaries
        integrality = float(np.max(np.abs(x[b] - np.round(x[b])), initial=0.0)) if len(b) else 0.0
        return {"bounds": bound, "rows": worst_row, "worst_row": worst_name, "integrality": integrality}

    def max_violation(self, x) -> float:
        v = self.violations(x)
        return max(v["bounds"], v["rows"], v["integrality"])

    def group(self, symbol: str) -> np.ndarray:
        try:
            return self.annotations[symbol]
        except KeyError:
            raise KeyError(f"model has no annotation for symbol {symbol!r}") from None

    def summary(self) -> dict:
        return {
            "variables": self.num_vars,
            "binaries": int(len(self.binaries)),
            "rows": self.num_rows,
        }
