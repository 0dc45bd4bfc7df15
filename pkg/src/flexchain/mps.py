"""Free-format MPS export for cross-checking with external solvers.

Row and column names carry the model's own naming (e.g.
``charge[city_a][3]``, ``charge_balance[city_a][3]``); free MPS places
no length limit and treats any whitespace as a separator, so the
bracketed names survive round trips through standard readers.
"""

from __future__ import annotations

from pathlib import Path as FilePath

import numpy as np

from flexchain.model import LinearProgram

OBJECTIVE_ROW = "COST"


def write_mps(lp: LinearProgram, path: str | FilePath, name: str = "FLEXCHAIN") -> None:
    """Write the LP as a free-format MPS file (minimization objective)."""
    path = FilePath(path)
    col_names = [key.name() for key in lp.index.keys]

    lines = [f"NAME {name}", "ROWS", f" N {OBJECTIVE_ROW}"]
    for tag, sense in zip(lp.row_tags, lp.senses):
        lines.append(f" {'E' if sense == '=' else 'L'} {tag}")

    # column-major entries; objective coefficient first where non-zero
    by_col: list[list[tuple[str, float]]] = [[] for _ in col_names]
    for col, coeff in enumerate(lp.objective):
        if coeff != 0.0:
            by_col[col].append((OBJECTIVE_ROW, float(coeff)))
    row_ids = np.repeat(np.arange(lp.n_rows), np.diff(lp.row_starts))
    for row, col, coeff in zip(row_ids, lp.col_ids, lp.coefficients):
        by_col[col].append((lp.row_tags[row], float(coeff)))

    lines.append("COLUMNS")
    for col, entries in enumerate(by_col):
        for row_name, coeff in entries:
            lines.append(f" {col_names[col]} {row_name} {coeff!r}")

    lines.append("RHS")
    for tag, value in zip(lp.row_tags, lp.rhs):
        if value != 0.0:
            lines.append(f" RHS {tag} {float(value)!r}")

    lines.append("BOUNDS")
    for col, (lo, hi) in enumerate(zip(lp.lower, lp.upper)):
        if lo == hi:
            lines.append(f" FX BND {col_names[col]} {float(lo)!r}")
            continue
        if lo != 0.0:
            lines.append(f" LO BND {col_names[col]} {float(lo)!r}")
        if np.isfinite(hi):
            lines.append(f" UP BND {col_names[col]} {float(hi)!r}")

    lines.append("ENDATA")
    path.write_text("\n".join(lines) + "\n")
