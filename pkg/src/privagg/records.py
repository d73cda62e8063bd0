"""Experiment rows and their CSV serialization.

One row records a single sweep point: parameters, the analytic value,
and (when a simulation ran) the Monte Carlo mean with its standard
error. Serialization is deterministic: identical rows produce
byte-identical files, so reruns with the same config and seed can be
compared with ``cmp``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

SCHEMA_LINE = "# schema privagg.rows/1"

_FIXED_COLUMNS = (
    "experiment",
    "n",
    "kappa",
    "epsilon",
    "delta",
    "analytic",
    "sim_mean",
    "sim_stderr",
    "trials",
    "seed",
)


@dataclass(frozen=True)
class ExperimentRow:
    """One CSV record of a parameter sweep.

    Parameter columns that do not apply to an experiment stay None and
    serialize as empty cells; the extras carry experiment-specific
    columns (same names, same order, across all rows of a file).
    """

    experiment: str
    n: Optional[int]
    kappa: Optional[int]
    epsilon: Optional[float]
    delta: Optional[float]
    analytic: float
    sim_mean: Optional[float] = None
    sim_stderr: Optional[float] = None
    trials: Optional[int] = None
    seed: Optional[int] = None
    extras: tuple[tuple[str, object], ...] = field(default=())

    def __post_init__(self) -> None:
        has_sim = self.sim_mean is not None or self.sim_stderr is not None
        if has_sim:
            if self.trials is None or self.trials < 1:
                raise ValueError("simulated rows need trials >= 1")
            if self.sim_stderr is not None and self.sim_stderr < 0:
                raise ValueError("sim_stderr must be >= 0")
        elif self.trials is not None and self.trials < 1:
            raise ValueError("trials must be >= 1 when given")


def _format_cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[ExperimentRow]) -> str:
    """Render rows as CSV text with the schema-version header line.

    All rows must agree on their extra column names (order included).
    """
    extra_names: tuple[str, ...] = ()
    if rows:
        extra_names = tuple(name for name, _ in rows[0].extras)
        for row in rows:
            if tuple(name for name, _ in row.extras) != extra_names:
                raise ValueError("rows disagree on extra column names")
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    buf.write(",".join(_FIXED_COLUMNS + extra_names) + "\n")
    for row in rows:
        cells = [
            row.experiment,
            row.n,
            row.kappa,
            row.epsilon,
            row.delta,
            row.analytic,
            row.sim_mean,
            row.sim_stderr,
            row.trials,
            row.seed,
        ]
        cells.extend(value for _, value in row.extras)
        buf.write(",".join(_format_cell(c) for c in cells) + "\n")
    return buf.getvalue()


def write_rows(path: str, rows: list[ExperimentRow]) -> None:
    text = rows_to_csv(rows)
    with open(path, "w", newline="") as handle:
        handle.write(text)
