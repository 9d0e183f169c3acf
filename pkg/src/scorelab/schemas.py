"""Experiment configuration model and the CSV schema registry.

Every runner output is a flat CSV with one of the schemas below: '.' decimal
point, '\\n' line endings, UTF-8, values written with repr so reruns are
byte-identical.  validate_csv re-checks any produced file against the header
it carries, which is what the schema-check subcommand and the figures
component rely on.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, model_validator

EXPERIMENTS = ("sweep", "fig1", "windows", "audit", "coupling", "separation", "infochecks")


class ExperimentConfig(BaseModel):
    """Resolved settings for one runner task; serialized next to its outputs."""

    model_config = ConfigDict(extra="forbid")

    experiment: Literal["sweep", "fig1", "windows", "audit", "coupling", "separation", "infochecks"]
    seed: int = 0
    output_dir: str = "runs"

    # support spec
    kind: Literal["hypercube", "product-circle"] = "hypercube"
    d: int = 64
    R: float = 1.0
    gamma: float = 0.25

    # oracle profile
    regime: Literal["lp", "psi1"] = "lp"
    p: float = 2.0
    eps_err: float = 0.5
    rho: float = 0.2  # profile slack; doubles as the shell exponent for sweep/fig1
    q_budget: int = 8

    # shared knobs
    trials: int = 33
    samples: int = 20_000
    points: int = 641
    n: int = 4  # planted codebook size for audit/separation/infochecks

    # tau grids (windows, audit, infochecks)
    tau_min: float = 0.3
    tau_max: float = 3.0
    tau_points: int = 7

    # window constants
    c_constants: tuple[float, ...] = (2.0,)

    # fig1
    d_list: tuple[int, ...] = ()

    # coupling / separation
    runs: int = 200
    books: int = 2000
    n_min: int = 8
    n_max: int = 40
    packing_w: float | None = None  # default 1/(2d)
    sampler: Literal["reverse-sde-euler", "prob-flow-euler"] = "reverse-sde-euler"
    sigma_min: float | None = None
    sigma_max: float | None = None
    step_scale: float = 0.25

    @model_validator(mode="after")
    def _cross_checks(self) -> "ExperimentConfig":
        if self.experiment == "fig1" and not self.d_list:
            raise ValueError("fig1 needs a nonempty d_list")
        if not (0.0 < self.tau_min < self.tau_max):
            raise ValueError(f"need 0 < tau_min < tau_max, got [{self.tau_min}, {self.tau_max}]")
        return self


# ------------------------------------------------------------- CSV schemas

_FLOAT, _INT, _STR, _BOOL = "float", "int", "str", "bool"

SCHEMAS: dict[str, tuple[tuple[str, str], ...]] = {
    "curves": (
        ("d", _INT),
        ("rho", _FLOAT),
        ("trials", _INT),
        ("tau_star", _FLOAT),
        ("ln_tau", _FLOAT),
        ("median_signal", _FLOAT),
    ),
    "scaling": (
        ("row_type", _STR),
        ("d", _INT),
        ("inv_sqrt_d", _FLOAT),
        ("fwhm", _FLOAT),
        ("slope", _FLOAT),
        ("intercept", _FLOAT),
        ("r_squared", _FLOAT),
    ),
    "windows": (
        ("kind", _STR),
        ("d", _INT),
        ("gamma", _FLOAT),
        ("regime", _STR),
        ("p", _FLOAT),
        ("eps_err", _FLOAT),
        ("c_constant", _FLOAT),
        ("tau", _FLOAT),
        ("tau_tilde", _FLOAT),
        ("kappa_minus", _FLOAT),
        ("kappa_plus", _FLOAT),
        ("width", _FLOAT),
        ("is_empty", _BOOL),
        ("i_hat", _FLOAT),
        ("i_std_err", _FLOAT),
        ("log_lambda", _FLOAT),
        ("threshold_method", _STR),
        ("h_value", _FLOAT),
        ("e_med", _FLOAT),
        ("e_big", _FLOAT),
        ("delta", _FLOAT),
    ),
    "audit": (
        ("regime", _STR),
        ("tau", _FLOAT),
        ("p", _FLOAT),
        ("eps_err", _FLOAT),
        ("z", _FLOAT),
        ("observed", _FLOAT),
        ("bound", _FLOAT),
        ("std_err", _FLOAT),
        ("holds", _BOOL),
        ("gate_locked", _STR),
    ),
    "coupling": (
        ("seed", _INT),
        ("rate", _FLOAT),
        ("q", _INT),
        ("t_or_inf", _FLOAT),
        ("outputs_equal", _BOOL),
        ("a_set_hit_null", _BOOL),
        ("a_set_hit_planted", _BOOL),
    ),
    "separation": (
        ("kind", _STR),
        ("d", _INT),
        ("gamma", _FLOAT),
        ("n", _INT),
        ("samples", _INT),
        ("books", _INT),
        ("mass_coverage", _FLOAT),
        ("mass_std_err", _FLOAT),
        ("coverage_floor", _FLOAT),
        ("coverage_holds", _BOOL),
        ("overlap", _FLOAT),
        ("overlap_std_err", _FLOAT),
        ("markov_bound", _FLOAT),
        ("overlap_holds", _BOOL),
        ("log_lambda", _FLOAT),
        ("zeta", _FLOAT),
        ("n_max", _INT),
    ),
    "infochecks": (
        ("spec_hash", _STR),
        ("codebook_hash", _STR),
        ("tau", _FLOAT),
        ("quantity", _STR),
        ("value", _FLOAT),
        ("std_err", _FLOAT),
        ("samples", _INT),
        ("seed", _INT),
    ),
}

# which columns may be empty (written as the empty string)
_OPTIONAL: dict[str, frozenset[str]] = {
    "scaling": frozenset({"d", "inv_sqrt_d", "fwhm", "slope", "intercept", "r_squared"}),
    "audit": frozenset({"z", "gate_locked"}),
    "infochecks": frozenset({"codebook_hash", "std_err"}),
}


class SchemaError(ValueError):
    """A CSV failed validation; the message names the column and row."""


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(cell: str, kind: str) -> None:
    if kind == _FLOAT:
        float(cell)  # accepts inf/nan spellings
    elif kind == _INT:
        int(cell)
    elif kind == _BOOL:
        if cell not in ("true", "false"):
            raise ValueError(f"expected true/false, got {cell!r}")


def validate_csv(text: str) -> tuple[str, int]:
    """Match the header against the registry and type-check every row.

    Returns (schema name, data row count); raises SchemaError naming the
    offending column otherwise.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise SchemaError("empty file: no header row")
    header = lines[0].split(",")
    name = next(
        (k for k, cols in SCHEMAS.items() if [c for c, _ in cols] == header), None
    )
    if name is None:
        raise SchemaError(f"header {lines[0]!r} matches no known schema")
    cols = SCHEMAS[name]
    optional = _OPTIONAL.get(name, frozenset())
    for r, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(cols):
            raise SchemaError(f"row {r}: expected {len(cols)} cells, got {len(cells)}")
        for cell, (col, kind) in zip(cells, cols):
            if cell == "":
                if col in optional:
                    continue
                raise SchemaError(f"column {col!r} row {r}: empty value not allowed")
            try:
                _parse_cell(cell, kind)
            except ValueError as exc:
                raise SchemaError(f"column {col!r} row {r}: {exc}") from None
    return name, len(lines) - 1


def rows_to_csv(name: str, rows: list[dict]) -> str:
    """Render dict rows against a registered schema (missing keys -> empty)."""
    cols = SCHEMAS[name]
    out = [",".join(c for c, _ in cols)]
    for row in rows:
        out.append(",".join(format_cell(row.get(c)) for c, _ in cols))
    return "\n".join(out) + "\n"
