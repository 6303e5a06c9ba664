"""JSON network files.

A network file holds ``{m, h_cond, v_cond, boundary_temps}``. ``h_cond`` is
m rows of m+1 values (interior row r, bar between full-grid columns C and
C+1), ``v_cond`` is m+1 rows of m values, and ``boundary_temps`` lists the
4(m+1) perimeter values clockwise from the top-left full-grid corner.
"""

import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import NetworkFileError
from .grid import GridNetwork

logger = logging.getLogger(__name__)


class NetworkDocument(BaseModel):
    """On-disk representation of a :class:`~ringsolve_core.grid.GridNetwork`."""

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "m": 2,
                "h_cond": [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]],
                "v_cond": [[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]],
                "boundary_temps": [0.0] * 12,
            }
        }
    )

    m: int = Field(..., ge=2, description="Interior side length (even)")
    h_cond: list[list[float]] = Field(..., description="Horizontal bar conductivities, m x (m+1)")
    v_cond: list[list[float]] = Field(..., description="Vertical bar conductivities, (m+1) x m")
    boundary_temps: list[float] = Field(..., description="Perimeter temperatures, 4(m+1) values")

    @field_validator("m")
    @classmethod
    def m_must_be_even(cls, v: int) -> int:
        if v % 2:
            raise ValueError(f"m must be even, got {v}")
        return v

    @model_validator(mode="after")
    def check_shapes(self) -> "NetworkDocument":
        m = self.m
        for name, rows, cols in (("h_cond", m, m + 1), ("v_cond", m + 1, m)):
            values = getattr(self, name)
            if len(values) != rows or any(len(row) != cols for row in values):
                raise ValueError(f"{name} must be {rows} rows of {cols} values")
            if any(x <= 0 for row in values for x in row):
                raise ValueError(f"{name} holds a non-positive conductivity")
        if len(self.boundary_temps) != 4 * (m + 1):
            raise ValueError(f"boundary_temps must have {4 * (m + 1)} values")
        return self

    @classmethod
    def from_network(cls, g: GridNetwork) -> "NetworkDocument":
        return cls(
            m=g.m,
            h_cond=g.h_cond.tolist(),
            v_cond=g.v_cond.tolist(),
            boundary_temps=g.boundary_temps.tolist(),
        )

    def to_network(self) -> GridNetwork:
        return GridNetwork(
            self.m,
            np.array(self.h_cond),
            np.array(self.v_cond),
            np.array(self.boundary_temps),
        )


def read_network(path: str | Path) -> GridNetwork:
    """Load and validate a network file.

    Raises:
        NetworkFileError: If the file is missing, not JSON or fails validation
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise NetworkFileError(str(path), f"cannot read file: {e.strerror or e}") from e
    try:
        document = NetworkDocument.model_validate_json(text)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "document"
        raise NetworkFileError(str(path), f"{location}: {first['msg']}") from e
    logger.debug(f"Read network m={document.m} from {path}")
    return document.to_network()


def write_network(g: GridNetwork, path: str | Path) -> Path:
    """Write a network file; floats keep full precision so a read is bit-exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = NetworkDocument.from_network(g)
    path.write_text(document.model_dump_json() + "\n")
    logger.debug(f"Wrote network m={g.m} to {path}")
    return path
