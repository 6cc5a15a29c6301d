"""CSV and JSON interchange for designs, responses, targets and reports.

All floats are written with ``repr``, the shortest decimal string that
round-trips the binary value, so write -> read is lossless and repeated
runs under the same seed produce byte-identical files. Nothing here
writes timestamps or environment-dependent content.

Designs travel as bare (d, curve) rows. When the sinusoid provenance is
known (generated data), a ``*_specs.csv`` sidecar with the
(d, A, omega, phi) rows is written next to the design file; loading
attaches it when present, which is what the feature_based kernel family
needs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cokrige import as_strain_grid
from .design import SinusoidSpec
from .exceptions import InvalidInputError
from .spectral import StructureDesign

DESIGNS_FILE = "designs.csv"
RESPONSES_FILE = "responses.csv"
TEST_PREFIX = "test_"


def fmt(x) -> str:
    """Shortest round-trip decimal for one float."""
    return repr(float(x))


@dataclass
class Dataset:
    """Designs with their stress responses on a common strain grid."""

    designs: list
    responses: np.ndarray
    grid: np.ndarray

    def __post_init__(self):
        self.grid = as_strain_grid(self.grid)
        self.responses = np.asarray(self.responses, dtype=float)
        n, m = self.responses.shape
        if len(self.designs) != n:
            raise InvalidInputError("design count does not match response rows")
        if m != self.grid.size:
            raise InvalidInputError("response columns do not match the strain grid")
        if not np.all(np.isfinite(self.responses)) or np.any(self.responses <= 0):
            raise InvalidInputError("stresses must be finite and positive")


def specs_sidecar_path(designs_path) -> Path:
    """designs.csv -> designs_specs.csv next to it."""
    path = Path(designs_path)
    if path.suffix != ".csv":
        raise InvalidInputError(f"expected a .csv design file, got {path.name}")
    return path.with_name(path.stem + "_specs.csv")


def write_designs(path, designs) -> None:
    path = Path(path)
    p = designs[0].p
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d"] + [f"x{k}" for k in range(p)])
        for dsn in designs:
            writer.writerow([fmt(dsn.diameter)] + [fmt(v) for v in dsn.curve])


def _floats(path, row, what) -> list[float]:
    try:
        return [float(v) for v in row]
    except ValueError as exc:
        raise InvalidInputError(f"{Path(path).name}: non-numeric {what}") from exc


def read_designs(path) -> list[StructureDesign]:
    """Read (d, curve) rows, attaching sinusoid features from the sidecar."""
    path = Path(path)
    rows = _read_rows(path)
    header = rows[0]
    if not header or header[0] != "d" or len(header) < 2:
        raise InvalidInputError(f"{path.name}: expected header d,x0,...")
    p = len(header) - 1
    if header[1:] != [f"x{k}" for k in range(p)]:
        raise InvalidInputError(f"{path.name}: curve columns must be x0..x{p - 1}")
    specs = None
    sidecar = specs_sidecar_path(path)
    if sidecar.exists():
        specs = read_specs(sidecar)
        if len(specs) != len(rows) - 1:
            raise InvalidInputError(
                f"{sidecar.name}: {len(specs)} spec rows for {len(rows) - 1} designs")
    designs = []
    for i, row in enumerate(rows[1:]):
        if len(row) != p + 1:
            raise InvalidInputError(f"{path.name}: row {i} has {len(row)} fields")
        values = np.array(_floats(path, row, f"value in row {i}"))
        features = specs[i].as_array() if specs is not None else None
        designs.append(StructureDesign(diameter=values[0], curve=values[1:],
                                       features=features))
    return designs


def write_specs(path, specs) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "A", "omega", "phi"])
        for spec in specs:
            writer.writerow([fmt(spec.d), fmt(spec.A), fmt(spec.omega), fmt(spec.phi)])


def read_specs(path) -> list[SinusoidSpec]:
    rows = _read_rows(Path(path))
    if rows[0] != ["d", "A", "omega", "phi"]:
        raise InvalidInputError(f"{Path(path).name}: expected header d,A,omega,phi")
    return [SinusoidSpec(*_floats(path, row, f"value in row {i}"))
            for i, row in enumerate(rows[1:])]


def write_responses(path, grid, responses) -> None:
    """Header row of strain levels, then one stress row per run."""
    responses = np.atleast_2d(np.asarray(responses, dtype=float))
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([fmt(s) for s in grid])
        for row in responses:
            writer.writerow([fmt(v) for v in row])


def read_responses(path):
    rows = _read_rows(Path(path))
    grid = np.array(_floats(path, rows[0], "strain level"))
    if any(len(row) != grid.size for row in rows[1:]):
        raise InvalidInputError(f"{Path(path).name}: ragged response rows")
    Y = np.array([_floats(path, row, f"stress in row {i}")
                  for i, row in enumerate(rows[1:])])
    return grid, Y


def save_dataset(out_dir, dataset: Dataset, specs=None, prefix: str = "") -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dpath = out_dir / (prefix + DESIGNS_FILE)
    write_designs(dpath, dataset.designs)
    if specs is not None:
        write_specs(specs_sidecar_path(dpath), specs)
    write_responses(out_dir / (prefix + RESPONSES_FILE), dataset.grid,
                    dataset.responses)


def load_dataset(in_dir, prefix: str = "") -> Dataset:
    in_dir = Path(in_dir)
    designs = read_designs(in_dir / (prefix + DESIGNS_FILE))
    grid, Y = read_responses(in_dir / (prefix + RESPONSES_FILE))
    return Dataset(designs=designs, responses=Y, grid=grid)


def load_eval_dataset(in_dir) -> Dataset:
    """Prefer the test_* pair when the directory holds both splits."""
    in_dir = Path(in_dir)
    if (in_dir / (TEST_PREFIX + DESIGNS_FILE)).exists():
        return load_dataset(in_dir, prefix=TEST_PREFIX)
    return load_dataset(in_dir)


def write_target(path, strain, stress) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strain", "stress"])
        for s, v in zip(strain, stress):
            writer.writerow([fmt(s), fmt(v)])


def read_target(path):
    rows = _read_rows(Path(path))
    if rows[0] != ["strain", "stress"]:
        raise InvalidInputError(f"{Path(path).name}: expected header strain,stress")
    if any(len(row) != 2 for row in rows[1:]):
        raise InvalidInputError(f"{Path(path).name}: rows must be strain,stress pairs")
    data = np.array([_floats(path, row, f"value in row {i}")
                     for i, row in enumerate(rows[1:])])
    if data.shape[0] < 2:
        raise InvalidInputError("target needs at least two strain levels")
    strain, stress = data[:, 0], data[:, 1]
    if np.any(np.diff(strain) <= 0):
        raise InvalidInputError("target strain levels must be strictly increasing")
    return strain, stress


def write_prediction_csv(path, grid, rows) -> None:
    """Prediction table: one block of strain levels per design.

    ``rows`` is a list of (mean, lower, upper) stress triples. Each block
    leads with the known s = 0 boundary row (stress exactly zero there),
    which the model's log-strain basis cannot represent on-grid.
    """
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["design", "strain", "mean", "lower", "upper"])
        for i, (mean, lower, upper) in enumerate(rows):
            writer.writerow([str(i), fmt(0.0), fmt(0.0), fmt(0.0), fmt(0.0)])
            for j, s in enumerate(grid):
                writer.writerow([str(i), fmt(s), fmt(mean[j]), fmt(lower[j]),
                                 fmt(upper[j])])


def write_json(path, obj) -> None:
    """Canonical JSON: sorted keys, repr floats via json's own formatter."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_rows(path: Path) -> list[list[str]]:
    if not path.exists():
        raise InvalidInputError(f"missing file: {path}")
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise InvalidInputError(f"{path.name} is empty")
    return rows
