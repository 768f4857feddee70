"""Feature-space map export: delimited text and plain PGM grayscale.

The visual convention matches a math plot: dimension 0 runs left→right
across columns, dimension 1 bottom→top, so CSV/PGM rows are written with the
dimension-1 index *descending*.  One-dimensional maps are a single row.
Maps with more than two dimensions must be sliced down to two first.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ConfigError

PathLike = Union[str, Path]


def heatmap_matrix(dense: np.ndarray, slices: Optional[dict[int, int]] = None) -> np.ndarray:
    """Orient a dense fitness map for display; ``slices`` pins extra dims.

    Returns a 2-D array (rows = dim-1 descending for 2-D maps; a single row
    for 1-D maps).  NaN marks unfilled cells throughout.
    """
    dense = np.asarray(dense, dtype=float)
    if slices:
        for dim in sorted(slices, reverse=True):
            if not 0 <= dim < dense.ndim:
                raise ConfigError(f"slice dimension {dim} out of range for {dense.ndim}-D map")
            index = slices[dim]
            if not 0 <= index < dense.shape[dim]:
                raise ConfigError(
                    f"slice index {index} out of range for dimension {dim} "
                    f"(size {dense.shape[dim]})"
                )
            dense = np.take(dense, index, axis=dim)
    if dense.ndim == 1:
        return dense[None, :]
    if dense.ndim == 2:
        return dense.T[::-1, :]
    raise ConfigError(
        f"map has {dense.ndim} dimensions; use --slice d=i to pin all but two"
    )


def write_heatmap_csv(matrix: np.ndarray, dest: Union[PathLike, io.TextIOBase]) -> None:
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="") as f:
            write_heatmap_csv(matrix, f)
        return
    writer = csv.writer(dest, lineterminator="\n")
    for row in np.asarray(matrix, dtype=float):
        writer.writerow(["nan" if math.isnan(v) else format(v, ".17g") for v in row])


def read_heatmap_csv(path: PathLike) -> np.ndarray:
    with open(path, newline="") as f:
        rows = [[float(v) for v in row] for row in csv.reader(f) if row]
    if not rows:
        raise ConfigError(f"{path}: empty heatmap file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigError(f"{path}: ragged rows {sorted(widths)}")
    return np.array(rows)


def heatmap_csv_text(matrix: np.ndarray) -> str:
    buf = io.StringIO()
    write_heatmap_csv(matrix, buf)
    return buf.getvalue()


def write_heatmap_pgm(matrix: np.ndarray, dest: Union[PathLike, io.TextIOBase]) -> None:
    """Plain (P2) grayscale: unfilled = 0, filled scaled to [1, 255].

    A map whose filled cells all share one fitness renders at full intensity —
    a uniform map should read as "filled", not vanish into the background.
    """
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="") as f:
            write_heatmap_pgm(matrix, f)
        return
    matrix = np.asarray(matrix, dtype=float)
    filled = np.isfinite(matrix)
    out = np.zeros(matrix.shape, dtype=int)
    if filled.any():
        lo = float(matrix[filled].min())
        hi = float(matrix[filled].max())
        if hi > lo:
            scaled = 1.0 + (matrix[filled] - lo) / (hi - lo) * 254.0
            out[filled] = np.rint(scaled).astype(int)
        else:
            out[filled] = 255
    rows, cols = matrix.shape
    dest.write(f"P2\n{cols} {rows}\n255\n")
    for row in out:
        dest.write(" ".join(str(v) for v in row) + "\n")
