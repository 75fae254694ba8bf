"""Uniform quantization grids: fitting, rounding, level enumeration.

A grid is defined per output row and per column group. Symmetric grids use the
full signed code range [-2^(b-1), 2^(b-1)-1] with the scale fitted to
2^(b-1)-1, so the number of representable levels is always A = 2^b. Asymmetric
grids use codes [0, 2^b-1] with an integer zero point.

Scales and zero points are always fitted from the original full-precision
weights and are always looked up by original column index; solvers that
permute columns fetch parameters through their permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec, NonFinite

__all__ = [
    "GridSpec",
    "GridParams",
    "fit_grid",
    "nearest_level",
    "levels",
    "level_table",
    "quantize_column",
    "dequantize",
]

_DEGENERATE_SCALE = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Grid definition: bit width, symmetry, and column grouping.

    group_size 0 means one group spanning the whole row (per-channel); a
    positive group_size must divide the layer's column count.
    """

    bits: int = 3
    symmetric: bool = True
    group_size: int = 0
    mse_clip: bool = False

    def __post_init__(self):
        if not 2 <= self.bits <= 8:
            raise InvalidSpec(f"bits must be in [2, 8], got {self.bits}")
        if self.group_size < 0:
            raise InvalidSpec(f"group_size must be >= 0, got {self.group_size}")

    @property
    def num_levels(self) -> int:
        return 1 << self.bits

    @property
    def code_min(self) -> int:
        return -(1 << (self.bits - 1)) if self.symmetric else 0

    @property
    def code_max(self) -> int:
        return (1 << (self.bits - 1)) - 1 if self.symmetric else (1 << self.bits) - 1

    def groups_for(self, n_cols: int) -> int:
        if self.group_size == 0:
            return 1
        if n_cols % self.group_size != 0:
            raise InvalidSpec(
                f"group_size {self.group_size} does not divide {n_cols} columns"
            )
        return n_cols // self.group_size


@dataclass(frozen=True)
class GridParams:
    """Fitted scales (m x G, positive) and zero points (m x G, int32)."""

    scales: np.ndarray
    zero_points: np.ndarray
    spec: GridSpec = field(default_factory=GridSpec)

    def group_of(self, col: int) -> int:
        return 0 if self.spec.group_size == 0 else col // self.spec.group_size


def _fit_cell(values: np.ndarray, spec: GridSpec) -> tuple[float, int]:
    """Scale and zero point for one (row, group) cell."""
    vmin = float(values.min())
    vmax = float(values.max())
    if vmax == vmin:
        return _DEGENERATE_SCALE, _zero_for(vmin, _DEGENERATE_SCALE, spec)
    if spec.symmetric:
        scale = max(abs(vmin), abs(vmax)) / spec.code_max
        return max(scale, _DEGENERATE_SCALE), 0
    scale = max((vmax - vmin) / (spec.num_levels - 1), _DEGENERATE_SCALE)
    return scale, _zero_for(vmin, scale, spec)


def _zero_for(vmin: float, scale: float, spec: GridSpec) -> int:
    if spec.symmetric:
        return 0
    z = int(np.floor(-vmin / scale + 0.5))
    return int(np.clip(z, 0, spec.code_max))


def _cell_mse(values: np.ndarray, scale: float, zero: int, spec: GridSpec) -> float:
    codes = np.clip(np.floor(values / scale + zero + 0.5), spec.code_min, spec.code_max)
    return float(np.sum((values - scale * (codes - zero)) ** 2))


def fit_grid(w: np.ndarray, spec: GridSpec) -> GridParams:
    """Fit scales and zero points from the full-precision weights.

    With ``spec.mse_clip`` the min/max range of every cell is shrunk by the
    ratio (100-point grid over [0.5, 1.0]) minimizing that cell's squared
    round-trip error; default is plain min/max fitting.

    Raises:
        InvalidSpec: group_size does not divide the column count.
        NonFinite: w contains NaN or Inf.
    """
    w = np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise NonFinite("fit_grid input contains NaN or Inf")
    m, n = w.shape
    n_groups = spec.groups_for(n)
    gsize = n if spec.group_size == 0 else spec.group_size

    scales = np.empty((m, n_groups), dtype=np.float64)
    zeros = np.zeros((m, n_groups), dtype=np.int32)
    ratios = np.linspace(0.5, 1.0, 100) if spec.mse_clip else (1.0,)
    for g in range(n_groups):
        block = w[:, g * gsize:(g + 1) * gsize]
        for r in range(m):
            cell = block[r]
            best = None
            for ratio in ratios:
                scale, zero = _fit_cell(cell * ratio, spec) if ratio != 1.0 else _fit_cell(cell, spec)
                err = _cell_mse(cell, scale, zero, spec) if len(ratios) > 1 else 0.0
                if best is None or err < best[0]:
                    best = (err, scale, zero)
            scales[r, g] = best[1]
            zeros[r, g] = best[2]
    return GridParams(scales=scales, zero_points=zeros, spec=spec)


def nearest_level(x: float, row: int, col: int, params: GridParams) -> tuple[int, float]:
    """Round one value to its nearest grid level, ties toward the larger code."""
    spec = params.spec
    g = params.group_of(col)
    scale = params.scales[row, g]
    zero = params.zero_points[row, g]
    code = int(np.clip(np.floor(x / scale + zero + 0.5), spec.code_min, spec.code_max))
    return code, scale * (code - zero)


def quantize_column(x: np.ndarray, col: int, params: GridParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`nearest_level` over all rows of one column.

    ``x`` has one entry per row; returns (codes int32, dequantized values).
    """
    spec = params.spec
    g = params.group_of(col)
    scale = params.scales[:, g]
    zero = params.zero_points[:, g]
    codes = np.clip(
        np.floor(x / scale + zero + 0.5), spec.code_min, spec.code_max
    ).astype(np.int32)
    return codes, scale * (codes - zero)


def levels(row: int, col: int, params: GridParams) -> np.ndarray:
    """All A = 2^bits dequantized values for one grid cell, ascending."""
    spec = params.spec
    g = params.group_of(col)
    codes = np.arange(spec.code_min, spec.code_max + 1)
    return params.scales[row, g] * (codes - params.zero_points[row, g])


def level_table(col: int, params: GridParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-row level values for one column: (values m x A, codes A)."""
    spec = params.spec
    g = params.group_of(col)
    codes = np.arange(spec.code_min, spec.code_max + 1, dtype=np.int32)
    values = params.scales[:, g, None] * (codes[None, :] - params.zero_points[:, g, None])
    return values, codes


def dequantize(codes: np.ndarray, params: GridParams) -> np.ndarray:
    """Dequantize an m x n integer code matrix."""
    spec = params.spec
    m, n = codes.shape
    if spec.group_size == 0:
        gidx = np.zeros(n, dtype=np.intp)
    else:
        gidx = np.arange(n) // spec.group_size
    scale = params.scales[:, gidx]
    zero = params.zero_points[:, gidx]
    return scale * (codes - zero)
