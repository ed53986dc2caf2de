"""Dense scalar fields on regular grids, with binary and CSV export."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ArgumentError

__all__ = ["ScalarField", "field_from_function"]

_MAGIC = b"DFLD"
_VERSION = 1


@dataclass
class ScalarField:
    """A function sampled on a uniform grid.

    ``values[i, j, ...]`` is the sample at origin + spacing * (i, j, ...).
    Spacing is isotropic.
    """

    dim: int
    origin: np.ndarray
    spacing: float
    values: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.dim or self.origin.shape != (self.dim,):
            raise ArgumentError("field dimensions are inconsistent")
        if not self.spacing > 0:
            raise ArgumentError("spacing must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ArgumentError("field values must be finite")

    @property
    def extents(self) -> tuple[int, ...]:
        return self.values.shape

    def axes(self) -> list[np.ndarray]:
        return [
            self.origin[k] + self.spacing * np.arange(self.values.shape[k])
            for k in range(self.dim)
        ]

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.axes(), indexing="ij"))

    def coordinates(self) -> np.ndarray:
        """(n_points, dim) array of all grid-point coordinates."""
        mesh = self.meshgrid()
        return np.stack([m.ravel() for m in mesh], axis=1)

    def copy(self) -> "ScalarField":
        return ScalarField(self.dim, self.origin.copy(), self.spacing, self.values.copy(), self.time_stamp)

    def interp(self, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation; clamps to the grid hull."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (pts - self.origin) / self.spacing
        shape = np.array(self.values.shape)
        rel = np.clip(rel, 0.0, shape - 1.000001)
        base = np.floor(rel).astype(int)
        base = np.minimum(base, shape - 2)
        frac = rel - base
        out = np.zeros(pts.shape[0])
        for corner in range(2**self.dim):
            bits = [(corner >> k) & 1 for k in range(self.dim)]
            weight = np.ones(pts.shape[0])
            idx = []
            for k, b in enumerate(bits):
                weight = weight * (frac[:, k] if b else 1.0 - frac[:, k])
                idx.append(base[:, k] + b)
            out += weight * self.values[tuple(idx)]
        return out

    def nearest(self, points: np.ndarray) -> np.ndarray:
        """Piecewise-constant (nearest grid point) extension."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rel = np.rint((pts - self.origin) / self.spacing).astype(int)
        shape = np.array(self.values.shape)
        rel = np.clip(rel, 0, shape - 1)
        return self.values[tuple(rel[:, k] for k in range(self.dim))]

    def as_leaf_function(self) -> Callable[[np.ndarray], np.ndarray]:
        """Voting function by piecewise-constant extension of the grid."""
        return lambda points: np.clip(self.nearest(points), 0.0, 1.0)

    # ----- binary format -----
    # header: magic 'DFLD', u32 version, u32 dim, f64 spacing, f64 time,
    #         dim * u64 extents, dim * f64 origin; payload: f64 row-major.

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(_MAGIC)
        buf.write(struct.pack("<II", _VERSION, self.dim))
        buf.write(struct.pack("<dd", self.spacing, self.time_stamp))
        buf.write(struct.pack(f"<{self.dim}Q", *self.values.shape))
        buf.write(struct.pack(f"<{self.dim}d", *self.origin))
        buf.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ScalarField":
        buf = io.BytesIO(raw)
        if buf.read(4) != _MAGIC:
            raise ArgumentError("not a field file")
        version, dim = struct.unpack("<II", buf.read(8))
        if version != _VERSION:
            raise ArgumentError(f"unsupported field version {version}")
        spacing, time_stamp = struct.unpack("<dd", buf.read(16))
        extents = struct.unpack(f"<{dim}Q", buf.read(8 * dim))
        origin = np.array(struct.unpack(f"<{dim}d", buf.read(8 * dim)))
        count = int(np.prod(extents))
        values = np.frombuffer(buf.read(8 * count), dtype="<f8").reshape(extents).copy()
        return cls(dim, origin, spacing, values, time_stamp)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ScalarField":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def field_from_function(
    fn: Callable[[np.ndarray], np.ndarray],
    origin: Sequence[float],
    spacing: float,
    extents: Sequence[int],
    time_stamp: float = 0.0,
) -> ScalarField:
    """Sample fn (vectorized over an (n, dim) array) on a regular grid."""
    origin = np.asarray(origin, dtype=float)
    dim = origin.shape[0]
    probe = ScalarField(dim, origin, spacing, np.zeros(tuple(extents)), time_stamp)
    vals = np.asarray(fn(probe.coordinates()), dtype=float).reshape(tuple(extents))
    probe.values = vals
    return probe
