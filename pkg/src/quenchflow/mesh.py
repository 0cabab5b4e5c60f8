"""Wavefront OBJ export of the surface of revolution ``{(x, u cos th, u sin th)}``."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .solver import RunRecord

__all__ = ["SnapshotMissing", "UnsupportedDimension", "export_mesh", "revolution_mesh"]


class SnapshotMissing(KeyError):
    pass


class UnsupportedDimension(ValueError):
    pass


def revolution_mesh(x: np.ndarray, u: np.ndarray, K: int = 64):
    """Vertices ``(J*K, 3)`` and triangles ``(2*J*K, 3)`` (0-based), periodic in x and angle.

    Vertex ``j*K + k`` sits at ``(x_j, u_j cos th_k, u_j sin th_k)``.
    """
    if K < 3:
        raise ValueError("K must be >= 3")
    J = len(u)
    th = 2 * math.pi * np.arange(K) / K
    verts = np.empty((J, K, 3))
    verts[:, :, 0] = np.asarray(x)[:, None]
    verts[:, :, 1] = np.asarray(u)[:, None] * np.cos(th)[None, :]
    verts[:, :, 2] = np.asarray(u)[:, None] * np.sin(th)[None, :]
    j, k = np.meshgrid(np.arange(J), np.arange(K), indexing="ij")
    a = j * K + k
    b = ((j + 1) % J) * K + k
    c = ((j + 1) % J) * K + (k + 1) % K
    d = j * K + (k + 1) % K
    tris = np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3),
                           np.stack([a, c, d], -1).reshape(-1, 3)])
    return verts.reshape(-1, 3), tris


def export_mesh(record: RunRecord, t: float, path, K: int = 64) -> Path:
    """Write the profile at time ``t`` as an OBJ surface of revolution."""
    if record.spec.n != 2:
        raise UnsupportedDimension(f"surface of revolution export needs n = 2, got n = {record.spec.n}")
    try:
        u = record.snapshot_at(t)
    except KeyError as err:
        raise SnapshotMissing(f"no snapshot at or bracketing t={t!r}") from err
    grid = record.spec.grid
    verts, tris = revolution_mesh(grid.x, u, K)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# surface of revolution, t = {t!r}, J = {grid.J}, K = {K}\n")
        for v in verts:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for tri in tris + 1:
            fh.write(f"f {tri[0]} {tri[1]} {tri[2]}\n")
    return path
