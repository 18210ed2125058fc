"""Path ensemble serialization.

CSV layout: header ``path_id,t,value``, one row per grid point.

Binary block layout (little endian): ``H`` (float64), ``T`` (float64),
``n_steps`` (int64), ``count`` (int64), then ``count * (n_steps + 1)``
float64 values in row-major order. A weights sidecar is a bare float64
array of length ``count``.
"""

from __future__ import annotations

import csv
import struct

import numpy as np

from .gaussgen import PathEnsemble, TimeGrid

HEADER = struct.Struct("<ddqq")


def write_csv(ensemble: PathEnsemble, path) -> None:
    t = ensemble.grid.times
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "t", "value"])
        for i, row in enumerate(ensemble.values):
            w.writerows((i, repr(float(ti)), repr(float(v))) for ti, v in zip(t, row))


def read_csv(path) -> PathEnsemble:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    ids = data[:, 0].astype(int)
    count = ids.max() + 1
    npts = len(ids) // count
    values = data[:, 2].reshape(count, npts)
    t = data[:npts, 1]
    return PathEnsemble(TimeGrid(float(t[-1]), npts - 1), values)


def write_binary(ensemble: PathEnsemble, H: float, path) -> None:
    g = ensemble.grid
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(float(H), float(g.horizon), int(g.n_steps), len(ensemble)))
        fh.write(np.ascontiguousarray(ensemble.values, dtype="<f8").tobytes())


def read_binary(path):
    """Return ``(H, PathEnsemble)``."""
    with open(path, "rb") as fh:
        H, T, n_steps, count = HEADER.unpack(fh.read(HEADER.size))
        values = np.frombuffer(fh.read(), dtype="<f8")
    if values.size != count * (n_steps + 1):
        raise ValueError(f"{path}: expected {count * (n_steps + 1)} values, found {values.size}")
    return H, PathEnsemble(TimeGrid(T, n_steps), values.reshape(count, n_steps + 1).astype(float))


def write_weights(weights, path) -> None:
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(weights, dtype="<f8").tobytes())


def read_weights(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return np.frombuffer(fh.read(), dtype="<f8").astype(float)
