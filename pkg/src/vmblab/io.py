"""Serialization: `.specf` fields, `.kin` phase-space snapshots, manifests, CSV.

Both binary formats are a single UTF-8 JSON header line terminated by a
newline, followed by flat little-endian float64 blocks with real and
imaginary parts interleaved, coefficient order C-contiguous.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .spectral import Grid, SpectralField
from .velocity import HermiteSpace


def _pack(arr: np.ndarray) -> bytes:
    flat = np.ascontiguousarray(arr, dtype=complex).ravel()
    out = np.empty(2 * flat.size, dtype="<f8")
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out.tobytes()


def _unpack(buf: bytes, shape: tuple) -> np.ndarray:
    raw = np.frombuffer(buf, dtype="<f8")
    return (raw[0::2] + 1j * raw[1::2]).reshape(shape)


def write_specf(path, field: SpectralField) -> None:
    header = {
        "grid": {"n_per_axis": field.grid.n_per_axis,
                 "dealias_fraction": field.grid.dealias_fraction},
        "rank": field.rank,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(_pack(field.coeffs))


def read_specf(path) -> SpectralField:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        grid = Grid(header["grid"]["n_per_axis"],
                    header["grid"]["dealias_fraction"])
        shape = grid.shape if header["rank"] == "scalar" else (3,) + grid.shape
        return SpectralField(grid, _unpack(fh.read(), shape))


def write_kin(path, state) -> None:
    """Serialize a KineticState (import-free: duck-typed fields)."""
    header = {
        "grid": {"n_per_axis": state.grid.n_per_axis,
                 "dealias_fraction": state.grid.dealias_fraction},
        "max_degree": state.space.max_degree,
        "quad_points": state.space.quad_points,
        "epsilon": state.epsilon,
        "t": state.t,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        for block in (state.f, state.g, state.E.coeffs, state.B.coeffs):
            fh.write(_pack(block))


def read_kin(path):
    from .kinetic import KineticState

    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        grid = Grid(header["grid"]["n_per_axis"],
                    header["grid"]["dealias_fraction"])
        space = HermiteSpace(header["max_degree"], header["quad_points"])
        buf = fh.read()
    nb = space.size
    n3 = grid.n_per_axis ** 3
    sizes = [nb * n3, nb * n3, 3 * n3, 3 * n3]
    shapes = [(nb,) + grid.shape, (nb,) + grid.shape,
              (3,) + grid.shape, (3,) + grid.shape]
    blocks = []
    offset = 0
    for size, shape in zip(sizes, shapes):
        nbytes = 16 * size
        blocks.append(_unpack(buf[offset:offset + nbytes], shape))
        offset += nbytes
    return KineticState(space=space, grid=grid, f=blocks[0], g=blocks[1],
                        E=SpectralField(grid, blocks[2]),
                        B=SpectralField(grid, blocks[3]),
                        epsilon=header["epsilon"], t=header["t"])


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True)
                          + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())


def write_csv(path, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in fieldnames})


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.16e}"
    return value


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
