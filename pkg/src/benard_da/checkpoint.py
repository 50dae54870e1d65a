"""Binary state checkpoints.

Layout: an 8-byte magic string, a uint32 format version, grid dims and
dealias fraction, the physical parameters, the state time, the seed, and
a history flag, followed by the coefficient arrays (u1, u2, theta) as
little-endian complex pairs of 64-bit floats in declared order.  When the
flag is set, the stepper history (three tendency arrays and its dt)
follows, so a resumed run reproduces an uninterrupted one bit for bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .model import PhysicalParams, State
from .spectral import COS, SIN, Grid, SpectralField, VectorField
from .stepping import History

__all__ = ["MAGIC", "VERSION", "Checkpoint", "save_checkpoint", "load_checkpoint"]

MAGIC = b"BENARDDA"
VERSION = 1

_HEADER = struct.Struct("<8sIII7dqB")  # magic, version, nx, ny, floats, seed, flag


@dataclass(frozen=True)
class Checkpoint:
    params: PhysicalParams
    state: State
    seed: int
    history: Optional[History] = None


def _array_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<c16").tobytes()


def save_checkpoint(
    path,
    state: State,
    params: PhysicalParams,
    seed: int,
    history: Optional[History] = None,
) -> None:
    g = state.grid
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        g.nx,
        g.ny,
        g.dealias_fraction,
        g.L,
        params.nu,
        params.kappa,
        params.mu,
        params.h,
        state.time,
        seed,
        1 if history is not None else 0,
    )
    chunks = [
        header,
        _array_bytes(state.velocity.u1.coeffs),
        _array_bytes(state.velocity.u2.coeffs),
        _array_bytes(state.temperature.coeffs),
    ]
    if history is not None:
        chunks += [
            _array_bytes(history.e_u1),
            _array_bytes(history.e_u2),
            _array_bytes(history.e_th),
            struct.pack("<d", history.dt),
        ]
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise ValueError("checkpoint is truncated")
    (
        magic,
        version,
        nx,
        ny,
        dealias_fraction,
        L,
        nu,
        kappa,
        mu,
        h,
        time,
        seed,
        flag,
    ) = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError(f"not a checkpoint file (magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"checkpoint format version {version}, expected {VERSION}")
    grid = Grid(L, nx, ny, dealias_fraction)
    count = nx * (ny + 1)
    nbytes = 16 * count
    expected = _HEADER.size + 3 * nbytes + (3 * nbytes + 8 if flag else 0)
    if len(blob) != expected:
        raise ValueError(f"checkpoint holds {len(blob)} bytes, expected {expected}")

    def arr(i: int) -> np.ndarray:
        start = _HEADER.size + i * nbytes
        flat = np.frombuffer(blob, dtype="<c16", count=count, offset=start)
        return flat.reshape(nx, ny + 1).copy()

    state = State(
        VectorField(SpectralField(grid, COS, arr(0)), SpectralField(grid, SIN, arr(1))),
        SpectralField(grid, SIN, arr(2)),
        time,
    )
    history = None
    if flag:
        (hdt,) = struct.unpack_from("<d", blob, _HEADER.size + 6 * nbytes)
        history = History(arr(3), arr(4), arr(5), hdt)
    params = PhysicalParams(nu=nu, kappa=kappa, L=L, mu=mu, h=h)
    return Checkpoint(params=params, state=state, seed=seed, history=history)
