"""Binary state checkpoints.

Layout: magic bytes ``NSFP1\n``, a little-endian uint64 byte length,
a JSON header {t, nx, nm, params}, then raw little-endian float64
arrays in order: u1 (row-major over x), u2, f (row-major over
(x1, x2, theta)).  Round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .circle import CircleGrid, InteractionKernel, RodCoefficients
from .coupled import DistributionField, ModelParams, State
from .spectral2d import GridSpec2D, ScalarField2D, VelocityField

MAGIC = b"NSFP1\n"


class CheckpointError(RuntimeError):
    pass


def _params_header(params: ModelParams) -> dict:
    head = {
        "nu": params.nu, "kappa": params.kappa, "delta": params.delta,
        "b": params.kernel.b, "alpha": params.alpha, "p": params.p, "q": params.q,
    }
    if params.kernel.cos_coeffs is not None:
        head["kernel_cos"] = list(params.kernel.cos_coeffs)
    nm = params.coeffs.nm
    rod = RodCoefficients.rod_model(CircleGrid(nm))
    if not (np.array_equal(params.coeffs.c, rod.c) and np.array_equal(params.coeffs.dc, rod.dc)):
        head["coeffs"] = {"c": params.coeffs.c.tolist(), "dc": params.coeffs.dc.tolist()}
    return head


def _params_from_header(head: dict, nm: int) -> ModelParams:
    kernel = InteractionKernel(b=head["b"],
                               cos_coeffs=tuple(head["kernel_cos"]) if "kernel_cos" in head else None)
    if "coeffs" in head:
        coeffs = RodCoefficients(np.asarray(head["coeffs"]["c"]), np.asarray(head["coeffs"]["dc"]))
    else:
        coeffs = RodCoefficients.rod_model(CircleGrid(nm))
    return ModelParams(nu=head["nu"], kappa=head["kappa"], delta=head["delta"],
                       kernel=kernel, coeffs=coeffs, alpha=head["alpha"],
                       p=head["p"], q=head["q"])


def write_checkpoint(path, state: State, params: ModelParams) -> None:
    grid, circle = state.f.grid, state.f.circle
    header = {"t": state.t, "nx": grid.nx, "nm": circle.nm,
              "params": _params_header(params)}
    blob = json.dumps(header).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in (state.u.u1.values, state.u.u2.values, state.f.values):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_checkpoint(path):
    """Load a checkpoint; returns (State, ModelParams)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as err:
        raise CheckpointError(f"cannot read checkpoint: {err}") from err
    if not raw.startswith(MAGIC):
        raise CheckpointError("bad magic: not a checkpoint file")
    off = len(MAGIC)
    if len(raw) < off + 8:
        raise CheckpointError("truncated header length")
    (hlen,) = struct.unpack_from("<Q", raw, off)
    off += 8
    if len(raw) < off + hlen:
        raise CheckpointError("truncated JSON header")
    try:
        header = json.loads(raw[off:off + hlen].decode())
        nx, nm, t = int(header["nx"]), int(header["nm"]), float(header["t"])
    except (ValueError, KeyError) as err:
        raise CheckpointError(f"corrupt header: {err}") from err
    off += hlen
    counts = (nx * nx, nx * nx, nx * nx * nm)
    expected = off + 8 * sum(counts)
    if len(raw) != expected:
        raise CheckpointError(
            f"payload size mismatch: have {len(raw)} bytes, header implies {expected}")
    arrays = []
    for count in counts:
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=off).copy())
        off += 8 * count
    grid = GridSpec2D(nx)
    circle = CircleGrid(nm)
    u = VelocityField(ScalarField2D(grid, values=arrays[0].reshape(nx, nx)),
                      ScalarField2D(grid, values=arrays[1].reshape(nx, nx)))
    f = DistributionField(grid, circle, arrays[2].reshape(nx, nx, nm))
    params = _params_from_header(header["params"], nm)
    return State(t=t, u=u, f=f), params
