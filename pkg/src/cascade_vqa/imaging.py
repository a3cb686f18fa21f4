"""2D slices of the 3D temperature field carried by a statevector.

Temperatures are r_opt * Re(amplitude); imaginary parts (present for the
RX+RY families) are discarded for rendering, and the discarded norm share
is reported on the slice.  CSV export is lossless; PGM export is 16-bit
after min-max normalization, optionally Lanczos-3 upsampled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .vqa import CostContext, r_opt

_AXIS_OF = {"x": 0, "y": 1, "z": 2}


@dataclass
class SliceImage:
    axis: str
    layer: int
    values: np.ndarray           # (N, N), row index = slower remaining axis
    discarded_norm: float = 0.0  # norm fraction lost by dropping Im(psi)


def extract_slice(psi: np.ndarray, ctx: CostContext, axis: str, layer: int) -> SliceImage:
    """values[j][i] = r_opt(psi) * Re(psi) at the grid point with the slice
    axis fixed to `layer`; (i, j) run over the remaining axes in (x,y,z) order."""
    if axis not in _AXIS_OF:
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    n = ctx.qubits
    n_ax = 1 << (n // 3)
    if not 0 <= layer < n_ax:
        raise ValueError(f"layer {layer} out of range [0, {n_ax})")
    scale = r_opt(psi, ctx)
    field = (scale * psi.real).reshape(n_ax, n_ax, n_ax)  # [z][y][x]
    imag_norm = float(np.linalg.norm(psi.imag))
    total = float(np.linalg.norm(psi))
    a = _AXIS_OF[axis]
    if a == 2:
        values = field[layer, :, :]          # rows y, cols x
    elif a == 1:
        values = field[:, layer, :]          # rows z, cols x
    else:
        values = field[:, :, layer]          # rows z, cols y
    return SliceImage(axis=axis, layer=layer, values=np.array(values),
                      discarded_norm=imag_norm / total if total else 0.0)


def export_csv(img: SliceImage, path) -> None:
    """Row-major float64 text; full repr precision, lossless round trip."""
    with open(path, "w") as fh:
        for row in img.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([[float(v) for v in line.strip().split(",")]
                         for line in fh if line.strip()])


def export_pgm(img: SliceImage, path, upsample: int | None = None) -> None:
    """16-bit binary PGM (P5, big-endian) after min-max normalization."""
    values = img.values
    if upsample is not None:
        if upsample < 1:
            raise ValueError("upsample factor must be >= 1")
        values = lanczos_upsample(values, upsample)
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        gray = np.round(65535.0 * (values - lo) / (hi - lo)).astype(np.uint16)
    else:
        gray = np.full(values.shape, 32768, dtype=np.uint16)
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(gray.astype(">u2").tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError("not a binary PGM")
        w, h = map(int, fh.readline().split())
        maxval = int(fh.readline())
        dtype = ">u2" if maxval > 255 else "u1"
        return np.frombuffer(fh.read(), dtype=dtype).reshape(h, w).astype(int)


def _lanczos3_kernel(x: np.ndarray) -> np.ndarray:
    out = np.sinc(x) * np.sinc(x / 3.0)
    return np.where(np.abs(x) < 3.0, out, 0.0)


def _lanczos_weights(n_in: int, factor: int) -> tuple[np.ndarray, np.ndarray]:
    """Tap indices (clamped to the edge) and normalized weights per output pixel."""
    n_out = n_in * factor
    centers = (np.arange(n_out) + 0.5) / factor - 0.5
    base = np.floor(centers).astype(int)
    taps = base[:, None] + np.arange(-2, 4)[None, :]
    weights = _lanczos3_kernel(taps - centers[:, None])
    weights /= weights.sum(axis=1, keepdims=True)
    return np.clip(taps, 0, n_in - 1), weights


def lanczos_upsample(values: np.ndarray, factor: int) -> np.ndarray:
    """Separable Lanczos-3 resampling to (factor*N) per axis, edge-clamped."""
    if factor == 1:
        return np.array(values)
    out = np.asarray(values, dtype=float)
    for axis in (0, 1):
        moved = np.moveaxis(out, axis, 0)
        taps, weights = _lanczos_weights(moved.shape[0], factor)
        moved = np.einsum("ot,ot...->o...", weights, moved[taps])
        out = np.moveaxis(moved, 0, axis)
    return out
