"""On-disk formats.

* Bayer frames: 16-bit grayscale PNG; RGB images: 16-bit RGB PNG. Values are
  clipped to [0, 1] on export.
* Variance maps: ``b"VMAP"``, width and height as little-endian uint32, then
  float32 samples in row-major order.
* Offset grids: ``b"OGRD"``, grid rows and cols as little-endian uint32, then
  (dy, dx) int32 pairs in row-major patch order; or CSV with columns
  ``patch_row,patch_col,dy,dx``.
* Flow fields: ``b"FLOW"``, width and height as little-endian uint32, then
  (dy, dx) float32 pairs per pixel, then one float32 confidence per pixel.
"""
from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import cv2
import numpy as np

from .dpbm import OffsetGrid
from .image_core import BayerFrame, Burst
from .refine import FlowField


class FormatError(OSError):
    pass


def _to_u16(x: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(x, 0.0, 1.0) * 65535).astype(np.uint16)


def _write_png(path, arr: np.ndarray) -> None:
    ok, buf = cv2.imencode(".png", arr)
    if not ok:
        raise FormatError(f"could not encode PNG for {path}")
    Path(path).write_bytes(buf.tobytes())


def write_gray16(path, grid: np.ndarray) -> None:
    _write_png(path, _to_u16(grid))


def write_rgb16(path, rgb: np.ndarray) -> None:
    _write_png(path, _to_u16(rgb)[..., ::-1])


def read_image(path) -> np.ndarray:
    """Read an 8- or 16-bit PNG as float64 in [0, 1] (RGB order for colour)."""
    raw = np.frombuffer(Path(path).read_bytes(), dtype=np.uint8)
    img = cv2.imdecode(raw, cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FormatError(f"could not decode image {path}")
    scale = float(np.iinfo(img.dtype).max)
    img = img.astype(np.float64) / scale
    if img.ndim == 3:
        img = img[..., :3][..., ::-1]
    return np.ascontiguousarray(img)


def _read_header(data: bytes, magic: bytes, path) -> tuple[int, int]:
    if len(data) < 12 or data[:4] != magic:
        raise FormatError(f"{path}: not a {magic.decode()} file")
    return struct.unpack("<II", data[4:12])


def write_vmap(path, vmap: np.ndarray) -> None:
    h, w = vmap.shape
    Path(path).write_bytes(b"VMAP" + struct.pack("<II", w, h) + vmap.astype("<f4").tobytes())


def read_vmap(path) -> np.ndarray:
    data = Path(path).read_bytes()
    w, h = _read_header(data, b"VMAP", path)
    body = np.frombuffer(data, dtype="<f4", offset=12)
    if body.size != w * h:
        raise FormatError(f"{path}: expected {w * h} samples, found {body.size}")
    return body.reshape(h, w).astype(np.float64)


def write_ogrd(path, grid: OffsetGrid) -> None:
    rows, cols = grid.grid_shape
    Path(path).write_bytes(b"OGRD" + struct.pack("<II", rows, cols) + grid.offsets.astype("<i4").tobytes())


def read_ogrd(path, patch: int) -> OffsetGrid:
    data = Path(path).read_bytes()
    rows, cols = _read_header(data, b"OGRD", path)
    body = np.frombuffer(data, dtype="<i4", offset=12)
    if body.size != rows * cols * 2:
        raise FormatError(f"{path}: expected {rows * cols} offset pairs")
    return OffsetGrid(body.reshape(rows, cols, 2).astype(np.int64), patch)


def offsets_csv(grid: OffsetGrid) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["patch_row", "patch_col", "dy", "dx"])
    rows, cols = grid.grid_shape
    for i in range(rows):
        for j in range(cols):
            writer.writerow([i, j, *grid.offsets[i, j].tolist()])
    return out.getvalue()


def read_offsets_csv(path, patch: int) -> OffsetGrid:
    with open(path, newline="") as fh:
        records = [tuple(int(v) for v in (r["patch_row"], r["patch_col"], r["dy"], r["dx"])) for r in csv.DictReader(fh)]
    rows = max(r[0] for r in records) + 1
    cols = max(r[1] for r in records) + 1
    off = np.zeros((rows, cols, 2), dtype=np.int64)
    for i, j, dy, dx in records:
        off[i, j] = (dy, dx)
    return OffsetGrid(off, patch)


def write_flow(path, ff: FlowField) -> None:
    h, w = ff.shape
    Path(path).write_bytes(
        b"FLOW" + struct.pack("<II", w, h) + ff.flow.astype("<f4").tobytes() + ff.confidence.astype("<f4").tobytes()
    )


def read_flow(path) -> FlowField:
    data = Path(path).read_bytes()
    w, h = _read_header(data, b"FLOW", path)
    body = np.frombuffer(data, dtype="<f4", offset=12)
    if body.size != 3 * w * h:
        raise FormatError(f"{path}: expected {3 * w * h} float samples, found {body.size}")
    flow = body[: 2 * w * h].reshape(h, w, 2).astype(np.float64)
    conf = body[2 * w * h :].reshape(h, w).astype(np.float64)
    return FlowField(flow, conf)


def flow_to_rgb(ff: FlowField, max_mag: float | None = None) -> np.ndarray:
    """Hue encodes direction, saturation magnitude, value confidence."""
    dy, dx = ff.flow[..., 0], ff.flow[..., 1]
    mag = np.hypot(dy, dx)
    max_mag = max_mag or max(float(mag.max()), 1.0)
    hsv = np.zeros(ff.shape + (3,), dtype=np.float32)
    hsv[..., 0] = (np.degrees(np.arctan2(dy, dx)) % 360).astype(np.float32)
    hsv[..., 1] = np.clip(mag / max_mag, 0, 1)
    hsv[..., 2] = np.clip(ff.confidence, 0, 1)
    return cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB).astype(np.float64)


# -- burst directories ------------------------------------------------------

META_FILE = "burst.json"


def frame_name(t: int) -> str:
    return f"frame_{t:03d}"


def save_burst(directory, burst: Burst, extra: dict | None = None) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for t, (f, v) in enumerate(zip(burst.frames, burst.variance_maps)):
        write_gray16(d / f"{frame_name(t)}.png", f.data)
        write_vmap(d / f"{frame_name(t)}.vmap", v)
    meta = dict(burst.meta)
    meta.update(extra or {})
    meta.update(frames=len(burst), ref_index=burst.ref_index, pattern=burst.pattern)
    (d / META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_meta(directory) -> dict:
    path = Path(directory) / META_FILE
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise FormatError(f"{path} not found; is {directory} a burst directory?") from None


def load_burst(directory) -> Burst:
    d = Path(directory)
    meta = load_meta(d)
    frames, vmaps = [], []
    for t in range(meta["frames"]):
        frames.append(BayerFrame(read_image(d / f"{frame_name(t)}.png"), meta["pattern"]))
        vmaps.append(read_vmap(d / f"{frame_name(t)}.vmap"))
    return Burst(tuple(frames), tuple(vmaps), meta["ref_index"], meta)
