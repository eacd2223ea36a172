"""File formats: tensors, rig/scene descriptions and PGM previews.

Tensor files
    ``b"STST"`` magic, ``u16`` version (1), ``u8`` rank, ``rank`` x ``u32``
    dims, then row-major ``f32`` data. Everything little-endian.

Rig files (line oriented, ``#`` starts a comment)::

    camera <id> width <w> height <h> K <9 floats> R <9 floats> T <3 floats>
    ego <timestamp> R <9 floats> T <3 floats>

``K`` is the intrinsic matrix, ``R``/``T`` the camera-to-ego rotation and
translation (ego lines: ego-to-world), all matrices row-major.

Scene files accept every rig line plus::

    seed <int>
    channels <int>
    stride <int>
    gain <float>
    textureless_value <float>
    surface <name> center <3> u <3> v <3> half <hu> <hv> scale <s> texture <id> velocity <3>
    textureless <surface name> <s0> <s1> <t0> <t1>
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError, InputError, StsError
from .geometry import CameraModel, EgoPose
from .synthworld import SceneSpec, Surface, TexturelessPatch

MAGIC = b"STST"
VERSION = 1
_HEADER = struct.Struct("<4sHB")


def write_tensor(path, array) -> None:
    a = np.ascontiguousarray(np.asarray(array, dtype="<f4"))
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, a.ndim))
        fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
        fh.write(a.tobytes())


def read_tensor(path) -> np.ndarray:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise InputError(f"tensor file not found: {path}") from None
    if len(raw) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated tensor header", offset=len(raw))
    magic, version, rank = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported tensor version {version}", offset=4)
    pos = _HEADER.size
    if len(raw) < pos + 4 * rank:
        raise DataFormatError(f"{path}: truncated dimension list", offset=len(raw))
    dims = struct.unpack_from(f"<{rank}I", raw, pos)
    pos += 4 * rank
    expected = 4 * int(np.prod(dims, dtype=np.int64))
    if len(raw) - pos != expected:
        raise DataFormatError(
            f"{path}: payload has {len(raw) - pos} bytes, header {tuple(dims)} implies {expected}", offset=pos
        )
    return np.frombuffer(raw, dtype="<f4", offset=pos).reshape(dims).astype(np.float64)


def write_pgm(path, image, vmin=None, vmax=None) -> None:
    """8-bit binary PGM, linearly mapping [vmin, vmax] to [0, 255]."""
    img = np.asarray(image, dtype=np.float64)
    lo = np.min(img) if vmin is None else vmin
    hi = np.max(img) if vmax is None else vmax
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    pix = np.clip(np.round((img - lo) * scale), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{pix.shape[1]} {pix.shape[0]}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def _fmt(values):
    return " ".join(repr(float(x)) for x in np.asarray(values, dtype=np.float64).reshape(-1))


def format_camera(cam: CameraModel) -> str:
    return (f"camera {cam.camera_id} width {cam.width} height {cam.height} K {_fmt(cam.intrinsics)} "
            f"R {_fmt(cam.cam_to_ego_rotation)} T {_fmt(cam.cam_to_ego_translation)}")


def format_ego(ego: EgoPose) -> str:
    return f"ego {ego.timestamp} R {_fmt(ego.rotation)} T {_fmt(ego.translation)}"


class _Tokens:
    def __init__(self, tokens, where):
        self.tokens = tokens
        self.pos = 0
        self.where = where

    def fail(self, msg):
        raise DataFormatError(f"{self.where}: {msg}")

    def word(self):
        if self.pos >= len(self.tokens):
            self.fail("unexpected end of line")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, key):
        tok = self.word()
        if tok != key:
            self.fail(f"expected {key!r}, found {tok!r}")

    def floats(self, n):
        out = []
        for _ in range(n):
            tok = self.word()
            try:
                out.append(float(tok))
            except ValueError:
                self.fail(f"expected a number, found {tok!r}")
        return np.array(out)

    def integer(self):
        tok = self.word()
        try:
            return int(tok)
        except ValueError:
            self.fail(f"expected an integer, found {tok!r}")

    def done(self):
        if self.pos != len(self.tokens):
            self.fail(f"unexpected trailing tokens {self.tokens[self.pos:]}")


def _parse_camera(t: _Tokens) -> CameraModel:
    cid = t.word()
    t.expect("width")
    w = t.integer()
    t.expect("height")
    h = t.integer()
    t.expect("K")
    K = t.floats(9).reshape(3, 3)
    t.expect("R")
    R = t.floats(9).reshape(3, 3)
    t.expect("T")
    T = t.floats(3)
    t.done()
    try:
        return CameraModel(K, w, h, R, T, cid)
    except StsError as exc:
        t.fail(str(exc))


def _parse_ego(t: _Tokens) -> EgoPose:
    ts = t.integer()
    t.expect("R")
    R = t.floats(9).reshape(3, 3)
    t.expect("T")
    T = t.floats(3)
    t.done()
    try:
        return EgoPose(ts, R, T)
    except StsError as exc:
        t.fail(str(exc))


def _lines(path):
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield _Tokens(line.split(), f"{path}:{lineno}")


def read_rig(path):
    """Parse a rig file into ``(cameras, ego_poses)``."""
    cams, poses = [], []
    for t in _lines(path):
        kind = t.word()
        if kind == "camera":
            cams.append(_parse_camera(t))
        elif kind == "ego":
            poses.append(_parse_ego(t))
        else:
            t.fail(f"unknown record {kind!r}")
    return cams, poses


def write_rig(path, cameras, poses) -> None:
    lines = [format_camera(c) for c in cameras] + [format_ego(p) for p in poses]
    Path(path).write_text("\n".join(lines) + "\n")


def format_scene(spec: SceneSpec) -> str:
    lines = [
        f"seed {spec.seed}",
        f"channels {spec.channels}",
        f"stride {spec.feature_stride}",
        f"gain {spec.feature_gain!r}",
        f"textureless_value {spec.textureless_value!r}",
    ]
    lines += [format_camera(c) for c in spec.rig]
    lines += [format_ego(p) for p in spec.trajectory]
    for s in spec.surfaces:
        lines.append(
            f"surface {s.name} center {_fmt(s.center)} u {_fmt(s.axis_u)} v {_fmt(s.axis_v)} "
            f"half {s.half_u!r} {s.half_v!r} scale {s.texture_scale!r} texture {s.texture_id} velocity {_fmt(s.velocity)}"
        )
    for p in spec.textureless_regions:
        lines.append(f"textureless {p.surface} {_fmt(p.s_range)} {_fmt(p.t_range)}")
    return "\n".join(lines) + "\n"


def write_scene(path, spec: SceneSpec) -> None:
    Path(path).write_text(format_scene(spec))


def read_scene(path) -> SceneSpec:
    if not os.path.exists(path):
        raise InputError(f"scene spec not found: {path}")
    opts = {}
    cams, poses, surfaces, patches = [], [], [], []
    for t in _lines(path):
        kind = t.word()
        if kind == "camera":
            cams.append(_parse_camera(t))
        elif kind == "ego":
            poses.append(_parse_ego(t))
        elif kind in ("seed", "channels", "stride"):
            opts[kind] = t.integer()
            t.done()
        elif kind in ("gain", "textureless_value"):
            opts[kind] = float(t.floats(1)[0])
            t.done()
        elif kind == "surface":
            name = t.word()
            t.expect("center")
            center = t.floats(3)
            t.expect("u")
            u = t.floats(3)
            t.expect("v")
            v = t.floats(3)
            t.expect("half")
            hu, hv = t.floats(2)
            t.expect("scale")
            scale = float(t.floats(1)[0])
            t.expect("texture")
            tex = t.integer()
            t.expect("velocity")
            vel = t.floats(3)
            t.done()
            try:
                surfaces.append(Surface(name, center, u, v, float(hu), float(hv), scale, tex, vel))
            except StsError as exc:
                t.fail(str(exc))
        elif kind == "textureless":
            name = t.word()
            s0, s1, t0, t1 = t.floats(4)
            t.done()
            patches.append(TexturelessPatch(name, (s0, s1), (t0, t1)))
        else:
            t.fail(f"unknown record {kind!r}")
    return SceneSpec(
        seed=opts.get("seed", 0), surfaces=surfaces, rig=cams, trajectory=poses, textureless_regions=patches,
        channels=opts.get("channels", 32), feature_stride=opts.get("stride", 4),
        feature_gain=opts.get("gain", 1.0), textureless_value=opts.get("textureless_value", 0.2),
    )
