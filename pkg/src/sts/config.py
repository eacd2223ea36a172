"""Run configuration: flat ``key = value`` files with dotted keys."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .errors import InputError

# config key -> (RunConfig field, parser)
_KEYS = {
    "scene": ("scene", str),
    "seed": ("seed", int),
    "out": ("out", str),
    "depth.mode": ("depth_mode", str),
    "depth.min": ("d_min", float),
    "depth.max": ("d_max", float),
    "depth.bins": ("bins", int),
    "depth.stereo_bins": ("stereo_bins", int),
    "sweep.mode": ("sweep_mode", str),
    "sweep.frame": ("frame", int),
    "feature.stride": ("feature_stride", int),
    "output.stride": ("output_stride", int),
    "cost.groups": ("groups", int),
    "cost.head": ("head", str),
    "mono.sigma_bins": ("mono_sigma_bins", float),
    "mono.noise": ("mono_noise", float),
    "mono.depth_scale": ("mono_depth_scale", float),
    "decode.mode": ("decode_mode", str),
    "bev.extent": ("bev_extent", float),
    "bev.cell": ("bev_cell", float),
}


@dataclass(frozen=True)
class RunConfig:
    scene: Optional[str] = None
    seed: Optional[int] = None
    out: str = "out"
    depth_mode: str = "sid"
    d_min: float = 2.0
    d_max: float = 58.0
    bins: int = 112
    stereo_bins: int = 56
    sweep_mode: str = "surround"
    frame: Optional[int] = None
    feature_stride: Optional[int] = None
    output_stride: Optional[int] = None
    groups: int = 8
    head: Optional[str] = None
    mono_sigma_bins: float = 3.0
    mono_noise: float = 0.3
    mono_depth_scale: Optional[float] = None
    decode_mode: str = "argmax"
    bev_extent: float = 51.2
    bev_cell: float = 0.8

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_text(self) -> str:
        names = {f: key for key, (f, _) in _KEYS.items()}
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                lines.append(f"{names[f.name]} = {value}")
        return "\n".join(lines) + "\n"


def parse_config(text: str, source: str = "<config>", base_dir: Optional[Path] = None) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise InputError(f"{source}:{lineno}: unknown config key {key!r}")
        name, conv = _KEYS[key]
        try:
            values[name] = conv(value)
        except ValueError:
            raise InputError(f"{source}:{lineno}: bad value {value!r} for {key}") from None
    # relative scene/head paths are relative to the config file
    if base_dir is not None:
        for name in ("scene", "head"):
            value = values.get(name)
            if value and not value.startswith("preset:") and not Path(value).is_absolute():
                values[name] = str(base_dir / values[name])
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"config file not found: {path}")
    return parse_config(p.read_text(), str(p), p.parent)
