"""Flat pipeline configuration: a TOML document plus ``key=value`` overrides."""

import dataclasses
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .detector import CascadeBackend, FixtureBackend, FixtureDetectorConfig, load_cascade
from .geometry import parse_kinds
from .pipeline import SegmentFaceDetector

__all__ = ["PipelineConfig", "load_config", "parse_override"]


@dataclass
class PipelineConfig:
    # detection
    active_kinds: str = "C0"
    zeta: int = 20
    c: int = 2
    r_factor: float = 1.0 / 6.0
    delta: float = 0.5
    theta: float = 0.0
    downsample: int = 4
    min_face: int = 64  # in downsampled pixels
    clahe_tiles_x: int = 8
    clahe_tiles_y: int = 8
    clahe_clip: float = 2.0
    smoothing: float = 0.0
    # detector backend
    backend: str = "fixture"
    fixture_miss_rate: float = 0.0
    fixture_fp_rate: float = 0.0
    fixture_jitter: float = 0.0
    fixture_scale_jitter: float = 0.0
    fixture_visibility: float = 0.6
    cascade_models: list = field(default_factory=list)
    merge_iou: float = 0.3
    # training
    svm_lambda: float = 1e-4
    svm_epochs: int = 200
    svm_batch_size: int = 32
    seed: int = 0
    # files
    data_dir: str = "data"
    annotations: str = ""
    model: str = "model.json"
    output_dir: str = "out"
    split: str = "test"
    # synthetic data
    synth_frames: int = 500
    synth_no_face_fraction: float = 0.2
    synth_crop_fraction: float = 0.3
    synth_crop_min: float = 0.25
    synth_crop_max: float = 0.5
    synth_width: int = 320
    synth_height: int = 180
    synth_clutter: float = 4.0
    # benchmarking
    bench_frames: int = 50
    bench_cascade_scaling: bool = True
    bench_min_size: int = 24

    def __post_init__(self):
        self.validate()

    def validate(self):
        parse_kinds(self.active_kinds)
        if self.backend not in ("fixture", "cascade"):
            raise ValueError(f"backend must be 'fixture' or 'cascade', got {self.backend!r}")
        if self.split not in ("train", "test", "all"):
            raise ValueError(f"split must be train, test or all, got {self.split!r}")
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.type in (int, float):
                ok = isinstance(value, (int, float) if f.type is float else int) and not isinstance(value, bool)
            else:
                ok = isinstance(value, f.type)
            if not ok:
                raise ValueError(f"config key {f.name!r} expects {f.type.__name__}, got {value!r}")

    @property
    def annotations_path(self):
        return self.annotations or f"{self.data_dir}/annotations.jsonl"

    def kinds(self):
        return parse_kinds(self.active_kinds)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["resolved_kinds"] = [k.value for k in self.kinds()]
        return d

    def backend_object(self):
        if self.backend == "fixture":
            cfg = FixtureDetectorConfig(self.fixture_miss_rate, self.fixture_fp_rate, self.fixture_jitter,
                                        self.seed, self.fixture_visibility, self.fixture_scale_jitter)
            return FixtureBackend(cfg, self.kinds())
        if not self.cascade_models:
            raise ValueError("the cascade backend needs cascade_models = [paths to model files]")
        models = [load_cascade(p) for p in self.cascade_models]
        models = [m for m in models if m.kind in set(self.kinds())]
        return CascadeBackend(models, self.min_face, self.merge_iou)

    def estimator(self):
        return SegmentFaceDetector(
            backend=self.backend_object(),
            active_kinds=self.kinds(),
            zeta=self.zeta,
            c=self.c,
            r_factor=self.r_factor,
            delta=self.delta,
            theta=self.theta,
            downsample=self.downsample,
            clahe_tiles=(self.clahe_tiles_x, self.clahe_tiles_y),
            clahe_clip=self.clahe_clip,
            smoothing=self.smoothing,
            svm_lambda=self.svm_lambda,
            svm_epochs=self.svm_epochs,
            svm_batch_size=self.svm_batch_size,
            random_state=self.seed,
        )


def parse_override(text):
    """Parse ``key=value`` with TOML value syntax, falling back to a bare string."""
    if "=" not in text:
        raise ValueError(f"override {text!r} is not of the form key=value")
    key, raw = (s.strip() for s in text.split("=", 1))
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def load_config(path=None, overrides=()):
    """Defaults, then the TOML file at ``path``, then ``overrides`` (mapping or ``key=value`` strings)."""
    values = {}
    if path:
        with open(path, "rb") as fh:
            try:
                values.update(tomllib.load(fh))
            except tomllib.TOMLDecodeError as exc:
                raise ValueError(f"{path}: malformed config: {exc}") from exc
    items = overrides.items() if isinstance(overrides, dict) else (parse_override(o) for o in overrides)
    values.update(items)
    known = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    for name, value in list(values.items()):
        if known[name].type is float and isinstance(value, int) and not isinstance(value, bool):
            values[name] = float(value)
        if name == "active_kinds" and isinstance(value, list):
            values[name] = ",".join(str(v) for v in value)
    return PipelineConfig(**values)
