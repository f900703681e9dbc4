"""Pipeline configuration: restricted YAML/JSON, strict keys, dotted overrides.

The config language is YAML limited to plain scalars, maps, and lists (no
anchors, aliases, or tags), which makes JSON valid input too. Unknown keys
are rejected with a nearest-key suggestion, every numeric field is range
checked, and the effective config is echoed into the output directory so a
run is reproducible from its artifacts alone.
"""

from __future__ import annotations

import difflib
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .dataset import MODES
from .errors import ParseError, UnknownKey, ValidationError
from .executors import ExecutorSpec
from .metrics import METRIC_NAMES
from .transforms import build_chain

CACHE_DIR_ENV = "MMVPIPE_CACHE_DIR"
ECHO_NAME = "effective_config.yaml"


@dataclass(frozen=True)
class DataConfig:
    mode: str = "paired-folders"
    roots: tuple[str, ...] = ()
    costmap_root: str | None = None
    val_ratio: float | None = None
    seed: int = 0
    cache_dir: str | None = None
    epoch_fraction: float = 0.1
    reload_every: int = 5


@dataclass(frozen=True)
class InferenceConfig:
    window: tuple[int, ...] = (64, 64)
    overlap: float = 0.25
    sigma_scale: float = 0.125
    batch_size: int = 1
    workers: int = 1


@dataclass(frozen=True)
class EvalConfig:
    metrics: tuple[str, ...] = ("pearson",)
    threshold: float = 0.5
    data_range: float = 1.0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = ""
    overwrite: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    preprocess: tuple[dict, ...] = ()
    executor: ExecutorSpec = field(default_factory=ExecutorSpec)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return {
            "data": {
                "mode": self.data.mode,
                "roots": list(self.data.roots),
                "costmap_root": self.data.costmap_root,
                "val_ratio": self.data.val_ratio,
                "seed": self.data.seed,
                "cache_dir": self.data.cache_dir,
                "epoch_fraction": self.data.epoch_fraction,
                "reload_every": self.data.reload_every,
            },
            "preprocess": [dict(p) for p in self.preprocess],
            "executor": {
                "kind": self.executor.kind,
                "spatial_rank": self.executor.spatial_rank,
                "in_channels": self.executor.in_channels,
                "out_channels": self.executor.out_channels,
                "sigma": list(self.executor.sigma),
                "gain": self.executor.gain,
                "bias": self.executor.bias,
                "threshold": self.executor.threshold,
                "command": list(self.executor.command),
                "timeout": self.executor.timeout,
            },
            "inference": {
                "window": list(self.inference.window),
                "overlap": self.inference.overlap,
                "sigma_scale": self.inference.sigma_scale,
                "batch_size": self.inference.batch_size,
                "workers": self.inference.workers,
            },
            "eval": {
                "metrics": list(self.eval.metrics),
                "threshold": self.eval.threshold,
                "data_range": self.eval.data_range,
            },
            "output": {
                "directory": self.output.directory,
                "overwrite": self.output.overwrite,
            },
        }


_SECTION_KEYS = {
    "data": tuple(DataConfig.__dataclass_fields__),
    "inference": tuple(InferenceConfig.__dataclass_fields__),
    "eval": tuple(EvalConfig.__dataclass_fields__),
    "output": tuple(OutputConfig.__dataclass_fields__),
    "executor": ("kind", "spatial_rank", "in_channels", "out_channels", "sigma",
                 "gain", "bias", "threshold", "command", "timeout"),
}
_TOP_KEYS = ("data", "preprocess", "executor", "inference", "eval", "output")


def _unknown(key: str, valid, path: str = "") -> UnknownKey:
    where = f"{path}.{key}" if path else key
    close = difflib.get_close_matches(key, list(valid), n=1)
    hint = f"; did you mean {close[0]!r}?" if close else ""
    return UnknownKey(f"unknown key {where!r}{hint}")


def _check_keys(doc: dict, valid, path: str = "") -> None:
    for key in doc:
        if key not in valid:
            raise _unknown(str(key), valid, path)


def _require(cond: bool, path: str, constraint: str) -> None:
    if not cond:
        raise ValidationError(f"{path}: {constraint}")


def _restricted_yaml_load(text: str, source: str) -> dict:
    """safe_load limited to plain scalars, maps, and lists."""
    try:
        for event in yaml.parse(text):
            if isinstance(event, yaml.AliasEvent):
                raise ParseError(f"{source}: YAML aliases are not allowed")
            anchor = getattr(event, "anchor", None)
            if anchor and not isinstance(event, yaml.AliasEvent):
                raise ParseError(f"{source}: YAML anchors are not allowed")
            tag = getattr(event, "tag", None)
            if tag and tag.startswith("!"):
                raise ParseError(f"{source}: YAML tags are not allowed")
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" (line {mark.line + 1})" if mark is not None else ""
        raise ParseError(f"{source}: {getattr(exc, 'problem', exc)}{line}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: top level must be a mapping")
    return doc


def _apply_override(doc: dict, override: str) -> None:
    if "=" not in override:
        raise ParseError(f"override {override!r} must look like dotted.key=value")
    dotted, raw = override.split("=", 1)
    keys = [k for k in dotted.strip().split(".") if k]
    if not keys:
        raise ParseError(f"override {override!r} has an empty key path")
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError as exc:
        raise ParseError(f"override {override!r}: {exc}") from exc
    node = doc
    for key in keys[:-1]:
        nxt = node.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            node[key] = nxt
        node = nxt
    node[keys[-1]] = value


def _as_float(value, path: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), path, "must be a number")
    return float(value)


def _as_int(value, path: str) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), path, "must be an integer")
    return int(value)


def _as_str_list(value, path: str) -> tuple[str, ...]:
    _require(isinstance(value, list), path, "must be a list")
    return tuple(str(v) for v in value)


def _build_data(doc: dict) -> DataConfig:
    _check_keys(doc, _SECTION_KEYS["data"], "data")
    out = {}
    if "mode" in doc:
        _require(doc["mode"] in MODES, "data.mode", f"must be one of {MODES}")
        out["mode"] = doc["mode"]
    if "roots" in doc:
        out["roots"] = _as_str_list(doc["roots"], "data.roots")
    if "costmap_root" in doc and doc["costmap_root"] is not None:
        out["costmap_root"] = str(doc["costmap_root"])
    if "val_ratio" in doc and doc["val_ratio"] is not None:
        ratio = _as_float(doc["val_ratio"], "data.val_ratio")
        _require(0.0 < ratio < 1.0, "data.val_ratio", "must be in (0, 1)")
        out["val_ratio"] = ratio
    if "seed" in doc:
        out["seed"] = _as_int(doc["seed"], "data.seed")
    if "cache_dir" in doc and doc["cache_dir"] is not None:
        out["cache_dir"] = str(doc["cache_dir"])
    elif os.environ.get(CACHE_DIR_ENV):
        out["cache_dir"] = os.environ[CACHE_DIR_ENV]
    if "epoch_fraction" in doc:
        f = _as_float(doc["epoch_fraction"], "data.epoch_fraction")
        _require(0.0 < f <= 1.0, "data.epoch_fraction", "must be in (0, 1]")
        out["epoch_fraction"] = f
    if "reload_every" in doc:
        k = _as_int(doc["reload_every"], "data.reload_every")
        _require(k >= 1, "data.reload_every", "must be >= 1")
        out["reload_every"] = k
    return DataConfig(**out)


def _build_executor(doc: dict) -> ExecutorSpec:
    _check_keys(doc, _SECTION_KEYS["executor"], "executor")
    kwargs = dict(doc)
    if "sigma" in kwargs and isinstance(kwargs["sigma"], list):
        kwargs["sigma"] = tuple(kwargs["sigma"])
    if "command" in kwargs:
        kwargs["command"] = tuple(_as_str_list(kwargs["command"], "executor.command"))
    try:
        return ExecutorSpec(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"executor: {exc}") from exc


def _build_inference(doc: dict, spatial_rank: int) -> InferenceConfig:
    _check_keys(doc, _SECTION_KEYS["inference"], "inference")
    out = {}
    if "window" in doc:
        _require(isinstance(doc["window"], list), "inference.window", "must be a list of extents")
        window = tuple(_as_int(w, "inference.window") for w in doc["window"])
        _require(all(w >= 1 for w in window), "inference.window", "extents must be >= 1")
        out["window"] = window
    if "overlap" in doc:
        overlap = _as_float(doc["overlap"], "inference.overlap")
        _require(0.0 <= overlap < 1.0, "inference.overlap", "must be in [0, 1)")
        out["overlap"] = overlap
    if "sigma_scale" in doc:
        s = _as_float(doc["sigma_scale"], "inference.sigma_scale")
        _require(s > 0.0, "inference.sigma_scale", "must be positive")
        out["sigma_scale"] = s
    if "batch_size" in doc:
        b = _as_int(doc["batch_size"], "inference.batch_size")
        _require(b >= 1, "inference.batch_size", "must be >= 1")
        out["batch_size"] = b
    if "workers" in doc:
        w = _as_int(doc["workers"], "inference.workers")
        _require(w >= 1, "inference.workers", "must be >= 1")
        out["workers"] = w
    cfg = InferenceConfig(**out)
    _require(
        len(cfg.window) == spatial_rank,
        "inference.window",
        f"needs {spatial_rank} extents for a rank-{spatial_rank} executor",
    )
    return cfg


def _build_eval(doc: dict) -> EvalConfig:
    _check_keys(doc, _SECTION_KEYS["eval"], "eval")
    out = {}
    if "metrics" in doc:
        metrics = _as_str_list(doc["metrics"], "eval.metrics")
        for m in metrics:
            _require(m in METRIC_NAMES, "eval.metrics", f"{m!r} is not one of {METRIC_NAMES}")
        out["metrics"] = metrics
    if "threshold" in doc:
        out["threshold"] = _as_float(doc["threshold"], "eval.threshold")
    if "data_range" in doc:
        r = _as_float(doc["data_range"], "eval.data_range")
        _require(r > 0.0, "eval.data_range", "must be positive")
        out["data_range"] = r
    return EvalConfig(**out)


def _build_output(doc: dict) -> OutputConfig:
    _check_keys(doc, _SECTION_KEYS["output"], "output")
    out = {}
    if "directory" in doc:
        out["directory"] = str(doc["directory"])
    if "overwrite" in doc:
        _require(isinstance(doc["overwrite"], bool), "output.overwrite", "must be true or false")
        out["overwrite"] = doc["overwrite"]
    return OutputConfig(**out)


def build_config(doc: dict) -> PipelineConfig:
    """Validate a parsed document into a PipelineConfig (no filesystem writes)."""
    _check_keys(doc, _TOP_KEYS)
    for section in _TOP_KEYS:
        if section in doc and section != "preprocess":
            _require(isinstance(doc[section], dict), section, "must be a mapping")
    preprocess = doc.get("preprocess", [])
    _require(isinstance(preprocess, list), "preprocess", "must be a list of op entries")
    for i, entry in enumerate(preprocess):
        _require(isinstance(entry, dict) and "op" in entry, f"preprocess[{i}]", "needs an 'op' key")
    try:
        build_chain(preprocess)
    except ValueError as exc:
        raise ValidationError(f"preprocess: {exc}") from exc

    executor = _build_executor(doc.get("executor", {}))
    cfg = PipelineConfig(
        data=_build_data(doc.get("data", {})),
        preprocess=tuple(dict(p) for p in preprocess),
        executor=executor,
        inference=_build_inference(doc.get("inference", {}), executor.spatial_rank),
        eval=_build_eval(doc.get("eval", {})),
        output=_build_output(doc.get("output", {})),
    )
    _require(bool(cfg.output.directory), "output.directory", "is required")
    for root in cfg.data.roots:
        _require(Path(root).exists(), "data.roots", f"path {root} does not exist")
    if cfg.data.costmap_root is not None:
        _require(
            Path(cfg.data.costmap_root).exists(),
            "data.costmap_root",
            f"path {cfg.data.costmap_root} does not exist",
        )
    return cfg


def echo_config(cfg: PipelineConfig) -> Path:
    """Write the canonical effective config into the output directory."""
    out_dir = Path(cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / ECHO_NAME
    text = yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def load_config(path, overrides=()) -> PipelineConfig:
    """Parse the file, apply dotted overrides in order, validate, and echo."""
    source = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config {source}: {exc}") from exc
    doc = _restricted_yaml_load(text, source)
    for override in overrides:
        _apply_override(doc, override)
    cfg = build_config(doc)
    echo_config(cfg)
    return cfg
