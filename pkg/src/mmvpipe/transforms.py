"""Deterministic preprocessing chains shared by the cache and the run path.

A chain is configured as a list of ``{"op": name, ...params}`` dicts; the
serialized form feeds the cache content key, so two configs that differ in
any parameter never collide.
"""

from __future__ import annotations

import json

from .ndimage import NDImage, ensure_axes
from .normalization import NormSpec, apply_norm
from .stain import StainParams, macenko_normalize

_NORM_KEYS = ("p_lo", "p_hi", "out_lo", "out_hi", "center_fraction")


def _make_norm(kind: str, params: dict):
    spec = NormSpec(kind=kind, **{k: params[k] for k in _NORM_KEYS if k in params})
    return lambda img: apply_norm(img, spec)


def _make_stain(params: dict):
    sp = StainParams(**{k: params[k] for k in ("io", "alpha", "beta") if k in params})
    return lambda img: macenko_normalize(img, sp)


def _make_ensure_axes(params: dict):
    axes = params["axes"]
    return lambda img: ensure_axes(img, axes)


def _make_cast(params: dict):
    dtype = params.get("dtype", "f32")
    if dtype != "f32":
        raise ValueError(f"cast supports only f32, got {dtype!r}")
    return lambda img: img.as_f32()


_BUILDERS = {
    "percentile_norm": lambda p: _make_norm("percentile", p),
    "standard_norm": lambda p: _make_norm("standard", p),
    "center_norm": lambda p: _make_norm("center", p),
    "stain_norm": _make_stain,
    "ensure_axes": _make_ensure_axes,
    "cast": _make_cast,
}

TRANSFORM_OPS = tuple(sorted(_BUILDERS))


def build_chain(config: list[dict]) -> list[tuple[str, "callable"]]:
    """Compile a transform config into [(name, fn)] pairs, validating names."""
    chain = []
    for entry in config:
        entry = dict(entry)
        name = entry.pop("op", None)
        if name not in _BUILDERS:
            raise ValueError(f"unknown transform op {name!r}; known: {TRANSFORM_OPS}")
        chain.append((name, _BUILDERS[name](entry)))
    return chain


def apply_chain(img: NDImage, chain) -> NDImage:
    for _, fn in chain:
        img = fn(img)
    return img


def canonical_config_bytes(config: list[dict]) -> bytes:
    """Stable serialization of a transform config for content keys."""
    return json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
