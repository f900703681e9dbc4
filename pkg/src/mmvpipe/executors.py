"""Patch->patch executors: the contract and the built-in analytic ones.

An executor maps a float32 batch of shape (B, C_in, *spatial) to a batch
(B, C_out, *spatial). Built-ins (identity, affine, blur, threshold) stand
in for trained models in tests and identity pipelines; ``external`` runs a
subprocess speaking the wire protocol (see PROTOCOL.md).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .errors import ChannelMismatch

EXECUTOR_KINDS = ("identity", "blur", "affine", "threshold", "external")


@dataclass(frozen=True)
class ExecutorSpec:
    """Declaration of one patch transform.

    Kind-specific fields: ``sigma`` (blur, scalar or per-spatial-axis),
    ``gain``/``bias`` (affine), ``threshold`` (threshold), ``command`` and
    ``timeout`` (external).
    """

    kind: str = "identity"
    spatial_rank: int = 2
    in_channels: int = 1
    out_channels: int = 1
    sigma: tuple = (1.0,)
    gain: float = 1.0
    bias: float = 0.0
    threshold: float = 0.5
    command: tuple = ()
    timeout: float = 60.0

    def __post_init__(self):
        if self.kind not in EXECUTOR_KINDS:
            raise ValueError(f"unknown executor kind {self.kind!r}")
        if self.spatial_rank not in (2, 3):
            raise ValueError(f"spatial_rank must be 2 or 3, got {self.spatial_rank}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be >= 1")
        if self.kind in ("identity", "blur", "affine", "threshold"):
            if self.in_channels != self.out_channels:
                raise ValueError(f"built-in {self.kind!r} preserves channels")
        sigma = self.sigma if isinstance(self.sigma, (tuple, list)) else (self.sigma,)
        sigma = tuple(float(s) for s in sigma)
        if len(sigma) == 1:
            sigma = sigma * self.spatial_rank
        if self.kind == "blur":
            if len(sigma) != self.spatial_rank:
                raise ValueError(f"blur needs {self.spatial_rank} sigma values, got {len(sigma)}")
            if any(s <= 0 for s in sigma):
                raise ValueError(f"blur sigma must be positive, got {sigma}")
        object.__setattr__(self, "sigma", sigma)
        if self.kind == "external":
            cmd = tuple(str(c) for c in self.command)
            if not cmd:
                raise ValueError("external executor needs a non-empty command")
            object.__setattr__(self, "command", cmd)
            if self.timeout <= 0:
                raise ValueError(f"timeout must be positive, got {self.timeout}")


def _check_batch(spec: ExecutorSpec, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch)
    if batch.ndim != spec.spatial_rank + 2:
        raise ValueError(
            f"batch must be (B, C, {'x'.join(['s'] * spec.spatial_rank)}), got ndim {batch.ndim}"
        )
    if batch.shape[1] != spec.in_channels:
        raise ChannelMismatch(f"batch has {batch.shape[1]} channels, executor wants {spec.in_channels}")
    return batch.astype(np.float32, copy=False)


class BuiltinExecutor:
    """Deterministic in-process executor for the analytic kinds."""

    def __init__(self, spec: ExecutorSpec):
        if spec.kind == "external":
            raise ValueError("use mmvpipe.external for external specs")
        self.spec = spec

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        batch = _check_batch(self.spec, batch)
        kind = self.spec.kind
        if kind == "identity":
            return batch
        if kind == "affine":
            return (self.spec.gain * batch.astype(np.float64) + self.spec.bias).astype(np.float32)
        if kind == "threshold":
            return (batch >= self.spec.threshold).astype(np.float32)
        # blur: per-channel gaussian, reflect boundary (edge-repeating, so the
        # normalized kernel preserves each channel's mean), truncate 4
        sigma = (0.0, 0.0) + self.spec.sigma
        out = ndi.gaussian_filter(batch.astype(np.float64), sigma=sigma, mode="reflect", truncate=4.0)
        return out.astype(np.float32)

    def close(self) -> None:
        pass


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """The sampled, normalized kernel the blur executor applies along one axis."""
    radius = int(4.0 * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def make_executor(spec: ExecutorSpec):
    """Instantiate the executor for a spec (external kinds spawn lazily)."""
    if spec.kind == "external":
        from .external import ExternalExecutor

        return ExternalExecutor(spec)
    return BuiltinExecutor(spec)


def execute(spec: ExecutorSpec, batch: np.ndarray) -> np.ndarray:
    """One-shot convenience: build, run, and (for externals) shut down."""
    executor = make_executor(spec)
    try:
        return executor(batch)
    finally:
        executor.close()
