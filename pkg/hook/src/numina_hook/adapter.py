"""Capture and regeneration adapters.

Capture runs the model's denoising loop only up to the reference timestep
(truncated pre-generation), dumps the self-/cross-/pre-softmax attention of
the reference layer as ATNB files, and stops.  Regeneration runs the full
loop with a guidance field applied inside cross-attention of the guided
layers: suppression biases apply at every step, boosts and overwrites scale
with the decay schedule and are skipped once it reaches zero.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .formats import (
    KIND_CROSS,
    KIND_PRESOFTMAX,
    KIND_SELF,
    MODE_BOOST,
    MODE_OVERWRITE,
    MODE_SUPPRESS,
    read_ngdf,
    schedule_value,
    write_atnb,
)
from .model import ToyVideoDiT


@dataclass
class HookConfig:
    grid_h: int = 8
    grid_w: int = 8
    frames: int = 2
    heads: int = 2
    layers: int = 4
    steps: int = 12
    dim: int = 32
    seed: int = 0
    capture_step: int = 4       # t* in model steps
    capture_layer: int = 2      # l* in model layers
    guided_layers: Optional[list] = None   # None = every layer

    def validate(self) -> "HookConfig":
        if not 0 <= self.capture_step < self.steps:
            raise ValueError(
                f"capture step {self.capture_step} outside 0..{self.steps - 1}")
        if not 0 <= self.capture_layer < self.layers:
            raise ValueError(
                f"capture layer {self.capture_layer} outside 0..{self.layers - 1}")
        if self.guided_layers is not None:
            for l in self.guided_layers:
                if not 0 <= l < self.layers:
                    raise ValueError(f"guided layer {l} outside model depth")
        return self

    def build_model(self) -> ToyVideoDiT:
        return ToyVideoDiT(grid_h=self.grid_h, grid_w=self.grid_w,
                           frames=self.frames, heads=self.heads,
                           layers=self.layers, steps=self.steps, dim=self.dim,
                           seed=self.seed)


def capture(prompt: str, config: HookConfig, out_dir) -> dict:
    """Truncated pre-generation: run to the capture step, dump the capture
    layer's attention as self.atnb / cross.atnb / presoftmax.atnb."""
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = config.build_model()
    _, grabbed = model.run(prompt, stop_after_step=config.capture_step,
                           capture_layer=config.capture_layer,
                           capture_step=config.capture_step)
    tokens = grabbed["tokens"]
    meta = {"model": "toy-dit", "seed": config.seed}
    common = dict(grid_h=config.grid_h, grid_w=config.grid_w,
                  timestep=config.capture_step, layer=config.capture_layer,
                  meta=meta)
    write_atnb(out / "self.atnb", KIND_SELF, grabbed["self"],
               text_len=0, tokens=[], **common)
    write_atnb(out / "cross.atnb", KIND_CROSS, grabbed["cross"],
               text_len=len(tokens), tokens=tokens, **common)
    write_atnb(out / "presoftmax.atnb", KIND_PRESOFTMAX, grabbed["pre"],
               text_len=len(tokens), tokens=tokens, **common)
    return {"tokens": tokens, "paths": [out / "self.atnb", out / "cross.atnb",
                                        out / "presoftmax.atnb"]}


def apply_field_to_scores(scores, field, frame: int, t: int):
    """The NGDF mode/base/delta semantics on one [N, L] pre-softmax matrix.

    Mirrors the core pipeline's contract: overwrite first (base * delta),
    then additive biases; suppression is unscheduled; scheduled modes are
    no-ops once delta hits zero.
    """
    n = field["grid_h"] * field["grid_w"]
    if scores.shape[0] != n:
        raise ValueError(f"score matrix rows {scores.shape[0]} != grid {n}")
    delta = schedule_value(t, field["total_steps"], field["fraction"])
    out = np.array(scores, dtype=np.float64, copy=True)
    for slot, token in enumerate(field["token_indices"]):
        if token >= scores.shape[1]:
            raise ValueError(f"token index {token} outside score width")
        mode = field["modes"][frame, slot].ravel()
        base = field["bases"][frame, slot].ravel().astype(np.float64)
        if delta > 0.0:
            ov = mode == MODE_OVERWRITE
            out[ov, token] = base[ov] * delta
            bo = mode == MODE_BOOST
            out[bo, token] += base[bo] * delta
        su = mode == MODE_SUPPRESS
        out[su, token] += base[su]
    return out


def regenerate(prompt: str, field_path, config: HookConfig,
               record_cross: bool = False):
    """Full denoising run with the guidance field applied at the guided
    layers.  Returns (final latent, capture dict incl. the attention trace
    when requested)."""
    config.validate()
    field = read_ngdf(field_path)
    if (field["grid_h"], field["grid_w"]) != (config.grid_h, config.grid_w):
        raise ValueError("guidance field grid does not match the model latent")
    if field["frames"] != config.frames:
        raise ValueError("guidance field frame count does not match the model")
    guided = set(range(config.layers)) if config.guided_layers is None \
        else set(config.guided_layers)
    model = config.build_model()

    def guidance_fn(scores, t, layer, frame):
        if layer not in guided:
            return scores
        return apply_field_to_scores(scores, field, frame, t)

    model.guidance_fn = guidance_fn
    return model.run(prompt, record_cross=record_cross)


def generate(prompt: str, config: HookConfig, record_cross: bool = False):
    """Unguided full run (baseline for comparisons)."""
    config.validate()
    model = config.build_model()
    return model.run(prompt, record_cross=record_cross)
