"""Multiply-add accounting for one-stage versus two-stage alignment."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dpbm import SearchConfig, candidate_count, grid_shape_for, search_frame


@dataclass(frozen=True)
class CostParams:
    """``F`` multiply-adds per candidate, receptive fields ``D`` (one stage) and
    ``D_s`` (refinement), patch side ``k`` and image size ``H x W``."""

    D: int
    D_s: int
    k: int
    H: int
    W: int
    F: int = 1

    def __post_init__(self):
        if min(self.F, self.D, self.k, self.H, self.W) < 1 or self.D_s < 0:
            raise ValueError(f"cost parameters must be positive: {self}")
        if self.D_s > self.D:
            raise ValueError(f"D_s ({self.D_s}) must not exceed D ({self.D})")


def one_stage_cost(cp: CostParams) -> int:
    return cp.F * cp.D**2 * cp.H * cp.W


def two_stage_cost(cp: CostParams) -> int:
    # whole patches per receptive field, at least one
    coarse = max(cp.D**2 // cp.k**2, 1)
    return cp.F * (coarse + cp.D_s**2) * cp.H * cp.W


def speedup(cp: CostParams) -> Fraction:
    return Fraction(one_stage_cost(cp), two_stage_cost(cp))


def closed_form_candidates(cfg: SearchConfig, lr_shape: tuple[int, int]) -> int:
    gh, gw = grid_shape_for(lr_shape, cfg.patch_k)
    return gh * gw * candidate_count(cfg)


def audit_candidates(cfg: SearchConfig, lr_shape: tuple[int, int], seed: int = 0) -> int:
    """Distance evaluations actually performed when searching one target frame."""
    cfg.validate(lr_shape)
    rng = np.random.default_rng(seed)
    ref = rng.random(lr_shape)
    tgt = rng.random(lr_shape)
    return search_frame(ref, tgt, cfg).evaluations


def cost_table(cp: CostParams) -> list[tuple[str, int]]:
    return [
        ("one_stage", one_stage_cost(cp)),
        ("two_stage", two_stage_cost(cp)),
    ]
