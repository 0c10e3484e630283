"""Combined map corruption: semantic replacement, occupancy flips and RGB Gaussian noise.

All random draws are made at every level, one uniform per cell, so the set
of corrupted cells at a lower fraction is a subset of the set at a higher
fraction for the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridmap import NUM_CLASSES, MapBundle

LEVELS = (0.0, 0.05, 0.10, 0.20, 0.30)


@dataclass(frozen=True)
class NoiseSpec:
    sem_fraction: float = 0.0
    occ_fraction: float = 0.0
    rgb_sigma: float = 0.0  # 8-bit units
    seed: int = 0

    def __post_init__(self):
        for name in ("sem_fraction", "occ_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.rgb_sigma < 0:
            raise ValueError("rgb_sigma must be >= 0")

    @classmethod
    def combined(cls, level: float, seed: int = 0) -> "NoiseSpec":
        """One level drives all three corruptions; sigma is the level times the 8-bit range."""
        return cls(level, level, level * 255.0, seed)

    @property
    def is_identity(self) -> bool:
        return self.sem_fraction == 0.0 and self.occ_fraction == 0.0 and self.rgb_sigma == 0.0


def degrade_maps(bundle: MapBundle, spec: NoiseSpec) -> MapBundle:
    if spec.is_identity:
        return bundle.with_maps(rgb=bundle.rgb.copy(), occ=bundle.occ.copy(), sem=bundle.sem.copy())
    rng = np.random.default_rng(spec.seed)
    shape = bundle.meta.shape
    u_sem = rng.random(shape)
    new_class = rng.integers(0, NUM_CLASSES, size=shape)
    u_occ = rng.random(shape)
    z = rng.standard_normal(shape + (3,))
    sem = np.where(u_sem < spec.sem_fraction, new_class, bundle.sem).astype(np.uint8)
    occ = np.where(u_occ < spec.occ_fraction, 1 - bundle.occ, bundle.occ).astype(np.uint8)
    rgb = np.clip(np.rint(bundle.rgb + spec.rgb_sigma * z), 0, 255).astype(np.uint8)
    return bundle.with_maps(rgb=rgb, occ=occ, sem=sem)
