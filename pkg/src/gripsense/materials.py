"""Material parameter table for the simulated container contents.

The five content classes share one container (an opaque bottle, 50 g).
Per-class acoustic parameters are simulator calibration values, chosen so
that classes are spectrally separable: impact centroids are spaced at
least 400 Hz apart and particle counts differ enough that event rates
rank the materials unambiguously. They are not measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

CONTAINER_MASS = 0.05  # kg, opaque bottle without contents

# Canonical class order. Classifier logits, posteriors, and confusion
# matrices all index materials in this order.
MATERIAL_CLASSES = ("rice", "cereal", "gummies", "vitamins", "empty")


@dataclass(frozen=True)
class MaterialParams:
    """Physical and acoustic parameters of one content class.

    total_mass is the gripped mass in kg (container plus contents), so it
    is positive even for the empty class. impact_centroid_hz is the
    dominant spectral band of a single particle impact; for the empty
    class it is a placeholder that is never sounded (particle_count = 0).
    """

    name: str
    total_mass: float           # kg, container + contents
    particle_count: int
    impact_centroid_hz: float   # Hz
    impact_bandwidth_hz: float  # Hz, uniform jitter width around centroid
    impact_decay_s: float       # s, exponential amplitude decay constant
    restitution: float          # [0, 1], relative amplitude of the rebound

    def __post_init__(self):
        if not self.total_mass > 0:
            raise ValueError(f"total_mass must be positive, got {self.total_mass}")
        if self.particle_count < 0:
            raise ValueError("particle_count must be >= 0")
        if self.particle_count == 0 and self.name != "empty":
            raise ValueError("only the empty class may have zero particles")
        if not 0 < self.impact_centroid_hz:
            raise ValueError("impact_centroid_hz must be positive")
        if not self.impact_decay_s > 0:
            raise ValueError("impact_decay_s must be positive")
        if not 0 <= self.restitution <= 1:
            raise ValueError("restitution must be in [0, 1]")


_TABLE = {
    # 1 cup of each material; masses are plausible for the volume, counts
    # set the impact event rate, centroids give each class its own band.
    "rice": MaterialParams("rice", CONTAINER_MASS + 0.185, 2000, 4200.0, 1200.0, 0.010, 0.30),
    "cereal": MaterialParams("cereal", CONTAINER_MASS + 0.030, 400, 1600.0, 500.0, 0.015, 0.45),
    "gummies": MaterialParams("gummies", CONTAINER_MASS + 0.180, 30, 800.0, 300.0, 0.008, 0.25),
    "vitamins": MaterialParams("vitamins", CONTAINER_MASS + 0.120, 120, 2600.0, 700.0, 0.012, 0.55),
    "empty": MaterialParams("empty", CONTAINER_MASS, 0, 2100.0, 400.0, 0.010, 0.50),
}


def material_table() -> dict[str, MaterialParams]:
    """Return the five-class material table keyed by class label."""
    return dict(_TABLE)
