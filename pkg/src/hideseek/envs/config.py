"""Environment configuration and the randomization levels of the training ablation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Tuple

VARIANTS = (
    "hide_and_seek", "quadrant", "hns_food", "dynamic_food", "food_protection",
    "object_counting", "lock_and_return", "sequential_lock", "blueprint", "shelter",
    "chase",
)


@dataclass(frozen=True)
class RandomizationLevel:
    """One row of the randomization ablation: each axis fixed or random."""
    team_size: bool = True
    box_count: bool = True
    box_shape: bool = True
    initial_location: bool = True
    walls: bool = True


# Rows in decreasing randomization: team 1-3 / 1, boxes 3-9 / 7, shape, location, walls.
RANDOMIZATION_LEVELS = (
    RandomizationLevel(True, True, True, True, True),
    RandomizationLevel(False, True, True, True, True),
    RandomizationLevel(False, False, False, True, True),
    RandomizationLevel(True, True, True, True, False),
    RandomizationLevel(False, True, True, True, False),
    RandomizationLevel(False, False, False, True, False),
    RandomizationLevel(False, False, False, False, False),
)


@dataclass(frozen=True)
class EnvConfig:
    variant: str = "hide_and_seek"
    n_hiders: Tuple[int, int] = (1, 3)
    n_seekers: Tuple[int, int] = (1, 3)
    n_boxes: Tuple[int, int] = (3, 9)
    min_elongated: int = 3
    n_ramps: int = 2
    randomization_level: int = 0
    horizon: int = 240
    prep_fraction: float = 0.4
    bounds: float = 18.0
    seed: int = 0
    n_rooms: Tuple[int, int] = (2, 5)
    # Restrict initial placement to the lower-left quarter of the arena.
    quarter_spawn: bool = False
    # Teams driven by a scripted random walk instead of the policy.
    scripted_hiders: bool = False
    scripted_seekers: bool = False
    exterior_walls: bool = True
    n_pellets: int = 0
    n_sites: Tuple[int, int] = (1, 4)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        for name in ("n_hiders", "n_seekers", "n_boxes", "n_rooms", "n_sites"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"bad range {name}={lo, hi}")
        if not 0.0 <= self.prep_fraction < 1.0:
            raise ValueError("prep_fraction must lie in [0, 1)")
        if self.horizon <= 0 or self.bounds <= 0:
            raise ValueError("horizon and bounds must be positive")
        if not 0 <= self.randomization_level < len(RANDOMIZATION_LEVELS):
            raise ValueError("randomization_level out of range")

    @property
    def level(self) -> RandomizationLevel:
        return RANDOMIZATION_LEVELS[self.randomization_level]

    @property
    def prep_steps(self) -> int:
        return int(round(self.prep_fraction * self.horizon))

    def replace(self, **kw) -> "EnvConfig":
        return dataclasses.replace(self, **kw)

    @classmethod
    def preset(cls, variant: str, **overrides) -> "EnvConfig":
        base = dict(PRESETS.get(variant, {}))
        base.update(overrides)
        return cls(variant=variant, **base)


PRESETS = {
    "hide_and_seek": {},
    "quadrant": dict(n_hiders=(2, 2), n_seekers=(2, 2), n_boxes=(2, 2), min_elongated=0,
                     n_ramps=1),
    "hns_food": dict(n_pellets=5),
    "dynamic_food": dict(n_hiders=(3, 3), n_seekers=(2, 2), n_boxes=(8, 8), min_elongated=8,
                         n_ramps=0, n_pellets=1, exterior_walls=False),
    "food_protection": dict(n_hiders=(3, 3), n_seekers=(2, 2), n_boxes=(7, 7), min_elongated=7,
                            n_ramps=0, n_pellets=50, horizon=200, prep_fraction=0.5),
    "object_counting": dict(n_hiders=(1, 1), n_seekers=(0, 0), n_boxes=(6, 6), min_elongated=0,
                            n_ramps=0, horizon=120, prep_fraction=0.0),
    "lock_and_return": dict(n_hiders=(1, 1), n_seekers=(0, 0), n_boxes=(1, 1), min_elongated=0,
                            n_ramps=0, horizon=120, prep_fraction=0.0, n_rooms=(6, 6)),
    "sequential_lock": dict(n_hiders=(1, 1), n_seekers=(0, 0), n_boxes=(4, 4), min_elongated=0,
                            n_ramps=3, horizon=120, prep_fraction=0.0, n_rooms=(3, 3)),
    "blueprint": dict(n_hiders=(1, 1), n_seekers=(0, 0), n_boxes=(8, 8), min_elongated=0,
                      n_ramps=0, horizon=240, prep_fraction=0.0, n_sites=(1, 4)),
    "shelter": dict(n_hiders=(1, 1), n_seekers=(0, 0), n_boxes=(8, 8), min_elongated=3,
                    n_ramps=0, horizon=150, prep_fraction=0.0),
    # Desk-scale learning check: one learning seeker chasing a wandering hider.
    "chase": dict(n_hiders=(1, 1), n_seekers=(1, 1), n_boxes=(0, 0), min_elongated=0,
                  n_ramps=0, horizon=60, prep_fraction=0.0, scripted_hiders=True,
                  randomization_level=3),
}


def parse_range(value) -> Tuple[int, int]:
    if isinstance(value, (tuple, list)):
        return int(value[0]), int(value[1])
    text = str(value)
    if "-" in text:
        lo, hi = text.split("-", 1)
        return int(lo), int(hi)
    return int(text), int(text)


def config_from_mapping(mapping: dict, variant: Optional[str] = None) -> EnvConfig:
    """Build an EnvConfig from flat ``env.*`` style keys (already stripped)."""
    variant = variant or mapping.get("variant", "hide_and_seek")
    fields = {f.name: f for f in dataclasses.fields(EnvConfig)}
    kw = {}
    for key, value in mapping.items():
        if key == "variant" or key not in fields:
            continue
        default = fields[key].default
        if isinstance(default, tuple):
            kw[key] = parse_range(value)
        elif isinstance(default, bool):
            kw[key] = str(value).lower() in ("1", "true", "yes")
        elif isinstance(default, int):
            kw[key] = int(value)
        elif isinstance(default, float):
            kw[key] = float(value)
        else:
            kw[key] = value
    return EnvConfig.preset(variant, **kw)
