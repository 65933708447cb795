"""2.5-D rigid-body world: kinematics, grab/lock, elevation, sensing."""

from hideseek.sim.bodies import (
    Body,
    Elevation,
    EpisodeOver,
    Kind,
    SimError,
    UnknownAgent,
    Vec2,
    WorldState,
)
from hideseek.sim.physics import (
    DEFAULT_PHYSICS,
    ActionTriple,
    PhysicsConfig,
    attempt_grab,
    attempt_lock,
    bin_value,
    release,
    step,
    update_elevation,
)
from hideseek.sim.sensing import (
    LIDAR_RANGE,
    N_LIDAR,
    VISION_HALF_ANGLE,
    RayHit,
    compute_lidar,
    compute_visibility,
    is_visible,
    raycast,
)
from hideseek.sim import snapshot

__all__ = [
    "ActionTriple", "Body", "DEFAULT_PHYSICS", "Elevation", "EpisodeOver", "Kind",
    "LIDAR_RANGE", "N_LIDAR", "PhysicsConfig", "RayHit", "SimError", "UnknownAgent",
    "VISION_HALF_ANGLE", "Vec2", "WorldState", "attempt_grab", "attempt_lock", "bin_value",
    "compute_lidar", "compute_visibility", "is_visible", "raycast", "release", "snapshot",
    "step", "update_elevation",
]
