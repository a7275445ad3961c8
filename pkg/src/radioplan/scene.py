"""Indoor scene model: room, material-tagged scatterer boxes, active devices.

Coordinates: x in [0, Lx], y in [0, Ly], z in [0, H], with the receiving
aperture mounted at the ceiling plane z = H and devices near the floor.
Rasterized images use axis 0 for x and axis 1 for y; pixel (i, j) covers the
square [i*Lx/R, (i+1)*Lx/R) x [j*Ly/R, (j+1)*Ly/R) and is painted from its
center point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    EmptySceneError,
    OutOfBoundsError,
    OverlapError,
    PlacementError,
    ResolutionError,
)

BACKGROUND_VALUE = 255
SCATTERER_VALUE = 0


@dataclass(frozen=True)
class Material:
    """Bulk electromagnetic parameters of a reflecting surface."""

    conductivity: float  # S/m
    relative_permittivity: float
    relative_permeability: float = 1.0

    def __post_init__(self) -> None:
        if self.conductivity < 0:
            raise ValueError("conductivity must be >= 0 S/m")
        if self.relative_permittivity < 1:
            raise ValueError("relative permittivity must be >= 1")
        if self.relative_permeability <= 0:
            raise ValueError("relative permeability must be > 0")


# Stock materials for metallic clutter in a brick-walled room.
METAL = Material(conductivity=19444.0, relative_permittivity=1.0, relative_permeability=20.0)
BRICK = Material(conductivity=0.078, relative_permittivity=4.0, relative_permeability=1.0)
VACUUM = Material(conductivity=0.0, relative_permittivity=1.0, relative_permeability=1.0)

MATERIALS = {"metal": METAL, "brick": BRICK, "vacuum": VACUUM}


@dataclass(frozen=True)
class ScattererBox:
    """Axis-aligned box extruded from the floor up to `height`."""

    center_xy: tuple[float, float]  # m
    extent_xy: tuple[float, float]  # full widths, m
    height: float  # m
    material: Material = METAL

    def __post_init__(self) -> None:
        if min(self.extent_xy) <= 0:
            raise ValueError("box extents must be > 0")
        if self.height <= 0:
            raise ValueError("box height must be > 0")

    def footprint(self) -> tuple[float, float, float, float]:
        """Footprint bounds (x0, x1, y0, y1) in meters."""
        cx, cy = self.center_xy
        ex, ey = self.extent_xy
        return (cx - ex / 2.0, cx + ex / 2.0, cy - ey / 2.0, cy + ey / 2.0)


@dataclass(frozen=True)
class Device:
    """Active transmitter at a fixed position, radiating a unit-modulus symbol."""

    position: tuple[float, float, float]  # (x, y, z) m
    tx_power_dbm: float = 20.0
    symbol: complex = 1.0 + 0.0j

    def __post_init__(self) -> None:
        if abs(abs(self.symbol) - 1.0) > 1e-9:
            raise ValueError("transmit symbol must have unit modulus")


@dataclass(frozen=True)
class Scene:
    """Room, wall material, scatterers, and active devices for one snapshot."""

    room_extent: tuple[float, float, float]  # (Lx, Ly, H) m
    wall_material: Material = BRICK
    scatterers: tuple[ScattererBox, ...] = field(default_factory=tuple)
    devices: tuple[Device, ...] = field(default_factory=tuple)
    carrier_frequency: float = 3.5e9  # Hz

    def __post_init__(self) -> None:
        if min(self.room_extent) <= 0:
            raise ValueError("room extent must be positive")
        if self.carrier_frequency <= 0:
            raise ValueError("carrier frequency must be > 0")
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        object.__setattr__(self, "devices", tuple(self.devices))


def _footprints_overlap(a: ScattererBox, b: ScattererBox) -> bool:
    ax0, ax1, ay0, ay1 = a.footprint()
    bx0, bx1, by0, by1 = b.footprint()
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


def validate_scene(scene: Scene, *, require_devices: bool = True) -> None:
    """Check cross-object invariants; raises on the first violation.

    Set require_devices=False to validate a device-less scenario template.
    """
    lx, ly, h = scene.room_extent
    if require_devices and len(scene.devices) == 0:
        raise EmptySceneError("scene has no active devices")
    for i, box in enumerate(scene.scatterers):
        x0, x1, y0, y1 = box.footprint()
        if not (0.0 < x0 and x1 < lx and 0.0 < y0 and y1 < ly):
            raise OutOfBoundsError(f"scatterer {i} footprint leaves the room")
        if box.height >= h:
            raise OutOfBoundsError(f"scatterer {i} reaches the ceiling")
    for i, a in enumerate(scene.scatterers):
        for j in range(i + 1, len(scene.scatterers)):
            if _footprints_overlap(a, scene.scatterers[j]):
                raise OverlapError(f"scatterers {i} and {j} overlap")
    for i, dev in enumerate(scene.devices):
        x, y, z = dev.position
        if not (0.0 <= x <= lx and 0.0 <= y <= ly and 0.0 <= z <= h):
            raise OutOfBoundsError(f"device {i} lies outside the room")


def rasterize_floorplan(scene: Scene, resolution: int) -> np.ndarray:
    """Rasterize scatterer footprints to an RGB uint8 image.

    Background pixels are 255, scatterer pixels 0, channels identical. A
    pixel belongs to a box when its center point does, so the painted area
    tracks the true footprint area to within one pixel ring per box.
    """
    if resolution < 8:
        raise ResolutionError(f"resolution {resolution} < 8 pixels per side")
    lx, ly, _ = scene.room_extent
    xc = (np.arange(resolution) + 0.5) * (lx / resolution)
    yc = (np.arange(resolution) + 0.5) * (ly / resolution)
    mask = np.zeros((resolution, resolution), dtype=bool)
    for box in scene.scatterers:
        x0, x1, y0, y1 = box.footprint()
        mask |= ((xc >= x0) & (xc <= x1))[:, None] & ((yc >= y0) & (yc <= y1))[None, :]
    img = np.full((resolution, resolution, 3), BACKGROUND_VALUE, dtype=np.uint8)
    img[mask] = SCATTERER_VALUE
    return img


def sample_devices(
    scene_template: Scene,
    k_a: int,
    seed: int,
    *,
    device_height: float = 0.0,
    tx_power_dbm: float = 20.0,
    max_tries: int = 20000,
) -> Scene:
    """Place k_a devices uniformly in free floor space (outside footprints).

    Deterministic per seed; replaces any devices already on the template.
    """
    if k_a < 1:
        raise ValueError("k_a must be >= 1")
    lx, ly, h = scene_template.room_extent
    if not 0.0 <= device_height <= h:
        raise ValueError("device height must lie inside the room")
    rng = np.random.default_rng(seed)
    footprints = [box.footprint() for box in scene_template.scatterers]
    placed: list[Device] = []
    tries = 0
    while len(placed) < k_a:
        if tries >= max_tries:
            raise PlacementError(
                f"placed {len(placed)}/{k_a} devices after {max_tries} draws"
            )
        tries += 1
        x = rng.uniform(0.0, lx)
        y = rng.uniform(0.0, ly)
        if any(x0 <= x <= x1 and y0 <= y <= y1 for x0, x1, y0, y1 in footprints):
            continue
        placed.append(
            Device(position=(x, y, device_height), tx_power_dbm=tx_power_dbm)
        )
    return replace(scene_template, devices=tuple(placed))


def _box(cx: float, cy: float, ex: float, ey: float, height: float = 2.0,
         material: Material = METAL) -> ScattererBox:
    return ScattererBox(center_xy=(cx, cy), extent_xy=(ex, ey), height=height,
                        material=material)


def scenario_1() -> Scene:
    """First stock layout: five metallic boxes in a 10.34 m square room."""
    return Scene(
        room_extent=(10.34, 10.34, 8.0),
        wall_material=BRICK,
        scatterers=(
            _box(2.10, 2.10, 1.30, 1.30),
            _box(2.00, 7.90, 1.20, 2.20),
            _box(5.20, 5.10, 1.70, 1.70),
            _box(8.30, 2.60, 1.40, 2.10),
            _box(8.10, 8.20, 2.10, 1.20),
        ),
        devices=(),
        carrier_frequency=3.5e9,
    )


def scenario_2() -> Scene:
    """Second stock layout: six boxes, elongated wall-like pieces included."""
    return Scene(
        room_extent=(10.34, 10.34, 8.0),
        wall_material=BRICK,
        scatterers=(
            _box(1.80, 5.20, 1.00, 3.10),
            _box(5.10, 8.60, 2.60, 1.00),
            _box(5.20, 1.60, 2.90, 1.10),
            _box(8.70, 5.30, 0.90, 2.70),
            _box(5.10, 5.10, 1.40, 1.40),
            _box(8.40, 8.50, 1.10, 1.10),
        ),
        devices=(),
        carrier_frequency=3.5e9,
    )


SCENARIOS = {"scenario1": scenario_1, "scenario2": scenario_2}


def random_scene(
    seed: int,
    k_p: int = 5,
    *,
    room_extent: tuple[float, float, float] = (10.34, 10.34, 8.0),
    extent_range: tuple[float, float] = (0.8, 2.4),
    min_gap: float = 0.5,
    wall_margin: float = 0.4,
    scatterer_height: float = 2.0,
    carrier_frequency: float = 3.5e9,
    max_tries: int = 20000,
) -> Scene:
    """Draw a random device-less scene with pairwise-separated boxes."""
    rng = np.random.default_rng(seed)
    lx, ly, _ = room_extent
    boxes: list[ScattererBox] = []
    tries = 0
    while len(boxes) < k_p:
        if tries >= max_tries:
            raise PlacementError(f"placed {len(boxes)}/{k_p} boxes after {max_tries} draws")
        tries += 1
        ex = rng.uniform(*extent_range)
        ey = rng.uniform(*extent_range)
        cx = rng.uniform(wall_margin + ex / 2, lx - wall_margin - ex / 2)
        cy = rng.uniform(wall_margin + ey / 2, ly - wall_margin - ey / 2)
        cand = _box(cx, cy, ex, ey, height=scatterer_height)
        if all(_rect_distance(cand, other) >= min_gap for other in boxes):
            boxes.append(cand)
    return Scene(
        room_extent=room_extent,
        wall_material=BRICK,
        scatterers=tuple(boxes),
        devices=(),
        carrier_frequency=carrier_frequency,
    )


def _rect_distance(a: ScattererBox, b: ScattererBox) -> float:
    ax0, ax1, ay0, ay1 = a.footprint()
    bx0, bx1, by0, by1 = b.footprint()
    dx = max(bx0 - ax1, ax0 - bx1, 0.0)
    dy = max(by0 - ay1, ay0 - by1, 0.0)
    return math.hypot(dx, dy)
