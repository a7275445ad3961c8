"""File formats for signals, magnitude grids, linear maps, scenes, and images.

Binary layouts (little-endian, fixed):

* signal grid:    header <u32 n_x> <u32 n_y> <f64 frequency_hz> <f64 sigma2>
                  <u32 s_count>, payload n_x*n_y complex values as interleaved
                  real/imag float64, row-major.
* magnitude grid: same header, payload n_x*n_y float64, row-major.
* linear map:     header <u64 P> <f64 alpha> <u64 T>, payload P*P float64
                  weights, row-major; P must be a perfect square.

Scene files are TOML with the fields room {lx, ly, h}, walls {material},
a materials table, scatterers [{cx, cy, ex, ey, height, material}],
devices [{x, y, z, power_dbm}], and frequency_hz.
"""

from __future__ import annotations

import json
import struct
import sys
from pathlib import Path

import numpy as np
from PIL import Image

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ManifestError
from .lis import ReceivedSignal, half_wavelength_spacing
from .reconstruct import LinearMap
from .scene import Device, Material, Scene, ScattererBox

_GRID_HEADER = struct.Struct("<IIddI")
_LINMAP_HEADER = struct.Struct("<QdQ")


def save_signal(path, signal: ReceivedSignal) -> None:
    values = np.ascontiguousarray(signal.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_GRID_HEADER.pack(values.shape[0], values.shape[1],
                                   signal.frequency, signal.sigma2, signal.s_count))
        fh.write(values.tobytes())


def load_signal(path, spacing: float | None = None) -> ReceivedSignal:
    """Read a signal grid; spacing defaults to half a wavelength at its carrier."""
    with open(path, "rb") as fh:
        n_x, n_y, frequency, sigma2, s_count = _GRID_HEADER.unpack(
            fh.read(_GRID_HEADER.size)
        )
        payload = fh.read(n_x * n_y * 16)
    values = np.frombuffer(payload, dtype="<c16").reshape(n_x, n_y).astype(complex)
    if spacing is None:
        spacing = half_wavelength_spacing(frequency)
    return ReceivedSignal(values=values, sigma2=sigma2, s_count=s_count,
                          frequency=frequency, spacing=spacing)


def save_magnitude(path, magnitude: np.ndarray, frequency: float,
                   sigma2: float = 0.0, s_count: int = 1) -> None:
    grid = np.ascontiguousarray(magnitude, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_GRID_HEADER.pack(grid.shape[0], grid.shape[1],
                                   frequency, sigma2, s_count))
        fh.write(grid.tobytes())


def load_magnitude(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        n_x, n_y, frequency, sigma2, s_count = _GRID_HEADER.unpack(
            fh.read(_GRID_HEADER.size)
        )
        payload = fh.read(n_x * n_y * 8)
    grid = np.frombuffer(payload, dtype="<f8").reshape(n_x, n_y).copy()
    return grid, {"frequency": frequency, "sigma2": sigma2, "s_count": s_count}


def save_linear_map(path, linear_map: LinearMap) -> None:
    weights = np.ascontiguousarray(linear_map.weights, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_LINMAP_HEADER.pack(weights.shape[0], linear_map.ridge_alpha,
                                     linear_map.training_count))
        fh.write(weights.tobytes())


def load_linear_map(path) -> LinearMap:
    with open(path, "rb") as fh:
        p, alpha, t = _LINMAP_HEADER.unpack(fh.read(_LINMAP_HEADER.size))
        payload = fh.read(p * p * 8)
    side = int(round(p**0.5))
    if side * side != p:
        raise ValueError(f"weight count {p} is not a square working resolution")
    weights = np.frombuffer(payload, dtype="<f8").reshape(p, p).copy()
    return LinearMap(weights=weights, working_resolution=side,
                     ridge_alpha=alpha, training_count=t)


def save_image(path, image: np.ndarray) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path, format="PNG")


def load_image(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


# --- scene files -----------------------------------------------------------

def scene_to_dict(scene: Scene) -> dict:
    materials: dict[str, Material] = {}

    def material_name(mat: Material) -> str:
        for name, known in materials.items():
            if known == mat:
                return name
        if mat == Material(19444.0, 1.0, 20.0):
            name = "metal"
        elif mat == Material(0.078, 4.0, 1.0):
            name = "brick"
        elif mat == Material(0.0, 1.0, 1.0):
            name = "vacuum"
        else:
            name = f"material{len(materials)}"
        materials[name] = mat
        return name

    wall_name = material_name(scene.wall_material)
    scatterers = []
    for box in scene.scatterers:
        scatterers.append({
            "cx": box.center_xy[0], "cy": box.center_xy[1],
            "ex": box.extent_xy[0], "ey": box.extent_xy[1],
            "height": box.height, "material": material_name(box.material),
        })
    devices = [
        {"x": dev.position[0], "y": dev.position[1], "z": dev.position[2],
         "power_dbm": dev.tx_power_dbm}
        for dev in scene.devices
    ]
    return {
        "frequency_hz": scene.carrier_frequency,
        "room": {"lx": scene.room_extent[0], "ly": scene.room_extent[1],
                 "h": scene.room_extent[2]},
        "walls": {"material": wall_name},
        "materials": {
            name: {
                "conductivity": mat.conductivity,
                "relative_permittivity": mat.relative_permittivity,
                "relative_permeability": mat.relative_permeability,
            }
            for name, mat in materials.items()
        },
        "scatterers": scatterers,
        "devices": devices,
    }


def scene_from_dict(data: dict) -> Scene:
    materials = {
        name: Material(
            conductivity=entry["conductivity"],
            relative_permittivity=entry["relative_permittivity"],
            relative_permeability=entry.get("relative_permeability", 1.0),
        )
        for name, entry in data.get("materials", {}).items()
    }
    room = data["room"]
    scatterers = tuple(
        ScattererBox(
            center_xy=(entry["cx"], entry["cy"]),
            extent_xy=(entry["ex"], entry["ey"]),
            height=entry["height"],
            material=materials[entry["material"]],
        )
        for entry in data.get("scatterers", [])
    )
    devices = tuple(
        Device(position=(entry["x"], entry["y"], entry["z"]),
               tx_power_dbm=entry.get("power_dbm", 20.0))
        for entry in data.get("devices", [])
    )
    return Scene(
        room_extent=(room["lx"], room["ly"], room["h"]),
        wall_material=materials[data["walls"]["material"]],
        scatterers=scatterers,
        devices=devices,
        carrier_frequency=data["frequency_hz"],
    )


def load_scene(path) -> Scene:
    with open(path, "rb") as fh:
        return scene_from_dict(tomllib.load(fh))


def _toml_value(value) -> str:
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def save_scene(path, scene: Scene) -> None:
    """Emit the scene as TOML (fixed schema; see module docstring)."""
    data = scene_to_dict(scene)
    lines = [f"frequency_hz = {_toml_value(data['frequency_hz'])}", ""]
    lines += ["[room]"] + [f"{k} = {_toml_value(v)}" for k, v in data["room"].items()] + [""]
    lines += ["[walls]", f"material = {_toml_value(data['walls']['material'])}", ""]
    for name, entry in data["materials"].items():
        lines += [f"[materials.{name}]"]
        lines += [f"{k} = {_toml_value(v)}" for k, v in entry.items()]
        lines += [""]
    for entry in data["scatterers"]:
        lines += ["[[scatterers]]"]
        lines += [f"{k} = {_toml_value(v)}" for k, v in entry.items()]
        lines += [""]
    for entry in data["devices"]:
        lines += ["[[devices]]"]
        lines += [f"{k} = {_toml_value(v)}" for k, v in entry.items()]
        lines += [""]
    Path(path).write_text("\n".join(lines), encoding="utf-8")


# --- manifests ---------------------------------------------------------------

def save_manifest(path, manifest_dict: dict) -> None:
    Path(path).write_text(
        json.dumps(manifest_dict, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_manifest(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"malformed manifest {path}: {exc}") from exc
    if "records" not in data:
        raise ManifestError(f"manifest {path} has no records")
    return data
