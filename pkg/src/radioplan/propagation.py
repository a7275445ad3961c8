"""Specular multipath field at the ceiling aperture via the image-source method.

Every route from a device to the aperture is either the direct segment or a
chain of mirror reflections off planar reflectors: the four walls, the floor,
and the faces of the scatterer boxes. A route is represented once per device
as a `RayPath` whose arrays are evaluated at every aperture element, so the
hot loops stay inside numpy. Scatterer boxes are opaque occluders; the
ceiling is excluded because the aperture occupies it.

The complex field of one route at one element is

    A * x * (prod_b Gamma_b) * exp(-j*2*pi*d/lambda) / d

with d the unfolded (image-source) path length, Gamma_b the per-bounce
Fresnel coefficient at that element's incidence angle, x the device symbol,
and A = sqrt(Z0 * P / (2*pi)) the peak field of an isotropic source of power
P at 1 m.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateGeometryError
from .scene import Device, Material, Scene

EPSILON_0 = 8.8541878128e-12  # vacuum permittivity, F/m
SPEED_OF_LIGHT = 299792458.0  # m/s
FREE_SPACE_IMPEDANCE = 120.0 * np.pi  # ohm

_GEOM_EPS = 1e-9  # m; side tests, mirror degeneracy, box shrink for occlusion


def fresnel_reflection(material: Material, incidence_angle, frequency: float):
    """Perpendicular-polarization reflection coefficient, air onto a lossy medium.

    The medium is summarized by its complex relative permittivity
    eps_c = eps_r - j*sigma/(2*pi*f*eps0); the transmitted-cosine term of the
    Fresnel expression becomes sqrt(eps_c - sin^2 theta). Accepts a scalar or
    array angle in radians, 0 <= theta < pi/2.
    """
    theta = np.asarray(incidence_angle, dtype=float)
    if np.any(theta < 0.0) or np.any(theta >= np.pi / 2):
        raise ValueError("incidence angle must lie in [0, pi/2)")
    if frequency <= 0:
        raise ValueError("frequency must be > 0")
    eps_c = material.relative_permittivity - 1j * material.conductivity / (
        2.0 * np.pi * frequency * EPSILON_0
    )
    cos_i = np.cos(theta)
    root = np.sqrt(eps_c - np.sin(theta) ** 2)
    coeff = (cos_i - root) / (cos_i + root)
    if np.isscalar(incidence_angle):
        return complex(coeff)
    return coeff


@dataclass(frozen=True)
class RayPath:
    """One specular route from a device, evaluated at every aperture element.

    `total_length`, `visible`, and each entry of `reflection_coefficients`
    share the element-grid shape; `visible` marks elements the route actually
    reaches (valid specular points, nothing occluding any leg).
    """

    total_length: np.ndarray
    reflection_coefficients: tuple
    visible: np.ndarray
    source_device: int
    order: int

    def __post_init__(self) -> None:
        if self.order != len(self.reflection_coefficients):
            raise ValueError("order must equal the number of bounce coefficients")
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if np.any(self.total_length[self.visible] <= 0):
            raise ValueError("visible path lengths must be > 0")


@dataclass(frozen=True)
class FieldGrid:
    """Complex field values (V/m) on the element grid, plus the carrier."""

    values: np.ndarray
    frequency: float

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        if self.frequency <= 0:
            raise ValueError("frequency must be > 0")


@dataclass(frozen=True)
class _Face:
    """Finite rectangular reflector: plane origin, inward normal, in-plane axes."""

    origin: np.ndarray
    normal: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    u_half: float
    v_half: float
    material: Material


def reflector_faces(scene: Scene) -> list[_Face]:
    """All reflecting rectangles: 4 walls, the floor, and 5 faces per box."""
    lx, ly, h = scene.room_extent
    wm = scene.wall_material
    faces = [
        _Face(np.array([0.0, ly / 2, h / 2]), np.array([1.0, 0.0, 0.0]),
              np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]), ly / 2, h / 2, wm),
        _Face(np.array([lx, ly / 2, h / 2]), np.array([-1.0, 0.0, 0.0]),
              np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]), ly / 2, h / 2, wm),
        _Face(np.array([lx / 2, 0.0, h / 2]), np.array([0.0, 1.0, 0.0]),
              np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]), lx / 2, h / 2, wm),
        _Face(np.array([lx / 2, ly, h / 2]), np.array([0.0, -1.0, 0.0]),
              np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]), lx / 2, h / 2, wm),
        # Floor reflects as wall material; the ceiling hosts the aperture.
        _Face(np.array([lx / 2, ly / 2, 0.0]), np.array([0.0, 0.0, 1.0]),
              np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), lx / 2, ly / 2, wm),
    ]
    for box in scene.scatterers:
        x0, x1, y0, y1 = box.footprint()
        cz = box.height / 2
        cx, cy = box.center_xy
        ex, ey = box.extent_xy
        m = box.material
        faces.extend([
            _Face(np.array([x1, cy, cz]), np.array([1.0, 0.0, 0.0]),
                  np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]), ey / 2, box.height / 2, m),
            _Face(np.array([x0, cy, cz]), np.array([-1.0, 0.0, 0.0]),
                  np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]), ey / 2, box.height / 2, m),
            _Face(np.array([cx, y1, cz]), np.array([0.0, 1.0, 0.0]),
                  np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]), ex / 2, box.height / 2, m),
            _Face(np.array([cx, y0, cz]), np.array([0.0, -1.0, 0.0]),
                  np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]), ex / 2, box.height / 2, m),
            _Face(np.array([cx, cy, box.height]), np.array([0.0, 0.0, 1.0]),
                  np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), ex / 2, ey / 2, m),
        ])
    return faces


def _occluder_bounds(scene: Scene) -> tuple[np.ndarray, np.ndarray]:
    if not scene.scatterers:
        empty = np.zeros((0, 3))
        return empty, empty
    lo, hi = [], []
    for box in scene.scatterers:
        x0, x1, y0, y1 = box.footprint()
        lo.append([x0, y0, 0.0])
        hi.append([x1, y1, box.height])
    return np.asarray(lo), np.asarray(hi)


def _segments_blocked(start: np.ndarray, end: np.ndarray,
                      boxes_lo: np.ndarray, boxes_hi: np.ndarray) -> np.ndarray:
    """True where the open segment start->end crosses a box interior.

    Boxes are shrunk by a hair so segments that merely touch a surface
    (reflection points, devices resting on a face) do not count as blocked.
    `start` may be a single point or one point per segment.
    """
    end = np.atleast_2d(end)
    start = np.broadcast_to(np.atleast_2d(start), end.shape)
    n = end.shape[0]
    blocked = np.zeros(n, dtype=bool)
    if boxes_lo.shape[0] == 0:
        return blocked
    d = end - start
    # A vanishing direction component becomes +/-inf slab times under 1/d;
    # substituting a signed tiny value reproduces the inside/outside cases
    # without branch arrays.
    d = np.where(np.abs(d) < 1e-15, 1e-300, d)
    inv = 1.0 / d
    for lo, hi in zip(boxes_lo, boxes_hi):
        t1 = (lo + _GEOM_EPS - start) * inv
        t2 = (hi - _GEOM_EPS - start) * inv
        t_enter = np.minimum(t1, t2).max(axis=1)
        t_exit = np.maximum(t1, t2).min(axis=1)
        np.maximum(t_enter, 1e-9, out=t_enter)
        np.minimum(t_exit, 1.0 - 1e-9, out=t_exit)
        blocked |= (t_exit - t_enter) > 1e-9
    return blocked


def _mirror(point: np.ndarray, face: _Face) -> np.ndarray:
    s = float(np.dot(point - face.origin, face.normal))
    return point - 2.0 * s * face.normal


def _chains(faces: list[_Face], max_order: int, min_order: int = 1) -> list[list[int]]:
    chains: list[list[int]] = []
    frontier: list[list[int]] = [[]]
    for order in range(1, max_order + 1):
        nxt = []
        for chain in frontier:
            for idx in range(len(faces)):
                if chain and chain[-1] == idx:
                    continue
                nxt.append(chain + [idx])
        if order >= min_order:
            chains.extend(nxt)
        frontier = nxt
    return chains


@dataclass(frozen=True)
class _SceneGeometry:
    """Reflector faces and occluder bounds, shared across a scene's devices."""

    faces: tuple
    boxes_lo: np.ndarray
    boxes_hi: np.ndarray

    @classmethod
    def of(cls, scene: Scene) -> "_SceneGeometry":
        lo, hi = _occluder_bounds(scene)
        return cls(faces=tuple(reflector_faces(scene)), boxes_lo=lo, boxes_hi=hi)


def trace_paths(
    scene: Scene,
    device: Device,
    element_positions: np.ndarray,
    max_order: int = 1,
    device_index: int = 0,
    _geometry: _SceneGeometry | None = None,
) -> list[RayPath]:
    """Direct plus image-source routes from one device to every element.

    `element_positions` has shape (nx, ny, 3). Routes that reach no element
    at all are dropped; a fully occluded device yields an empty list.
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    grid_shape = element_positions.shape[:2]
    elements = element_positions.reshape(-1, 3).astype(float)
    dev_pos = np.asarray(device.position, dtype=float)
    if _geometry is None:
        _geometry = _SceneGeometry.of(scene)
    boxes_lo, boxes_hi = _geometry.boxes_lo, _geometry.boxes_hi
    freq = scene.carrier_frequency

    paths: list[RayPath] = []

    # Direct route.
    lengths = np.linalg.norm(elements - dev_pos, axis=1)
    vis = ~_segments_blocked(dev_pos, elements, boxes_lo, boxes_hi)
    if np.any(vis):
        paths.append(RayPath(lengths.reshape(grid_shape), (), vis.reshape(grid_shape),
                             device_index, 0))

    if max_order == 0:
        return paths

    faces = list(_geometry.faces)
    paths.extend(
        RayPath(lengths_c.reshape(grid_shape), (coeff.reshape(grid_shape),),
                vis_c.reshape(grid_shape), device_index, 1)
        for lengths_c, coeff, vis_c in _trace_first_order(
            dev_pos, elements, faces, boxes_lo, boxes_hi, freq)
    )
    if max_order == 1:
        return paths

    for chain in _chains(faces, max_order, min_order=2):
        path = _trace_chain(dev_pos, elements, [faces[i] for i in chain],
                            boxes_lo, boxes_hi, freq)
        if path is None:
            continue
        lengths_c, coeffs, vis_c = path
        paths.append(RayPath(
            lengths_c.reshape(grid_shape),
            tuple(c.reshape(grid_shape) for c in coeffs),
            vis_c.reshape(grid_shape),
            device_index,
            len(chain),
        ))
    return paths


def _trace_first_order(dev_pos, elements, faces, boxes_lo, boxes_hi, freq):
    """Single-bounce routes for every reflector at once.

    Stacks the face parameters so the specular-point construction runs as a
    handful of (faces x elements) array operations; yields per-face
    (lengths, coefficient, visibility) triples for faces reaching anything.
    """
    n = elements.shape[0]
    origins = np.stack([f.origin for f in faces])
    normals = np.stack([f.normal for f in faces])
    u_axes = np.stack([f.u_axis for f in faces])
    v_axes = np.stack([f.v_axis for f in faces])
    u_half = np.array([f.u_half for f in faces])
    v_half = np.array([f.v_half for f in faces])

    s_dev = np.einsum("fk,fk->f", dev_pos[None, :] - origins, normals)
    front = s_dev > _GEOM_EPS  # device on the reflective side, off the plane
    if not np.any(front):
        return
    images = dev_pos[None, :] - 2.0 * s_dev[:, None] * normals  # (F, 3)

    s_tgt = elements @ normals.T - np.einsum("fk,fk->f", origins, normals)  # (N, F)
    valid = front[None, :] & (s_tgt > _GEOM_EPS)
    vec = elements[:, None, :] - images[None, :, :]  # (N, F, 3)
    denom = s_tgt + s_dev[None, :]  # s_tgt - s_img with s_img = -s_dev
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(valid, s_dev[None, :] / np.where(denom == 0.0, 1.0, denom), 0.5)
    q = images[None, :, :] + t[:, :, None] * vec  # (N, F, 3)
    rel = q - origins[None, :, :]
    valid &= np.abs(np.einsum("nfk,fk->nf", rel, u_axes)) <= u_half[None, :] + _GEOM_EPS
    valid &= np.abs(np.einsum("nfk,fk->nf", rel, v_axes)) <= v_half[None, :] + _GEOM_EPS
    if not np.any(valid):
        return

    # Occlusion on the surviving (element, face) pairs, both legs in one call.
    el_ids, face_ids = np.nonzero(valid)
    q_sub = q[el_ids, face_ids]
    starts = np.concatenate([np.broadcast_to(dev_pos, q_sub.shape), q_sub])
    ends = np.concatenate([q_sub, elements[el_ids]])
    blocked_two = _segments_blocked(starts, ends, boxes_lo, boxes_hi)
    m = q_sub.shape[0]
    blocked = blocked_two[:m] | blocked_two[m:]
    valid[el_ids[blocked], face_ids[blocked]] = False

    lengths = np.linalg.norm(vec, axis=2)  # (N, F)

    # Angles and Fresnel coefficients only where the route exists.
    el_v, face_v = np.nonzero(valid)
    vec_v = vec[el_v, face_v]
    len_v = lengths[el_v, face_v]
    cos_v = np.abs(np.einsum("mk,mk->m", vec_v, normals[face_v])) / len_v
    theta_v = np.arccos(np.clip(cos_v, 0.0, 1.0))
    np.clip(theta_v, 0.0, np.pi / 2 - 1e-12, out=theta_v)
    unique_materials: list[Material] = []
    material_ids = np.empty(len(faces), dtype=int)
    for fi, face in enumerate(faces):
        for gi, known in enumerate(unique_materials):
            if known == face.material:
                material_ids[fi] = gi
                break
        else:
            material_ids[fi] = len(unique_materials)
            unique_materials.append(face.material)
    coeff = np.zeros((n, len(faces)), dtype=complex)
    groups = material_ids[face_v]
    coeff_v = np.empty(el_v.size, dtype=complex)
    for gid, material in enumerate(unique_materials):
        sel = groups == gid
        if np.any(sel):
            coeff_v[sel] = fresnel_reflection(material, theta_v[sel], freq)
    coeff[el_v, face_v] = coeff_v

    for fi in range(len(faces)):
        col_valid = valid[:, fi]
        if not np.any(col_valid):
            continue
        yield lengths[:, fi].copy(), coeff[:, fi].copy(), col_valid.copy()


def _trace_chain(dev_pos, elements, chain, boxes_lo, boxes_hi, freq):
    """Evaluate one reflector sequence; None when no element sees it."""
    # Build the image ladder: images[m] is the device mirrored across the
    # first m reflectors of the chain.
    images = [dev_pos]
    for face in chain:
        side = float(np.dot(images[-1] - face.origin, face.normal))
        if abs(side) < _GEOM_EPS:
            return None  # source sits in the mirror plane; no distinct image
        images.append(_mirror(images[-1], face))
    if float(np.dot(dev_pos - chain[0].origin, chain[0].normal)) <= _GEOM_EPS:
        return None  # device behind its first reflector

    n = elements.shape[0]
    valid = np.ones(n, dtype=bool)
    target = elements
    total_length = np.linalg.norm(elements - images[-1], axis=1)
    angles_rev: list[np.ndarray] = []
    legs: list[tuple[np.ndarray, np.ndarray]] = []

    # Walk backwards from the elements, peeling one bounce at a time.
    for m in range(len(chain), 0, -1):
        face = chain[m - 1]
        image = images[m]
        s_img = float(np.dot(image - face.origin, face.normal))
        if s_img >= -_GEOM_EPS:
            return None
        s_tgt = (target - face.origin) @ face.normal
        valid &= s_tgt > _GEOM_EPS
        vec = target - image
        denom = s_tgt - s_img
        with np.errstate(invalid="ignore"):
            t = np.where(valid, -s_img / np.where(denom == 0.0, 1.0, denom), 0.5)
        q = image + t[:, None] * vec
        rel = q - face.origin
        valid &= np.abs(rel @ face.u_axis) <= face.u_half + _GEOM_EPS
        valid &= np.abs(rel @ face.v_axis) <= face.v_half + _GEOM_EPS
        if not np.any(valid):
            return None
        norm_vec = np.linalg.norm(vec, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos_t = np.abs(vec @ face.normal) / np.where(norm_vec == 0.0, 1.0, norm_vec)
        angles_rev.append(np.arccos(np.clip(cos_t, 0.0, 1.0)))
        legs.append((q, target))
        target = q
    legs.append((np.broadcast_to(dev_pos, target.shape), target))

    # Occlusion-test only the still-valid subset; box-face routes usually
    # reach a small sliver of the aperture.
    idx = np.flatnonzero(valid)
    for a, b in legs:
        if idx.size == 0:
            return None
        a_sub = a if a.ndim == 1 else a[idx]
        blocked = _segments_blocked(a_sub, b[idx], boxes_lo, boxes_hi)
        idx = idx[~blocked]
    if idx.size == 0:
        return None
    valid = np.zeros(n, dtype=bool)
    valid[idx] = True

    coeffs = []
    for face, theta in zip(chain, reversed(angles_rev)):
        theta_safe = np.where(valid, np.clip(theta, 0.0, np.pi / 2 - 1e-12), 0.0)
        coeffs.append(np.asarray(fresnel_reflection(face.material, theta_safe, freq)))
    return total_length, coeffs, valid


def trace_scene(scene: Scene, element_positions: np.ndarray,
                max_order: int = 1) -> list[list[RayPath]]:
    """Trace every device of the scene; returns one route list per device."""
    geometry = _SceneGeometry.of(scene)
    return [
        trace_paths(scene, dev, element_positions, max_order, i, _geometry=geometry)
        for i, dev in enumerate(scene.devices)
    ]


def isotropic_amplitude(tx_power_dbm: float) -> float:
    """Peak E-field (V/m) at 1 m from an isotropic source of the given power."""
    power_w = 1e-3 * 10.0 ** (tx_power_dbm / 10.0)
    return float(np.sqrt(FREE_SPACE_IMPEDANCE * power_w / (2.0 * np.pi)))


def field_at_lis(
    paths_per_device: Sequence[Sequence[RayPath]],
    devices: Sequence[Device],
    grid_shape: tuple[int, int],
    wavelength: float,
) -> FieldGrid:
    """Superpose all routes of all devices into the aperture field grid."""
    if wavelength <= 0:
        raise ValueError("wavelength must be > 0")
    if len(paths_per_device) != len(devices):
        raise ValueError("one route list per device is required")
    total = np.zeros(grid_shape, dtype=complex)
    for routes, dev in zip(paths_per_device, devices):
        amp = dev.symbol * isotropic_amplitude(dev.tx_power_dbm)
        for path in routes:
            if path.total_length.shape != grid_shape:
                raise ValueError("route arrays do not match the grid shape")
            d = path.total_length
            vis = path.visible
            if np.any(vis & (d < wavelength / 10.0)):
                raise DegenerateGeometryError(
                    "a path is shorter than lambda/10; device touches the aperture"
                )
            d_safe = np.where(vis, d, 1.0)
            contrib = amp * np.exp(-2j * np.pi * d_safe / wavelength) / d_safe
            for gamma in path.reflection_coefficients:
                contrib = contrib * gamma
            total += np.where(vis, contrib, 0.0)
    return FieldGrid(values=total, frequency=SPEED_OF_LIGHT / wavelength)


def dump_paths(paths_per_device: Sequence[Sequence[RayPath]], fh) -> None:
    """Write a per-route summary table (order, reach, lengths, |Gamma|) as text."""
    fh.write("device\torder\tvisible\tlen_min_m\tlen_mean_m\tlen_max_m\tmean_abs_gamma\n")
    for routes in paths_per_device:
        for path in routes:
            vis = path.visible
            if not np.any(vis):
                continue
            lengths = path.total_length[vis]
            gamma = np.ones(int(vis.sum()))
            for c in path.reflection_coefficients:
                gamma = gamma * np.abs(c[vis])
            fh.write(
                f"{path.source_device}\t{path.order}\t{int(vis.sum())}\t"
                f"{lengths.min():.4f}\t{lengths.mean():.4f}\t{lengths.max():.4f}\t"
                f"{gamma.mean():.6f}\n"
            )
