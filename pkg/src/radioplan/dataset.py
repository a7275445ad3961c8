"""Dataset generation: scenes -> fields -> signals -> radio-map/floor-plan pairs.

Each sample draws its (scenario, S, K_a) cell round-robin from the configured
grid, so cells stay balanced; device placement and noise use per-sample seeds
derived from the master seed and the sample index, which keeps builds
byte-reproducible and order-independent under parallel generation.

Directory layout: <out>/<split>/<sample_id>_map.png and _plan.png next to a
manifest.json carrying the config snapshot and one record per sample.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np

from . import io
from .errors import StratumTooSmallError
from .lis import (
    LisConfig,
    average_samples,
    element_positions,
    half_wavelength_spacing,
    noise_sigma_for_snr,
    wavelength,
)
from .propagation import field_at_lis, trace_scene
from .radiomap import MfKernel, build_mf_kernel, form_radio_map
from .scene import SCENARIOS, Scene, rasterize_floorplan, sample_devices, validate_scene

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class DatasetConfig:
    scenarios: tuple[Scene, ...]
    s_values: tuple[int, ...] = (1, 100, 1000)
    k_a_values: tuple[int, ...] = (5, 20)
    gamma_db: float = -10.0
    total_samples: int = 2400
    split_ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    export_resolution: int = 256
    master_seed: int = 0
    lis_side: int = 64
    kernel_side: int = 33
    kernel_depth: float = 8.0
    max_order: int = 1
    device_height: float = 0.0
    tx_power_dbm: float = 20.0

    def __post_init__(self) -> None:
        if not self.scenarios or not self.s_values or not self.k_a_values:
            raise ValueError("scenarios, s_values, and k_a_values must be nonempty")
        if self.total_samples < 10:
            raise ValueError("total_samples must be >= 10")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")
        if any(r < 0 for r in self.split_ratios):
            raise ValueError("split ratios must be nonnegative")
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "s_values", tuple(int(s) for s in self.s_values))
        object.__setattr__(self, "k_a_values", tuple(int(k) for k in self.k_a_values))
        object.__setattr__(self, "split_ratios", tuple(float(r) for r in self.split_ratios))


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    scenario_id: int
    k_a: int
    s: int
    gamma_db: float
    seed: int
    radio_map_path: str
    floor_plan_path: str
    split: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Manifest:
    records: tuple[SampleRecord, ...]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config,
                "records": [r.to_dict() for r in self.records]}

    @classmethod
    def from_dict(cls, data: dict) -> "Manifest":
        records = tuple(SampleRecord(**entry) for entry in data["records"])
        return cls(records=records, config=data.get("config", {}))


def config_to_dict(config: DatasetConfig) -> dict:
    data = asdict(config)
    data["scenarios"] = [io.scene_to_dict(s) for s in config.scenarios]
    return data


def config_from_dict(data: dict) -> DatasetConfig:
    data = dict(data)
    scenarios = []
    for entry in data.pop("scenarios"):
        if isinstance(entry, str):
            if entry in SCENARIOS:
                scenarios.append(SCENARIOS[entry]())
            else:
                scenarios.append(io.load_scene(entry))
        else:
            scenarios.append(io.scene_from_dict(entry))
    return DatasetConfig(scenarios=tuple(scenarios), **data)


def _grid_cells(config: DatasetConfig) -> list[tuple[int, int, int]]:
    return [
        (scenario_id, s, k_a)
        for scenario_id in range(len(config.scenarios))
        for s in config.s_values
        for k_a in config.k_a_values
    ]


def cell_of_sample(config: DatasetConfig, index: int) -> tuple[int, int, int]:
    """Balanced round-robin (scenario_id, S, K_a) assignment for one sample."""
    cells = _grid_cells(config)
    return cells[index % len(cells)]


def _sample_seed(master_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(0, index))
    return int(ss.generate_state(1, np.uint64)[0])


def _split_rng(master_seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(1,)))


def _sub_seeds(seed: int, n: int) -> list[int]:
    return [int(v) for v in np.random.SeedSequence(seed).generate_state(n, np.uint64)]


def _sample_id(index: int, total: int) -> str:
    width = max(5, len(str(total - 1)))
    return f"{index:0{width}d}"


@dataclass(frozen=True)
class GeneratedSample:
    index: int
    scenario_id: int
    s: int
    k_a: int
    seed: int
    radio_map_rgb: np.ndarray
    floor_plan: np.ndarray
    magnitude: np.ndarray
    scene: Scene


def sample_kernel(config: DatasetConfig) -> MfKernel:
    frequency = config.scenarios[0].carrier_frequency
    return build_mf_kernel(frequency, config.kernel_depth, config.kernel_side,
                           half_wavelength_spacing(frequency))


def generate_sample(config: DatasetConfig, index: int,
                    kernel: MfKernel | None = None,
                    noiseless: bool = False) -> GeneratedSample:
    """Run the full simulation pipeline for one sample index."""
    scenario_id, s, k_a = cell_of_sample(config, index)
    template = config.scenarios[scenario_id]
    seed = _sample_seed(config.master_seed, index)
    placement_seed, noise_seed = _sub_seeds(seed, 2)

    scene = sample_devices(template, k_a, placement_seed,
                           device_height=config.device_height,
                           tx_power_dbm=config.tx_power_dbm)
    validate_scene(scene)
    room = scene.room_extent
    frequency = scene.carrier_frequency
    lis = LisConfig(n_x=config.lis_side, n_y=config.lis_side,
                    spacing=half_wavelength_spacing(frequency), height=room[2])
    elements = element_positions(lis, room)
    paths = trace_scene(scene, elements, config.max_order)
    grid = field_at_lis(paths, scene.devices, (lis.n_x, lis.n_y),
                        wavelength(frequency))
    sigma2 = noise_sigma_for_snr(grid, config.gamma_db, lis)
    if noiseless:
        signal = average_samples(grid, lis, 0.0, 1, noise_seed)
    else:
        signal = average_samples(grid, lis, sigma2, s, noise_seed)
    if kernel is None:
        kernel = sample_kernel(config)
    rmap = form_radio_map(signal, kernel)
    map_rgb = nearest_resize(rmap.rgb, config.export_resolution)
    plan = rasterize_floorplan(scene, config.export_resolution)
    return GeneratedSample(index=index, scenario_id=scenario_id, s=s, k_a=k_a,
                           seed=seed, radio_map_rgb=map_rgb, floor_plan=plan,
                           magnitude=rmap.magnitude, scene=scene)


def nearest_resize(image: np.ndarray, out_side: int) -> np.ndarray:
    """Nearest-neighbor resample of a square image (any channel count)."""
    img = np.asarray(image)
    n = img.shape[0]
    idx = np.floor((np.arange(out_side) + 0.5) * n / out_side).astype(int)
    return img[idx][:, idx]


def _allocate(n: int, ratios) -> list[int]:
    raw = [n * r for r in ratios]
    counts = [int(math.floor(v)) for v in raw]
    remainder = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def _assign_splits(strata: dict, ratios, rng: np.random.Generator,
                   min_stratum: int = 0) -> dict[int, str]:
    """Per-stratum assignment at the given ratios; deviation <= 1 per split."""
    assignment: dict[int, str] = {}
    for key in sorted(strata):
        indices = sorted(strata[key])
        if len(indices) < min_stratum:
            raise StratumTooSmallError(
                f"stratum {key} has {len(indices)} samples (< {min_stratum})"
            )
        perm = rng.permutation(len(indices))
        counts = _allocate(len(indices), ratios)
        cursor = 0
        for split_name, count in zip(SPLIT_NAMES, counts):
            for pos in perm[cursor:cursor + count]:
                assignment[indices[pos]] = split_name
            cursor += count
    return assignment


def _strata_of(config: DatasetConfig) -> dict:
    strata: dict = {}
    for index in range(config.total_samples):
        strata.setdefault(cell_of_sample(config, index), []).append(index)
    return strata


def _record_paths(sample_id: str, split: str) -> tuple[str, str]:
    return (f"{split}/{sample_id}_map.png", f"{split}/{sample_id}_plan.png")


def _write_sample(args, kernel: MfKernel | None = None) -> SampleRecord:
    config, index, split_name, out_dir = args
    sample = generate_sample(config, index, kernel=kernel)
    sample_id = _sample_id(index, config.total_samples)
    map_rel, plan_rel = _record_paths(sample_id, split_name)
    io.save_image(Path(out_dir) / map_rel, sample.radio_map_rgb)
    io.save_image(Path(out_dir) / plan_rel, sample.floor_plan)
    return SampleRecord(
        sample_id=sample_id, scenario_id=sample.scenario_id, k_a=sample.k_a,
        s=sample.s, gamma_db=config.gamma_db, seed=sample.seed,
        radio_map_path=map_rel, floor_plan_path=plan_rel, split=split_name,
    )


def build(config: DatasetConfig, out_dir, jobs: int = 1) -> Manifest:
    """Generate every sample, write images and manifest.json under out_dir."""
    out_dir = Path(out_dir)
    splits = _assign_splits(_strata_of(config), config.split_ratios,
                            _split_rng(config.master_seed))
    for name in set(splits.values()):
        (out_dir / name).mkdir(parents=True, exist_ok=True)

    tasks = [(config, index, splits[index], out_dir)
             for index in range(config.total_samples)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_write_sample, tasks, chunksize=8))
    else:
        kernel = sample_kernel(config)
        records = [_write_sample(task, kernel=kernel) for task in tasks]
    records.sort(key=lambda r: r.sample_id)
    manifest = Manifest(records=tuple(records), config=config_to_dict(config))
    io.save_manifest(out_dir / "manifest.json", manifest.to_dict())
    return manifest


def split(manifest: Manifest, ratios, seed: int) -> Manifest:
    """Re-assign splits, stratified by (scenario, S, K_a); deterministic per seed.

    Every stratum must hold at least 3 samples. Record paths are updated to
    the new split directories; use relocate_files() to move image files.
    """
    ratios = tuple(float(r) for r in ratios)
    if abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be nonnegative and sum to 1")
    strata: dict = {}
    for pos, record in enumerate(manifest.records):
        strata.setdefault((record.scenario_id, record.s, record.k_a), []).append(pos)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    assignment = _assign_splits(strata, ratios, rng, min_stratum=3)
    new_records = []
    for pos, record in enumerate(manifest.records):
        new_split = assignment[pos]
        map_rel, plan_rel = _record_paths(record.sample_id, new_split)
        new_records.append(replace(record, split=new_split,
                                   radio_map_path=map_rel, floor_plan_path=plan_rel))
    return Manifest(records=tuple(new_records), config=manifest.config)


def relocate_files(old: Manifest, new: Manifest, root) -> None:
    """Move image files from the old split layout to the new one."""
    root = Path(root)
    by_id = {r.sample_id: r for r in old.records}
    for record in new.records:
        before = by_id[record.sample_id]
        for src_rel, dst_rel in (
            (before.radio_map_path, record.radio_map_path),
            (before.floor_plan_path, record.floor_plan_path),
        ):
            if src_rel == dst_rel:
                continue
            dst = root / dst_rel
            dst.parent.mkdir(parents=True, exist_ok=True)
            (root / src_rel).rename(dst)
