"""Seeded synthetic benchmark generator.

Scenes are grids partitioned into contiguous regions (multi-source BFS growth
from random centers, i.e. nearest-center assignment in grid geodesic
distance), each region labeled with a class. Pixel features are the class
unit direction plus isotropic Gaussian noise; class directions are rows of a
seeded random orthonormal basis, so ground-truth prototypes are known
analytically. Evaluation scenes plant anomaly regions whose features point
either along a held-out basis direction or along per-region random unit
vectors.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError
from .grids import ANOMALY_ID, FeatureMap, LabelMask

HELD_OUT = "held_out_direction"
UNIFORM = "uniform_sphere"

# spawn_key namespaces so per-scene streams are independent of scene count
_KIND_BASIS = 0
_KIND_TRAIN = 1
_KIND_EVAL = 2


@dataclass(frozen=True)
class SynthConfig:
    height: int = 64
    width: int = 64
    classes: int = 8
    dim: int = 16
    noise_std: float = 0.15
    anomaly_fraction: float = 0.05
    region_granularity: int = 100
    anomaly_mode: str = HELD_OUT
    seed: int = 0
    n_train: int = 20
    n_eval: int = 10

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise InvalidConfigError(f"grid must be at least 1x1, got {self.height}x{self.width}")
        if self.classes < 2 or self.classes > 254:
            raise InvalidConfigError(f"classes must be in 2..254, got {self.classes}")
        if self.dim < 1:
            raise InvalidConfigError(f"dim must be >= 1, got {self.dim}")
        if not np.isfinite(self.noise_std) or self.noise_std < 0.0:
            raise InvalidConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        if not 0.0 < self.anomaly_fraction < 0.5:
            raise InvalidConfigError(
                f"anomaly_fraction must be in (0, 0.5), got {self.anomaly_fraction}")
        if self.region_granularity < 1:
            raise InvalidConfigError(f"region_granularity must be >= 1, got {self.region_granularity}")
        if self.anomaly_mode not in (HELD_OUT, UNIFORM):
            raise InvalidConfigError(f"anomaly_mode must be {HELD_OUT} or {UNIFORM}, "
                                     f"got {self.anomaly_mode!r}")
        if self.anomaly_mode == HELD_OUT and self.classes + 1 > self.dim:
            raise InvalidConfigError(
                f"{HELD_OUT} needs classes + 1 <= dim for orthogonal directions "
                f"(got C={self.classes}, d={self.dim})")
        if self.n_train < 1 or self.n_eval < 1:
            raise InvalidConfigError("need at least one train and one eval scene")


def _rng(seed: int, kind: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(kind, index)))


def direction_basis(config: SynthConfig):
    """(class_dirs, held_out): orthonormal class directions and, if dim allows,
    the extra direction used for held-out anomalies."""
    rng = _rng(config.seed, _KIND_BASIS, 0)
    a = rng.standard_normal((config.dim, config.dim))
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    basis = (q * signs).T  # rows orthonormal, sign-fixed so QR is unique
    class_dirs = basis[:config.classes]
    held_out = basis[config.classes] if config.dim > config.classes else None
    return class_dirs, held_out


def _partition(rng: np.random.Generator, height: int, width: int, granularity: int) -> np.ndarray:
    """Region id per pixel; every region is 4-connected by construction."""
    n_pixels = height * width
    n_regions = min(max(1, round(n_pixels / granularity)), n_pixels)
    centers = rng.choice(n_pixels, size=n_regions, replace=False)
    region = np.full(n_pixels, -1, dtype=np.int64)
    queue = deque()
    for k, idx in enumerate(centers):
        region[idx] = k
        queue.append(int(idx))
    while queue:
        idx = queue.popleft()
        k = region[idx]
        r, c = divmod(idx, width)
        if r > 0 and region[idx - width] < 0:
            region[idx - width] = k
            queue.append(idx - width)
        if r + 1 < height and region[idx + width] < 0:
            region[idx + width] = k
            queue.append(idx + width)
        if c > 0 and region[idx - 1] < 0:
            region[idx - 1] = k
            queue.append(idx - 1)
        if c + 1 < width and region[idx + 1] < 0:
            region[idx + 1] = k
            queue.append(idx + 1)
    return region.reshape(height, width)


def _region_classes(rng: np.random.Generator, n_regions: int, classes: int) -> np.ndarray:
    # balanced assignment: every class appears ~n_regions/C times
    reps = -(-n_regions // classes)
    pool = np.tile(np.arange(classes), reps)[:n_regions]
    return rng.permutation(pool)


def _pick_anomaly_regions(rng: np.random.Generator, sizes: np.ndarray, target: float):
    """Greedy closest-approach selection of whole regions toward target pixels."""
    order = rng.permutation(len(sizes))
    chosen = []
    total = 0
    for k in order:
        if abs(total + sizes[k] - target) <= abs(total - target):
            chosen.append(int(k))
            total += int(sizes[k])
        else:
            break
    if not chosen:
        chosen = [int(np.argmin(sizes))]
    return chosen


def _scene(rng: np.random.Generator, config: SynthConfig, class_dirs: np.ndarray,
           held_out: np.ndarray | None, with_anomalies: bool):
    h, w, d = config.height, config.width, config.dim
    region = _partition(rng, h, w, config.region_granularity)
    n_regions = int(region.max()) + 1
    region_class = _region_classes(rng, n_regions, config.classes)
    labels = region_class[region].astype(np.int64)

    directions = class_dirs[labels]
    if with_anomalies:
        sizes = np.bincount(region.reshape(-1), minlength=n_regions)
        target = config.anomaly_fraction * h * w
        chosen = _pick_anomaly_regions(rng, sizes, target)
        for k in sorted(chosen):
            cells = region == k
            labels[cells] = ANOMALY_ID
            if config.anomaly_mode == HELD_OUT:
                directions[cells] = held_out
            else:
                v = rng.standard_normal(d)
                directions[cells] = v / np.linalg.norm(v)

    features = directions + config.noise_std * rng.standard_normal((h, w, d))
    return FeatureMap(features), LabelMask(labels.astype(np.uint8))


def generate(config: SynthConfig):
    """Build (train_scenes, eval_scenes) lists of (FeatureMap, LabelMask) pairs.

    Bit-identical for identical configs; per-scene RNG streams are derived
    from (seed, scene index), so scenes are independent of each other and of
    the scene counts.
    """
    class_dirs, held_out = direction_basis(config)
    train_scenes = [
        _scene(_rng(config.seed, _KIND_TRAIN, i), config, class_dirs, held_out, False)
        for i in range(config.n_train)
    ]
    eval_scenes = [
        _scene(_rng(config.seed, _KIND_EVAL, i), config, class_dirs, held_out, True)
        for i in range(config.n_eval)
    ]
    return train_scenes, eval_scenes
