"""Random start/target layouts: a ground square of starts, an elevated cube of targets."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from itertools import product
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from tps.errors import InvalidInputError, ScenarioGenerationError
from tps.kinematics import DronePath, KinematicLimits

SCENARIO_SCHEMA_VERSION = 1
DENSITY_COEF = 1.06
DENSITY_EXP = 0.5329
COMPARISON_CORNER = (200.0, 200.0, 200.0)
SCALABILITY_CORNER = (500.0, 500.0, 500.0)


def density(n: int) -> float:
    """Positions-per-drone factor that keeps most layouts free of dependency cycles."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    return DENSITY_COEF * n ** DENSITY_EXP


def _ceil_root(value: float, k: int) -> int:
    # guard against e.g. 300 ** (1/3) landing a hair above an exact integer root
    root = value ** (1.0 / k)
    near = round(root)
    if abs(root - near) < 1e-9 and near ** k >= value - 1e-9:
        return int(near)
    return int(math.ceil(root))


def square_side(n: int, delta: float) -> int:
    if n < 1 or not delta > 0:
        raise InvalidInputError("need n >= 1 and delta > 0")
    return _ceil_root(n * delta, 2)


def cube_side(n: int, delta: float) -> int:
    if n < 1 or not delta > 0:
        raise InvalidInputError("need n >= 1 and delta > 0")
    return _ceil_root(n * delta * 3.0, 3)


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    delta: Union[float, str] = 10.0
    r_col: float = 1.0
    sf: float = 1.5
    min_spacing: float = 2.0
    cube_far_corner: tuple = COMPARISON_CORNER
    seed: int = 0
    spacing_metric: str = "euclidean"
    limits: KinematicLimits = field(default_factory=KinematicLimits)

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInputError(f"n must be a positive integer, got {self.n!r}")
        if isinstance(self.delta, str):
            if self.delta != "auto":
                raise InvalidInputError(f"delta must be a number or 'auto', got {self.delta!r}")
        elif not self.delta > 0:
            raise InvalidInputError(f"delta must be positive, got {self.delta!r}")
        if self.spacing_metric not in ("euclidean", "chebyshev"):
            raise InvalidInputError(f"unknown spacing metric {self.spacing_metric!r}")
        if not self.min_spacing >= 0:
            raise InvalidInputError("min_spacing must be non-negative")
        object.__setattr__(self, "cube_far_corner", tuple(float(c) for c in self.cube_far_corner))
        if len(self.cube_far_corner) != 3:
            raise InvalidInputError("cube_far_corner needs three coordinates")

    @property
    def delta_value(self) -> float:
        return density(self.n) if self.delta == "auto" else float(self.delta)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cube_far_corner"] = list(self.cube_far_corner)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        if "limits" in d and isinstance(d["limits"], dict):
            d["limits"] = KinematicLimits(**d["limits"])
        if "cube_far_corner" in d:
            d["cube_far_corner"] = tuple(d["cube_far_corner"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Scenario:
    paths: tuple
    config: ScenarioConfig

    @property
    def n(self) -> int:
        return len(self.paths)

    @property
    def starts(self) -> np.ndarray:
        return np.array([p.start for p in self.paths])

    @property
    def targets(self) -> np.ndarray:
        return np.array([p.target for p in self.paths])

    def to_json(self) -> str:
        doc = {
            "schema_version": SCENARIO_SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "starts": self.starts.tolist(),
            "targets": self.targets.tolist(),
        }
        return json.dumps(doc, indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str, validate: bool = True) -> "Scenario":
        doc = json.loads(text)
        if doc.get("schema_version") != SCENARIO_SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported scenario schema_version {doc.get('schema_version')!r}")
        config = ScenarioConfig.from_dict(doc["config"])
        starts, targets = doc["starts"], doc["targets"]
        if len(starts) != len(targets) or len(starts) != config.n:
            raise InvalidInputError(
                f"scenario lists {len(starts)} starts and {len(targets)} targets for n={config.n}"
            )
        scenario = cls.from_points(starts, targets, config)
        if validate:
            validate_scenario(scenario)
        return scenario

    @classmethod
    def load(cls, path, validate: bool = True) -> "Scenario":
        return cls.from_json(Path(path).read_text(), validate=validate)

    @classmethod
    def from_points(cls, starts, targets, config: ScenarioConfig) -> "Scenario":
        paths = tuple(DronePath(s, t, config.limits) for s, t in zip(starts, targets))
        return cls(paths, config)


def _min_pairwise(points: np.ndarray, metric: str) -> float:
    if len(points) < 2:
        return math.inf
    from scipy.spatial.distance import pdist

    return float(pdist(points, "euclidean" if metric == "euclidean" else "chebyshev").min())


def validate_scenario(scenario: Scenario) -> None:
    """Raise :class:`InvalidInputError` if a loaded layout breaks the spacing rules."""
    cfg = scenario.config
    for label, pts in (("start", scenario.starts), ("target", scenario.targets)):
        gap = _min_pairwise(pts, cfg.spacing_metric)
        if gap < cfg.min_spacing - 1e-9:
            raise InvalidInputError(f"{label} positions closer than {cfg.min_spacing} m (min {gap:.3f} m)")


def _offsets(radius: float, dims: int, metric: str) -> np.ndarray:
    """Integer offsets strictly closer than ``radius`` (excluding the origin)."""
    k = int(math.ceil(radius))
    rng = range(-k, k + 1)
    out = []
    for off in product(rng, repeat=dims):
        if not any(off):
            continue
        dist = math.sqrt(sum(o * o for o in off)) if metric == "euclidean" else max(abs(o) for o in off)
        if dist < radius:
            out.append(off)
    return np.array(out, dtype=int).reshape(-1, dims)


def _place(rng: np.random.Generator, shape: Sequence[int], count: int,
           spacing: float, metric: str, max_tries: int) -> np.ndarray:
    """Uniform grid cells without replacement, rejecting any too close to an accepted one."""
    shape = tuple(int(s) for s in shape)
    total = int(np.prod(shape))
    blocked = np.zeros(shape, dtype=bool)
    offsets = _offsets(spacing, len(shape), metric)
    accepted = []
    tries = 0
    for flat in rng.permutation(total):
        if len(accepted) == count:
            break
        tries += 1
        if tries > max_tries:
            break
        idx = np.unravel_index(int(flat), shape)
        if blocked[idx]:
            continue
        accepted.append(idx)
        blocked[idx] = True
        if len(offsets):
            nb = np.array(idx) + offsets
            ok = np.all((nb >= 0) & (nb < np.array(shape)), axis=1)
            blocked[tuple(nb[ok].T)] = True
    if len(accepted) < count:
        raise ScenarioGenerationError(
            f"placed {len(accepted)} of {count} points on a grid of {total} cells "
            f"(fill ratio {len(accepted) / total:.3f}) after {tries} tries"
        )
    return np.array(accepted, dtype=float).reshape(count, len(shape))


def generate(config: ScenarioConfig) -> Scenario:
    """Draw ``n`` start points on the ground square and ``n`` targets in the cube.

    Starts lie on the 1 m grid of a ``L_sq x L_sq`` square centred on the
    origin at z = 0; targets on the 1 m grid of an ``L_cu`` cube whose far
    corner is ``config.cube_far_corner``.  Drone i flies start i -> target i.
    """
    n = config.n
    delta = config.delta_value
    l_sq = square_side(n, delta)
    l_cu = cube_side(n, delta)
    rng = np.random.default_rng(config.seed)
    tries = 1000 * n

    cells = _place(rng, (l_sq, l_sq), n, config.min_spacing, config.spacing_metric, tries)
    half = l_sq // 2
    starts = np.column_stack([cells - half, np.zeros(n)])

    cells = _place(rng, (l_cu, l_cu, l_cu), n, config.min_spacing, config.spacing_metric, tries)
    corner = np.array(config.cube_far_corner)
    targets = corner - (l_cu - 1) + cells

    return Scenario.from_points(starts, targets, config)
