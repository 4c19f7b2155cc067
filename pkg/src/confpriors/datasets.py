"""The two-cluster toy classification dataset.

Two Gaussian blobs in the plane, one per class, plus a configurable number
of deliberately mislabeled points placed inside the opposite cluster.  The
mislabeled points are the interesting part: a flexible enough classifier
can memorize them, so they separate priors that allow high-confidence
memorization from priors that do not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._io import read_csv, write_csv
from ._rng import make_rng
from .exceptions import ConfigurationError, DimensionError

PURPOSE_DATASET = 6


@dataclass(frozen=True)
class DatasetSpec:
    """Generator parameters; together with a seed they fix the dataset."""

    n_points: int = 60
    centers: tuple = ((-1.5, 0.0), (1.5, 0.0))
    spread: float = 0.5
    n_ambiguous: int = 2
    ambiguous_jitter: float = 0.15

    def __post_init__(self):
        object.__setattr__(
            self,
            "centers",
            tuple(tuple(float(v) for v in c) for c in self.centers),
        )
        if len(self.centers) != 2 or any(len(c) != 2 for c in self.centers):
            raise ConfigurationError("centers must be two 2D points")
        if self.n_ambiguous < 0:
            raise ConfigurationError("n_ambiguous must be >= 0")
        if self.n_points < self.n_ambiguous + 2:
            raise ConfigurationError(
                f"n_points ({self.n_points}) must leave at least one regular "
                f"point per class beyond the {self.n_ambiguous} mislabeled ones"
            )
        if not self.spread > 0:
            raise ConfigurationError("spread must be positive")
        if self.ambiguous_jitter < 0:
            raise ConfigurationError("ambiguous_jitter must be >= 0")


@dataclass(frozen=True)
class ToyDataset:
    """N 2D points with binary labels; regenerable bitwise from (spec, seed)."""

    points: np.ndarray
    labels: np.ndarray
    seed: int = -1
    spec: DatasetSpec | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        lab = np.ascontiguousarray(self.labels, dtype=np.int64).reshape(-1)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DimensionError("points shape", "(N, 2)", tuple(pts.shape))
        if pts.shape[0] != lab.shape[0]:
            raise DimensionError("label count", pts.shape[0], lab.shape[0])
        if pts.shape[0] < 2:
            raise DimensionError("dataset size", ">= 2", pts.shape[0])
        present = set(np.unique(lab).tolist())
        if not present <= {0, 1}:
            raise ConfigurationError(f"labels must be in {{0, 1}}, got {sorted(present)}")
        if present != {0, 1}:
            raise ConfigurationError("both classes must be present")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return self.points.shape[0]

    def to_csv(self, path) -> None:
        rows = [
            [self.points[i, 0], self.points[i, 1], int(self.labels[i])]
            for i in range(len(self))
        ]
        write_csv(path, ["x0", "x1", "label"], rows)

    @classmethod
    def from_csv(cls, path) -> "ToyDataset":
        header, rows = read_csv(path)
        if header != ["x0", "x1", "label"]:
            raise ConfigurationError(
                f"dataset CSV must have columns x0,x1,label, got {header}"
            )
        pts = np.array([[float(r[0]), float(r[1])] for r in rows])
        lab = np.array([int(r[2]) for r in rows], dtype=np.int64)
        return cls(points=pts, labels=lab)


def generate_dataset(spec: DatasetSpec, seed: int) -> ToyDataset:
    """Draw the toy dataset for (spec, seed); bitwise deterministic.

    The first n_points - n_ambiguous points are the two clusters, class 0
    then class 1; the trailing n_ambiguous points carry label j % 2 but sit
    inside the opposite cluster.
    """
    rng = make_rng(seed, purpose=PURPOSE_DATASET)
    n_core = spec.n_points - spec.n_ambiguous
    n0 = (n_core + 1) // 2
    n1 = n_core - n0
    centers = np.asarray(spec.centers)

    pts0 = centers[0] + spec.spread * rng.standard_normal((n0, 2))
    pts1 = centers[1] + spec.spread * rng.standard_normal((n1, 2))
    amb_pts = np.empty((spec.n_ambiguous, 2))
    amb_lab = np.empty(spec.n_ambiguous, dtype=np.int64)
    for j in range(spec.n_ambiguous):
        label = j % 2
        amb_pts[j] = centers[1 - label] + spec.ambiguous_jitter * rng.standard_normal(2)
        amb_lab[j] = label

    points = np.concatenate([pts0, pts1, amb_pts], axis=0)
    labels = np.concatenate(
        [np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64), amb_lab]
    )
    return ToyDataset(points=points, labels=labels, seed=seed, spec=spec)
