"""Observation container shared by every stage of the pipeline."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .lattice import MAX_DIMENSION, BinaryProfile, as_profile

__all__ = ["GROUPS", "Dataset"]

GROUPS = ("red", "blue")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Binary exposure profiles ``X`` (integer-encoded), binary outcomes ``Y``
    and, optionally, a red/blue group label and state per observation."""

    profiles: np.ndarray
    outcomes: np.ndarray
    dimension: int
    groups: np.ndarray | None = None
    states: np.ndarray | None = None

    def __post_init__(self):
        if not 1 <= self.dimension <= MAX_DIMENSION:
            raise ValueError(f"dimension must be in [1, {MAX_DIMENSION}]")
        profiles = np.ascontiguousarray(self.profiles, dtype=np.uint32)
        outcomes = np.ascontiguousarray(self.outcomes, dtype=np.uint8)
        if profiles.shape != outcomes.shape or profiles.ndim != 1:
            raise ValueError("profiles and outcomes must be 1-d arrays of equal length")
        if profiles.size and int(profiles.max()) >= (1 << self.dimension):
            raise ValueError(f"profile exceeds {self.dimension} bits")
        if outcomes.size and int(outcomes.max()) > 1:
            raise ValueError("outcomes must be 0 or 1")
        object.__setattr__(self, "profiles", profiles)
        object.__setattr__(self, "outcomes", outcomes)
        for name in ("groups", "states"):
            col = getattr(self, name)
            if col is not None:
                col = np.asarray(col, dtype=object)
                if col.shape != profiles.shape:
                    raise ValueError(f"{name} must align with profiles")
                object.__setattr__(self, name, col)

    def __len__(self) -> int:
        return int(self.profiles.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        same = (self.dimension == other.dimension
                and np.array_equal(self.profiles, other.profiles)
                and np.array_equal(self.outcomes, other.outcomes))
        for name in ("groups", "states"):
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None:
                same = same and list(a) == list(b)
        return same

    @classmethod
    def from_rows(cls, rows: Iterable[tuple], dimension: int | None = None) -> "Dataset":
        """Build from ``(profile, outcome[, group])`` tuples; profiles in any
        form accepted by :func:`as_profile`."""
        rows = list(rows)
        if not rows:
            if dimension is None:
                raise ValueError("cannot infer dimension from an empty row list")
            return cls(np.zeros(0, np.uint32), np.zeros(0, np.uint8), dimension)
        profs = [as_profile(r[0], dimension) for r in rows]
        d = dimension or profs[0].dimension
        groups = [r[2] for r in rows] if len(rows[0]) > 2 else None
        return cls(np.array([p.value for p in profs], dtype=np.uint32),
                   np.array([int(r[1]) for r in rows], dtype=np.uint8), d, groups)

    def profile(self, i: int) -> BinaryProfile:
        return BinaryProfile(int(self.profiles[i]), self.dimension)

    def subset(self, mask: np.ndarray | Sequence[int]) -> "Dataset":
        mask = np.asarray(mask)
        pick = lambda col: None if col is None else col[mask]  # noqa: E731
        return Dataset(self.profiles[mask], self.outcomes[mask], self.dimension,
                       pick(self.groups), pick(self.states))

    def with_outcomes(self, outcomes) -> "Dataset":
        return Dataset(self.profiles, outcomes, self.dimension, self.groups, self.states)
