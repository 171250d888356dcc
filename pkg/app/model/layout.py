"""
Partition of the source vector into per-part subspaces.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from app.core.errors import ConfigurationError
from app.synthdata.dataset import PART_NAMES

DEFAULT_DIMS: tuple[int, ...] = (12, 8, 4, 4, 4)


@dataclass(frozen=True)
class SubspaceLayout:
    """
    Contiguous subspace blocks of a d-dimensional source vector.

    Attributes:
        dims: Size of each subspace, in part order
        names: Part name of each subspace
    """

    dims: tuple[int, ...] = DEFAULT_DIMS
    names: tuple[str, ...] = field(default=PART_NAMES)

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "names", tuple(self.names))
        if not self.dims or any(d <= 0 for d in self.dims):
            raise ConfigurationError(f"Subspace dims must be positive, got {list(self.dims)}")
        if len(self.names) != len(self.dims):
            raise ConfigurationError(
                f"{len(self.names)} subspace names for {len(self.dims)} dims",
                names=list(self.names),
                dims=list(self.dims),
            )

    @classmethod
    def from_dims(cls, dims: Sequence[int]) -> SubspaceLayout:
        """Layout with the standard part names, or generic names for other counts."""
        names = PART_NAMES if len(dims) == len(PART_NAMES) else tuple(f"part{i}" for i in range(len(dims)))
        return cls(tuple(dims), names)

    @property
    def num_subspaces(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def max_dim(self) -> int:
        return max(self.dims)

    @property
    def offsets(self) -> tuple[int, ...]:
        """Start index of each subspace (prefix sums of dims)."""
        return tuple(int(o) for o in np.concatenate([[0], np.cumsum(self.dims)[:-1]]))

    def check_index(self, m: int) -> int:
        if not 0 <= m < self.num_subspaces:
            raise ConfigurationError(
                f"Subspace index {m} out of range 0..{self.num_subspaces - 1}", index=m
            )
        return m

    def block(self, m: int) -> slice:
        """Coordinates of subspace ``m``."""
        start = self.offsets[self.check_index(m)]
        return slice(start, start + self.dims[m])

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigurationError(f"Unknown subspace {name!r}", subspace=name) from None

    def selector(self, m: int) -> np.ndarray:
        """Diagonal of D_m: 1 on subspace ``m``, 0 elsewhere."""
        diag = np.zeros(self.total_dim)
        diag[self.block(m)] = 1.0
        return diag

    def selector_complement(self, m: int) -> np.ndarray:
        """Diagonal of D_-m: the complement of ``selector(m)``."""
        return 1.0 - self.selector(m)

    def subspace_labels(self) -> np.ndarray:
        """Owning subspace of each coordinate."""
        return np.repeat(np.arange(self.num_subspaces), self.dims)

    def to_dict(self) -> dict[str, list]:
        return {"dims": list(self.dims), "names": list(self.names)}
