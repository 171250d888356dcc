"""
Latent mixing: assemble a source vector from subspaces of several sources.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from app.core.errors import ConfigurationError, ShapeError
from app.model.layout import SubspaceLayout
from app.tensor import ops
from app.tensor.tensor import Tensor, as_tensor


class MixSpec(BaseModel):
    """
    Which source supplies each subspace.

    Either a single selected subspace ``m`` (taken from the target, every
    other subspace from the input) or an explicit per-subspace source
    assignment for multi-way mixing.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    m: int | None = None
    assignment: tuple[int, ...] | None = None

    @model_validator(mode="after")
    def exactly_one_form(self) -> MixSpec:
        if (self.m is None) == (self.assignment is None):
            raise ValueError("MixSpec needs exactly one of 'm' or 'assignment'")
        return self

    @classmethod
    def select(cls, m: int) -> MixSpec:
        return cls(m=m)

    @classmethod
    def multiway(cls, assignment: Sequence[int]) -> MixSpec:
        return cls(assignment=tuple(int(j) for j in assignment))

    def resolve(self, layout: SubspaceLayout, num_sources: int) -> tuple[int, ...]:
        """Source index of every subspace, validated against the layout."""
        if self.m is not None:
            layout.check_index(self.m)
            if num_sources != 2:
                raise ConfigurationError(f"Single-subspace mixing needs 2 sources, got {num_sources}")
            return tuple(1 if i == self.m else 0 for i in range(layout.num_subspaces))
        assert self.assignment is not None
        if len(self.assignment) != layout.num_subspaces:
            raise ConfigurationError(
                f"Assignment covers {len(self.assignment)} subspaces, layout has {layout.num_subspaces}"
            )
        for j in self.assignment:
            if not 0 <= j < num_sources:
                raise ConfigurationError(f"Assignment source {j} out of range 0..{num_sources - 1}")
        return self.assignment


def mix_sources(
    sources: Sequence[Tensor | np.ndarray],
    spec: MixSpec,
    layout: SubspaceLayout,
) -> Tensor:
    """
    Mix source vectors subspace by subspace.

    With ``MixSpec.select(m)`` and ``sources = (s_in, s_t)`` this is
    D_-m s_in + D_m s_t; a multi-way spec copies subspace i from
    ``sources[assignment[i]]``. Works on vectors (d,) and batches (B, d).

    Raises:
        ShapeError: If the sources differ in shape or length from d
        ConfigurationError: If the spec does not fit the layout
    """
    tensors = [as_tensor(s) for s in sources]
    if not tensors:
        raise ConfigurationError("mix_sources needs at least one source")
    shape = tensors[0].shape
    if any(t.shape != shape for t in tensors) or shape[-1:] != (layout.total_dim,):
        raise ShapeError(
            f"mix_sources: source shapes {[t.shape for t in tensors]} must all end in d={layout.total_dim}",
            shapes=[t.shape for t in tensors],
        )
    owners = spec.resolve(layout, len(tensors))

    mixed: Tensor | None = None
    for j, source in enumerate(tensors):
        selector = np.zeros(layout.total_dim)
        for i, owner in enumerate(owners):
            if owner == j:
                selector[layout.block(i)] = 1.0
        if not selector.any():
            continue
        term = ops.mul(source, selector)
        mixed = term if mixed is None else ops.add(mixed, term)
    assert mixed is not None
    return mixed
