"""Compressive partitions of a permutation and their quotients.

A partition of [k] into consecutive intervals is compressive for ``tau`` when
``tau`` shifts every block rigidly: ``tau(a) = a + c_i`` for all ``a`` in
block ``i``.  Collapsing each block to a point gives the quotient pattern.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .errors import ContractViolation
from .perm import Permutation, as_perm


@dataclass(frozen=True)
class CompressivePartition:
    """Blocks as 1-based inclusive ``(start, end)`` pairs plus their shifts."""

    blocks: tuple[tuple[int, int], ...]
    shifts: tuple[int, ...]

    def __post_init__(self):
        if len(self.blocks) != len(self.shifts):
            raise ValueError("one shift per block is required")
        expect = 1
        for start, end in self.blocks:
            if start != expect or end < start:
                raise ValueError(f"blocks {self.blocks} are not consecutive intervals from 1")
            expect = end + 1

    @classmethod
    def from_blocks(cls, tau, blocks) -> "CompressivePartition":
        """Build from blocks, computing shifts; raises if ``tau`` breaks a block."""
        tau = as_perm(tau)
        blocks = tuple((int(s), int(e)) for s, e in blocks)
        if not blocks or blocks[-1][1] != len(tau):
            raise ContractViolation(f"blocks {blocks} do not cover [1..{len(tau)}]")
        shifts = tuple(tau[s - 1] - s for s, _ in blocks)
        part = cls(blocks, shifts)
        part.check(tau)
        return part

    @property
    def size(self) -> int:
        return len(self.blocks)

    def block_sizes(self) -> tuple[int, ...]:
        return tuple(e - s + 1 for s, e in self.blocks)

    def check(self, tau) -> None:
        tau = as_perm(tau)
        if self.blocks[-1][1] != len(tau):
            raise ContractViolation(f"partition covers [1..{self.blocks[-1][1]}], tau has order {len(tau)}")
        for (s, e), c in zip(self.blocks, self.shifts):
            for a in range(s, e + 1):
                if tau[a - 1] != a + c:
                    raise ContractViolation(
                        f"block {s}..{e} is not shifted rigidly by {c} under {tau}")

    def as_lists(self) -> list[list[int]]:
        return [list(range(s, e + 1)) for s, e in self.blocks]


def _compositions(k: int):
    for cuts in itertools.product((False, True), repeat=k - 1):
        blocks, start = [], 1
        for pos, cut in enumerate(cuts, start=1):
            if cut:
                blocks.append((start, pos))
                start = pos + 1
        blocks.append((start, k))
        yield tuple(blocks)


def enumerate_compressive(tau) -> list[CompressivePartition]:
    """All compressive partitions of ``tau``; the singleton partition comes first."""
    return list(_enumerate_cached(as_perm(tau)))


@lru_cache(maxsize=4096)
def _enumerate_cached(tau: Permutation) -> tuple[CompressivePartition, ...]:
    k = len(tau)
    out = []
    # all-cuts composition (singletons) is the last product element; walk in reverse
    for blocks in reversed(list(_compositions(k))):
        shifts = tuple(tau[s - 1] - s for s, _ in blocks)
        if all(tau[a - 1] == a + c for (s, e), c in zip(blocks, shifts) for a in range(s, e + 1)):
            out.append(CompressivePartition(blocks, shifts))
    return tuple(out)


def quotient(tau, part: CompressivePartition, *, representative: str = "left") -> Permutation:
    """Pattern left after shrinking every block of ``part`` to a single point."""
    tau = as_perm(tau)
    part.check(tau)
    if representative == "left":
        picks = [s - 1 for s, _ in part.blocks]
    elif representative == "right":
        picks = [e - 1 for _, e in part.blocks]
    else:
        raise ValueError("representative must be 'left' or 'right'")
    return tau.restrict(picks)
