"""Cutting-and-stacking rank-one transformations realized as symbolic words.

A spec lists, per stage, the number of columns the tower is cut into and the
spacer counts placed on top of each column.  Reading the orbit of a point
through the stage-K tower yields a word over the stage-K level alphabet plus
a spacer symbol; correlations are estimated as Birkhoff frequencies along
that word.

Measures here are always estimates with standard errors, never exact; the
spacer symbols carry measure, so reported frequencies are relative to the
full normalized space including spacers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .measure import MeasureValue
from .rng import substream

SPACER = -1


@dataclass(frozen=True)
class RankOneSpec:
    """Cut counts and spacer arrays, one row per stage.

    Tower heights follow h_{n+1} = r_n h_n + sum_i s_{n,i} with h_0 = 1.
    """

    cuts: tuple[int, ...]
    spacers: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.cuts) != len(self.spacers):
            raise ValueError("one spacer row per stage required")
        for r, row in zip(self.cuts, self.spacers):
            if r < 2:
                raise ValueError("each stage must cut into at least 2 columns")
            if len(row) != r:
                raise ValueError("spacer row length must equal the cut count")
            if any(s < 0 for s in row):
                raise ValueError("spacer counts must be nonnegative")

    @property
    def stages(self) -> int:
        return len(self.cuts)

    def to_json(self) -> dict:
        return {"cuts": list(self.cuts), "spacers": [list(r) for r in self.spacers]}

    @classmethod
    def from_json(cls, obj: dict) -> "RankOneSpec":
        return cls(tuple(int(c) for c in obj["cuts"]),
                   tuple(tuple(int(s) for s in row) for row in obj["spacers"]))


def staircase_spec(stages: int) -> RankOneSpec:
    """The standard mixing staircase: r_n = n + 2, spacers 0, 1, ..., r_n - 1."""
    cuts = tuple(n + 2 for n in range(stages))
    spacers = tuple(tuple(range(r)) for r in cuts)
    return RankOneSpec(cuts, spacers)


def chacon_spec(stages: int) -> RankOneSpec:
    """Three columns, one spacer over the middle column."""
    return RankOneSpec((3,) * stages, ((0, 1, 0),) * stages)


def doubling_spec(stages: int) -> RankOneSpec:
    return RankOneSpec((2,) * stages, ((0, 0),) * stages)


def single_spacer_spec(stages: int) -> RankOneSpec:
    """Two columns with one spacer on the second: heights 2 h + 1."""
    return RankOneSpec((2,) * stages, ((0, 1),) * stages)


PRESETS = {
    "staircase": staircase_spec,
    "chacon": chacon_spec,
    "doubling": doubling_spec,
    "single_spacer": single_spacer_spec,
}


def preset_spec(name: str, stages: int) -> RankOneSpec:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name](stages)


def tower_heights(spec: RankOneSpec) -> list[int]:
    """h_0 = 1 and h_{n+1} = r_n h_n + sum of the stage-n spacers."""
    heights = [1]
    for r, row in zip(spec.cuts, spec.spacers):
        heights.append(r * heights[-1] + sum(row))
    return heights


@dataclass(frozen=True)
class SymbolicWord:
    """Prefix of the tower reading over stage-K level symbols (spacer = -1)."""

    stage: int
    height: int
    symbols: np.ndarray

    @property
    def length(self) -> int:
        return int(self.symbols.shape[0])

    def level_counts(self) -> dict[int, int]:
        vals, counts = np.unique(self.symbols, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}

    def to_rle_json(self) -> dict:
        runs: list[list[int]] = []
        sym = self.symbols
        start = 0
        for i in range(1, len(sym) + 1):
            if i == len(sym) or sym[i] != sym[start]:
                runs.append([int(sym[start]), i - start])
                start = i
        return {"stage": self.stage, "height": self.height,
                "length": self.length, "runs": runs}


def generate_word(spec: RankOneSpec, stage: int, max_length: int) -> SymbolicWord:
    """Deterministic concatenation expansion of the stage-`stage` block.

    Expands through later stages until the block covers `max_length`
    symbols, then truncates.  Rejects lengths below the stage height and
    lengths the spec's stages cannot reach.
    """
    heights = tower_heights(spec)
    if not 0 <= stage <= spec.stages:
        raise ValueError(f"stage must be within 0..{spec.stages}")
    h_k = heights[stage]
    if max_length < h_k:
        raise ValueError(f"max_length {max_length} is below the stage height {h_k}")
    block = np.arange(h_k, dtype=np.int32)
    for n in range(stage, spec.stages):
        if block.shape[0] >= max_length:
            break
        parts = []
        for s in spec.spacers[n]:
            parts.append(block)
            if s:
                parts.append(np.full(s, SPACER, dtype=np.int32))
        block = np.concatenate(parts)
    if block.shape[0] < max_length:
        raise ValueError(
            f"spec stages reach only {block.shape[0]} symbols; add stages for {max_length}"
        )
    return SymbolicWord(stage=stage, height=h_k, symbols=block[:max_length].copy())


LevelSet = frozenset

def full_level_set(word: SymbolicWord) -> frozenset:
    return frozenset(range(word.height)) | {SPACER}


def _indicator(word: SymbolicWord, levels: frozenset) -> np.ndarray:
    return np.isin(word.symbols, np.array(sorted(levels), dtype=np.int32))


def _block_bootstrap_stderr(ind: np.ndarray, seed: int, replicates: int = 64,
                            block: Optional[int] = None) -> float:
    """Moving-block bootstrap standard error of the mean of a 0/1 series."""
    m = ind.shape[0]
    if m < 4:
        return 0.5
    if block is None:
        block = max(32, int(math.isqrt(m)))
    block = min(block, m)
    nblocks = m // block
    if nblocks < 2:
        return float(ind.std() / math.sqrt(m))
    # Partial sums let each moving block be summed in O(1).
    csum = np.concatenate([[0], np.cumsum(ind, dtype=np.int64)])
    starts_max = m - block
    gen = substream(seed, "bootstrap", m, block)
    means = np.empty(replicates)
    for r in range(replicates):
        starts = gen.integers(0, starts_max + 1, size=nblocks)
        total = int(np.sum(csum[starts + block] - csum[starts]))
        means[r] = total / (nblocks * block)
    return float(means.std(ddof=1))


def word_correlation(word: SymbolicWord, a: frozenset, b: frozenset, c: frozenset,
                     z: int, w: int, seed: int = 0) -> MeasureValue:
    """Birkhoff frequency of positions i with word[i] in A, word[i+z] in B,
    word[i+w] in C; standard error via moving-block bootstrap."""
    if z < 0 or w < 0:
        raise ValueError("shifts must be nonnegative")
    n = word.length
    m = n - max(z, w)
    if m < 1:
        raise ValueError(f"shifts ({z}, {w}) too large for word length {n}")
    conj = (_indicator(word, a)[:m]
            & _indicator(word, b)[z:z + m]
            & _indicator(word, c)[w:w + m])
    count = int(np.count_nonzero(conj))
    p = count / m
    if count == 0 or count == m:
        stderr = 0.0
    else:
        stderr = _block_bootstrap_stderr(conj, seed)
    return MeasureValue.of_estimate(p, stderr, m, z=z, w=w)


def pair_correlation(word: SymbolicWord, a: frozenset, b: frozenset, z: int,
                     seed: int = 0) -> MeasureValue:
    """Pair correlation as the degenerate triple with the full third event."""
    return word_correlation(word, a, b, full_level_set(word), z, z, seed=seed)


class WordOracle:
    """Correlation oracle over a symbolic word; estimates only.

    Shift tuples are normalized by subtracting the minimum shift, which the
    stationarity of the word reading justifies; events are frozensets of
    level symbols.
    """

    def __init__(self, word: SymbolicWord, seed: int = 0):
        self.word = word
        self.seed = seed

    def event_measure(self, event: frozenset) -> MeasureValue:
        ind = _indicator(self.word, event)
        count = int(np.count_nonzero(ind))
        n = self.word.length
        p = count / n
        stderr = 0.0 if count in (0, n) else _block_bootstrap_stderr(ind, self.seed)
        return MeasureValue.of_estimate(p, stderr, n)

    def intersection_measure(self, shifts: Sequence[int], events: Sequence[frozenset]) -> MeasureValue:
        base = min(shifts)
        offs = [s - base for s in shifts]
        n = self.word.length
        m = n - max(offs)
        if m < 1:
            raise ValueError("shifts too large for word length")
        acc = None
        for off, ev in zip(offs, events):
            ind = _indicator(self.word, ev)[off:off + m]
            acc = ind if acc is None else (acc & ind)
        count = int(np.count_nonzero(acc))
        p = count / m
        stderr = 0.0 if count in (0, m) else _block_bootstrap_stderr(acc, self.seed)
        return MeasureValue.of_estimate(p, stderr, m)

    def correlation_grid(self, events: Sequence[frozenset],
                         pairs: Sequence[tuple[int, int]]) -> list[float]:
        """Point estimates for many (z, w) pairs; one indicator pass, then
        sliding conjunction counts."""
        a, b, c = (_indicator(self.word, e) for e in events)
        n = self.word.length
        out = []
        cache: dict[int, np.ndarray] = {}
        for z, w in pairs:
            m = n - max(z, w)
            if m < 1:
                raise ValueError("grid shifts too large for word length")
            ab = cache.get(z)
            if ab is None or ab.shape[0] < m:
                ab = a[: n - z] & b[z:]
                cache[z] = ab
            count = int(np.count_nonzero(ab[:m] & c[w:w + m]))
            out.append(count / m)
        return out
