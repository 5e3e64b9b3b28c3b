"""Algebraic GF(2) dynamical systems: harmonic-configuration groups on the
plane and on finite tori, with exact Haar cylinder measures.

The flagship system is Ledrappier's: configurations in {0,1}^(Z^2) where the
value at every site equals the mod-2 sum of its four lattice neighbours,
i.e. the 5-point stencil {(0,0),(1,0),(-1,0),(0,1),(0,-1)} sums to zero
everywhere.  The Haar measure of a cylinder event is 2^(-r) where r is the
rank of the constrained coordinate functionals on the group, or 0 when the
prescribed bits violate a linear relation.

Exact measures are computed by the window method: all relations among a site
set are spanned by stencil translates supported in the dilated bounding box
of the sites.  The implementation parameterizes the window restriction group
by free boundary cells and propagates generator masks across the window,
which yields the same relation space (finite duality between the translate
span and the restriction group) at a fraction of the elimination cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import gf2
from .gf2 import BitMatrix, BitVector
from .measure import MeasureValue
from .rng import random_bits, substream

Site = Union[int, tuple[int, int]]

DEFAULT_WINDOW_CAP_CELLS = 512 * 512


class WindowCapError(RuntimeError):
    """Constellation exceeds the exact window; use Monte Carlo instead."""


class UnsupportedPatternError(RuntimeError):
    """The relation pattern does not admit the requested kernel algorithm."""


@dataclass(frozen=True)
class RelationPattern:
    """Finite GF(2) stencil on Z^2; configurations must sum to 0 mod 2 on
    every translate of the support."""

    support: frozenset[tuple[int, int]]

    def __post_init__(self):
        if not self.support:
            raise ValueError("pattern support must be nonempty")
        for p in self.support:
            if not (isinstance(p, tuple) and len(p) == 2):
                raise ValueError("pattern offsets must be (i, j) pairs")

    @property
    def i_range(self) -> tuple[int, int]:
        xs = [p[0] for p in self.support]
        return min(xs), max(xs)

    @property
    def j_range(self) -> tuple[int, int]:
        ys = [p[1] for p in self.support]
        return min(ys), max(ys)

    def top_offset(self) -> tuple[int, int]:
        """Scan-order maximum of the support (row-major, j then i)."""
        return max(self.support, key=lambda p: (p[1], p[0]))

    def is_propagating(self) -> bool:
        """True when the topmost support row holds a single cell, so a new
        lattice row is determined by the previous ones."""
        _, jmax = self.j_range
        return sum(1 for p in self.support if p[1] == jmax) == 1


LEDRAPPIER_PATTERN = RelationPattern(
    frozenset({(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)})
)


@dataclass(frozen=True)
class AlgebraicSystem:
    """The Z^2 shift action on the group of pattern-harmonic configurations."""

    pattern: RelationPattern = LEDRAPPIER_PATTERN
    window_cap_cells: int = DEFAULT_WINDOW_CAP_CELLS


def ledrappier_system(window_cap_cells: int = DEFAULT_WINDOW_CAP_CELLS) -> AlgebraicSystem:
    return AlgebraicSystem(LEDRAPPIER_PATTERN, window_cap_cells)


def site_add(site: Site, shift: Site) -> Site:
    if isinstance(site, int):
        if not isinstance(shift, int):
            raise TypeError("1-d site shifted by non-integer")
        return site + shift
    return (site[0] + shift[0], site[1] + shift[1])


@dataclass(frozen=True)
class CylinderConstraint:
    """Finite set of (site, bit) requirements; sites pairwise distinct.

    Sites are ints (events on Z, Bernoulli systems) or (i, j) pairs (events
    on Z^2, algebraic systems).
    """

    sites: tuple[Site, ...]
    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.sites) != len(self.bits):
            raise ValueError("sites and bits must have equal length")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("sites must be pairwise distinct")
        for b in self.bits:
            if b not in (0, 1):
                raise ValueError("bits must be 0 or 1")
        dims = set()
        for s in self.sites:
            if isinstance(s, int):
                dims.add(1)
            elif (isinstance(s, tuple) and len(s) == 2
                  and all(isinstance(x, int) for x in s)):
                dims.add(2)
            else:
                raise ValueError(f"site {s!r} is neither an int nor an (i, j) pair")
        if len(dims) > 1:
            raise ValueError("sites must share one dimension")

    @classmethod
    def of(cls, pairs: Iterable[tuple[Site, int]]) -> "CylinderConstraint":
        pairs = list(pairs)
        sites = tuple(tuple(s) if isinstance(s, (list, tuple)) else s for s, _ in pairs)
        return cls(sites, tuple(b for _, b in pairs))

    def translated(self, shift: Site) -> "CylinderConstraint":
        return CylinderConstraint(tuple(site_add(s, shift) for s in self.sites), self.bits)

    def to_json(self) -> dict:
        sites = [list(s) if isinstance(s, tuple) else s for s in self.sites]
        return {"sites": sites, "bits": list(self.bits)}

    @classmethod
    def from_json(cls, obj: dict) -> "CylinderConstraint":
        if not isinstance(obj, dict) or "sites" not in obj or "bits" not in obj:
            raise ValueError("constellation JSON needs 'sites' and 'bits'")
        sites = []
        for s in obj["sites"]:
            if isinstance(s, int):
                sites.append(s)
            elif isinstance(s, (list, tuple)) and len(s) == 2:
                sites.append((int(s[0]), int(s[1])))
            else:
                raise ValueError(f"bad site {s!r}")
        return cls(tuple(sites), tuple(int(b) for b in obj["bits"]))


def merge_site_bits(pairs: Iterable[tuple[Site, int]]) -> Optional[CylinderConstraint]:
    """Combine (site, bit) requirements; None signals a contradiction
    (the event is empty and has measure exactly 0)."""
    seen: dict[Site, int] = {}
    for site, bit in pairs:
        site = tuple(site) if isinstance(site, (list, tuple)) else site
        if site in seen:
            if seen[site] != bit:
                return None
        else:
            seen[site] = bit
    return CylinderConstraint(tuple(seen.keys()), tuple(seen.values()))


def merge_events(events: Sequence[CylinderConstraint],
                 shifts: Sequence[Site]) -> Optional[CylinderConstraint]:
    pairs = []
    for ev, sh in zip(events, shifts):
        for s, b in zip(ev.sites, ev.bits):
            pairs.append((site_add(s, sh), b))
    return merge_site_bits(pairs)


# ---------------------------------------------------------------------------
# Window method

def _window_masks(pattern: RelationPattern,
                  sites: Sequence[tuple[int, int]],
                  cap_cells: int) -> tuple[list[int], int]:
    """Generator masks of the coordinate functionals at `sites`.

    The restriction of the configuration group to the dilated bounding box
    is parameterized by free cells; every box cell carries the GF(2) mask of
    free generators it depends on.  Returns (mask per site, generator count).
    """
    i_lo, i_hi = pattern.i_range
    j_lo, j_hi = pattern.j_range
    pad_i = i_hi - i_lo
    pad_j = j_hi - j_lo
    xs = [s[0] for s in sites]
    ys = [s[1] for s in sites]
    i0, i1 = min(xs) - pad_i, max(xs) + pad_i
    j0, j1 = min(ys) - pad_j, max(ys) + pad_j
    w = i1 - i0 + 1
    h = j1 - j0 + 1
    if w * h > cap_cells:
        raise WindowCapError(
            f"window {w}x{h} exceeds the cap of {cap_cells} cells; "
            "use Monte Carlo (mc_cylinder_measure) or a dyadic constellation"
        )
    ti, tj = pattern.top_offset()
    rest = sorted(self_p for self_p in pattern.support if self_p != (ti, tj))
    sites_by_row: dict[int, list[tuple[int, int]]] = {}
    for idx, (x, y) in enumerate(sites):
        sites_by_row.setdefault(y, []).append((x, idx))
    site_masks: list[int] = [0] * len(sites)
    ledrappier = pattern == LEDRAPPIER_PATTERN

    rows: dict[int, list[int]] = {}
    gen = 0
    depth = pad_j  # rows of look-back the stencil needs
    for y in range(j0, j1 + 1):
        if ledrappier and y >= j0 + 2 and w >= 3:
            prev = rows[y - 1]
            prev2 = rows[y - 2]
            mid = [a ^ b ^ c ^ d for a, b, c, d in
                   zip(prev2[1:-1], prev[:-2], prev[1:-1], prev[2:])]
            row = [1 << gen] + mid + [1 << (gen + 1)]
            gen += 2
        else:
            row = [0] * w
            for x in range(i0, i1 + 1):
                cells = [(x + pi - ti, y + pj - tj) for pi, pj in rest]
                inside = all(i0 <= cx <= i1 and j0 <= cy <= j1 for cx, cy in cells)
                if inside:
                    m = 0
                    for cx, cy in cells:
                        m ^= row[cx - i0] if cy == y else rows[cy][cx - i0]
                    row[x - i0] = m
                else:
                    row[x - i0] = 1 << gen
                    gen += 1
        rows[y] = row
        for x, idx in sites_by_row.get(y, ()):
            site_masks[idx] = row[x - i0]
        stale = y - depth
        if stale in rows:
            del rows[stale]
    return site_masks, gen


def _site_matrix(masks: Sequence[int], n_gens: int) -> BitMatrix:
    return BitMatrix(len(masks), n_gens, tuple(masks))


def _mask_transpose(masks: Sequence[int], n_gens: int) -> BitMatrix:
    cols = [0] * n_gens
    for s, m in enumerate(masks):
        while m:
            low = m & -m
            cols[low.bit_length() - 1] |= 1 << s
            m ^= low
    return BitMatrix(n_gens, len(masks), tuple(cols))


def _dyadic_scale(sites: Sequence[tuple[int, int]]) -> int:
    """Largest k with all pairwise site differences divisible by 2^k."""
    x0, y0 = sites[0]
    k = 63
    for x, y in sites[1:]:
        for d in (x - x0, y - y0):
            if d:
                k = min(k, (d & -d).bit_length() - 1)
    return 0 if len(sites) < 2 else k


def _normalized_2d_sites(c: CylinderConstraint) -> list[tuple[int, int]]:
    sites = []
    for s in c.sites:
        if isinstance(s, int):
            raise ValueError("algebraic constraints need (i, j) sites")
        sites.append(s)
    return sites


def relation_space(system: AlgebraicSystem,
                   sites: Sequence[tuple[int, int]],
                   allow_dyadic: bool = False) -> list[BitVector]:
    """Basis of GF(2) dependencies among the coordinate functionals at
    `sites` that hold identically on the configuration group.

    Vectors are indexed by the order of `sites`.
    """
    sites = [tuple(s) for s in sites]
    if len(set(sites)) != len(sites):
        raise ValueError("sites must be distinct")
    if not sites:
        return []
    try:
        masks, n_gens = _window_masks(system.pattern, sites, system.window_cap_cells)
    except WindowCapError:
        if not allow_dyadic:
            raise
        k = _dyadic_scale(sites)
        if k < 1:
            raise
        x0, y0 = sites[0]
        reduced = [((x - x0) >> k, (y - y0) >> k) for x, y in sites]
        masks, n_gens = _window_masks(system.pattern, reduced, system.window_cap_cells)
    return gf2.nullspace(_mask_transpose(masks, n_gens))


def cylinder_measure(system: AlgebraicSystem, c: CylinderConstraint,
                     allow_dyadic: bool = True) -> MeasureValue:
    """Exact Haar measure of the cylinder event prescribed by `c`.

    Returns 2^(-r) with r the rank of the constrained coordinate functionals
    on the group, or exactly 0 when the bits violate a relation.  Large
    constellations whose pairwise differences share a power of two are
    rescaled first (the stencil replicates at all dyadic scales); the result
    is then flagged with meta["method"] == "dyadic".
    """
    sites = _normalized_2d_sites(c)
    if not sites:
        return MeasureValue.of_exact(1, method="window")
    meta: dict = {"method": "window"}
    try:
        masks, n_gens = _window_masks(system.pattern, sites, system.window_cap_cells)
    except WindowCapError:
        if not allow_dyadic:
            raise
        k = _dyadic_scale(sites)
        if k < 1:
            raise
        x0, y0 = sites[0]
        reduced = [((x - x0) >> k, (y - y0) >> k) for x, y in sites]
        masks, n_gens = _window_masks(system.pattern, reduced, system.window_cap_cells)
        meta = {"method": "dyadic", "scale": 1 << k}
    m = _site_matrix(masks, n_gens)
    b = BitVector.from_bits(c.bits)
    solution = gf2.solve_affine(m, b)
    if solution is None:
        return MeasureValue(exact=Fraction(0), meta=meta)
    r = gf2.rank(m)
    return MeasureValue(exact=Fraction(1, 1 << r), meta=meta)


# ---------------------------------------------------------------------------
# Finite torus kernels

@dataclass(frozen=True)
class TorusKernel:
    """Basis of the pattern-harmonic subgroup of a w x h torus.

    Basis elements are configurations flattened row-major: bit j*width + i
    is the value at site (i, j).
    """

    width: int
    height: int
    basis: tuple[BitVector, ...]
    pattern: RelationPattern = LEDRAPPIER_PATTERN

    @property
    def dim(self) -> int:
        return len(self.basis)

    def site_bit_index(self, site: tuple[int, int]) -> int:
        i, j = site[0] % self.width, site[1] % self.height
        return j * self.width + i

    def site_mask(self, site: tuple[int, int]) -> int:
        """Generator mask of the coordinate functional at `site`."""
        idx = self.site_bit_index(site)
        m = 0
        for g, vec in enumerate(self.basis):
            m |= ((vec.bits >> idx) & 1) << g
        return m


def transfer_matrix(pattern: RelationPattern, w: int) -> BitMatrix:
    """Row-to-row transfer map on `depth` stacked rows of width w.

    State (r[y-depth], ..., r[y-1]) maps to (r[y-depth+1], ..., r[y]); the
    new row is solved from the unique topmost stencil cell.
    """
    if not pattern.is_propagating():
        raise UnsupportedPatternError(
            "transfer kernel needs a pattern with a single topmost cell"
        )
    ti, tj = pattern.top_offset()
    j_lo, j_hi = pattern.j_range
    depth = j_hi - j_lo
    if depth == 0:
        raise UnsupportedPatternError("pattern must span at least two rows")
    n = depth * w
    rows = []
    for b in range(depth - 1):
        for i in range(w):
            rows.append(1 << ((b + 1) * w + i))
    for i in range(w):
        acc = 0
        for pi, pj in pattern.support:
            if (pi, pj) == (ti, tj):
                continue
            block = pj - j_lo
            col = (i - ti + pi) % w
            acc ^= 1 << (block * w + col)
        rows.append(acc)
    return BitMatrix(n, n, tuple(rows))


def _next_row_bits(pattern: RelationPattern, w: int,
                   history: Sequence[int]) -> int:
    """New row from the last `depth` rows, each a w-bit int."""
    ti, tj = pattern.top_offset()
    j_lo, _ = pattern.j_range
    out = 0
    for i in range(w):
        v = 0
        for pi, pj in pattern.support:
            if (pi, pj) == (ti, tj):
                continue
            row = history[pj - j_lo]
            v ^= (row >> ((i - ti + pi) % w)) & 1
        out |= v << i
    return out


def torus_kernel(system: AlgebraicSystem, w: int, h: int) -> TorusKernel:
    """Harmonic configurations of the w x h torus via the transfer matrix.

    Configurations correspond to fixed points of the h-th transfer power.
    """
    if w < 3 or h < 3:
        raise ValueError("torus dimensions must be at least 3")
    pattern = system.pattern
    t = transfer_matrix(pattern, w)
    depth = t.rows // w
    fixed = gf2.nullspace(gf2.mat_add(gf2.mat_pow(t, h), BitMatrix.identity(t.rows)))
    basis = []
    wmask = (1 << w) - 1
    for state in fixed:
        history = [(state.bits >> (b * w)) & wmask for b in range(depth)]
        grid_rows = []
        for _ in range(h):
            new = _next_row_bits(pattern, w, history)
            grid_rows.append(new)
            history = history[1:] + [new]
        bits = 0
        for j, row in enumerate(grid_rows):
            bits |= row << (j * w)
        basis.append(BitVector(w * h, bits))
    return TorusKernel(w, h, tuple(basis), pattern)


def kernel_dimension_bruteforce(system: AlgebraicSystem, w: int, h: int) -> int:
    """Exhaustive kernel dimension for tiny tori (2^(w*h) enumeration)."""
    if w * h > 20:
        raise ValueError("brute force limited to w*h <= 20")
    support = sorted(system.pattern.support)
    count = 0
    for cfg in range(1 << (w * h)):
        ok = True
        for j in range(h):
            for i in range(w):
                s = 0
                for pi, pj in support:
                    s ^= (cfg >> (((j + pj) % h) * w + ((i + pi) % w))) & 1
                if s:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            count += 1
    return count.bit_length() - 1  # count is a power of two


def sample_configuration(kernel: TorusKernel, seed: int) -> np.ndarray:
    """Uniform sample from the kernel subgroup; (height, width) uint8 array,
    deterministic for a given seed."""
    gen = substream(seed, "config")
    combo = random_bits(gen, kernel.dim)
    bits = 0
    while combo:
        low = combo & -combo
        bits ^= kernel.basis[low.bit_length() - 1].bits
        combo ^= low
    n = kernel.width * kernel.height
    raw = bits.to_bytes((n + 7) // 8, "little")
    arr = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:n]
    return arr.reshape(kernel.height, kernel.width)


def grid_satisfies_pattern(pattern: RelationPattern, grid: np.ndarray) -> bool:
    """Check the defining relation at every site (with wraparound)."""
    acc = np.zeros_like(grid)
    for pi, pj in pattern.support:
        acc ^= np.roll(grid, shift=(-pj, -pi), axis=(0, 1))
    return not acc.any()


_MC_CHUNK = 8192


def mc_cylinder_measure(kernel: TorusKernel, c: CylinderConstraint,
                        n: int, seed: int) -> MeasureValue:
    """Monte-Carlo estimate of the cylinder probability on the torus.

    Deterministic for a given seed: samples are drawn in fixed-size chunks
    from substreams keyed by (seed, chunk index) and reduced in order, so
    the result does not depend on worker count.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    sites = _normalized_2d_sites(c)
    wrapped = [(x % kernel.width, y % kernel.height) for x, y in sites]
    if len(set(wrapped)) != len(wrapped):
        raise ValueError("constellation does not embed in the torus")
    if not sites:
        return MeasureValue.of_estimate(1.0, 0.0, n)
    dim = kernel.dim
    masks = [kernel.site_mask(s) for s in sites]
    site_mat = np.zeros((max(dim, 1), len(sites)), dtype=np.int32)
    for col, m in enumerate(masks):
        while m:
            low = m & -m
            site_mat[low.bit_length() - 1, col] = 1
            m ^= low
    target = np.asarray(c.bits, dtype=np.int32)
    hits = 0
    done = 0
    chunk_idx = 0
    while done < n:
        count = min(_MC_CHUNK, n - done)
        gen = substream(seed, "mc", chunk_idx)
        if dim == 0:
            vals = np.zeros((count, len(sites)), dtype=np.int32)
        else:
            combos = gen.integers(0, 2, size=(count, dim), dtype=np.int8)
            vals = (combos.astype(np.int32) @ site_mat) & 1
        hits += int(np.count_nonzero(np.all(vals == target, axis=1)))
        done += count
        chunk_idx += 1
    p = hits / n
    stderr = math.sqrt(p * (1.0 - p) / n)
    return MeasureValue.of_estimate(p, stderr, n, torus=[kernel.width, kernel.height], seed=seed)


def default_torus_for(system: AlgebraicSystem, c: CylinderConstraint,
                      min_size: int = 12, max_tries: int = 24) -> TorusKernel:
    """Pick a torus suitable for Monte-Carlo estimation of `c`.

    Power-of-two sizes carry extra wrapped relations, so the default has an
    odd factor and at least 4x the constellation diameter; the choice is
    validated by matching the evaluation rank at the sites against the
    plane rank, bumping the size until they agree.
    """
    sites = _normalized_2d_sites(c)
    if sites:
        xs = [s[0] for s in sites]
        ys = [s[1] for s in sites]
        diam = max(max(xs) - min(xs), max(ys) - min(ys))
    else:
        diam = 1
    size = max(min_size, 4 * diam)
    masks, n_gens = _window_masks(system.pattern, sites or [(0, 0)], system.window_cap_cells)
    plane_rank = gf2.rank(_site_matrix(masks, n_gens))
    last = None
    for _ in range(max_tries):
        if size & (size - 1) == 0:  # pure power of two
            size += 1
            continue
        kernel = torus_kernel(system, size, size)
        last = kernel
        if not sites:
            return kernel
        tmasks = [kernel.site_mask(s) for s in sites]
        trank = gf2.rank(BitMatrix(len(tmasks), max(kernel.dim, 1),
                                   tuple(tmasks)))
        if trank == plane_rank:
            return kernel
        size += 1
    raise RuntimeError(
        f"no torus up to size {size} matches the plane rank for {c}; last dim {last.dim if last else '?'}"
    )


# ---------------------------------------------------------------------------
# Bernoulli shift on Z (Haar measure on {0,1}^Z)

def bernoulli_cylinder_measure(
        c: Union[CylinderConstraint, Iterable[tuple[int, int]]]) -> MeasureValue:
    """Exact measure of a cylinder of the full 2-shift: 2^(-#distinct sites),
    or 0 when one site is required to take both values."""
    if isinstance(c, CylinderConstraint):
        pairs = list(zip(c.sites, c.bits))
    else:
        pairs = list(c)
    merged = merge_site_bits(pairs)
    if merged is None:
        return MeasureValue.of_exact(0)
    return MeasureValue.of_exact(Fraction(1, 1 << len(merged.sites)))


def homoclinic_decay(b: CylinderConstraint, flip_site: int, n: int) -> MeasureValue:
    """mu(T^-n S T^n B symm-diff B) for S the flip of one coordinate and T
    the Bernoulli shift (events translate by +1 per application of T).

    The conjugated flip acts on coordinate flip_site - n; once that leaves
    the support of B the difference is exactly empty.
    """
    for s in b.sites:
        if not isinstance(s, int):
            raise ValueError("homoclinic check needs a constraint on Z sites")
    moved = flip_site - n
    if moved in b.sites:
        # B and its flipped copy demand opposite bits at the moved site.
        return MeasureValue.of_exact(Fraction(2, 1 << len(b.sites)))
    return MeasureValue.of_exact(0)


# ---------------------------------------------------------------------------
# Correlation oracles

class LedrappierOracle:
    """Exact k-fold correlation oracle for an algebraic plane system."""

    def __init__(self, system: Optional[AlgebraicSystem] = None, allow_dyadic: bool = True):
        self.system = system or ledrappier_system()
        self.allow_dyadic = allow_dyadic

    def event_measure(self, event: CylinderConstraint) -> MeasureValue:
        return cylinder_measure(self.system, event, self.allow_dyadic)

    def intersection_measure(self, shifts: Sequence[Site],
                             events: Sequence[CylinderConstraint]) -> MeasureValue:
        merged = merge_events(events, shifts)
        if merged is None:
            return MeasureValue.of_exact(0, contradiction=True)
        return cylinder_measure(self.system, merged, self.allow_dyadic)

    def relation_certificate(self, shifts: Sequence[Site],
                             events: Sequence[CylinderConstraint]) -> dict:
        """Explicit GF(2) relations among the merged constellation sites."""
        merged = merge_events(events, shifts)
        if merged is None:
            return {"sites": [], "relations": [], "contradiction": True}
        sites = _normalized_2d_sites(merged)
        rels = relation_space(self.system, sites, allow_dyadic=True)
        return {
            "sites": [list(s) for s in sites],
            "relations": [v.to_list() for v in rels],
        }


class BernoulliOracle:
    """Exact oracle for the full 2-shift; supports negative shifts."""

    def event_measure(self, event: CylinderConstraint) -> MeasureValue:
        return bernoulli_cylinder_measure(event)

    def intersection_measure(self, shifts: Sequence[int],
                             events: Sequence[CylinderConstraint]) -> MeasureValue:
        pairs = []
        for ev, sh in zip(events, shifts):
            if not isinstance(sh, int):
                raise TypeError(f"Bernoulli shifts are integers, got {sh!r}")
            for s, b in zip(ev.sites, ev.bits):
                if not isinstance(s, int):
                    raise TypeError(f"Bernoulli events live on Z sites, got {s!r}")
                pairs.append((s + sh, b))
        return bernoulli_cylinder_measure(pairs)


class TorusMonteCarloOracle:
    """Estimated oracle backed by torus-kernel sampling."""

    def __init__(self, kernel: TorusKernel, samples: int, seed: int):
        self.kernel = kernel
        self.samples = samples
        self.seed = seed

    def event_measure(self, event: CylinderConstraint) -> MeasureValue:
        return mc_cylinder_measure(self.kernel, event, self.samples, self.seed)

    def intersection_measure(self, shifts: Sequence[Site],
                             events: Sequence[CylinderConstraint]) -> MeasureValue:
        merged = merge_events(events, shifts)
        if merged is None:
            return MeasureValue.of_exact(0, contradiction=True)
        return mc_cylinder_measure(self.kernel, merged, self.samples, self.seed)


# ---------------------------------------------------------------------------
# Grid import/export

def grid_to_json(grid: np.ndarray) -> dict:
    h, w = grid.shape
    rows = ["".join("1" if v else "0" for v in grid[j]) for j in range(h)]
    return {"width": int(w), "height": int(h), "rows": rows}


def grid_from_json(obj: dict) -> np.ndarray:
    w, h = int(obj["width"]), int(obj["height"])
    rows = obj["rows"]
    if len(rows) != h or any(len(r) != w for r in rows):
        raise ValueError("grid JSON rows do not match declared dimensions")
    return np.array([[1 if ch == "1" else 0 for ch in r] for r in rows], dtype=np.uint8)


def grid_to_pbm(grid: np.ndarray) -> str:
    """Plain PBM; configuration bit 0 renders dark (PBM 1 = black)."""
    h, w = grid.shape
    lines = [f"P1", f"# bit 0 = dark, bit 1 = light", f"{w} {h}"]
    for j in range(h):
        lines.append(" ".join("0" if v else "1" for v in grid[j]))
    return "\n".join(lines) + "\n"


def grid_from_pbm(text: str) -> np.ndarray:
    tokens: list[str] = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise ValueError("only plain PBM (P1) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    vals = [int(t) for t in tokens[3:]]
    if len(vals) != w * h:
        raise ValueError("PBM payload does not match dimensions")
    arr = 1 - np.array(vals, dtype=np.uint8).reshape(h, w)
    return arr
