"""Shared independent oracles for the test suite.

These deliberately avoid the library's fast paths: measures come from raw
enumeration of window configurations, cluster structure from breadth-first
search in the universal cover.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction

import numpy as np
import pytest


def enumerate_window_group(support, i0, i1, j0, j1):
    """All bit assignments of the box satisfying every stencil translate
    whose support lies fully inside; brute force over 2^(w*h) grids."""
    w = i1 - i0 + 1
    h = j1 - j0 + 1
    assert w * h <= 16, "enumeration oracle limited to 16 cells"
    support = sorted(support)
    translates = []
    for cj in range(j0, j1 + 1):
        for ci in range(i0, i1 + 1):
            cells = [(ci + pi, cj + pj) for pi, pj in support]
            if all(i0 <= x <= i1 and j0 <= y <= j1 for x, y in cells):
                translates.append([(y - j0) * w + (x - i0) for x, y in cells])
    valid = []
    for cfg in range(1 << (w * h)):
        if all(
            sum((cfg >> pos) & 1 for pos in tr) % 2 == 0 for tr in translates
        ):
            valid.append(cfg)
    return valid, w, h


def enumeration_measure(support, sites, bits):
    """Plane cylinder measure by counting matching window configurations."""
    xs = [s[0] for s in sites]
    ys = [s[1] for s in sites]
    i0, i1 = min(xs), max(xs)
    j0, j1 = min(ys), max(ys)
    valid, w, h = enumerate_window_group(support, i0, i1, j0, j1)
    hits = 0
    for cfg in valid:
        if all(((cfg >> ((y - j0) * w + (x - i0))) & 1) == b
               for (x, y), b in zip(sites, bits)):
            hits += 1
    return Fraction(hits, len(valid))


def enumeration_relations(support, sites):
    """All GF(2) dependencies among the site coordinates over the window
    group, by testing every coefficient vector against every configuration."""
    xs = [s[0] for s in sites]
    ys = [s[1] for s in sites]
    valid, w, h = enumerate_window_group(support, min(xs), max(xs), min(ys), max(ys))
    i0, j0 = min(xs), min(ys)
    positions = [((y - j0) * w + (x - i0)) for x, y in sites]
    rels = []
    for coeffs in range(1, 1 << len(sites)):
        ok = True
        for cfg in valid:
            parity = 0
            for t, pos in enumerate(positions):
                if (coeffs >> t) & 1:
                    parity ^= (cfg >> pos) & 1
            if parity:
                ok = False
                break
        if ok:
            rels.append(coeffs)
    return rels


def bfs_cover_clusters(grid: np.ndarray, connectivity: int, target_bit: int):
    """Cluster labels plus per-axis wrap flags via universal-cover BFS."""
    h, w = grid.shape
    if connectivity == 4:
        steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    else:
        steps = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]
    labels = np.full((h, w), -1, dtype=np.int64)
    wrap_h = wrap_v = False
    next_label = 0
    for sj in range(h):
        for si in range(w):
            if grid[sj, si] != target_bit or labels[sj, si] >= 0:
                continue
            lift = {(si, sj): (0, 0)}
            labels[sj, si] = next_label
            queue = deque([(si, sj, 0, 0)])
            while queue:
                i, j, lx, ly = queue.popleft()
                for di, dj in steps:
                    ni, nj = (i + di) % w, (j + dj) % h
                    if grid[nj, ni] != target_bit:
                        continue
                    nlift = (lx + di, ly + dj)
                    if (ni, nj) in lift:
                        ox, oy = lift[(ni, nj)]
                        if ox != nlift[0]:
                            wrap_h = True
                        if oy != nlift[1]:
                            wrap_v = True
                    else:
                        lift[(ni, nj)] = nlift
                        labels[nj, ni] = next_label
                        queue.append((ni, nj, nlift[0], nlift[1]))
            next_label += 1
    return labels, wrap_h, wrap_v


def partitions_equal(labels_a: np.ndarray, labels_b: np.ndarray) -> bool:
    """Same partition up to relabelling (both use -1 for non-target)."""
    if labels_a.shape != labels_b.shape:
        return False
    fwd: dict[int, int] = {}
    bwd: dict[int, int] = {}
    for x, y in zip(labels_a.ravel().tolist(), labels_b.ravel().tolist()):
        if (x < 0) != (y < 0):
            return False
        if x < 0:
            continue
        if fwd.setdefault(x, y) != y or bwd.setdefault(y, x) != x:
            return False
    return True


@pytest.fixture(scope="session")
def ledrappier_support():
    return [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
