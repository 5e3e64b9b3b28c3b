"""k-fold correlation scans and deviation-from-mixing statistics.

A correlation oracle returns the measure of an intersection of translated
events, exactly (rational) or as an estimate with a standard error.  The
scans in this module sample shift families, compare intersection measures
against products of single-event measures, and collect the deviation
statistics dev(h) = |Der| / h over the admissible grid
Q = {(z, w) in [0,h]^2 : |z|, |w|, |z-w| > eps*h}.

Scans provide evidence and exact witnesses only; no scan proves a mixing
property.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Protocol, Sequence, Union

from .algebraic import CylinderConstraint, Site, site_add
from .measure import MeasureValue, format_fraction
from .rng import substream
from . import svg as svgmod


class CorrelationOracle(Protocol):
    def event_measure(self, event) -> MeasureValue: ...

    def intersection_measure(self, shifts: Sequence[Site], events: Sequence) -> MeasureValue: ...


class OracleCapabilityError(RuntimeError):
    """The oracle cannot evaluate the requested constellation."""


@dataclass(frozen=True)
class Constellation:
    """Shift tuple plus one event per shift; first shift conventionally zero.

    A single event (degenerate correlation of order 0) is allowed so the
    intersection measure reduces to the event's own measure.
    """

    shifts: tuple[Site, ...]
    events: tuple

    def __post_init__(self):
        if len(self.shifts) != len(self.events):
            raise ValueError("shifts and events must have equal length")
        if not self.shifts:
            raise ValueError("constellation needs at least one event")

    @property
    def order(self) -> int:
        return len(self.shifts) - 1

    def to_json(self) -> dict:
        return {
            "shifts": [list(s) if isinstance(s, tuple) else s for s in self.shifts],
            "events": [e.to_json() if hasattr(e, "to_json") else e for e in self.events],
        }


def kfold_correlation(oracle: CorrelationOracle, c: Constellation) -> MeasureValue:
    """Measure of the intersection of the translated events."""
    try:
        return oracle.intersection_measure(c.shifts, c.events)
    except (TypeError, ValueError) as exc:
        raise OracleCapabilityError(f"oracle cannot evaluate constellation: {exc}") from exc


def product_of_measures(values: Sequence[MeasureValue]) -> MeasureValue:
    """Product measure; exact when every factor is exact, otherwise a point
    estimate with first-order error propagation."""
    if all(v.is_exact for v in values):
        prod = Fraction(1)
        for v in values:
            prod *= v.exact
        return MeasureValue.of_exact(prod)
    prod = 1.0
    for v in values:
        prod *= v.as_float()
    var = 0.0
    for v in values:
        if v.stderr:
            x = v.as_float()
            if x != 0:
                var += (prod / x * v.stderr) ** 2
    return MeasureValue.of_estimate(prod, var ** 0.5, min(v.samples or 0 for v in values))


def _defect(corr: MeasureValue, prod: MeasureValue) -> Union[Fraction, float]:
    if corr.is_exact and prod.is_exact:
        return abs(corr.exact - prod.exact)
    return abs(corr.as_float() - prod.as_float())


@dataclass
class ScanRow:
    constellation: Constellation
    correlation: MeasureValue
    product: MeasureValue
    defect: Union[Fraction, float]
    certificate: Optional[dict] = None


@dataclass
class MixDefect:
    """Result of a mixing-defect scan at one correlation order."""

    order: int
    scanned: int
    max_abs_defect: Union[Fraction, float]
    argmax: Optional[Constellation]
    certificate: Optional[dict] = None
    rows: list[ScanRow] = field(default_factory=list)


def mix_defect_scan(oracle: CorrelationOracle, k: int, events: Sequence,
                    shift_tuples: Iterable[Sequence[Site]], budget: int,
                    keep_rows: bool = True) -> MixDefect:
    """Scan shift tuples, tracking max |correlation - product of measures|.

    `events` holds k+1 events; each tuple from the generator supplies their
    shifts.  With an exact oracle every nonzero defect is accompanied by the
    oracle's relation certificate when it can produce one.  The intersection
    measure is also checked against the minimum single-event measure (exact
    oracles only), which every scan must satisfy.
    """
    if k < 1:
        raise ValueError("order k must be at least 1")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if len(events) != k + 1:
        raise ValueError(f"order {k} scan needs {k + 1} events")
    singles = [oracle.event_measure(e) for e in events]
    prod = product_of_measures(singles)
    min_single = min(s.exact for s in singles) if prod.is_exact else None
    best: Union[Fraction, float] = Fraction(0) if prod.is_exact else 0.0
    argmax = None
    cert = None
    rows: list[ScanRow] = []
    scanned = 0
    for shifts in shift_tuples:
        if scanned >= budget:
            break
        scanned += 1
        c = Constellation(tuple(shifts), tuple(events))
        corr = kfold_correlation(oracle, c)
        if corr.is_exact and min_single is not None and corr.exact > min_single:
            raise AssertionError(
                f"intersection measure {corr.exact} exceeds smallest event measure {min_single}"
            )
        d = _defect(corr, prod)
        row = ScanRow(c, corr, prod, d)
        if d != 0 and hasattr(oracle, "relation_certificate"):
            row.certificate = oracle.relation_certificate(c.shifts, c.events)
        if keep_rows:
            rows.append(row)
        if d > best:
            best = d
            argmax = c
            cert = row.certificate
    return MixDefect(order=k, scanned=scanned, max_abs_defect=best,
                     argmax=argmax, certificate=cert, rows=rows)


# ---------------------------------------------------------------------------
# Shift families

def ledrappier_dyadic_shifts(n: int) -> tuple[tuple[int, int], ...]:
    """The 5-point constellation at dyadic scale 2^n."""
    s = 1 << n
    return ((0, 0), (s, 0), (-s, 0), (0, s), (0, -s))


def dyadic_family(scales: Iterable[int]) -> Iterable[tuple[tuple[int, int], ...]]:
    for n in scales:
        yield ledrappier_dyadic_shifts(n)


def random_separated_shifts(seed: int, count: int, k: int, min_gap: int,
                            box: int, dim: int = 2,
                            forbid_dyadic: bool = False) -> Iterable[tuple[Site, ...]]:
    """Random shift tuples with pairwise Chebyshev separation >= min_gap.

    With forbid_dyadic, at least one pairwise difference coordinate is odd,
    so the tuple admits no dyadic rescaling.
    """
    gen = substream(seed, "separated", k, min_gap, box, dim)
    produced = 0
    attempts = 0
    while produced < count:
        attempts += 1
        if attempts > 1000 * count:
            raise RuntimeError("cannot satisfy separation constraints in the box")
        pts: list[Site] = [(0, 0) if dim == 2 else 0]
        ok = True
        for _ in range(k):
            if dim == 2:
                p: Site = (int(gen.integers(-box, box + 1)), int(gen.integers(-box, box + 1)))
            else:
                p = int(gen.integers(-box, box + 1))
            pts.append(p)
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                if dim == 2:
                    gap = max(abs(pts[a][0] - pts[b][0]), abs(pts[a][1] - pts[b][1]))
                else:
                    gap = abs(pts[a] - pts[b])
                if gap < min_gap:
                    ok = False
        if not ok:
            continue
        if forbid_dyadic and dim == 2:
            odd = any((pts[a][0] - pts[b][0]) % 2 or (pts[a][1] - pts[b][1]) % 2
                      for a in range(len(pts)) for b in range(a + 1, len(pts)))
            if not odd:
                x, y = pts[-1]
                pts[-1] = (x + 1, y)
        yield tuple(pts)
        produced += 1


# ---------------------------------------------------------------------------
# Deviation statistics

@dataclass
class DevScan:
    """Outcome of a deviation scan over the admissible (z, w) grid."""

    epsilon: float
    h: int
    q_size: int
    der_pairs: list[tuple[int, int]]
    dev: Fraction
    dev_h2: Fraction
    rows: list[tuple[int, int, float, float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "h": self.h,
            "q_size": self.q_size,
            "der_pairs": [list(p) for p in self.der_pairs],
            "dev": format_fraction(self.dev),
            "dev_value": float(self.dev),
            "dev_h2": format_fraction(self.dev_h2),
        }


def admissible_pairs(epsilon: float, h: int) -> list[tuple[int, int]]:
    """Integer pairs of [0,h]^2 with |z|, |w|, |z-w| all above eps*h."""
    cut = epsilon * h
    return [(z, w) for z in range(h + 1) for w in range(h + 1)
            if abs(z) > cut and abs(w) > cut and abs(z - w) > cut]


def dev_scan(oracle: CorrelationOracle, a, b, c, epsilon: float, h: int,
             keep_rows: bool = True) -> DevScan:
    """Count (z, w) pairs whose triple correlation strays from the product.

    dev = |Der| / h as printed in the defining formula; the h^2-normalized
    variant is reported alongside since the intended normalization is
    ambiguous.  Membership is decided purely by the oracle's point values.
    """
    if not 0 < epsilon < Fraction(1, 3):
        raise ValueError("epsilon must lie in (0, 1/3)")
    if h < 1:
        raise ValueError("h must be at least 1")
    pairs = admissible_pairs(epsilon, h)
    singles = [oracle.event_measure(e) for e in (a, b, c)]
    prod = product_of_measures(singles)
    prod_f = prod.as_float()
    der: list[tuple[int, int]] = []
    rows: list[tuple[int, int, float, float, float]] = []
    grid = getattr(oracle, "correlation_grid", None)
    if grid is not None:
        values = grid((a, b, c), pairs)
    else:
        values = [kfold_correlation(oracle, Constellation((0, z, w), (a, b, c))).as_float()
                  for (z, w) in pairs]
    for (z, w), corr in zip(pairs, values):
        defect = abs(corr - prod_f)
        if keep_rows:
            rows.append((z, w, corr, prod_f, defect))
        if defect > epsilon:
            der.append((z, w))
    return DevScan(epsilon=epsilon, h=h, q_size=len(pairs), der_pairs=der,
                   dev=Fraction(len(der), h), dev_h2=Fraction(len(der), h * h),
                   rows=rows)


def asymmetry_scan(oracle: CorrelationOracle, a,
                   m_values: Sequence[int]) -> list[dict]:
    """Forward and backward triple self-correlations, scaled by 4.

    Per m: 4*mu(A cap T^m A cap T^3m A) next to the same quantity along
    negative shifts.  Values are reported side by side; no convergence claim
    is made.
    """
    out = []
    for m in m_values:
        fwd = kfold_correlation(oracle, Constellation((0, m, 3 * m), (a, a, a)))
        bwd = kfold_correlation(oracle, Constellation((0, -m, -3 * m), (a, a, a)))
        out.append({"m": m, "forward": _scale4(fwd), "backward": _scale4(bwd)})
    return out


def _scale4(v: MeasureValue) -> dict:
    if v.is_exact:
        return {"exact": format_fraction(4 * v.exact), "value": 4 * float(v.exact)}
    return {"estimate": 4 * v.estimate, "stderr": 4 * (v.stderr or 0.0), "samples": v.samples}


def empty_intersection_search(oracle: CorrelationOracle, a, b,
                              scan_pairs: Iterable[tuple[int, int]],
                              threshold: Union[Fraction, float] = 0) -> list[dict]:
    """Scan (m, n) pairs for mu(A cap T^m A cap T^{m+n} B) <= threshold."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    hits = []
    for m, n in scan_pairs:
        corr = kfold_correlation(oracle, Constellation((0, m, m + n), (a, a, b)))
        val = corr.exact if corr.is_exact else corr.as_float()
        if val <= threshold:
            hits.append({"m": m, "n": n, "measure": corr})
    return hits


# ---------------------------------------------------------------------------
# Synthetic and finite-permutation oracles

class SyntheticTripleOracle:
    """Product-valued triple-correlation oracle with planted spikes.

    `spikes` maps (z, w) to an additive deviation from the product; all
    measures are floats.  Useful as ground truth for scan tests.
    """

    def __init__(self, event_values: dict, spikes: Optional[dict] = None):
        self.event_values = dict(event_values)
        self.spikes = dict(spikes or {})

    def event_measure(self, event) -> MeasureValue:
        return MeasureValue.of_estimate(self.event_values[event], 0.0, 1)

    def intersection_measure(self, shifts, events) -> MeasureValue:
        prod = 1.0
        for e in events:
            prod *= self.event_values[e]
        if len(shifts) == 3 and shifts[0] == 0:
            prod += self.spikes.get((shifts[1], shifts[2]), 0.0)
        return MeasureValue.of_estimate(prod, 0.0, 1)


class PermutationOracle:
    """Exact oracle for a permutation of a finite set with counting measure.

    Events are frozensets of points; T^m translates an event by applying the
    permutation m times (negative m uses the inverse).
    """

    def __init__(self, perm: Sequence[int]):
        n = len(perm)
        if sorted(perm) != list(range(n)):
            raise ValueError("not a permutation")
        self.perm = tuple(perm)
        inv = [0] * n
        for i, p in enumerate(perm):
            inv[p] = i
        self.inv = tuple(inv)
        self.size = n

    def _apply(self, event: frozenset, m: int) -> frozenset:
        table = self.perm if m >= 0 else self.inv
        out = set(event)
        for _ in range(abs(m)):
            out = {table[x] for x in out}
        return frozenset(out)

    def event_measure(self, event: frozenset) -> MeasureValue:
        return MeasureValue.of_exact(Fraction(len(event), self.size))

    def intersection_measure(self, shifts, events) -> MeasureValue:
        acc = set(range(self.size))
        for sh, ev in zip(shifts, events):
            acc &= self._apply(frozenset(ev), sh)
        return MeasureValue.of_exact(Fraction(len(acc), self.size))


# ---------------------------------------------------------------------------
# Exports

def scan_rows_to_csv(rows: Iterable[tuple[int, int, float, float, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["z", "w", "correlation", "product", "defect"])
    for z, w, corr, prod, defect in rows:
        writer.writerow([z, w, f"{corr:.12g}", f"{prod:.12g}", f"{defect:.12g}"])
    return buf.getvalue()


def mix_rows_to_csv(result: MixDefect) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["shifts", "correlation", "product", "defect", "has_certificate"])
    for row in result.rows:
        corr = row.correlation
        prod = row.product
        writer.writerow([
            json.dumps(row.constellation.to_json()["shifts"]),
            format_fraction(corr.exact) if corr.is_exact else f"{corr.as_float():.12g}",
            format_fraction(prod.exact) if prod.is_exact else f"{prod.as_float():.12g}",
            format_fraction(row.defect) if isinstance(row.defect, Fraction) else f"{row.defect:.12g}",
            int(bool(row.certificate and row.certificate.get("relations"))),
        ])
    return buf.getvalue()


def dev_heatmap_svg(scan: DevScan) -> str:
    """SVG heatmap of the (z, w) defect field."""
    size = scan.h + 1
    field = [[None] * size for _ in range(size)]
    for z, w, _, _, defect in scan.rows:
        field[w][z] = defect
    return svgmod.heatmap_svg(field, x_label="z", y_label="w",
                              title=f"defect field, eps={scan.epsilon}, h={scan.h}")
