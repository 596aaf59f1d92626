"""
boltzmann/mixtures.py
─────────────────────
Counting effective mixtures: the linear regions of the hard-min free energy
F̂(v) = min_H (α_H · v + C_H) over visible space.

Methods
  envelope-1d    exact lower envelope of lines (N_vis = 1)
  lp-exact       one LP per gradient-reduced configuration
  grid-estimate  distinct argmins over sampled points (a lower bound)
  binary-cube    distinct argmins over {0,1}^N_vis (not a region count)

Each strict-min region of an affine family is an intersection of open
halfspaces, hence convex, so the exact count is the number of active
configurations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
from scipy.optimize import linprog

from boltzmann.conf import setting
from boltzmann.enumeration import (
    AffineOperator, bitstring, check_hidden_cap, chunk_bounds, configuration_bits,
)
from boltzmann.exceptions import EnumerationCapExceeded, SolverFailure, ValidationError
from boltzmann.network import Model
from boltzmann.workers import ordered_map

logger = logging.getLogger(__name__)

METHODS        = ('auto', 'envelope-1d', 'lp-exact', 'grid-estimate', 'binary-cube')
NEAR_TIE_RTOL  = 1e-12
MAX_BOX_RADIUS = 1e6
GRID_POINTS    = 2 ** 22
POINT_BLOCK    = 2 ** 14


def lp_margin() -> float:
    return float(setting('BM_LP_MARGIN', 1e-9))


# ─────────────────────────────────────────────
# Affine families
# ─────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class AffineFamily:
    configs:    np.ndarray
    gradients:  np.ndarray
    intercepts: np.ndarray
    width:      int
    reduced:    bool = False
    near_ties:  tuple[tuple[str, str], ...] = ()

    def __len__(self) -> int:
        return int(self.configs.shape[0])

    @property
    def n_vis(self) -> int:
        return int(self.gradients.shape[1])

    def bitstring(self, position: int) -> str:
        return bitstring(int(self.configs[position]), self.width)

    def energies(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.gradients.T + self.intercepts[None, :]


def affine_family(model: Model, cap: int | None = None, threads: int | None = None) -> AffineFamily:
    """(α_H, C_H) for every hidden configuration, in configuration-index order."""
    spec = model.spec
    check_hidden_cap(spec.n_hid, cap)
    op     = AffineOperator.from_model(model)
    blocks = ordered_map(lambda b: op.block(*b), chunk_bounds(2 ** spec.n_hid), threads)
    return AffineFamily(
        configs=np.arange(2 ** spec.n_hid, dtype=np.int64),
        gradients=np.concatenate([g for g, _ in blocks]),
        intercepts=np.concatenate([c for _, c in blocks]),
        width=spec.n_hid,
    )


def _near_ties(family: AffineFamily, rows: np.ndarray) -> tuple[tuple[str, str], ...]:
    """Lexicographically adjacent reduced gradients that differ by ≤ rtol·scale."""
    if len(rows) < 2:
        return ()
    grads = family.gradients[rows]
    order = np.lexsort(grads.T[::-1])
    scale = max(1.0, float(np.max(np.abs(grads))))
    ties  = []
    for a, b in zip(order[:-1], order[1:]):
        d = float(np.max(np.abs(grads[a] - grads[b])))
        if 0.0 < d <= NEAR_TIE_RTOL * scale:
            ties.append((family.bitstring(rows[a]), family.bitstring(rows[b])))
    return tuple(ties)


def reduce_by_gradient(family: AffineFamily) -> AffineFamily:
    """
    Keep one configuration per exact gradient: the one with the smallest
    intercept (smallest index on an intercept tie).  Others in the group are
    never minimal anywhere.
    """
    if family.reduced or len(family) == 0:
        return family
    grads = family.gradients + 0.0
    _, group = np.unique(grads, axis=0, return_inverse=True)
    group = group.ravel()
    order = np.lexsort((family.configs, family.intercepts, group))
    first = np.ones(order.shape[0], dtype=bool)
    first[1:] = group[order][1:] != group[order][:-1]
    keep  = np.sort(order[first])

    ties = _near_ties(family, keep)
    if ties:
        logger.warning(f'[REGIONS] {len(ties)} near-tied gradient pair(s) after reduction')
    return AffineFamily(family.configs[keep], grads[keep], family.intercepts[keep],
                        family.width, reduced=True, near_ties=ties)


def slice_family(family: AffineFamily, coord: int, base: np.ndarray) -> AffineFamily:
    """Restrict to the line v = base + t·e_coord; the result is a family over t."""
    base      = np.asarray(base, dtype=np.float64)
    slopes    = family.gradients[:, [coord]]
    offsets   = family.intercepts + family.gradients @ base - slopes[:, 0] * base[coord]
    return AffineFamily(family.configs, slopes, offsets, family.width)


# ─────────────────────────────────────────────
# Reports
# ─────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ActiveRegion:
    config:    int
    bits:      str
    witness:   np.ndarray
    gradient:  np.ndarray
    intercept: float
    margin:    float | None = None

    def to_document(self) -> dict:
        return {
            'config':    self.bits,
            'witness':   [float(x) for x in self.witness],
            'gradient':  [float(x) for x in self.gradient],
            'intercept': float(self.intercept),
            'margin':    None if self.margin is None else float(self.margin),
        }


@dataclass(frozen=True, eq=False)
class RegionReport:
    count:       int
    method:      str
    domain:      tuple[tuple[float, float], ...] | None
    n_hidden:    int
    active:      list[ActiveRegion] = field(default_factory=list)
    estimate:    bool = False
    breakpoints: list[float] = field(default_factory=list)
    box_radius:  float | None = None
    near_ties:   tuple[tuple[str, str], ...] = ()

    def to_document(self) -> dict:
        return {
            'count':       self.count,
            'method':      self.method,
            'domain':      'all' if self.domain is None else [[float(lo), float(hi)] for lo, hi in self.domain],
            'estimate':    self.estimate,
            'n_hidden':    self.n_hidden,
            'active':      [a.to_document() for a in self.active],
            'breakpoints': [float(x) for x in self.breakpoints],
            'box_radius':  self.box_radius,
            'near_ties':   [list(t) for t in self.near_ties],
        }


def _as_domain(domain, n_vis: int) -> tuple[tuple[float, float], ...] | None:
    if domain is None:
        return None
    box = np.asarray(domain, dtype=np.float64)
    if box.shape == (2,) and n_vis == 1:
        box = box.reshape(1, 2)
    if box.shape != (n_vis, 2):
        raise ValidationError(f'domain must give one [low, high] interval per visible unit ({n_vis})')
    if np.any(box[:, 0] >= box[:, 1]) or not np.all(np.isfinite(box)):
        raise ValidationError('every domain interval needs finite low < high')
    return tuple((float(lo), float(hi)) for lo, hi in box)


# ─────────────────────────────────────────────
# 1-D envelope
# ─────────────────────────────────────────────

def _needless(a1, c1, a2, c2, a3, c3) -> bool:
    """Line 2 (middle slope) is never strictly lowest between lines 1 and 3."""
    return (c3 - c1) * (a1 - a2) <= (c2 - c1) * (a1 - a3)


def lower_envelope_1d(slopes, intercepts, exact: bool = False) -> list[tuple[int, float, float]]:
    """
    Pieces (line position, left, right) of min_i (a_i t + c_i), left to right.
    Lines sharing a slope keep only the lowest; lines that touch the
    envelope at a single point are dropped.
    """
    slopes     = np.asarray(slopes, dtype=np.float64)
    intercepts = np.asarray(intercepts, dtype=np.float64)
    if slopes.size == 0:
        raise ValidationError('cannot take the envelope of an empty family')

    best: dict[float, int] = {}
    for i, (a, c) in enumerate(zip(slopes, intercepts)):
        a = float(a) + 0.0
        if a not in best or c < intercepts[best[a]]:
            best[a] = i
    order = sorted(best.values(), key=lambda i: -slopes[i])
    num   = Fraction if exact else float
    a     = {i: num(float(slopes[i])) for i in order}
    c     = {i: num(float(intercepts[i])) for i in order}

    hull: list[int] = []
    for i in order:
        while len(hull) >= 2 and _needless(a[hull[-2]], c[hull[-2]], a[hull[-1]], c[hull[-1]], a[i], c[i]):
            hull.pop()
        hull.append(i)

    cuts   = [(c[q] - c[p]) / (a[p] - a[q]) for p, q in zip(hull[:-1], hull[1:])]
    bounds = [-np.inf] + [float(x) for x in cuts] + [np.inf]
    return [(i, bounds[j], bounds[j + 1]) for j, i in enumerate(hull)]


def _witness(left: float, right: float) -> float:
    if np.isfinite(left) and np.isfinite(right):
        return 0.5 * (left + right)
    if np.isfinite(left):
        return left + 1.0
    if np.isfinite(right):
        return right - 1.0
    return 0.0


def count_regions_1d(family: AffineFamily, interval=None, exact: bool = False) -> RegionReport:
    if len(family) == 0:
        raise ValidationError('cannot count regions of an empty family')
    if family.n_vis != 1:
        raise ValidationError(f'envelope counting needs N_vis = 1, family has {family.n_vis}')
    reduced = reduce_by_gradient(family)
    domain  = _as_domain(interval, 1)
    lo, hi  = domain[0] if domain else (-np.inf, np.inf)

    active, breakpoints = [], []
    for pos, left, right in lower_envelope_1d(reduced.gradients[:, 0], reduced.intercepts, exact):
        a, b = max(left, lo), min(right, hi)
        if not a < b:
            continue
        if active:
            breakpoints.append(a)
        active.append(ActiveRegion(
            config=int(reduced.configs[pos]),
            bits=reduced.bitstring(pos),
            witness=np.array([_witness(a, b)]),
            gradient=reduced.gradients[pos].copy(),
            intercept=float(reduced.intercepts[pos]),
        ))
    logger.info(f'[REGIONS] envelope-1d: {len(active)} region(s) from {len(family)} line(s)')
    return RegionReport(len(active), 'envelope-1d', domain, family.width, active,
                        breakpoints=breakpoints, near_ties=reduced.near_ties)


# ─────────────────────────────────────────────
# LP activity
# ─────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class LPActivity:
    active:     bool
    margin:     float
    witness:    np.ndarray
    box_radius: float | None


def certificate_radius(family: AffineFamily) -> float:
    """
    Half-width of a box holding a witness of every region: 4·(1 + 2·max|C| / δ)
    with δ the smallest nonzero ∞-norm gradient difference.  Only the sampling
    screen uses it, capped at 1e6; the LPs over all of R^N_vis are unbounded in v.
    """
    grads = family.gradients
    delta = np.inf
    for i in range(len(family) - 1):
        d = np.max(np.abs(grads[i + 1:] - grads[i]), axis=1)
        d = d[d > 0]
        if d.size:
            delta = min(delta, float(d.min()))
    c_max = float(np.max(np.abs(family.intercepts))) if len(family) else 0.0
    if not np.isfinite(delta):
        return 4.0
    radius = 4.0 * (1.0 + 2.0 * c_max / delta)
    if radius > MAX_BOX_RADIUS:
        logger.info(f'[REGIONS] screening box radius {radius:.3g} capped at {MAX_BOX_RADIUS:.0e}')
        radius = MAX_BOX_RADIUS
    return radius


def _box(domain, n_vis: int, radius: float | None) -> np.ndarray:
    if domain is not None:
        return np.asarray(domain, dtype=np.float64)
    return np.tile([-radius, radius], (n_vis, 1))


def _verified_margin(family: AffineFamily, position: int, point: np.ndarray) -> float:
    e = family.energies(point[None, :])[0]
    others = np.delete(e, position)
    return float(np.min(others) - e[position]) if others.size else np.inf


def is_active_lp(family: AffineFamily, position: int, domain=None, margin: float | None = None,
                 radius: float | None = None) -> LPActivity:
    """
    maximise t  s.t.  (α* − α_H)·v + t ≤ C_H − C*  for every other H,  t ≤ 1,
    with v free over R^N_vis or held in `domain`.  Active iff the margin
    verified at the optimal v exceeds `margin`.
    """
    family = reduce_by_gradient(family)
    margin = lp_margin() if margin is None else margin
    n      = family.n_vis
    domain = _as_domain(domain, n)
    box    = None if domain is None else _box(domain, n, None)

    if len(family) == 1:
        return LPActivity(True, 1.0, np.zeros(n) if box is None else box.mean(axis=1), radius)

    others = np.delete(np.arange(len(family)), position)
    a_ub   = np.hstack([family.gradients[position] - family.gradients[others], np.ones((others.size, 1))])
    b_ub   = family.intercepts[others] - family.intercepts[position]
    cost   = np.zeros(n + 1)
    cost[-1] = -1.0
    v_bounds = [(None, None)] * n if box is None else [(float(lo), float(hi)) for lo, hi in box]
    bounds   = v_bounds + [(None, 1.0)]

    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method='highs')
    if res.status != 0 or res.x is None:
        raise SolverFailure(
            f'LP for configuration {family.bitstring(position)} failed: {res.message}',
            instance={'config': family.bitstring(position), 'status': int(res.status),
                      'box': None if box is None else box.tolist(), 'rows': int(others.size)},
        )
    witness  = res.x[:n] if box is None else np.clip(res.x[:n], box[:, 0], box[:, 1])
    verified = _verified_margin(family, position, witness)
    return LPActivity(bool(verified > margin), float(min(verified, 1.0)), witness, radius)


def _screen(family: AffineFamily, box: np.ndarray, margin: float, seed: int = 0) -> dict[int, tuple]:
    """Witnesses found by sampling at several scales; each carries a verified margin."""
    rng     = np.random.default_rng(seed)
    n       = family.n_vis
    centre  = box.mean(axis=1)
    half    = (box[:, 1] - box[:, 0]) / 2.0
    if len(family) == 1:
        return {0: (centre.copy(), 1.0)}
    found: dict[int, tuple] = {}
    for scale in (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
        pts = centre + (rng.random((512, n)) * 2.0 - 1.0) * half * scale
        e   = family.energies(pts)
        part = np.partition(e, 1, axis=1)
        best = np.argmin(e, axis=1)
        gap  = part[:, 1] - part[:, 0]
        for r in np.flatnonzero(gap > margin):
            found.setdefault(int(best[r]), (pts[r], float(min(gap[r], 1.0))))
    return found


# ─────────────────────────────────────────────
# Counting front-end
# ─────────────────────────────────────────────

def _count_lp(family: AffineFamily, domain, lp_cap: int | None, threads: int | None,
              margin: float | None) -> RegionReport:
    lp_cap  = int(setting('BM_LP_CAP', 4096)) if lp_cap is None else lp_cap
    reduced = reduce_by_gradient(family)
    if len(reduced) > lp_cap:
        raise EnumerationCapExceeded('gradient-reduced configurations', len(reduced), lp_cap)
    margin = lp_margin() if margin is None else margin
    radius = None if domain is not None else certificate_radius(reduced)
    box    = _box(domain, reduced.n_vis, radius)
    found  = _screen(reduced, box, margin)

    def check(position: int):
        if position in found:
            return True, found[position][1], found[position][0]
        res = is_active_lp(reduced, position, domain, margin, radius)
        return res.active, res.margin, res.witness

    results = ordered_map(check, range(len(reduced)), threads)
    active  = [
        ActiveRegion(int(reduced.configs[p]), reduced.bitstring(p), np.asarray(w, dtype=np.float64),
                     reduced.gradients[p].copy(), float(reduced.intercepts[p]), m)
        for p, (ok, m, w) in enumerate(results) if ok
    ]
    logger.info(f'[REGIONS] lp-exact: {len(active)} active of {len(reduced)} reduced '
                f'({len(found)} screened, {len(reduced) - len(found)} LPs)')
    return RegionReport(len(active), 'lp-exact', domain, reduced.width, active,
                        box_radius=radius, near_ties=reduced.near_ties)


def _distinct_argmins(family: AffineFamily, points: np.ndarray, method: str, domain,
                      radius: float | None) -> RegionReport:
    seen: dict[int, tuple[np.ndarray, float]] = {}
    for s in range(0, points.shape[0], POINT_BLOCK):
        block = points[s:s + POINT_BLOCK]
        e     = family.energies(block)
        best  = np.argmin(e, axis=1)
        if e.shape[1] > 1:
            part = np.partition(e, 1, axis=1)
            gap  = part[:, 1] - part[:, 0]
        else:
            gap = np.ones(block.shape[0])
        for position in np.unique(best):
            if int(position) not in seen:
                r = int(np.flatnonzero(best == position)[0])
                seen[int(position)] = (block[r].copy(), float(min(gap[r], 1.0)))
    active = [
        ActiveRegion(int(family.configs[p]), family.bitstring(p), w, family.gradients[p].copy(),
                     float(family.intercepts[p]), m)
        for p, (w, m) in sorted(seen.items())
    ]
    return RegionReport(len(active), method, domain, family.width, active, estimate=True,
                        box_radius=radius, near_ties=family.near_ties)


def _grid_points(box: np.ndarray, resolution: int, seed: int) -> np.ndarray:
    n = box.shape[0]
    if resolution ** n <= GRID_POINTS:
        axes  = [np.linspace(lo, hi, resolution) for lo, hi in box]
        grids = np.meshgrid(*axes, indexing='ij')
        return np.stack([g.ravel() for g in grids], axis=1)
    rng = np.random.default_rng(seed)
    return box[:, 0] + rng.random((GRID_POINTS, n)) * (box[:, 1] - box[:, 0])


def count_effective_mixtures(model: Model, method: str = 'auto', domain=None, resolution: int = 2000,
                             seed: int = 0, lp_cap: int | None = None, cap: int | None = None,
                             threads: int | None = None, exact: bool = False,
                             margin: float | None = None) -> RegionReport:
    if method not in METHODS:
        raise ValidationError(f'unknown counting method {method!r}, expected one of {METHODS}')
    spec   = model.spec
    domain = _as_domain(domain, spec.n_vis)
    if method == 'auto':
        method = 'envelope-1d' if spec.n_vis == 1 else 'lp-exact'

    family = affine_family(model, cap, threads)
    if method == 'envelope-1d':
        return count_regions_1d(family, domain, exact)
    if method == 'lp-exact':
        return _count_lp(family, domain, lp_cap, threads, margin)

    reduced = reduce_by_gradient(family)
    if method == 'binary-cube':
        check_hidden_cap(spec.n_vis, cap, 'visible units')
        points = configuration_bits(0, 2 ** spec.n_vis, spec.n_vis)
        report = _distinct_argmins(reduced, points, 'binary-cube', None, None)
    else:
        if resolution < 2:
            raise ValidationError('grid resolution must be >= 2')
        radius = None if domain is not None else certificate_radius(reduced)
        report = _distinct_argmins(reduced, _grid_points(_box(domain, spec.n_vis, radius), resolution, seed),
                                   'grid-estimate', domain, radius)
    logger.info(f'[REGIONS] {report.method}: {report.count} distinct argmin(s)')
    return report


# ─────────────────────────────────────────────
# Theoretical bounds
# ─────────────────────────────────────────────

def rbm_region_formula(n_vis: int, n_hid: int) -> int:
    """Σ_{j=0}^{n_vis} C(n_hid, j): regions of a generic arrangement of n_hid hyperplanes in R^n_vis."""
    if n_vis < 0 or n_hid < 0:
        raise ValidationError('unit counts must be >= 0')
    return sum(comb(n_hid, j) for j in range(min(n_vis, n_hid) + 1))


@dataclass(frozen=True)
class BoundEntry:
    label:    str
    kind:     str
    value:    int
    passed:   bool | None = None
    achieved: bool | None = None
    note:     str = ''


@dataclass(frozen=True)
class BoundReport:
    topology: str
    n_hidden: int
    measured: int | None
    entries:  tuple[BoundEntry, ...]

    @property
    def passed(self) -> bool:
        return all(e.passed is not False for e in self.entries)

    @property
    def upper(self) -> int:
        return min(e.value for e in self.entries if e.kind == 'upper')

    @property
    def lower(self) -> int:
        return max([e.value for e in self.entries if e.kind == 'lower'] or [1])

    def to_document(self) -> dict:
        return {
            'topology': self.topology,
            'n_hidden': self.n_hidden,
            'measured': self.measured,
            'passed':   self.passed,
            'bounds':   [e.__dict__.copy() for e in self.entries],
        }


def _entry(label: str, kind: str, value: int, measured: int | None, note: str) -> BoundEntry:
    if measured is None or kind == 'capacity':
        passed = None
    elif kind == 'upper':
        passed = measured <= value
    elif kind == 'strict-upper':
        passed = measured < value
    else:
        passed = measured >= value
    achieved = None if measured is None or kind not in ('upper', 'capacity') else measured == value
    return BoundEntry(label, kind, value, passed, achieved, note)


def bound_report(model: Model, measured: int | RegionReport | None = None) -> BoundReport:
    """
    Theoretical bounds for the model's topology, checked against a measured
    count when one is given.  'capacity' entries bound the best count over
    all parameters of this shape and are informational.
    """
    if isinstance(measured, RegionReport):
        measured = None if measured.estimate else measured.count
    spec  = model.spec
    sizes = spec.layer_sizes
    n_hid = spec.n_hid

    entries = [
        _entry('hidden-configurations', 'upper', 2 ** n_hid, measured, 'one affine piece per hidden configuration'),
        _entry('nonempty-domain', 'lower', 1, measured, 'some configuration is minimal everywhere'),
    ]
    topology = spec.topology
    if topology == 'rbm':
        entries.append(_entry('rbm-hyperplane-arrangement', 'upper', rbm_region_formula(sizes[0], sizes[1]),
                              measured, 'generic arrangement of n1 hyperplanes in R^n0'))
    elif topology == 'dbm':
        entries.append(_entry('dbm-first-hidden-layer', 'upper', 2 ** sizes[1], measured,
                              'configurations sharing layer-1 state share a gradient'))
        entries.append(_entry('rbm-capacity-floor', 'capacity', rbm_region_formula(sizes[0], sizes[1]),
                              measured, 'a DBM contains the RBM on its first two layers'))
        entries.append(_entry('dbm-strict-ceiling', 'strict-upper', 2 ** n_hid, measured,
                              'a DBM never reaches every hidden configuration'))
    elif topology == 'sdbm':
        width = min(sizes)
        entries.append(_entry('soft-deep-bundle', 'capacity', 2 ** (width * spec.depth), measured,
                              f'bundle of {width} independent single-unit chains'))
    return BoundReport(topology, n_hid, measured, tuple(entries))
