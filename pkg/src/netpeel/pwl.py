"""Piecewise-linear probing primitives.

Everything here sees the target only through a query handle.  The primitives:

* reconstruct the local affine map around a point (d+1 queries),
* find the leftmost slope break of a 1-D restriction by bisection,
* enumerate all slope breaks on a line,
* reconstruct the hyperplane a break lies on from the two adjacent
  affine maps,
* test whether a point sits on a break at all.

Tolerances are scale-aware: a fitted slope carries absolute error of order
eps * |f| / step, and a line extrapolated over distance D carries that error
times D.  The comparison thresholds below track both terms explicitly, so the
same code works at step sizes from 1e-4 down to 1e-8.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import EPS
from .oracle.nets import AffineMap

_TOL_FACTOR = 64.0
_SLOPE_FLOOR = 2e-5
_VALUE_FLOOR = 4e-5
_CANON_FLOOR = 1e-9


class GeneralPositionError(RuntimeError):
    """The target violates an isolation assumption the algorithm needs."""


class PieceBudgetError(RuntimeError):
    """More pieces were found than the caller's budget allows."""


@dataclass(frozen=True)
class Hyperplane:
    """Oriented affine hyperplane {x : normal.x + offset = 0}, unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        n.setflags(write=False)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @staticmethod
    def from_coefficients(w, b: float) -> "Hyperplane":
        w = np.asarray(w, dtype=float)
        scale = float(np.linalg.norm(w))
        if scale < _CANON_FLOOR:
            raise ValueError("zero normal vector")
        return Hyperplane(w / scale, float(b) / scale)

    def canonical(self) -> "Hyperplane":
        """Fix the orientation: first non-negligible coordinate positive."""
        for v in self.normal:
            if abs(v) > _CANON_FLOOR:
                if v < 0:
                    return Hyperplane(-self.normal, -self.offset)
                return self
        return self

    def signed_value(self, x) -> float:
        return float(self.normal @ np.asarray(x, dtype=float) + self.offset)

    def distance(self, x) -> float:
        return abs(self.signed_value(x))

    def close_to(self, other: "Hyperplane", tol: float) -> bool:
        """Same hyperplane as a set, up to orientation, within `tol`."""
        a, b = self.canonical(), other.canonical()
        return (float(np.max(np.abs(a.normal - b.normal))) <= tol
                and abs(a.offset - b.offset) <= tol)


@dataclass(frozen=True)
class Ray:
    base: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        direction = np.asarray(self.direction, dtype=float)
        n = float(np.linalg.norm(direction))
        if not math.isclose(n, 1.0, rel_tol=0, abs_tol=1e-9):
            direction = direction / n
        base.setflags(write=False)
        direction.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "direction", direction)

    def point(self, t: float) -> np.ndarray:
        return self.base + t * self.direction


def reconstruct_affine(oracle, x, delta: float) -> AffineMap:
    """Affine map agreeing with the oracle near `x`; exactly d+1 queries.

    The caller guarantees the oracle is affine on the probed points
    (x and x + delta*e_i); there is no way to detect a violation locally.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    f0 = float(oracle(x))
    w = np.empty(d)
    for i in range(d):
        step = x.copy()
        step[i] += delta
        w[i] = (float(oracle(step)) - f0) / delta
    return AffineMap(w, f0 - float(w @ x))


class _LocalLine(NamedTuple):
    t0: float
    f0: float
    slope: float
    scale: float

    def value(self, t: float) -> float:
        return self.f0 + self.slope * (t - self.t0)


def _fit_local(line, t: float, delta: float) -> _LocalLine:
    f0 = float(line(t))
    f1 = float(line(t + delta))
    return _LocalLine(t, f0, (f1 - f0) / delta, 1.0 + max(abs(f0), abs(f1)))


def _slope_tol(scale: float, delta: float) -> float:
    """Largest slope disagreement still read as "same piece".

    The scale term covers cancellation in the finite differences themselves.
    The absolute floor additionally covers callers that probe a residual
    after subtracting imperfectly recovered units: each subtraction leaves a
    phantom kink whose jump is the recovery error, orders of magnitude below
    any real unit's contribution but not always below pure roundoff.
    """
    return max(_TOL_FACTOR * EPS * scale / delta, _SLOPE_FLOOR)


def _value_tol(anchor: _LocalLine, dist: float, local_scale: float, delta: float) -> float:
    """Largest extrapolation disagreement still read as "same piece".

    Phantom kinks (see _slope_tol) integrate into value drift proportional
    to the extrapolation distance, hence the floor grows with it.  Genuine
    breaks never hide under either floor: the restriction of a ReLU sum is
    continuous, so a break always shows up as a slope jump, and the
    generators keep those jumps far above the floors.
    """
    noise = _TOL_FACTOR * EPS * (anchor.scale * (1.0 + abs(dist) / delta) + local_scale)
    return max(noise, _VALUE_FLOOR * (1.0 + abs(dist)))


def default_window(delta: float, nonneg: bool) -> tuple[float, float]:
    lim = 1.0 / delta
    return (0.0, lim) if nonneg else (-lim, lim)


def _resolve_window(line, delta, window):
    if window is not None:
        return float(window[0]), float(window[1])
    lo = getattr(line, "t_min", None)
    nonneg = lo is not None and lo >= 0.0
    return default_window(delta, nonneg)


def leftmost_critical_point_1d(line, delta: float, window=None) -> float | None:
    """Leftmost slope break of a piecewise-linear 1-D function, or None.

    Bisection: keep a local affine fit anchored at the highest point known to
    lie left of the first break, and at each round fit the function at the
    midpoint from two queries.  If the midpoint fit agrees with the anchor in
    both slope and extrapolated value, the break (if any) is to the right and
    the midpoint fit becomes the new anchor; otherwise it is to the left.
    Ends with the intersection of the fits flanking the localized break.

    Preconditions (caller's responsibility): every linear piece inside the
    window is at least a few delta long, the piece at the window's left edge
    extends at least delta past the edge, and adjacent pieces have visibly
    different affine maps.
    """
    lo, hi = _resolve_window(line, delta, window)
    if hi - lo <= 4 * delta:
        return None
    anchor = _fit_local(line, lo, delta)
    saw_break = False
    cap = math.ceil(math.log2(max((hi - lo) / delta, 8.0))) + 16
    rounds = 0
    while hi - lo > 4 * delta:
        rounds += 1
        if rounds > cap:
            raise GeneralPositionError("bisection failed to converge")
        mid = (lo + hi) / 2.0
        local = _fit_local(line, mid, delta)
        dist = mid - anchor.t0
        value_ok = abs(local.f0 - anchor.value(mid)) <= _value_tol(
            anchor, dist, local.scale, delta)
        slope_ok = abs(local.slope - anchor.slope) <= _slope_tol(
            max(anchor.scale, local.scale), delta)
        if value_ok and slope_ok:
            lo, anchor = mid, local
        else:
            saw_break = True
            hi = min(hi, mid + delta)
    if not saw_break:
        return None

    right = _fit_local(line, hi + delta / 2.0, delta / 2.0)
    gap = right.slope - anchor.slope
    if abs(gap) <= 4.0 * _slope_tol(max(anchor.scale, right.scale), delta):
        raise GeneralPositionError("pieces share affine function")
    mid = (lo + hi) / 2.0
    t_star = mid + (anchor.value(mid) - right.value(mid)) / gap
    if not (lo - 2 * delta <= t_star <= hi + 2 * delta):
        raise GeneralPositionError("pieces share affine function")
    return float(t_star)


def scan_segments(window: tuple[float, float], delta: float) -> list[tuple[float, float]]:
    """Split a window at powers-of-16 magnitudes.

    Fitting a slope from delta-spaced queries loses precision once |f| grows,
    so wide windows are scanned in blocks of comparable magnitude; breaks of
    interest live at moderate |t| and the far blocks just verify emptiness.
    """
    lo, hi = float(window[0]), float(window[1])
    edges = set()
    s = 16.0
    bound = max(abs(lo), abs(hi))
    while s < bound:
        for e in (-s, s):
            if lo < e < hi:
                edges.add(e)
        s *= 16.0
    cuts = [lo, *sorted(edges), hi]
    return list(zip(cuts[:-1], cuts[1:]))


def all_critical_points_1d(line, delta: float, k_max: int, window=None) -> list[float]:
    """All slope breaks on the line, sorted, by repeated leftmost search.

    After each find the window's left end advances past the break by delta/2.
    Raises PieceBudgetError when more than `k_max` breaks turn up.
    """
    lo, hi = _resolve_window(line, delta, window)
    found: list[float] = []
    cursor = lo
    for seg_lo, seg_hi in scan_segments((lo, hi), delta):
        while True:
            start = max(cursor, seg_lo)
            if seg_hi - start <= 4 * delta:
                break
            t = leftmost_critical_point_1d(line, delta, (start, seg_hi))
            if t is None:
                break
            found.append(t)
            if len(found) > k_max:
                raise PieceBudgetError("piece budget exceeded")
            cursor = t + delta / 2.0
    return found


def _inward(e: np.ndarray, x: np.ndarray, reach: float, nonneg: bool) -> np.ndarray | None:
    """Zero the components that would push a probe out of the orthant."""
    if not nonneg:
        return e
    e = e.copy()
    e[x < reach] = 0.0
    n = float(np.linalg.norm(e))
    if n < 1e-12:
        return None
    return e / n


def _is_nonneg_domain(oracle) -> bool:
    return getattr(oracle, "domain", None) == "nonneg"


def is_critical_point(oracle, x, delta: float, n_dirs: int = 8, rng=None) -> bool:
    """Does the function bend within `delta` of `x`?

    Probes x +/- delta*e for random unit directions e and checks the second
    difference against a threshold covering rounding noise at the local value
    scale.  Near the boundary of a nonnegative domain, directions are
    projected to stay inside.
    """
    rng = np.random.default_rng(12345) if rng is None else rng
    x = np.asarray(x, dtype=float)
    nonneg = _is_nonneg_domain(oracle)
    f0 = float(oracle(x))
    tau = max(1e3 * EPS * (1.0 + abs(f0)), 1e-4 * delta)
    for _ in range(n_dirs):
        e = rng.standard_normal(x.size)
        e /= np.linalg.norm(e)
        e = _inward(e, x, 1.5 * delta, nonneg)
        if e is None:
            continue
        bend = abs(float(oracle(x + delta * e)) + float(oracle(x - delta * e)) - 2.0 * f0)
        if bend > tau:
            return True
    return False


def reconstruct_critical_hyperplane(
    oracle,
    x,
    delta: float,
    rng=None,
    retries: int = 8,
    *,
    radius: float | None = None,
    step: float | None = None,
) -> Hyperplane:
    """Hyperplane through the slope break at `x`, canonicalized.

    Reconstructs the affine maps on both sides (bases x +/- radius*e for a
    random direction e) and takes the null set of their difference.  Each
    side is cross-checked by predicting the function one step further out;
    a failed check means the probes straddled a second break, and a fresh
    direction is drawn.  O(d) queries per attempt.

    `radius` defaults to delta and `step` (the finite-difference offset of
    the affine fits) to delta/4.  Callers working against well-separated
    breaks can pass larger values: the slope error of a fit shrinks
    linearly in the step, and the cross-check still catches a straddle.
    After two failed attempts the stencil halves on each retry (never
    below the delta-scale default), trading precision for isolation when
    the generous radius keeps hitting a second break.
    """
    rng = np.random.default_rng(12345) if rng is None else rng
    x = np.asarray(x, dtype=float)
    radius = delta if radius is None else radius
    step = delta / 4.0 if step is None else step
    nonneg = _is_nonneg_domain(oracle)
    d = x.size
    for attempt in range(retries):
        shrink = 0.5 ** max(0, attempt - 1)
        r_a = max(radius * shrink, min(radius, 2.0 * delta))
        s_a = max(step * shrink, min(step, delta / 2.0))
        e = rng.standard_normal(d)
        e /= np.linalg.norm(e)
        e = _inward(e, x, 2.0 * r_a + 2.0 * s_a, nonneg)
        if e is None:
            raise GeneralPositionError("no hyperplane detected")
        maps = []
        ok = True
        for side in (1.0, -1.0):
            base = x + side * r_a * e
            lam = reconstruct_affine(oracle, base, s_a)
            probe = x + side * 2.0 * r_a * e
            scale = 1.0 + abs(lam.b) + float(np.abs(lam.w) @ np.abs(probe))
            if abs(lam(probe) - float(oracle(probe))) > 1e5 * EPS * scale:
                ok = False
                break
            maps.append(lam)
        if not ok:
            continue
        dw = maps[0].w - maps[1].w
        db = maps[0].b - maps[1].b
        norm = float(np.linalg.norm(dw))
        noise = 1e3 * EPS * (1.0 + abs(maps[0].b) + abs(maps[1].b)) * math.sqrt(d) / s_a
        if norm <= max(noise, 1e-9):
            continue
        plane = Hyperplane(dw / norm, db / norm)
        if plane.distance(x) > r_a:
            continue
        return plane.canonical()
    raise GeneralPositionError("no hyperplane detected")
