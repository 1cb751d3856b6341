"""Recovery of a sum of signed ReLU units from queries on the nonnegative orthant.

The loop: scan the coordinate rays for the leftmost slope break, bracket it,
read the unit's sign off the local convexity, read its weights off the change
in the tangent affine map, subtract the recovered unit from the oracle, and
repeat.  Units that never bend on the probed orthant are linear there; they
end up in the affine remainder reconstructed at the end, which also absorbs
the orientation ambiguity of each recovered unit (sigma(-z) = sigma(z) - z).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import EPS
from .oracle.nets import AffineMap, Neuron, TwoLayerNet, relu
from .oracle.query import DOMAIN_NONNEG, LineOracle, QueryOracle, axis_ray
from .pwl import (
    GeneralPositionError,
    PieceBudgetError,
    default_window,
    leftmost_critical_point_1d,
    reconstruct_affine,
    scan_segments,
)

_BRACKET_CAP = 0.01
_STEP_CAP = 1.25e-4
_SCAN_START = 1e-4
_SKIP_SEED = 20240817


@dataclass
class ExtractedTwoLayer:
    """Result of a depth-2 run: recovered units, affine remainder, query split."""

    d: int
    neurons: tuple[Neuron, ...]
    skip: AffineMap
    phase_queries: dict[str, int] = field(default_factory=dict)

    @property
    def width(self) -> int:
        return len(self.neurons)

    @property
    def total_queries(self) -> int:
        return sum(self.phase_queries.values())

    def network(self) -> TwoLayerNet:
        return TwoLayerNet(d=self.d, neurons=self.neurons, skip=self.skip)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        acc = self.skip(x)
        for n in self.neurons:
            acc += n(x)
        return float(acc)


_FAR_STEP = 1e-6


def _first_break(line: LineOracle, delta: float, window) -> float | None:
    """Leftmost break over the window, scanned in magnitude blocks.

    Far from the origin the oracle's evaluation noise grows with the summed
    unit magnitudes, which cancellation can hide from |f|, so a fixed probe
    step delta eventually reads noise as slope.  Each block is scanned with a
    step proportional to its magnitude instead; the blocks that matter keep
    the requested resolution and the far ones only confirm emptiness.
    """
    lo, hi = window
    for seg_lo, seg_hi in scan_segments((lo, hi), delta):
        start = max(seg_lo, lo)
        step = max(delta, _FAR_STEP * abs(start))
        if seg_hi - start <= 4 * step:
            continue
        t = leftmost_critical_point_1d(line, step, (start, seg_hi))
        if t is not None:
            return t
    return None


def find_neuron_crossing(
    oracle: QueryOracle,
    d: int,
    delta: float,
    *,
    start_axis: int = 0,
    window: float | None = None,
):
    """Bracket the first remaining slope break on a coordinate ray.

    Scans rays t -> t*e_i for i = start_axis..d-1 and, on the first ray with a
    break at t0, returns (x1, x2, axis) with x1 = (t0-eps)*e_i and
    x2 = (t0+eps)*e_i.  The half-width eps is half the gap to the next break
    on that ray (found by a second leftmost search), capped at 0.01 and
    floored at delta/4, so exactly one unit changes state between x1 and x2.
    Returns None when every scanned ray is break-free.

    Scans start a small offset inside the ray rather than at t = 0: an oracle
    built by subtraction or peeling carries residual micro-kinks hugging the
    orthant boundary, and a bisection anchored on top of one mislocates it as
    a break at ~delta with no actual slope jump.
    """
    hi = (1.0 / delta) if window is None else float(window)
    lo = min(_SCAN_START, hi / 16.0)
    for axis in range(start_axis, d):
        ray = axis_ray(oracle, axis)
        t0 = _first_break(ray, delta, (lo, hi))
        if t0 is None:
            continue
        t1 = _first_break(ray, delta, (t0 + delta / 2.0, hi))
        gap = (t1 - t0) if t1 is not None else np.inf
        eps = max(delta / 4.0, min(gap / 2.0, _BRACKET_CAP, t0 / 2.0))
        e = np.zeros(d)
        e[axis] = 1.0
        return (t0 - eps) * e, (t0 + eps) * e, axis
    return None


def recover_sign_u(oracle, x1, x2) -> int:
    """Sign of the bracketed unit from the bend direction of the restriction.

    A +1 unit contributes a convex kink, so the second difference
    f(x1) + f(x2) - 2 f(midpoint) is positive; a -1 unit makes it negative.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    f1 = float(oracle(x1))
    f2 = float(oracle(x2))
    fm = float(oracle((x1 + x2) / 2.0))
    second = f1 + f2 - 2.0 * fm
    tau = 1e4 * EPS * (1.0 + max(abs(f1), abs(f2), abs(fm)))
    if abs(second) <= tau:
        raise GeneralPositionError("no kink in segment")
    return 1 if second > 0 else -1


def recover_neuron(oracle, x1, x2, delta: float) -> Neuron:
    """The unit whose state changes between x1 and x2, up to orientation.

    Reconstructs the tangent affine maps at both endpoints; their difference
    (right minus left) is the unit's pre-activation map, up to a global sign
    that cannot be observed and is later compensated by the affine remainder.

    The probe step is chosen in two stages.  Four queries along the bracket
    direction measure the slope jump, which equals the component of the
    hidden weight vector along that direction; the endpoints' distance to
    the crossing hyperplane is the bracket half-width times that component,
    and the off-axis probes must move by less than it or the affine fits
    would straddle the very plane being measured.  The step is also capped
    so the probes cannot reach a neighboring unit's hyperplane, whose
    distance is at worst the crossing separation times the smallest axis
    component the generators allow.  Finally the fit bases are nudged off
    the scan ray into the domain interior: when the oracle is itself a
    peeled network, the ray lies exactly on the hidden orthant's boundary
    faces, where peeling leaves micro-kinks that would bias the fits.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    span = x2 - x1
    eps = float(np.linalg.norm(span)) / 2.0
    e = span / (2.0 * eps)
    h = max(delta / 8.0, min(eps / 8.0, 1e-3))
    f1 = float(oracle(x1))
    f2 = float(oracle(x2))
    m1 = (float(oracle(x1 + h * e)) - f1) / h
    m2 = (float(oracle(x2 + h * e)) - f2) / h
    jump = abs(m2 - m1)
    scale = 1.0 + max(abs(f1), abs(f2))
    if jump <= max(1e4 * EPS * scale / h, 1e-6):
        raise GeneralPositionError("endpoints in same linear region")
    plane_dist = eps * jump
    step = max(min(eps / 8.0, plane_dist / 4.0, _STEP_CAP), delta / 64.0)
    nudge = min(step / 8.0, plane_dist / (4.0 * np.sqrt(x1.size)))
    shift = nudge * np.ones_like(x1)
    lam1 = reconstruct_affine(oracle, x1 + shift, step)
    lam2 = reconstruct_affine(oracle, x2 + shift, step)
    w = lam2.w - lam1.w
    b = lam2.b - lam1.b
    if float(np.linalg.norm(w)) <= max(1e3 * EPS * scale * np.sqrt(x1.size) / step, 1e-9):
        raise GeneralPositionError("endpoints in same linear region")
    return Neuron(w, b, recover_sign_u(oracle, x1, x2))


def subtracted_oracle(oracle: QueryOracle, recovered) -> QueryOracle:
    """Oracle for oracle(x) - sum of the recovered units; one query per call."""
    units = tuple(recovered)

    def fn(x):
        acc = oracle.query(x)
        for n in units:
            acc -= n.sign * relu(float(n.w @ x) + n.b)
        return acc

    return QueryOracle(fn, oracle.dim, oracle.domain, label=f"{oracle.label}-peel")


def extract_two_layer(
    oracle: QueryOracle,
    d: int,
    delta: float,
    d1_max: int,
    *,
    scan_window: float | None = None,
) -> ExtractedTwoLayer:
    """Full depth-2 recovery loop.

    Alternates crossing search, unit recovery, and subtraction until no
    coordinate ray bends any more, then reads the affine remainder off the
    residual at a generic interior point and validates that the residual
    really is affine at a handful of random points.

    `scan_window` bounds the scanned portion of each ray (default 1/delta).
    Raises PieceBudgetError("too many neurons") past `d1_max`.
    """
    if oracle.domain != DOMAIN_NONNEG:
        raise ValueError("depth-2 extraction queries the nonnegative orthant")
    counts = {"scan": 0, "recover": 0, "skip": 0}
    neurons: list[Neuron] = []
    work = oracle
    start_axis = 0
    while True:
        mark = oracle.count
        hit = find_neuron_crossing(work, d, delta, start_axis=start_axis,
                                   window=scan_window)
        counts["scan"] += oracle.count - mark
        if hit is None:
            break
        x1, x2, axis = hit
        mark = oracle.count
        neuron = recover_neuron(work, x1, x2, delta)
        counts["recover"] += oracle.count - mark
        neurons.append(neuron)
        if len(neurons) > d1_max:
            raise PieceBudgetError("too many neurons")
        work = subtracted_oracle(oracle, neurons)
        start_axis = axis
    mark = oracle.count
    rng = np.random.default_rng(_SKIP_SEED)
    base = rng.uniform(0.7, 1.7, size=d)
    skip = reconstruct_affine(work, base, 0.25)
    for _ in range(16):
        x = rng.uniform(0.0, 4.0, size=d)
        got = work(x)
        if abs(got - skip(x)) > 1e-8 * (1.0 + abs(got)):
            raise GeneralPositionError("residual is not affine")
    counts["skip"] += oracle.count - mark
    return ExtractedTwoLayer(d=d, neurons=tuple(neurons), skip=skip,
                             phase_queries=counts)
