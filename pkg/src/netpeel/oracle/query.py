"""Black-box query access with exact call accounting.

Extraction code is only ever handed a `QueryOracle`.  The oracle counts every
evaluation (thread-safely, one increment per call) and enforces the domain the
underlying function class lives on.  `AccessAudit` wraps a network so tests
can prove that an extraction run never touched ground-truth parameters other
than through queries.
"""
from __future__ import annotations

import threading
from typing import Callable

import numpy as np

from .nets import (
    ThreeLayerFunction,
    ThreeLayerNet,
    TwoLayerNet,
    eval_three_layer,
    eval_two_layer,
    point_eval,
)

DOMAIN_NONNEG = "nonneg"
DOMAIN_FULL = "full"

# Numerical slack when checking membership in the closed positive orthant.
_ORTHANT_SLACK = 1e-12


class DomainError(ValueError):
    """A query fell outside the oracle's domain."""


class QueryOracle:
    """Wraps `fn: R^dim -> R`, counting evaluations."""

    def __init__(self, fn: Callable[[np.ndarray], float], dim: int,
                 domain: str = DOMAIN_FULL, label: str = ""):
        if domain not in (DOMAIN_NONNEG, DOMAIN_FULL):
            raise ValueError(f"unknown domain flag {domain!r}")
        self._fn = fn
        self.dim = int(dim)
        self.domain = domain
        self.label = label
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def query(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected point of dim {self.dim}, got shape {x.shape}")
        if self.domain == DOMAIN_NONNEG and np.min(x) < -_ORTHANT_SLACK:
            raise DomainError(f"point outside the positive orthant: min coord {np.min(x)}")
        with self._lock:
            self._count += 1
        val = float(self._fn(x))
        if not np.isfinite(val):
            raise ValueError(f"oracle returned non-finite value {val}")
        return val

    def __call__(self, x) -> float:
        return self.query(x)


class LineOracle:
    """Restriction of an oracle to `t -> base + t * direction`.

    Each evaluation costs exactly one underlying query.  Carries its own
    counter so 1-d search primitives can be budgeted in isolation.
    """

    def __init__(self, oracle: QueryOracle, base, direction, t_min: float | None = None):
        self.parent = oracle
        self.base = np.asarray(base, dtype=float)
        self.direction = np.asarray(direction, dtype=float)
        self.t_min = t_min  # smallest admissible t, None when unbounded
        self._count = 0

    @property
    def count(self) -> int:
        return self._count

    def query(self, t: float) -> float:
        self._count += 1
        return self.parent.query(self.base + float(t) * self.direction)

    def __call__(self, t: float) -> float:
        return self.query(t)


def axis_ray(oracle: QueryOracle, axis: int) -> LineOracle:
    e = np.zeros(oracle.dim)
    e[axis] = 1.0
    t_min = 0.0 if oracle.domain == DOMAIN_NONNEG else None
    return LineOracle(oracle, np.zeros(oracle.dim), e, t_min=t_min)


class AccessAudit:
    """Attribute proxy that counts parameter reads while armed.

    Build the oracle first (construction reads the parameters once, which is
    the oracle's own business), then `arm()` before handing the oracle to an
    extractor.  Any attribute read through the proxy while armed is recorded;
    an honest extractor finishes with `reads == 0`.
    """

    def __init__(self, net):
        object.__setattr__(self, "_net", net)
        object.__setattr__(self, "_armed", False)
        object.__setattr__(self, "reads", 0)

    def arm(self):
        object.__setattr__(self, "_armed", True)

    def disarm(self):
        object.__setattr__(self, "_armed", False)

    def unwrap(self):
        """The bare network, for use after the audit window closed."""
        if self._armed:
            raise RuntimeError("disarm the audit before unwrapping")
        return self._net

    def __getattr__(self, name):
        if object.__getattribute__(self, "_armed"):
            object.__setattr__(self, "reads", self.reads + 1)
        return getattr(object.__getattribute__(self, "_net"), name)

    def __setattr__(self, name, value):
        raise AttributeError("audited networks are read-only")


def as_oracle(net, label: str = "") -> QueryOracle:
    """Query access to a network; parameters are captured once, here.

    Accepts a bare net or an `AccessAudit` wrapper (reads performed during
    construction happen before the audit is armed).
    """
    target = net.unwrap() if isinstance(net, AccessAudit) else net
    if isinstance(target, TwoLayerNet):
        d, domain = target.d, DOMAIN_NONNEG
        fn = lambda x: eval_two_layer(target, x)
    elif isinstance(target, ThreeLayerNet):
        d, domain = target.d, DOMAIN_FULL
        fn = lambda x: eval_three_layer(target, x)
    elif isinstance(target, ThreeLayerFunction):
        d, domain = target.d, DOMAIN_FULL
        fn = lambda x: point_eval(target, x)
    else:
        raise TypeError(f"cannot build an oracle from {type(target).__name__}")
    return QueryOracle(fn, d, domain, label=label)
