"""Network containers and reference evaluators.

Two function classes are modeled.  The two-layer class maps the closed
positive orthant to the reals,

    f(x) = skip(x) + sum_j  s_j * relu(w_j . x + b_j),      s_j in {+1, -1},

where the affine `skip` term is optional.  The three-layer class is defined on
all of R^d,

    f(x) = s . relu(V relu(W x + b) + c),

with unit-norm, linearly independent rows of W (so W has a right inverse) and
no zero entry in V.  Containers are immutable; evaluators come in scalar and
batch form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import DEFAULT_TOL


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.flags.writeable = False
    return out


def relu(z):
    return np.maximum(z, 0.0)


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> w . x + b."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen(np.atleast_1d(self.w)))
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def __call__(self, x) -> float:
        return float(self.w @ np.asarray(x, dtype=float) + self.b)

    def batch(self, xs: np.ndarray) -> np.ndarray:
        return np.asarray(xs, dtype=float) @ self.w + self.b


@dataclass(frozen=True, eq=False)
class Neuron:
    """One hidden unit: sign * relu(w . x + b)."""

    w: np.ndarray
    b: float
    sign: int

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen(np.atleast_1d(self.w)))
        object.__setattr__(self, "b", float(self.b))
        sign = int(self.sign)
        if sign not in (-1, 1):
            raise ValueError(f"neuron sign must be +1 or -1, got {self.sign}")
        object.__setattr__(self, "sign", sign)

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def pre_activation(self, x) -> float:
        return float(self.w @ np.asarray(x, dtype=float) + self.b)

    def __call__(self, x) -> float:
        return self.sign * float(relu(self.pre_activation(x)))


@dataclass(frozen=True, eq=False)
class TwoLayerNet:
    """Sum of signed ReLU units plus an optional affine term, on x >= 0."""

    d: int
    neurons: tuple[Neuron, ...]
    skip: AffineMap | None = None

    def __post_init__(self):
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "neurons", tuple(self.neurons))
        for n in self.neurons:
            if n.dim != self.d:
                raise ValueError(f"neuron dim {n.dim} != net dim {self.d}")
        if self.skip is not None and self.skip.dim != self.d:
            raise ValueError("skip dim does not match net dim")

    @property
    def width(self) -> int:
        return len(self.neurons)

    def weight_matrix(self) -> np.ndarray:
        return np.array([n.w for n in self.neurons], dtype=float)

    def biases(self) -> np.ndarray:
        return np.array([n.b for n in self.neurons], dtype=float)

    def signs(self) -> np.ndarray:
        return np.array([n.sign for n in self.neurons], dtype=float)


@dataclass(frozen=True, eq=False)
class ThreeLayerNet:
    """s . relu(V relu(W x + b) + c) on all of R^d."""

    W: np.ndarray
    b: np.ndarray
    V: np.ndarray
    c: np.ndarray
    signs: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        W = _frozen(np.atleast_2d(self.W))
        V = _frozen(np.atleast_2d(self.V))
        b = _frozen(np.atleast_1d(self.b))
        c = _frozen(np.atleast_1d(self.c))
        signs = _frozen(np.atleast_1d(self.signs))
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "signs", signs)
        d1, d = W.shape
        if b.shape != (d1,):
            raise ValueError("b length does not match rows of W")
        if V.shape[1] != d1:
            raise ValueError("V columns do not match rows of W")
        d2 = V.shape[0]
        if c.shape != (d2,) or signs.shape != (d2,):
            raise ValueError("c/signs length does not match rows of V")
        if self.validate:
            self._check_class()

    def _check_class(self):
        row_norms = np.linalg.norm(self.W, axis=1)
        if np.any(np.abs(row_norms - 1.0) > DEFAULT_TOL.unit_norm):
            raise ValueError("rows of W must have unit norm")
        if self.d1 > self.d:
            raise ValueError("W must have at most d rows to be right-invertible")
        if np.linalg.matrix_rank(self.W, tol=1e-10) < self.d1:
            raise ValueError("rows of W must be linearly independent")
        if np.any(self.V == 0.0):
            raise ValueError("V must have no zero entry")
        if not np.all(np.isin(self.signs, (-1.0, 1.0))):
            raise ValueError("output signs must be +1 or -1")

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def d1(self) -> int:
        return self.W.shape[0]

    @property
    def d2(self) -> int:
        return self.V.shape[0]

    def hidden(self, x) -> np.ndarray:
        """First-layer activations relu(W x + b)."""
        return relu(self.W @ np.asarray(x, dtype=float) + self.b)

    def top(self, h) -> float:
        """The last two layers as a function of the first hidden layer."""
        return float(self.signs @ relu(self.V @ np.asarray(h, dtype=float) + self.c))


@dataclass(frozen=True, eq=False)
class ThreeLayerFunction:
    """First layer plus an arbitrary two-layer top over the hidden activations.

    Recovery of a three-layer net produces this shape: the top may carry an
    affine term in the hidden activations, which the strict `ThreeLayerNet`
    class does not.  A plain `ThreeLayerNet` embeds losslessly.
    """

    W: np.ndarray
    b: np.ndarray
    top: TwoLayerNet

    def __post_init__(self):
        object.__setattr__(self, "W", _frozen(np.atleast_2d(self.W)))
        object.__setattr__(self, "b", _frozen(np.atleast_1d(self.b)))
        if self.top.d != self.W.shape[0]:
            raise ValueError("top dim does not match rows of W")
        if self.b.shape != (self.W.shape[0],):
            raise ValueError("b length does not match rows of W")

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def d1(self) -> int:
        return self.W.shape[0]

    def hidden(self, x) -> np.ndarray:
        return relu(self.W @ np.asarray(x, dtype=float) + self.b)


def as_three_layer_function(net: ThreeLayerNet) -> ThreeLayerFunction:
    top = TwoLayerNet(
        d=net.d1,
        neurons=tuple(Neuron(v, c, int(s)) for v, c, s in zip(net.V, net.c, net.signs)),
    )
    return ThreeLayerFunction(W=net.W, b=net.b, top=top)


def eval_two_layer(net: TwoLayerNet, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.d,):
        raise ValueError(f"expected point of dim {net.d}, got shape {x.shape}")
    total = 0.0 if net.skip is None else net.skip(x)
    for n in net.neurons:
        total += n(x)
    return float(total)


def eval_two_layer_batch(net: TwoLayerNet, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if net.width == 0:
        out = np.zeros(xs.shape[0])
    else:
        pre = xs @ net.weight_matrix().T + net.biases()
        out = relu(pre) @ net.signs()
    if net.skip is not None:
        out = out + net.skip.batch(xs)
    return out


def eval_three_layer(net: ThreeLayerNet, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.d,):
        raise ValueError(f"expected point of dim {net.d}, got shape {x.shape}")
    return net.top(net.hidden(x))


def eval_three_layer_batch(net: ThreeLayerNet, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    h = relu(xs @ net.W.T + net.b)
    return relu(h @ net.V.T + net.c) @ net.signs


def batch_eval(net, xs: np.ndarray) -> np.ndarray:
    """Vectorized evaluation for any container defined here."""
    if isinstance(net, TwoLayerNet):
        return eval_two_layer_batch(net, xs)
    if isinstance(net, ThreeLayerNet):
        return eval_three_layer_batch(net, xs)
    if isinstance(net, ThreeLayerFunction):
        hidden = relu(np.asarray(xs, dtype=float) @ net.W.T + net.b)
        return eval_two_layer_batch(net.top, hidden)
    raise TypeError(f"cannot evaluate {type(net).__name__}")


def point_eval(net, x) -> float:
    if isinstance(net, TwoLayerNet):
        return eval_two_layer(net, x)
    if isinstance(net, ThreeLayerNet):
        return eval_three_layer(net, x)
    if isinstance(net, ThreeLayerFunction):
        return eval_two_layer(net.top, net.hidden(x))
    raise TypeError(f"cannot evaluate {type(net).__name__}")
