"""Reverse-mode differentiable primitives.

A `Tensor` wraps a float64 ndarray and remembers how it was produced, so
calling `backward()` on a scalar loss accumulates gradients into every
`Parameter` that fed it. The op set is deliberately small: exactly what
the embedding heads, alignment modules and losses need. Computation runs
in float64; the float32 contract of the on-disk formats is enforced at
the serialization boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInputError,
    DeterminismError,
    DimensionError,
    ParameterError,
    TrainingError,
    ValidationError,
)

EPS_NORM = 1e-12  # vectors below this norm are degenerate
P_FLOOR = 1e-12  # probability floor inside nll_from_probs
_TINY = 1e-30  # guards 0/0 in distance gradients


class Tensor:
    """Node in a backward graph over float64 data."""

    __slots__ = ("data", "grad", "_parents", "_bwd")

    def __init__(self, data, parents=(), bwd=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._bwd = bwd

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into .grad over the whole graph."""
        if self.data.ndim != 0 and self.data.size != 1:
            raise DimensionError("backward() requires a scalar root")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        _accumulate(self, np.ones_like(self.data))
        for node in reversed(topo):
            if node._bwd is not None:
                node._bwd(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


class Parameter(Tensor):
    """Trainable leaf tensor with a persistent, named gradient buffer."""

    __slots__ = ("name",)

    def __init__(self, value, name: str):
        if not np.all(np.isfinite(np.asarray(value, dtype=np.float64))):
            raise ValidationError(f"parameter {name!r} has non-finite entries")
        super().__init__(value)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _data(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _parents(*xs) -> tuple:
    return tuple(x for x in xs if isinstance(x, Tensor))


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()


# ---------------------------------------------------------------------------
# ops
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix/vector product with gradients into both operands.

    Supports the 1-D/2-D combinations numpy's `@` allows for those ranks.
    """
    ad, bd = _data(a), _data(b)
    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2):
        raise DimensionError(f"matmul supports 1-D/2-D operands, got {ad.ndim}-D and {bd.ndim}-D")
    if ad.shape[-1] != (bd.shape[0] if bd.ndim >= 1 else None):
        raise DimensionError(f"matmul inner dimensions differ: {ad.shape} vs {bd.shape}")
    out = Tensor(ad @ bd, parents=_parents(a, b))

    def bwd(g):
        if isinstance(a, Tensor):
            if ad.ndim == 2 and bd.ndim == 2:
                _accumulate(a, g @ bd.T)
            elif ad.ndim == 1 and bd.ndim == 2:
                _accumulate(a, bd @ g)
            elif ad.ndim == 2 and bd.ndim == 1:
                _accumulate(a, np.outer(g, bd))
            else:
                _accumulate(a, g * bd)
        if isinstance(b, Tensor):
            if ad.ndim == 2 and bd.ndim == 2:
                _accumulate(b, ad.T @ g)
            elif ad.ndim == 1 and bd.ndim == 2:
                _accumulate(b, np.outer(ad, g))
            elif ad.ndim == 2 and bd.ndim == 1:
                _accumulate(b, ad.T @ g)
            else:
                _accumulate(b, g * ad)

    out._bwd = bwd
    return out


def transpose(x) -> Tensor:
    xd = _data(x)
    if xd.ndim != 2:
        raise DimensionError("transpose expects a matrix")
    out = Tensor(xd.T, parents=_parents(x))

    def bwd(g):
        if isinstance(x, Tensor):
            _accumulate(x, g.T)

    out._bwd = bwd
    return out


def add(a, b) -> Tensor:
    """Elementwise sum; also supports adding a row vector to a matrix."""
    ad, bd = _data(a), _data(b)
    if ad.shape != bd.shape and not (ad.ndim == 2 and bd.ndim == 1 and ad.shape[1] == bd.shape[0]):
        raise DimensionError(f"add shapes differ: {ad.shape} vs {bd.shape}")
    out = Tensor(ad + bd, parents=_parents(a, b))

    def bwd(g):
        if isinstance(a, Tensor):
            _accumulate(a, g)
        if isinstance(b, Tensor):
            _accumulate(b, g.sum(axis=0) if bd.shape != g.shape else g)

    out._bwd = bwd
    return out


def sub(a, b) -> Tensor:
    ad, bd = _data(a), _data(b)
    if ad.shape != bd.shape:
        raise DimensionError(f"sub shapes differ: {ad.shape} vs {bd.shape}")
    out = Tensor(ad - bd, parents=_parents(a, b))

    def bwd(g):
        if isinstance(a, Tensor):
            _accumulate(a, g)
        if isinstance(b, Tensor):
            _accumulate(b, -g)

    out._bwd = bwd
    return out


def scale(x, c: float) -> Tensor:
    c = float(c)
    out = Tensor(_data(x) * c, parents=_parents(x))

    def bwd(g):
        if isinstance(x, Tensor):
            _accumulate(x, g * c)

    out._bwd = bwd
    return out


def add_const(x, c: float) -> Tensor:
    out = Tensor(_data(x) + float(c), parents=_parents(x))

    def bwd(g):
        if isinstance(x, Tensor):
            _accumulate(x, g)

    out._bwd = bwd
    return out


def relu(x) -> Tensor:
    xd = _data(x)
    out = Tensor(np.maximum(xd, 0.0), parents=_parents(x))

    def bwd(g):
        if isinstance(x, Tensor):
            _accumulate(x, g * (xd > 0))

    out._bwd = bwd
    return out


def mean_axis0(x) -> Tensor:
    """Mean over the leading axis: the temporal pooling primitive."""
    xd = _data(x)
    if xd.ndim != 2 or xd.shape[0] < 1:
        raise DimensionError("mean_axis0 expects a nonempty T x D matrix")
    t = xd.shape[0]
    out = Tensor(xd.mean(axis=0), parents=_parents(x))

    def bwd(g):
        if isinstance(x, Tensor):
            _accumulate(x, np.broadcast_to(g / t, xd.shape).copy())

    out._bwd = bwd
    return out


def mean_scalars(terms) -> Tensor:
    """Mean of scalar tensors (batch reduction)."""
    terms = list(terms)
    if not terms:
        raise ValidationError("mean_scalars needs at least one term")
    n = len(terms)
    out = Tensor(sum(float(_data(t)) for t in terms) / n, parents=_parents(*terms))

    def bwd(g):
        for t in terms:
            if isinstance(t, Tensor):
                _accumulate(t, g / n)

    out._bwd = bwd
    return out


def softmax(logits) -> Tensor:
    """Stable softmax over a vector, with the exact Jacobian backward."""
    zd = _data(logits)
    if zd.ndim != 1:
        raise DimensionError("softmax expects a vector")
    e = np.exp(zd - zd.max())
    p = e / e.sum()
    out = Tensor(p, parents=_parents(logits))

    def bwd(g):
        if isinstance(logits, Tensor):
            _accumulate(logits, p * (g - np.dot(g, p)))

    out._bwd = bwd
    return out


def distance_softmax(dists, tau: float) -> Tensor:
    """softmax(-d / tau): turns distances into a probability vector.

    Computed with max-subtraction (min-distance shift) for stability. The
    backward pass composes the exact softmax Jacobian with the -1/tau
    scaling of the distances.
    """
    if tau <= 0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    dd = _data(dists)
    if dd.ndim != 1:
        raise DimensionError("distance_softmax expects a distance vector")
    if not np.all(np.isfinite(dd)):
        raise ValidationError("distance_softmax requires finite distances")
    s = -(dd - dd.min()) / tau
    e = np.exp(s)
    p = e / e.sum()
    out = Tensor(p, parents=_parents(dists))

    def bwd(g):
        if isinstance(dists, Tensor):
            _accumulate(dists, p * (g - np.dot(g, p)) * (-1.0 / tau))

    out._bwd = bwd
    return out


def l2_normalize(v) -> Tensor:
    """Project a vector onto the unit sphere; degenerate below EPS_NORM."""
    vd = _data(v)
    if vd.ndim != 1:
        raise DimensionError("l2_normalize expects a vector")
    n = float(np.linalg.norm(vd))
    if n <= EPS_NORM:
        raise DegenerateInputError(f"cannot normalize vector with norm {n:.3e}")
    u = vd / n
    out = Tensor(u, parents=_parents(v))

    def bwd(g):
        if isinstance(v, Tensor):
            _accumulate(v, (g - u * np.dot(u, g)) / n)

    out._bwd = bwd
    return out


def euclidean(a, b) -> Tensor:
    """Euclidean distance between two equal-shape vectors (scalar output)."""
    ad, bd = _data(a), _data(b)
    if ad.shape != bd.shape:
        raise DimensionError(f"euclidean shapes differ: {ad.shape} vs {bd.shape}")
    diff = ad - bd
    d = float(np.linalg.norm(diff))
    out = Tensor(d, parents=_parents(a, b))

    def bwd(g):
        direction = diff / max(d, _TINY)
        if isinstance(a, Tensor):
            _accumulate(a, g * direction)
        if isinstance(b, Tensor):
            _accumulate(b, -g * direction)

    out._bwd = bwd
    return out


def squared_distance(a, b) -> Tensor:
    """||a - b||^2 with gradients into both vectors (triplet-loss atom)."""
    ad, bd = _data(a), _data(b)
    if ad.shape != bd.shape:
        raise DimensionError(f"squared_distance shapes differ: {ad.shape} vs {bd.shape}")
    diff = ad - bd
    out = Tensor(float(np.dot(diff, diff)), parents=_parents(a, b))

    def bwd(g):
        if isinstance(a, Tensor):
            _accumulate(a, 2.0 * g * diff)
        if isinstance(b, Tensor):
            _accumulate(b, -2.0 * g * diff)

    out._bwd = bwd
    return out


def row_distances(z, rows: np.ndarray) -> Tensor:
    """Euclidean distance from vector `z` to every row of a constant matrix.

    The rows are treated as constants (no gradient flows into them), which
    is exactly the stop-gradient contract of the prototype banks.
    """
    zd = _data(z)
    rows = np.asarray(rows, dtype=np.float64)
    if zd.ndim != 1 or rows.ndim != 2 or rows.shape[1] != zd.shape[0]:
        raise DimensionError(f"row_distances shapes differ: {zd.shape} vs {rows.shape}")
    diff = zd[None, :] - rows
    d = np.sqrt(np.einsum("kc,kc->k", diff, diff))
    out = Tensor(d, parents=_parents(z))

    def bwd(g):
        if isinstance(z, Tensor):
            safe = np.maximum(d, _TINY)
            _accumulate(z, (g / safe) @ diff)

    out._bwd = bwd
    return out


def nll_from_probs(probs, label: int) -> Tensor:
    """-log(probs[label]), with the probability floored at P_FLOOR."""
    pd = _data(probs)
    if pd.ndim != 1:
        raise DimensionError("nll_from_probs expects a probability vector")
    if not 0 <= label < pd.shape[0]:
        raise ValidationError(f"label {label} out of range for {pd.shape[0]} classes")
    p = float(pd[label])
    clamped = max(p, P_FLOOR)
    out = Tensor(-np.log(clamped), parents=_parents(probs))

    def bwd(g):
        if isinstance(probs, Tensor) and p >= P_FLOOR:
            full = np.zeros_like(pd)
            full[label] = -g / clamped
            _accumulate(probs, full)

    out._bwd = bwd
    return out


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """Per-parameter Adam moments plus shared hyperparameters."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state: AdamState) -> None:
    """One Adam update with bias correction and decoupled weight decay.

    Weight decay multiplies the value by (1 - lr * wd) before the Adam
    delta is applied.
    """
    state.t += 1
    t = state.t
    for p in params:
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in parameter {p.name!r}")
        if p.name not in state.m:
            state.m[p.name] = np.zeros_like(p.data)
            state.v[p.name] = np.zeros_like(p.data)
        m, v = state.m[p.name], state.v[p.name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        if state.weight_decay:
            p.data *= 1.0 - state.lr * state.weight_decay
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------


def grad_check(loss_fn, params, epsilon: float = 1e-5, max_entries: int | None = None, rng=None) -> float:
    """Compare analytic gradients of `loss_fn` against central differences.

    `loss_fn` must rebuild the forward pass from the current parameter
    values and return a scalar Tensor. Returns the worst relative error
    over all checked entries, with denominator max(|analytic|, |numeric|,
    1e-8). `max_entries` caps the per-parameter entry count (seeded
    subsample via `rng`) for large tensors; by default every entry is
    checked.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ParameterError(f"epsilon must lie in [1e-6, 1e-3], got {epsilon}")
    params = list(params)
    first = float(_data(loss_fn()))
    second = float(_data(loss_fn()))
    if first != second:
        raise DeterminismError(f"loss_fn not deterministic: {first!r} vs {second!r}")

    zero_grads(params)
    loss = loss_fn()
    loss.backward()
    analytic = {p.name: p.grad.copy() for p in params}

    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        n = flat.shape[0]
        if max_entries is not None and n > max_entries:
            if rng is None:
                raise ParameterError("max_entries requires an rng for the subsample")
            idxs = rng.choice(n, size=max_entries, replace=False)
        else:
            idxs = range(n)
        a_flat = analytic[p.name].reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + epsilon
            f_plus = float(_data(loss_fn()))
            flat[i] = orig - epsilon
            f_minus = float(_data(loss_fn()))
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            denom = max(abs(a_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
    return worst


def uniform_init(shape, fan_in: int, rng) -> np.ndarray:
    """Fan-in-scaled uniform noise, the default weight initializer."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)
