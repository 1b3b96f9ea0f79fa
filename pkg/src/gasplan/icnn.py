"""Input-convex / input-concave ReLU networks and their exact affine envelopes.

A trained net is a max (convex) or min (concave) of the affine pieces indexed
by its ReLU activation patterns. ``enumerate_hyperplanes`` lists every pattern's
piece, ``screen_supporting`` keeps the pieces that are strictly active on the
input box, and the resulting :class:`Envelope` reproduces the net exactly there.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

MAX_HIDDEN = 15
MAX_PATTERN_BITS = 20

TARGETS = ("convex-part", "concave-part", "dyn-convex", "dyn-concave")


class ExtrapolationWarning(UserWarning):
    """An envelope was evaluated outside the box it was screened on."""


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReluNet:
    """Feed-forward ReLU net with sign-constrained weights.

    ``weights[i]`` has shape ``(out, in)``. Every hidden layer applies ReLU;
    the output layer applies it only when ``output_relu`` is set.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    orientation: str = "convex"
    output_relu: bool = True
    domain: tuple[np.ndarray, np.ndarray] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.orientation not in ("convex", "concave"):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be non-empty and of equal length")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output layer must have a single neuron")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(W.shape[0] for W in self.weights[:-1])

    @property
    def pattern_bits(self) -> int:
        return sum(self.hidden_sizes) + (1 if self.output_relu else 0)

    def __call__(self, x):
        return forward(self, x)


def default_output_relu(orientation: str) -> bool:
    # max(0, .) keeps a convex output convex but would break concavity
    return orientation == "convex"


def _as_batch(x, dim: int):
    """``(X, single)``: scalars (1 input) or vectors (2 inputs) are single points."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 or (x.ndim == 1 and dim > 1)
    if x.ndim == 2:
        X = x
    elif dim == 1:
        X = x.reshape(-1, 1)
    else:
        X = x.reshape(1, -1)
    if X.shape[1] != dim:
        raise ValueError(f"input dimension {X.shape[1]} does not match expected {dim}")
    return X, single


def forward(net: ReluNet, x):
    """Evaluate the net at one input (returns a float) or a batch.

    A 1-D array is a batch of scalar inputs for a one-input net and a single
    point for a two-input net; ``(N, d)`` arrays are always batches.
    """
    X, single = _as_batch(x, net.input_dim)
    z = X
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = z @ W.T + b
        if i < last or net.output_relu:
            z = np.maximum(z, 0.0)
    out = z[:, 0]
    return float(out[0]) if single else out


def project_weights(net: ReluNet) -> ReluNet:
    """Clamp every sign-constrained layer onto its cone.

    Layers 1..k-1 are non-negative; for a concave net the last layer is
    non-positive instead. The input layer is never constrained.
    """
    weights = [net.weights[0].copy()]
    last = len(net.weights) - 1
    for i in range(1, len(net.weights)):
        W = net.weights[i]
        if net.orientation == "concave" and i == last:
            weights.append(np.minimum(W, 0.0))
        else:
            weights.append(np.maximum(W, 0.0))
    return replace(net, weights=tuple(weights), biases=tuple(b.copy() for b in net.biases))


def sign_feasible(net: ReluNet) -> bool:
    last = len(net.weights) - 1
    for i in range(1, len(net.weights)):
        W = net.weights[i]
        if net.orientation == "concave" and i == last:
            if np.any(W > 0):
                return False
        elif np.any(W < 0):
            return False
    return True


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    lo: tuple[float, ...] = (-10.0,)
    hi: tuple[float, ...] = (10.0,)
    hidden: int = 15
    sample_count: int = 1000
    learning_rate: float = 0.02
    epochs: int = 3000
    seed: int = 0
    # bounded quasi-Newton iterations after the gradient phase (0 disables)
    polish_iters: int = 2000
    # drop hidden units while the max training-grid error stays within this
    # fraction of the target's peak (0 disables); fewer units, fewer planes
    prune_tol: float = 0.004
    # two-input parts start near 1% error, so they get a looser pruning bar
    dyn_prune_tol: float = 0.015

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) not in (1, 2):
            raise ValueError("domain box must be 1- or 2-dimensional")
        if any(not h > l for l, h in zip(self.lo, self.hi)):
            raise ValueError("domain box must have positive width in every dimension")
        if not 1 <= self.hidden <= MAX_HIDDEN:
            raise ValueError(f"hidden size must be between 1 and {MAX_HIDDEN}")
        if self.sample_count < 2 or self.epochs < 0 or self.polish_iters < 0 or min(self.prune_tol, self.dyn_prune_tol) < 0 or not self.learning_rate > 0:
            raise ValueError("invalid sample_count, epochs or learning_rate")


def target_function(target: str):
    """Return ``(callable, orientation, input_dim)`` for a named target.

    The scalar split is ``max(0, x)^2`` (convex) plus ``-max(0, -x)^2``
    (concave); the two-input versions divide by the diameter.
    """
    if target == "convex-part":
        return (lambda X: np.maximum(X[:, 0], 0.0) ** 2), "convex", 1
    if target == "concave-part":
        return (lambda X: -np.maximum(-X[:, 0], 0.0) ** 2), "concave", 1
    if target == "dyn-convex":
        return (lambda X: np.maximum(X[:, 0], 0.0) ** 2 / X[:, 1]), "convex", 2
    if target == "dyn-concave":
        return (lambda X: -np.maximum(-X[:, 0], 0.0) ** 2 / X[:, 1]), "concave", 2
    raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")


def grid(lo, hi, count: int, *, offset: float = 0.0) -> np.ndarray:
    """Roughly ``count`` points on a regular grid over the box, shape ``(N, d)``.

    ``offset`` in (0, 1) shifts the grid by that fraction of a cell, which
    gives a held-out grid interleaved with the training one.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    per_axis = max(2, int(round(count ** (1.0 / len(lo)))))
    axes = []
    for a, b in zip(lo, hi):
        if offset:
            step = (b - a) / per_axis
            axes.append(a + (np.arange(per_axis) + offset) * step)
        else:
            axes.append(np.linspace(a, b, per_axis))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _init_params(rng, dim: int, hidden: int, orientation: str):
    # first-layer kinks placed uniformly inside the normalized box
    if dim == 1:
        w = rng.choice([-1.0, 1.0], size=(hidden, 1)) * rng.uniform(0.5, 1.5, size=(hidden, 1))
    else:
        angle = rng.uniform(0, 2 * np.pi, size=hidden)
        w = np.stack([np.cos(angle), np.sin(angle)], axis=1) * rng.uniform(0.5, 1.5, size=(hidden, 1))
    knots = rng.uniform(-1.0, 1.0, size=(hidden, dim))
    b = -np.sum(w * knots, axis=1)
    sign = -1.0 if orientation == "concave" else 1.0
    W1 = sign * rng.uniform(0.0, 1.0 / hidden, size=(1, hidden))
    b1 = np.array([0.05])
    return [w, W1], [b, b1]


def _forward_cache(weights, biases, X, output_relu):
    acts = [X]
    pres = []
    z = X
    last = len(weights) - 1
    for i, (W, b) in enumerate(zip(weights, biases)):
        pre = z @ W.T + b
        pres.append(pre)
        z = np.maximum(pre, 0.0) if (i < last or output_relu) else pre
        acts.append(z)
    return acts, pres


def _gradients(weights, biases, X, y, output_relu):
    acts, pres = _forward_cache(weights, biases, X, output_relu)
    out = acts[-1][:, 0]
    err = out - y
    loss = float(np.mean(err**2))
    g = (2.0 / len(y)) * err[:, None]
    last = len(weights) - 1
    gW, gb = [None] * len(weights), [None] * len(weights)
    for i in range(last, -1, -1):
        if i < last or output_relu:
            g = g * (pres[i] > 0)
        gW[i] = g.T @ acts[i]
        gb[i] = g.sum(axis=0)
        if i > 0:
            g = g @ weights[i]
    return loss, gW, gb


def _project_lists(weights, orientation):
    last = len(weights) - 1
    for i in range(1, len(weights)):
        if orientation == "concave" and i == last:
            np.minimum(weights[i], 0.0, out=weights[i])
        else:
            np.maximum(weights[i], 0.0, out=weights[i])


def _polish(weights, biases, X, y, orientation, output_relu, iters):
    """L-BFGS-B on all parameters with the sign constraints as box bounds."""
    from scipy.optimize import minimize

    params = list(weights) + list(biases)
    shapes = [p.shape for p in params]
    sizes = [p.size for p in params]
    last = len(weights) - 1

    def unpack(z):
        out, k = [], 0
        for sh, n in zip(shapes, sizes):
            out.append(z[k : k + n].reshape(sh))
            k += n
        return out[: len(weights)], out[len(weights) :]

    def fun(z):
        ws, bs = unpack(z)
        loss, gW, gb = _gradients(ws, bs, X, y, output_relu)
        return loss, np.concatenate([g.ravel() for g in gW + gb])

    bounds = []
    for i, w in enumerate(weights):
        if i == 0:
            box = (None, None)
        elif orientation == "concave" and i == last:
            box = (None, 0.0)
        else:
            box = (0.0, None)
        bounds += [box] * w.size
    bounds += [(None, None)] * sum(b.size for b in biases)
    z0 = np.concatenate([p.ravel() for p in params])
    res = minimize(fun, z0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": iters, "ftol": 1e-15, "gtol": 1e-12})
    ws, bs = unpack(res.x)
    ws = [w.copy() for w in ws]
    _project_lists(ws, orientation)
    return ws, [b.copy() for b in bs]


def _max_error(weights, biases, X, y, output_relu) -> float:
    acts, _ = _forward_cache(weights, biases, X, output_relu)
    return float(np.max(np.abs(acts[-1][:, 0] - y)))


def _without_unit(weights, biases, j):
    keep = np.arange(weights[0].shape[0]) != j
    return [weights[0][keep], weights[1][:, keep]], [biases[0][keep], biases[1].copy()]


def _prune(weights, biases, X, y, orientation, output_relu, budget, iters):
    """Greedily remove hidden units, re-polishing after each removal.

    Each candidate removal gets a short polish before ranking; the winner
    gets the full polish and is kept only if it stays within ``budget``.
    """
    short = min(iters, 100)
    while weights[0].shape[0] > 1:
        trials = []
        for j in range(weights[0].shape[0]):
            cw, cb = _without_unit(weights, biases, j)
            if short:
                cw, cb = _polish(cw, cb, X, y, orientation, output_relu, short)
            trials.append((_max_error(cw, cb, X, y, output_relu), j, cw, cb))
        _, _, cw, cb = min(trials, key=lambda item: item[:2])
        if iters > short:
            cw, cb = _polish(cw, cb, X, y, orientation, output_relu, iters)
        if _max_error(cw, cb, X, y, output_relu) > budget:
            break
        weights, biases = cw, cb
    return weights, biases


def train_pair(target: str, cfg: TrainConfig | None = None) -> ReluNet:
    """Fit one sign-constrained net to a convex or concave part of the flow law.

    Full-batch projected gradient descent (Adam moments, projection after
    every step) on the mean squared error over a uniform grid, in coordinates
    where the box is ``[-1, 1]^d`` and the target is scaled to unit peak.
    A bounded L-BFGS-B pass then refines all parameters and is kept only if
    it lowers the loss. Returns the net expressed in physical units.
    """
    cfg = cfg or TrainConfig()
    fn, orientation, dim = target_function(target)
    if len(cfg.lo) != dim:
        raise ValueError(f"target {target!r} needs a {dim}-dimensional box")
    if dim == 2 and cfg.lo[1] <= 0:
        raise ValueError("diameter range must be strictly positive")
    lo = np.asarray(cfg.lo, dtype=float)
    hi = np.asarray(cfg.hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)

    X = grid(lo, hi, cfg.sample_count)
    y = fn(X)
    scale = float(np.max(np.abs(y))) or 1.0
    Xn = (X - mid) / half
    yn = y / scale

    output_relu = default_output_relu(orientation)
    rng = np.random.default_rng(cfg.seed)
    weights, biases = _init_params(rng, dim, cfg.hidden, orientation)
    _project_lists(weights, orientation)

    beta1, beta2, eps = 0.9, 0.999, 1e-8
    params = weights + biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    loss = float("nan")
    for epoch in range(1, cfg.epochs + 1):
        loss, gW, gb = _gradients(weights, biases, Xn, yn, output_relu)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss at epoch {epoch}; lower the learning rate")
        lr = cfg.learning_rate * (0.1 ** (epoch / max(cfg.epochs, 1)))
        for k, g in enumerate(gW + gb):
            m[k] = beta1 * m[k] + (1 - beta1) * g
            v[k] = beta2 * v[k] + (1 - beta2) * g * g
            mhat = m[k] / (1 - beta1**epoch)
            vhat = v[k] / (1 - beta2**epoch)
            params[k] -= lr * mhat / (np.sqrt(vhat) + eps)
        _project_lists(weights, orientation)

    if cfg.polish_iters:
        loss = _gradients(weights, biases, Xn, yn, output_relu)[0]
        cw, cb = _polish(weights, biases, Xn, yn, orientation, output_relu, cfg.polish_iters)
        polished = _gradients(cw, cb, Xn, yn, output_relu)[0]
        if np.isfinite(polished) and polished < loss:
            weights, biases = cw, cb
    prune_tol = cfg.prune_tol if dim == 1 else cfg.dyn_prune_tol
    if prune_tol and len(weights) == 2:
        weights, biases = _prune(weights, biases, Xn, yn, orientation, output_relu, prune_tol, cfg.polish_iters)
    loss = _gradients(weights, biases, Xn, yn, output_relu)[0]
    if not np.isfinite(loss):
        raise TrainingDivergedError("non-finite loss after training")

    # undo the input/output normalisation; positive output scaling commutes with ReLU
    W0 = weights[0] / half
    b0 = biases[0] - weights[0] @ (mid / half)
    phys_w = [W0] + [w.copy() for w in weights[1:]]
    phys_b = [b0] + [b.copy() for b in biases[1:]]
    phys_w[-1] = phys_w[-1] * scale
    phys_b[-1] = phys_b[-1] * scale

    net = ReluNet(
        weights=tuple(phys_w),
        biases=tuple(phys_b),
        orientation=orientation,
        output_relu=output_relu,
        domain=(lo.copy(), hi.copy()),
        metadata={
            "target": target,
            "seed": cfg.seed,
            "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate,
            "polish_iters": cfg.polish_iters,
            "prune_tol": prune_tol,
            "hidden_kept": int(weights[0].shape[0]),
            "sample_count": int(len(X)),
            "hidden": cfg.hidden,
            "final_loss": loss * scale**2,
        },
    )
    return project_weights(net)


# ---------------------------------------------------------------------------
# hyperplanes and envelopes


@dataclass(frozen=True)
class Hyperplane:
    slope: np.ndarray
    intercept: float
    pattern: tuple[int, ...] = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.slope + self.intercept if x.ndim > 1 else float(np.dot(x.reshape(-1), self.slope) + self.intercept)


class Hyperplanes:
    """Array-backed sequence of :class:`Hyperplane` (one row per plane)."""

    def __init__(self, slopes, intercepts, patterns=None):
        self.slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        self.intercepts = np.asarray(intercepts, dtype=float).reshape(-1)
        if patterns is None:
            patterns = np.zeros((len(self.intercepts), 0), dtype=np.int8)
        self.patterns = np.asarray(patterns, dtype=np.int8)
        if not (len(self.slopes) == len(self.intercepts) == len(self.patterns)):
            raise ValueError("slopes, intercepts and patterns must have equal length")

    @classmethod
    def from_list(cls, planes) -> "Hyperplanes":
        if isinstance(planes, Hyperplanes):
            return planes
        planes = list(planes)
        if not planes:
            raise ValueError("empty hyperplane list")
        slopes = np.array([np.atleast_1d(np.asarray(p.slope, dtype=float)) for p in planes])
        width = max(len(p.pattern) for p in planes)
        patterns = np.zeros((len(planes), width), dtype=np.int8)
        for k, p in enumerate(planes):
            patterns[k, : len(p.pattern)] = p.pattern
        return cls(slopes, [p.intercept for p in planes], patterns)

    def __len__(self):
        return len(self.intercepts)

    def __getitem__(self, k):
        if isinstance(k, (slice, np.ndarray, list)):
            return Hyperplanes(self.slopes[k], self.intercepts[k], self.patterns[k])
        return Hyperplane(self.slopes[k].copy(), float(self.intercepts[k]), tuple(int(b) for b in self.patterns[k]))

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def values(self, X) -> np.ndarray:
        """Plane values at points ``X`` of shape ``(N, d)``: returns ``(N, P)``."""
        return np.asarray(X, dtype=float) @ self.slopes.T + self.intercepts


def enumerate_hyperplanes(net: ReluNet) -> Hyperplanes:
    """One affine piece per activation pattern, by the layer-product formula.

    For pattern ``s`` each layer contributes ``diag(s^r) W^r`` and the piece is
    the composition of those affine maps. Pattern bits run over hidden layers
    in order, then the output neuron if it has a ReLU.
    """
    p = net.pattern_bits
    if p > MAX_PATTERN_BITS:
        raise ValueError(f"{p} activation bits exceed the enumeration limit of {MAX_PATTERN_BITS}")
    patterns = np.array(list(itertools.product((0, 1), repeat=p)), dtype=np.int8).reshape(2**p, p)
    P = len(patterns)
    d = net.input_dim
    slope = np.broadcast_to(np.eye(d), (P, d, d)).copy()  # (P, width, d)
    icpt = np.zeros((P, d))
    offset = 0
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        slope = np.einsum("ow,pwd->pod", W, slope)
        icpt = icpt @ W.T + b
        if i < last or net.output_relu:
            width = W.shape[0]
            mask = patterns[:, offset : offset + width].astype(float)
            slope = slope * mask[:, :, None]
            icpt = icpt * mask
            offset += width
    return Hyperplanes(slope[:, 0, :], icpt[:, 0], patterns)


def activation_pattern(net: ReluNet, x) -> tuple[int, ...]:
    """Actual on/off bits of every ReLU at input ``x`` (ties at zero count as off)."""
    z, _ = _as_batch(x, net.input_dim)
    z = z[:1]
    bits: list[int] = []
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = z @ W.T + b
        if i < last or net.output_relu:
            bits.extend(int(v) for v in (z[0] > 0))
            z = np.maximum(z, 0.0)
    return tuple(bits)


def pattern_index(pattern) -> int:
    idx = 0
    for bit in pattern:
        idx = 2 * idx + int(bit)
    return idx


@dataclass(frozen=True)
class Envelope:
    """Pointwise max (convex) or min (concave) of supporting planes over a box."""

    planes: Hyperplanes
    orientation: str
    lo: np.ndarray
    hi: np.ndarray
    witnesses: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.planes.slopes.shape[1]

    def __len__(self):
        return len(self.planes)

    def __call__(self, x):
        return envelope_eval(self, x)

    def covers(self, lo, hi, tol: float = 1e-9) -> bool:
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        return bool(np.all(self.lo <= lo + tol) and np.all(self.hi >= hi - tol))


def envelope_eval(env: Envelope, x):
    """Evaluate the envelope at one point or a batch ``(N, d)``.

    Points outside the box still get a value, with an :class:`ExtrapolationWarning`.
    """
    X, single = _as_batch(x, env.input_dim)
    if np.any(X < env.lo - 1e-12) or np.any(X > env.hi + 1e-12):
        warnings.warn("envelope evaluated outside its screening box", ExtrapolationWarning, stacklevel=2)
    vals = env.planes.values(X)
    out = vals.max(axis=1) if env.orientation == "convex" else vals.min(axis=1)
    return float(out[0]) if single else out


def _dedupe(planes: Hyperplanes) -> Hyperplanes:
    """Drop repeated (slope, intercept) rows, keeping the first occurrence."""
    scale = max(1.0, float(np.max(np.abs(planes.slopes))), float(np.max(np.abs(planes.intercepts))))
    key = np.round(np.hstack([planes.slopes, planes.intercepts[:, None]]) / (scale * 1e-12))
    _, first = np.unique(key, axis=0, return_index=True)
    return planes[np.sort(first)]


def _upper_envelope_1d(m: np.ndarray, c: np.ndarray, lo: float, hi: float):
    """Indices of lines strictly on top somewhere in ``(lo, hi)`` plus a witness each.

    Lines are swept by increasing slope; a line that only touches the envelope
    at a single point (a breakpoint or a box end) is dropped.
    """
    order = sorted(range(len(m)), key=lambda k: (m[k], -c[k], k))
    # equal slopes: only the highest intercept (first in sorted order) survives
    filtered = []
    for k in order:
        if filtered and m[filtered[-1]] == m[k]:
            continue
        filtered.append(k)

    hull: list[int] = []

    def useless(a, b, cc):
        # b is never strictly above max(a, cc) when the a/cc crossing is left of or at the a/b crossing
        return (c[a] - c[cc]) * (m[b] - m[a]) <= (c[a] - c[b]) * (m[cc] - m[a])

    for k in filtered:
        while len(hull) >= 2 and useless(hull[-2], hull[-1], k):
            hull.pop()
        hull.append(k)

    # breakpoints between consecutive hull lines, then clip to the box
    bounds = [-np.inf]
    for a, b in zip(hull, hull[1:]):
        bounds.append((c[a] - c[b]) / (m[b] - m[a]))
    bounds.append(np.inf)
    tol = 1e-14 * max(1.0, hi - lo)
    kept, witness = [], []
    for idx, k in enumerate(hull):
        left = max(bounds[idx], lo)
        right = min(bounds[idx + 1], hi)
        if right - left > tol:
            kept.append(k)
            witness.append(0.5 * (left + right))
    return kept, witness


def _screen_lp(slopes, icpts, j, candidates, lo, hi, spread):
    """Largest margin by which plane ``j`` beats every candidate somewhere in the box."""
    from .solver import LpProblem, solve_lp

    others = [i for i in candidates if i != j]
    d = slopes.shape[1]
    if not others:
        return np.inf, 0.5 * (lo + hi)
    # variables: x (d), eps; maximize eps
    A = np.zeros((len(others), d + 1))
    b = np.zeros(len(others))
    for r, i in enumerate(others):
        A[r, :d] = slopes[i] - slopes[j]
        A[r, d] = 1.0
        b[r] = icpts[j] - icpts[i]
    c = np.zeros(d + 1)
    c[d] = -1.0
    lb = np.r_[lo, -spread]
    ub = np.r_[hi, spread]
    res = solve_lp(LpProblem(c=c, A=A, senses=["L"] * len(others), b=b, lb=lb, ub=ub))
    if res.status != "optimal":
        return -np.inf, None
    return float(res.x[d]), res.x[:d]


def _vertices_2d(planes: Hyperplanes, lo, hi, tol):
    """Vertices of the max-diagram of ``planes`` clipped to the box."""
    S, v = planes.slopes, planes.intercepts
    K = len(v)
    pts = [np.array([x, y]) for x in (lo[0], hi[0]) for y in (lo[1], hi[1])]
    # two planes meeting on a box edge
    for axis in (0, 1):
        other = 1 - axis
        for fixed in (lo[axis], hi[axis]):
            for i in range(K):
                ds = S[i, other] - S[i + 1 :, other]
                num = -(v[i] - v[i + 1 :]) - (S[i, axis] - S[i + 1 :, axis]) * fixed
                ok = np.abs(ds) > 1e-15
                t = num[ok] / ds[ok]
                t = t[(t >= lo[other]) & (t <= hi[other])]
                for val in t:
                    p = np.empty(2)
                    p[axis], p[other] = fixed, val
                    pts.append(p)
    # three planes meeting inside
    if K >= 3:
        tri = np.array(list(itertools.combinations(range(K), 3)))
        i, j, k = tri[:, 0], tri[:, 1], tri[:, 2]
        a1, a2 = S[i] - S[j], S[i] - S[k]
        r1, r2 = v[j] - v[i], v[k] - v[i]
        det = a1[:, 0] * a2[:, 1] - a1[:, 1] * a2[:, 0]
        ok = np.abs(det) > 1e-15
        x = (r1[ok] * a2[ok, 1] - a1[ok, 1] * r2[ok]) / det[ok]
        y = (a1[ok, 0] * r2[ok] - r1[ok] * a2[ok, 0]) / det[ok]
        inside = (x >= lo[0]) & (x <= hi[0]) & (y >= lo[1]) & (y <= hi[1])
        pts.extend(np.stack([x[inside], y[inside]], axis=1))
    return np.array(pts)


def screen_supporting(planes, orientation: str, lo, hi) -> Envelope:
    """Keep exactly the planes that are strictly on top somewhere in the box.

    Scalar inputs use the sorted-slope line envelope. Two inputs use one LP
    per candidate plane (maximise the margin over all other candidates), and
    the kept set is then certified against every plane at the vertices of its
    max-diagram, re-screening with any plane found to poke through.
    """
    planes = Hyperplanes.from_list(planes)
    if len(planes) == 0:
        raise ValueError("empty hyperplane list")
    if orientation not in ("convex", "concave"):
        raise ValueError(f"unknown orientation {orientation!r}")
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)) or np.any(hi < lo):
        raise ValueError("screening needs a bounded, non-empty box")
    sign = 1.0 if orientation == "convex" else -1.0
    uniq = _dedupe(planes)
    S = sign * uniq.slopes
    v = sign * uniq.intercepts
    d = S.shape[1]

    if len(uniq) == 1:
        return Envelope(uniq, orientation, lo, hi, (0.5 * (lo + hi))[None, :])

    if d == 1:
        kept, wit = _upper_envelope_1d(S[:, 0], v, float(lo[0]), float(hi[0]))
        return Envelope(uniq[np.array(kept)], orientation, lo, hi, np.array(wit).reshape(-1, 1))

    if d != 2:
        raise ValueError("screening supports one or two inputs")
    scaled = Hyperplanes(S, v)
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    cvals = scaled.values(corners)
    spread = float(np.max(cvals) - np.min(cvals)) + 1.0
    tol = 1e-10 * spread

    # initial candidates: top plane on a coarse grid
    probe = grid(lo, hi, 32 * 32)
    cand = set(np.unique(np.argmax(scaled.values(probe), axis=1)).tolist())
    while True:
        kept, wit = [], []
        ordered = sorted(cand)
        for j in ordered:
            margin, x = _screen_lp(S, v, j, ordered, lo, hi, spread)
            if margin > tol:
                kept.append(j)
                wit.append(x)
        sub = scaled[np.array(kept)]
        verts = _vertices_2d(sub, lo, hi, tol)
        env_vals = sub.values(verts).max(axis=1)
        excess = scaled.values(verts) - env_vals[:, None]
        poke = set(np.unique(np.argmax(excess, axis=1)[excess.max(axis=1) > tol]).tolist())
        if not poke - cand:
            break
        cand |= poke
    idx = np.array(kept)
    return Envelope(uniq[idx], orientation, lo, hi, np.array(wit))


def cell_boxes(env: Envelope, tol: float | None = None):
    """Per-plane bounding boxes of the region where each plane is the active one.

    Returns ``(lo, hi)`` arrays of shape ``(planes, inputs)``. Regions are
    convex, so their vertices lie among the vertices of the envelope's
    diagram; a looser ``tol`` only enlarges the boxes.
    """
    sign = 1.0 if env.orientation == "convex" else -1.0
    S, v = sign * env.planes.slopes, sign * env.planes.intercepts
    lo, hi = env.lo.astype(float), env.hi.astype(float)
    if S.shape[1] == 1:
        pts = [lo[0], hi[0]]
        for i, j in itertools.combinations(range(len(v)), 2):
            ds = S[i, 0] - S[j, 0]
            if abs(ds) > 1e-15:
                x = (v[j] - v[i]) / ds
                if lo[0] <= x <= hi[0]:
                    pts.append(x)
        pts = np.array(pts).reshape(-1, 1)
    else:
        pts = _vertices_2d(Hyperplanes(S, v), lo, hi, 0.0)
    vals = pts @ S.T + v
    if tol is None:
        tol = 1e-9 * (float(np.ptp(vals)) + 1.0)
    member = vals >= vals.max(axis=1, keepdims=True) - tol
    box_lo = np.tile(lo, (len(v), 1))
    box_hi = np.tile(hi, (len(v), 1))
    for k in range(len(v)):
        if member[:, k].any():
            box_lo[k] = pts[member[:, k]].min(axis=0)
            box_hi[k] = pts[member[:, k]].max(axis=0)
    return box_lo, box_hi


def build_envelope(net: ReluNet, lo=None, hi=None) -> Envelope:
    """Enumerate and screen the pieces of ``net`` over a box (default: its training box)."""
    if lo is None or hi is None:
        if net.domain is None:
            raise ValueError("net has no domain; pass lo and hi")
        lo, hi = net.domain
    return screen_supporting(enumerate_hyperplanes(net), net.orientation, lo, hi)


# ---------------------------------------------------------------------------
# serialization


def net_to_dict(net: ReluNet) -> dict:
    doc = {
        "orientation": net.orientation,
        "input_dim": net.input_dim,
        "output_relu": net.output_relu,
        "layers": [{"weight": W.tolist(), "bias": b.tolist()} for W, b in zip(net.weights, net.biases)],
        "training": dict(net.metadata),
    }
    if net.domain is not None:
        doc["domain"] = {"lo": net.domain[0].tolist(), "hi": net.domain[1].tolist()}
    return doc


def net_from_dict(doc: dict) -> ReluNet:
    domain = doc.get("domain")
    net = ReluNet(
        weights=tuple(np.asarray(layer["weight"], dtype=float) for layer in doc["layers"]),
        biases=tuple(np.asarray(layer["bias"], dtype=float) for layer in doc["layers"]),
        orientation=doc["orientation"],
        output_relu=bool(doc.get("output_relu", default_output_relu(doc["orientation"]))),
        domain=None if domain is None else (np.asarray(domain["lo"], float), np.asarray(domain["hi"], float)),
        metadata=dict(doc.get("training", {})),
    )
    if net.input_dim != int(doc.get("input_dim", net.input_dim)):
        raise ValueError("input_dim does not match the first layer")
    return net


def save_net(net: ReluNet, path) -> None:
    Path(path).write_text(json.dumps(net_to_dict(net), indent=2) + "\n")


def load_net(path) -> ReluNet:
    return net_from_dict(json.loads(Path(path).read_text()))
