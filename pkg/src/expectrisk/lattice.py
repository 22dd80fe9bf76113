"""Nested expectiles of discrete-time processes on lattices.

A :class:`LatticeProcess` approximates a Markov process by per-layer
nodes and child transitions.  The nested expectile composes rescaled
conditional expectiles backward through the layers:

    V(terminal) = 0,
    V(t_i, x)   = re_{beta(t_i, x) * dt} over children of (dX + V_child),

and the nested value is X_0 + V(root).  The rescaled expectile
``re_b = e_{(1+sqrt(b))/2}`` maps the risk budget b = beta*dt in [0, 1]
onto a static level, with b = 0 the conditional mean and b = 1 the
essential supremum.

Random-walk lattices discretize N(0, dt) increments by Gauss-Hermite
quadrature; quadrature mass is distributed onto a shared state grid
(splitting each node's weight between its two bracketing grid states,
which preserves the increment's mean and absolute first moment
exactly), so the lattice recombines and the per-step risk drift
sqrt(2 beta / pi) * dt survives discretization.

All operations are pure functions of immutable lattices; within the
backward recursion each layer's nodes are independent of one another,
layers being the only sequential dependency.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_hermite

from .distributions import EmpiricalDistribution
from .errors import RateClampWarning
from .expectiles import expectile, expectile_rows

__all__ = [
    "RescaledLevel",
    "rescaled_expectile",
    "conditional_expectile",
    "RiskRate",
    "StencilLayer",
    "ExplicitLayer",
    "LatticeProcess",
    "build_random_walk_lattice",
    "nested_expectile",
    "risk_generator_fd",
    "DriftRow",
    "verify_drift_convergence",
    "lattice_to_json",
    "lattice_from_json",
]


@dataclass(frozen=True)
class RescaledLevel:
    """Risk budget b in [0, 1]; maps to the static level (1 + sqrt(b)) / 2."""

    beta_dt: float

    def __post_init__(self):
        b = float(self.beta_dt)
        if not (np.isfinite(b) and 0.0 <= b <= 1.0):
            raise ValueError(f"rescaled level must lie in [0, 1], got {self.beta_dt!r}")
        object.__setattr__(self, "beta_dt", b)

    @property
    def alpha(self) -> float:
        return 0.5 * (1.0 + np.sqrt(self.beta_dt))


def rescaled_expectile(dist: EmpiricalDistribution, level: "RescaledLevel | float") -> float:
    """Expectile at the rescaled level; budget 0 is the mean, budget 1 the maximum atom."""
    if not isinstance(level, RescaledLevel):
        level = RescaledLevel(float(level))
    if level.beta_dt == 1.0:
        return dist.max_value
    return expectile(dist, level.alpha)


def conditional_expectile(groups: Sequence[EmpiricalDistribution], levels) -> np.ndarray:
    """Expectile within each conditioning cell; ``levels`` may vary per group."""
    groups = list(groups)
    lv = np.broadcast_to(np.asarray(levels, dtype=float), (len(groups),))
    return np.asarray([expectile(g, a) for g, a in zip(groups, lv)])


class RiskRate:
    """Risk rate beta(t, x) with values in [0, 1].

    Wraps a constant or a callable.  ``state_independent`` marks rates
    that ignore the state argument, which lets the backward recursion
    collapse translation-invariant layers to a single representative
    node.
    """

    def __init__(self, beta, state_independent: Optional[bool] = None):
        if callable(beta):
            self._fn = beta
            self.state_independent = bool(state_independent) if state_independent is not None else False
        else:
            b = float(beta)
            if not (np.isfinite(b) and 0.0 <= b <= 1.0):
                raise ValueError("constant risk rate must lie in [0, 1]")
            self._fn = lambda t, x: np.full_like(np.asarray(x, dtype=float), b)
            self.state_independent = True

    def __call__(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(np.asarray(self._fn(t, x), dtype=float), x.shape).copy()
        if np.any(out < 0.0) or np.any(out > 1.0) or not np.all(np.isfinite(out)):
            raise ValueError(f"risk rate left [0, 1] at t={t!r}")
        return out


def as_risk_rate(rate) -> RiskRate:
    return rate if isinstance(rate, RiskRate) else RiskRate(rate)


@dataclass
class StencilLayer:
    """Nodes on a regular grid origin + k*step, k in [k_lo, k_hi].

    All nodes share the same child transition stencil ``offsets`` (grid
    increments, integers) with probabilities ``probs``; terminal layers
    carry no stencil.  States are materialized on demand only.
    """

    origin: float
    step: float
    k_lo: int
    k_hi: int
    offsets: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None

    @property
    def n_nodes(self) -> int:
        return self.k_hi - self.k_lo + 1

    @property
    def is_terminal(self) -> bool:
        return self.offsets is None

    def state_values(self) -> np.ndarray:
        return self.origin + np.arange(self.k_lo, self.k_hi + 1, dtype=float) * self.step


@dataclass
class ExplicitLayer:
    """Nodes with explicit per-node children (index into the next layer)."""

    values: np.ndarray
    children_index: Optional[list] = None
    children_prob: Optional[list] = None

    @property
    def n_nodes(self) -> int:
        return len(self.values)

    @property
    def is_terminal(self) -> bool:
        return self.children_index is None

    def state_values(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class LatticeProcess:
    """Time grid plus layers of nodes approximating a Markov process."""

    def __init__(self, times, layers):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size != len(layers):
            raise ValueError("times must be one per layer")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if layers[0].n_nodes != 1:
            raise ValueError("the root layer must hold exactly one node")
        for i, layer in enumerate(layers):
            terminal = i == len(layers) - 1
            if terminal != layer.is_terminal:
                raise ValueError(
                    f"layer {i} must {'not ' if not terminal else ''}be terminal"
                )
            if terminal:
                continue
            nxt = layers[i + 1]
            if isinstance(layer, StencilLayer):
                if not isinstance(nxt, StencilLayer):
                    raise ValueError("a stencil layer must be followed by a stencil layer")
                k_children_lo = layer.k_lo + int(np.min(layer.offsets))
                k_children_hi = layer.k_hi + int(np.max(layer.offsets))
                if k_children_lo < nxt.k_lo or k_children_hi > nxt.k_hi:
                    raise ValueError(f"layer {i} stencil escapes layer {i+1}'s grid")
                if abs(float(np.sum(layer.probs)) - 1.0) > 1e-12:
                    raise ValueError(f"layer {i} stencil probabilities must sum to 1")
            else:
                for j, (idx, p) in enumerate(zip(layer.children_index, layer.children_prob)):
                    idx = np.asarray(idx)
                    if idx.size == 0:
                        raise ValueError(f"node {j} of layer {i} has no children")
                    if np.any(idx < 0) or np.any(idx >= nxt.n_nodes):
                        raise ValueError(f"node {j} of layer {i} has out-of-range children")
                    if abs(float(np.sum(p)) - 1.0) > 1e-12:
                        raise ValueError(f"node {j} of layer {i}: probabilities must sum to 1")
        self.times = times
        self.layers = list(layers)

    @property
    def n_steps(self) -> int:
        return len(self.layers) - 1

    @property
    def initial_value(self) -> float:
        return float(self.layers[0].state_values()[0])


def _symmetric_hermite(quad_nodes: int):
    """Gauss-Hermite nodes/weights for N(0,1), explicitly symmetrized."""
    t, w = roots_hermite(quad_nodes)
    order = np.argsort(t)
    t, w = t[order], w[order]
    half = quad_nodes // 2
    pos_t = t[quad_nodes - half:]
    pos_w = 0.5 * (w[quad_nodes - half:] + w[:half][::-1])
    if quad_nodes % 2:
        z = np.concatenate((-pos_t[::-1], [0.0], pos_t))
        p = np.concatenate((pos_w[::-1], [w[half]], pos_w))
    else:
        z = np.concatenate((-pos_t[::-1], pos_t))
        p = np.concatenate((pos_w[::-1], pos_w))
    z = z * np.sqrt(2.0)
    p = p / p.sum()
    return z, p


def _split_onto_grid(z: np.ndarray, p: np.ndarray, scale: float, grid_step: float,
                     mass_cut: float = 1e-13):
    """Distribute atoms at z*scale onto integer multiples of grid_step.

    Each atom's mass goes to the two bracketing grid states with
    mean-preserving fractions; atoms within 1e-9 grid units of a state
    are snapped.  Negligible tail mass is dropped and the result
    renormalized.
    """
    keep = p > mass_cut
    z, p = z[keep], p[keep]
    p = p / p.sum()
    ratio = z * (scale / grid_step)
    k0 = np.floor(ratio)
    frac = ratio - k0
    snap = np.abs(frac - np.round(frac)) < 1e-9
    k_lo_part = np.where(snap, np.round(ratio), k0)
    k_hi_part = k0 + 1.0
    w_lo = np.where(snap, p, p * (1.0 - frac))
    w_hi = np.where(snap, 0.0, p * frac)
    kk = np.concatenate((k_lo_part, k_hi_part)).astype(np.int64)
    ww = np.concatenate((w_lo, w_hi))
    uk, inv = np.unique(kk, return_inverse=True)
    pw = np.zeros(uk.size)
    np.add.at(pw, inv, ww)
    good = pw > 0.0
    offsets, probs = uk[good], pw[good]
    return offsets, probs / probs.sum()


def build_random_walk_lattice(
    x0: float,
    T: float,
    steps: int,
    quad_nodes: int = 7,
    spacing: float = 0.25,
    times=None,
) -> LatticeProcess:
    """Recombining lattice for a random walk with N(0, dt) increments.

    States live on the shared grid x0 + k * sqrt(dt_min) * spacing;
    each step's Gauss-Hermite discretization of N(0, dt) is distributed
    onto that grid.  With ``quad_nodes=2`` and a single step the
    children sit exactly at x0 +- sqrt(dt) with weight 1/2 each.
    ``times`` overrides the uniform time grid (first entry 0, last T).
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if quad_nodes < 2:
        raise ValueError("quad_nodes must be at least 2")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if times is None:
        times = np.linspace(0.0, float(T), steps + 1)
    else:
        times = np.asarray(times, dtype=float)
        if times.size < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing with at least two entries")
        steps = times.size - 1
    dts = np.diff(times)
    grid_step = float(spacing * np.sqrt(dts.min()))
    z, p = _symmetric_hermite(quad_nodes)

    stencils = {}
    layers = []
    k_lo = k_hi = 0
    for i in range(steps):
        dt = float(dts[i])
        if dt not in stencils:
            stencils[dt] = _split_onto_grid(z, p, np.sqrt(dt), grid_step)
        offsets, probs = stencils[dt]
        layers.append(
            StencilLayer(origin=float(x0), step=grid_step, k_lo=k_lo, k_hi=k_hi,
                         offsets=offsets, probs=probs)
        )
        k_lo += int(offsets[0])
        k_hi += int(offsets[-1])
    layers.append(StencilLayer(origin=float(x0), step=grid_step, k_lo=k_lo, k_hi=k_hi))
    return LatticeProcess(times, layers)


def _clamped_budget(beta: np.ndarray, dt: float, clamp_counter: list) -> np.ndarray:
    budget = beta * dt
    over = budget > 1.0
    if np.any(over):
        clamp_counter[0] += int(np.count_nonzero(over))
        budget = np.minimum(budget, 1.0)
    return budget


def nested_expectile(process: LatticeProcess, rate, chunk: int = 8192) -> float:
    """Nested expectile of the lattice process under the risk rate.

    Backward recursion over layers; per-step budgets beta*dt above 1
    are clamped (with a :class:`RateClampWarning`).  For stencil
    lattices with a state-independent rate the per-layer value is
    constant across nodes and computed once.
    """
    rate = as_risk_rate(rate)
    layers, times = process.layers, process.times
    clamps = [0]

    all_stencil = all(isinstance(L, StencilLayer) for L in layers)
    if rate.state_independent and all_stencil:
        v_next = 0.0
        for i in range(len(layers) - 2, -1, -1):
            L = layers[i]
            dt = float(times[i + 1] - times[i])
            beta = rate(times[i], np.asarray([L.origin]))
            budget = _clamped_budget(beta, dt, clamps)
            level = 0.5 * (1.0 + np.sqrt(budget[0]))
            vals = L.offsets * L.step + v_next
            v_next = float(expectile_rows(vals[None, :], L.probs[None, :], level)[0])
        _warn_clamps(clamps[0])
        return process.initial_value + v_next

    v_next = np.zeros(layers[-1].n_nodes)
    for i in range(len(layers) - 2, -1, -1):
        L = layers[i]
        dt = float(times[i + 1] - times[i])
        x = L.state_values()
        beta = rate(times[i], x)
        levels = 0.5 * (1.0 + np.sqrt(_clamped_budget(beta, dt, clamps)))
        v = np.empty(L.n_nodes)
        if isinstance(L, StencilLayer):
            nxt = layers[i + 1]
            dX = (L.offsets * L.step)[None, :]
            base = np.arange(L.k_lo, L.k_hi + 1) - nxt.k_lo
            for lo in range(0, L.n_nodes, chunk):
                hi = min(lo + chunk, L.n_nodes)
                idx = base[lo:hi, None] + L.offsets[None, :]
                vals = dX + v_next[idx]
                probs = np.broadcast_to(L.probs, vals.shape)
                v[lo:hi] = expectile_rows(vals, probs, levels[lo:hi])
        else:
            nxt_values = layers[i + 1].state_values()
            for j in range(L.n_nodes):
                idx = np.asarray(L.children_index[j], dtype=np.int64)
                pj = np.asarray(L.children_prob[j], dtype=float)
                vals = nxt_values[idx] - x[j] + v_next[idx]
                v[j] = expectile_rows(vals[None, :], pj[None, :], levels[j])[0]
        v_next = v
    _warn_clamps(clamps[0])
    return process.initial_value + float(v_next[0])


def _warn_clamps(count: int):
    if count:
        warnings.warn(
            f"risk budget beta*dt exceeded 1 at {count} node(s); clamped to 1 "
            "(refine the time grid to avoid clamping)",
            RateClampWarning,
            stacklevel=3,
        )


def risk_generator_fd(
    f: Callable[[float, float], float],
    mu: Callable[[float, float], float],
    sigma: Callable[[float, float], float],
    rate,
    t: float,
    x: float,
) -> float:
    """Risk-averse generator of a diffusion by central finite differences.

    df/dt + mu df/dx + (1/2) sigma^2 d2f/dx2 + sqrt(2 beta / pi) |sigma df/dx|,
    with steps h = 1e-5 * max(1, |coordinate|).
    """
    rate = as_risk_rate(rate)
    hx = 1e-5 * max(1.0, abs(x))
    ht = 1e-5 * max(1.0, abs(t))
    ft = (f(t + ht, x) - f(t - ht, x)) / (2.0 * ht)
    fx = (f(t, x + hx) - f(t, x - hx)) / (2.0 * hx)
    fxx = (f(t, x + hx) - 2.0 * f(t, x) + f(t, x - hx)) / (hx * hx)
    beta = float(rate(t, np.asarray([x]))[0])
    m = float(mu(t, x))
    s = float(sigma(t, x))
    return ft + m * fx + 0.5 * s * s * fxx + np.sqrt(2.0 * beta / np.pi) * abs(s * fx)


@dataclass(frozen=True)
class DriftRow:
    steps: int
    dt: float
    value: float
    target: float
    error: float


def verify_drift_convergence(
    beta,
    T: float,
    step_counts: Sequence[int],
    x0: float = 0.0,
    quad_nodes: Optional[int] = None,
    spacing: Optional[float] = None,
) -> list[DriftRow]:
    """Tabulate nested-expectile errors against the risk drift limit.

    ``beta`` is a constant in [0, 1] or a time-dependent rate t -> [0, 1];
    the limit is x0 + sqrt(2/pi) * int_0^T sqrt(beta(t)) dt, which for a
    constant rate is x0 + sqrt(2 beta / pi) * T.  By default the
    quadrature and grid are refined jointly with the time grid
    (quad_nodes = 4*steps + 1, spacing = 0.5 / steps^(1/4)); fixed
    values may be supplied instead.
    """
    if callable(beta):
        integral, _ = quad(lambda t: np.sqrt(max(beta(t), 0.0)), 0.0, T, limit=200)
        rate = RiskRate(lambda t, x: np.full_like(np.asarray(x, float), beta(t)),
                        state_independent=True)
    else:
        b = float(beta)
        if not 0.0 <= b <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        integral = np.sqrt(b) * T
        rate = RiskRate(b)
    target = x0 + np.sqrt(2.0 / np.pi) * integral

    rows = []
    for steps in step_counts:
        m = quad_nodes if quad_nodes is not None else 4 * int(steps) + 1
        s = spacing if spacing is not None else 0.5 / float(steps) ** 0.25
        lattice = build_random_walk_lattice(x0, T, int(steps), quad_nodes=m, spacing=s)
        value = nested_expectile(lattice, rate)
        rows.append(
            DriftRow(steps=int(steps), dt=T / int(steps), value=float(value),
                     target=float(target), error=float(abs(value - target)))
        )
    return rows


def lattice_to_json(process: LatticeProcess) -> str:
    """Serialize a lattice (times, per-layer nodes and transitions)."""
    layers_doc = []
    for layer in process.layers:
        if isinstance(layer, StencilLayer):
            doc = {
                "type": "stencil",
                "origin": layer.origin,
                "step": layer.step,
                "k_lo": layer.k_lo,
                "k_hi": layer.k_hi,
            }
            if not layer.is_terminal:
                doc["offsets"] = [int(k) for k in layer.offsets]
                doc["probs"] = [float(p) for p in layer.probs]
        else:
            doc = {"type": "explicit", "values": [float(v) for v in layer.values]}
            if not layer.is_terminal:
                doc["children_index"] = [[int(i) for i in idx] for idx in layer.children_index]
                doc["children_prob"] = [[float(p) for p in pr] for pr in layer.children_prob]
        layers_doc.append(doc)
    return json.dumps({"times": [float(t) for t in process.times], "layers": layers_doc})


def lattice_from_json(text: str) -> LatticeProcess:
    doc = json.loads(text)
    layers = []
    for layer_doc in doc["layers"]:
        kind = layer_doc.get("type", "explicit")
        if kind == "stencil":
            offsets = layer_doc.get("offsets")
            layers.append(
                StencilLayer(
                    origin=float(layer_doc["origin"]),
                    step=float(layer_doc["step"]),
                    k_lo=int(layer_doc["k_lo"]),
                    k_hi=int(layer_doc["k_hi"]),
                    offsets=None if offsets is None else np.asarray(offsets, dtype=np.int64),
                    probs=None if offsets is None else np.asarray(layer_doc["probs"], dtype=float),
                )
            )
        elif kind == "explicit":
            idx = layer_doc.get("children_index")
            layers.append(
                ExplicitLayer(
                    values=np.asarray(layer_doc["values"], dtype=float),
                    children_index=None if idx is None else [np.asarray(i, dtype=np.int64) for i in idx],
                    children_prob=None
                    if idx is None
                    else [np.asarray(p, dtype=float) for p in layer_doc["children_prob"]],
                )
            )
        else:
            raise ValueError(f"unknown layer type {kind!r}")
    return LatticeProcess(np.asarray(doc["times"], dtype=float), layers)
