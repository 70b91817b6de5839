"""Competing multi-virus SIR dynamics on a population network.

Each node ``i`` carries a susceptible fraction ``s_i``, one infected fraction
``x^k_i`` per virus ``k`` and a recovered fraction ``r_i``. An individual hosts
at most one virus at a time, so the compartments of a node always sum to one.

Infected fractions are stored virus-major: ``x`` has shape ``(m, n)`` and row
``k`` is the infection profile of virus ``k`` over the network.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SIMPLEX_TOL = 1e-9
# slack for Assumption-3 style row sums that are exactly 1 in decimal
RATE_SLACK = 1e-12


class SimplexDriftError(ValueError):
    """A state whose compartments no longer sum to one at some node."""


@dataclass(frozen=True, eq=False)
class VirusParams:
    """Spreading parameters of one virus.

    Attributes:
        B: ``(n, n)`` infection rates, ``B[i, j]`` is the rate from node j to node i.
        gamma: ``(n,)`` healing rates.
        c: ``(n,)`` measurement coefficients (probability of being symptomatic).
        label: human readable name used in reports.
    """

    B: np.ndarray
    gamma: np.ndarray
    c: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "B", np.array(self.B, dtype=float))
        object.__setattr__(self, "gamma", np.array(self.gamma, dtype=float).reshape(-1))
        object.__setattr__(self, "c", np.array(self.c, dtype=float).reshape(-1))

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    def __eq__(self, other):
        if not isinstance(other, VirusParams):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.B, other.B)
            and np.array_equal(self.gamma, other.gamma)
            and np.array_equal(self.c, other.c)
        )


@dataclass(frozen=True, eq=False)
class EpidemicState:
    """Compartment fractions of every node at one time step."""

    s: np.ndarray
    x: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s", np.array(self.s, dtype=float).reshape(-1))
        object.__setattr__(self, "x", np.atleast_2d(np.array(self.x, dtype=float)))
        object.__setattr__(self, "r", np.array(self.r, dtype=float).reshape(-1))

    @classmethod
    def _wrap(cls, s, x, r) -> "EpidemicState":
        """Build from arrays already in canonical form, without copying."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "s", s)
        object.__setattr__(obj, "x", x)
        object.__setattr__(obj, "r", r)
        return obj

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[0]

    def __eq__(self, other):
        if not isinstance(other, EpidemicState):
            return NotImplemented
        return (
            np.array_equal(self.s, other.s)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.r, other.r)
        )


def susceptible_from(x: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Susceptible fraction implied by conservation, ``1 - sum_k x^k - r``."""
    return 1.0 - np.sum(x, axis=0) - r


def state_from_infections(x0, s0=None, r0=None) -> EpidemicState:
    """Build an initial state when only infections are given.

    ``r`` defaults to zero and ``s`` to whatever conservation leaves over.
    """
    x0 = np.atleast_2d(np.array(x0, dtype=float))
    r0 = np.zeros(x0.shape[1]) if r0 is None else np.array(r0, dtype=float)
    s0 = susceptible_from(x0, r0) if s0 is None else np.array(s0, dtype=float)
    return EpidemicState(s=s0, x=x0, r=r0)


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to run the model forward."""

    h: float
    viruses: tuple[VirusParams, ...]
    initial: EpidemicState
    horizon: int = 0
    node_labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "viruses", tuple(self.viruses))
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "node_labels", tuple(self.node_labels))

    @property
    def n(self) -> int:
        return self.initial.n

    @property
    def m(self) -> int:
        return len(self.viruses)

    @property
    def B(self) -> np.ndarray:
        """Stacked infection matrices, shape ``(m, n, n)``."""
        return np.stack([v.B for v in self.viruses])

    @property
    def gamma(self) -> np.ndarray:
        return np.stack([v.gamma for v in self.viruses])

    @property
    def c(self) -> np.ndarray:
        return np.stack([v.c for v in self.viruses])

    @property
    def virus_labels(self) -> list[str]:
        return [v.label or f"virus{k + 1}" for k, v in enumerate(self.viruses)]

    @property
    def labels(self) -> list[str]:
        if self.node_labels:
            return list(self.node_labels)
        return [f"node{i + 1}" for i in range(self.n)]

    def replace(self, **changes) -> "ModelConfig":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class Violation:
    """One broken modelling assumption."""

    assumption: int
    message: str
    node: Optional[int] = None
    virus: Optional[int] = None

    def __str__(self):
        return self.describe()

    def describe(self, node_labels=None, virus_labels=None) -> str:
        where = []
        if self.virus is not None:
            where.append(f"virus {virus_labels[self.virus] if virus_labels else self.virus}")
        if self.node is not None:
            where.append(f"node {node_labels[self.node] if node_labels else self.node}")
        loc = f" ({', '.join(where)})" if where else ""
        return f"Assumption {self.assumption}{loc}: {self.message}"


def _check_shapes(config: ModelConfig) -> list[Violation]:
    n, m = config.n, config.m
    out = []
    if m == 0:
        out.append(Violation(0, "at least one virus is required"))
    if config.initial.x.shape != (m, n) or config.initial.r.shape != (n,):
        out.append(Violation(0, f"initial state must have x of shape ({m}, {n}) and r of length {n}"))
    for k, v in enumerate(config.viruses):
        if v.B.shape != (n, n) or v.gamma.shape != (n,) or v.c.shape != (n,):
            out.append(Violation(0, f"parameters must have B ({n}x{n}), gamma ({n}) and c ({n})", virus=k))
    if config.node_labels and len(config.node_labels) != n:
        out.append(Violation(0, f"expected {n} node labels, got {len(config.node_labels)}"))
    if not config.h > 0:
        out.append(Violation(3, f"sampling parameter h must be positive, got {config.h}"))
    if config.horizon < 0:
        out.append(Violation(0, f"horizon must be nonnegative, got {config.horizon}"))
    return out


def validate(config: ModelConfig) -> list[Violation]:
    """Check the standing assumptions of the model; an empty list means valid.

    Assumption 1: initial fractions lie in [0, 1] and sum to one per node.
    Assumption 2: infection rates nonnegative, healing rates positive.
    Assumption 3: ``h * sum_k sum_j beta^k_ij <= 1`` and ``h * sum_k gamma^k_i <= 1``.
    Assumption 4: measurement coefficients in (0, 1].
    Assumption 0 is used for structural problems (shapes, horizon).
    """
    violations = _check_shapes(config)
    if any(v.assumption == 0 for v in violations):
        return violations

    st = config.initial
    for name, arr in (("s", st.s), ("r", st.r)):
        for i in np.flatnonzero((arr < 0) | (arr > 1) | ~np.isfinite(arr)):
            violations.append(Violation(1, f"{name}[0] = {arr[i]} outside [0, 1]", node=int(i)))
    for k, i in zip(*np.nonzero((st.x < 0) | (st.x > 1) | ~np.isfinite(st.x))):
        violations.append(Violation(1, f"x[0] = {st.x[k, i]} outside [0, 1]", node=int(i), virus=int(k)))
    for i in np.flatnonzero(conservation_residual(st) > SIMPLEX_TOL):
        violations.append(Violation(1, "initial compartments do not sum to one", node=int(i)))

    for k, v in enumerate(config.viruses):
        for i, j in zip(*np.nonzero(v.B < 0)):
            violations.append(Violation(2, f"beta[{i}, {j}] = {v.B[i, j]} is negative", node=int(i), virus=k))
        for i in np.flatnonzero(~(v.gamma > 0)):
            violations.append(Violation(2, f"gamma = {v.gamma[i]} is not positive", node=int(i), virus=k))
        for i in np.flatnonzero(~((v.c > 0) & (v.c <= 1))):
            violations.append(Violation(4, f"c = {v.c[i]} outside (0, 1]", node=int(i), virus=k))

    if config.h > 0:
        beta_load = config.h * config.B.sum(axis=(0, 2))
        gamma_load = config.h * config.gamma.sum(axis=0)
        for i in np.flatnonzero(beta_load > 1 + RATE_SLACK):
            violations.append(Violation(3, f"h * total infection rate = {beta_load[i]:.6g} > 1", node=int(i)))
        for i in np.flatnonzero(gamma_load > 1 + RATE_SLACK):
            violations.append(Violation(3, f"h * total healing rate = {gamma_load[i]:.6g} > 1", node=int(i)))
    return violations


def conservation_residual(state: EpidemicState) -> np.ndarray:
    """Per-node ``|s_i + sum_k x^k_i + r_i - 1|``."""
    return np.abs(state.s + state.x.sum(axis=0) + state.r - 1.0)


def infection_pressure(B: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``sum_j beta^k_ij x^k_j`` for every virus and node, shape ``(m, n)``."""
    return np.einsum("kij,kj->ki", B, x)


def advance(s, x, r, B, gamma, h):
    """One step of the competing SIR recursion on raw arrays.

    Written as sums of nonnegative terms so that the box invariance also holds
    in floating point whenever the rate assumptions do.
    """
    pressure = infection_pressure(B, x)
    s_next = s * (1.0 - h * pressure.sum(axis=0))
    x_next = x * (1.0 - h * gamma) + h * (s * pressure)
    r_next = r + h * (gamma * x).sum(axis=0)
    return s_next, x_next, r_next


def step(state: EpidemicState, config: ModelConfig) -> EpidemicState:
    """Advance ``state`` by one sampling period."""
    drift = conservation_residual(state).max(initial=0.0)
    if drift > SIMPLEX_TOL:
        raise SimplexDriftError(f"state compartments drift from one by {drift:.3e}")
    s, x, r = advance(state.s, state.x, state.r, config.B, config.gamma, config.h)
    return EpidemicState(s=s, x=x, r=r)


def output(state: EpidemicState, config: ModelConfig) -> np.ndarray:
    """Aggregated symptomatic fraction ``y_i = sum_k c^k_i x^k_i``."""
    return (config.c * state.x).sum(axis=0)


@dataclass
class Trajectory:
    """States ``0..horizon`` and the measured outputs at each of them."""

    states: list[EpidemicState]
    outputs: list[np.ndarray] = field(default_factory=list)

    def __len__(self):
        return len(self.states)

    @property
    def horizon(self) -> int:
        return len(self.states) - 1

    @property
    def s(self) -> np.ndarray:
        return np.array([st.s for st in self.states])

    @property
    def x(self) -> np.ndarray:
        """Infections, shape ``(T + 1, m, n)``."""
        return np.array([st.x for st in self.states])

    @property
    def r(self) -> np.ndarray:
        return np.array([st.r for st in self.states])

    @property
    def y(self) -> np.ndarray:
        return np.array(self.outputs)


def simulate(config: ModelConfig, initial: Optional[EpidemicState] = None,
             horizon: Optional[int] = None) -> Trajectory:
    """Iterate :func:`step` from the initial state for ``horizon`` steps."""
    state = config.initial if initial is None else initial
    horizon = config.horizon if horizon is None else horizon
    # same arithmetic as step(), written into preallocated arrays
    B, gamma, c, h = config.B, config.gamma, config.c, config.h
    m, n = state.x.shape
    S = np.empty((horizon + 1, n))
    X = np.empty((horizon + 1, m, n))
    R = np.empty((horizon + 1, n))
    S[0], X[0], R[0] = state.s, state.x, state.r
    s, x, r = state.s, state.x, state.r
    for t in range(horizon):
        s, x, r = advance(s, x, r, B, gamma, h)
        S[t + 1], X[t + 1], R[t + 1] = s, x, r
    # a state that drifted off the simplex must not have been stepped
    drift = np.abs(S[:-1] + X[:-1].sum(axis=1) + R[:-1] - 1.0).max(axis=1, initial=0.0)
    bad = np.flatnonzero(drift > SIMPLEX_TOL)
    if bad.size:
        t = int(bad[0])
        raise SimplexDriftError(f"t={t}: state compartments drift from one by {drift[t]:.3e}")
    states = [state] + [EpidemicState._wrap(S[t], X[t], R[t]) for t in range(1, horizon + 1)]
    Y = (c[None] * X).sum(axis=1)
    return Trajectory(states=states, outputs=list(Y))


def make_config(B: Sequence, gamma: Sequence, c: Sequence, x0: Sequence, h: float = 1.0,
                horizon: int = 0, s0=None, r0=None, labels: Sequence[str] = (),
                node_labels: Sequence[str] = ()) -> ModelConfig:
    """Convenience constructor from stacked per-virus arrays."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 2:
        B = B[None]
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    labels = list(labels) or [""] * B.shape[0]
    viruses = tuple(VirusParams(B=B[k], gamma=gamma[k], c=c[k], label=labels[k]) for k in range(B.shape[0]))
    return ModelConfig(h=h, viruses=viruses, initial=state_from_infections(x0, s0, r0),
                       horizon=horizon, node_labels=tuple(node_labels))
