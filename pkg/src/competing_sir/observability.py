"""Local observability of per-virus infections from aggregated symptoms.

Over a window of ``m`` steps the outputs satisfy ``Y = O X[t]`` where
``X[t]`` stacks ``x^1[t], ..., x^m[t]`` and ``O`` is the ``mn x mn``
observability matrix built from the measurement and transition matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import ModelConfig, Trajectory
from .stability import build_M_tilde

RANK_RTOL = 1e-12


class WindowOutOfRange(IndexError):
    """The trajectory does not cover the requested observation window."""


class SingularSystem(np.linalg.LinAlgError):
    """The observability matrix is numerically rank deficient."""


def measurement_blocks(config: ModelConfig) -> list[np.ndarray]:
    """Diagonal measurement matrices ``C^k``."""
    return [np.diag(v.c) for v in config.viruses]


def measurement_matrix(config: ModelConfig) -> np.ndarray:
    """``C = [C^1 ... C^m]``, shape ``(n, mn)``."""
    return np.hstack(measurement_blocks(config))


def build_O_zero(config: ModelConfig) -> np.ndarray:
    """Observability matrix once the susceptible pool is exhausted (s = 0).

    Column block ``k``, row block ``j`` is ``C^k (I - h Gamma^k)^j``; every
    block is diagonal.
    """
    n, m, h = config.n, config.m, config.h
    O = np.zeros((m * n, m * n))
    for k, v in enumerate(config.viruses):
        decay = 1.0 - h * v.gamma
        for j in range(m):
            O[j * n:(j + 1) * n, k * n:(k + 1) * n] = np.diag(v.c * decay ** j)
    return O


def build_O_trajectory(traj: Trajectory, t: int, config: ModelConfig) -> np.ndarray:
    """Observability matrix along a recorded trajectory at time ``t``.

    Row block ``j`` of column block ``k`` is ``C^k Mt^k[t+j-1] ... Mt^k[t]``,
    so the causal order of the transition matrices is respected.
    """
    n, m, h = config.n, config.m, config.h
    if t < 0 or t + m - 1 > traj.horizon:
        raise WindowOutOfRange(
            f"window [{t}, {t + m - 1}] not covered by trajectory with horizon {traj.horizon}")
    O = np.zeros((m * n, m * n))
    for k, v in enumerate(config.viruses):
        Ck = np.diag(v.c)
        phi = np.eye(n)
        for j in range(m):
            O[j * n:(j + 1) * n, k * n:(k + 1) * n] = Ck @ phi
            if j < m - 1:
                phi = build_M_tilde(traj.states[t + j], v, h) @ phi
    return O


def rank_threshold(singular_values: np.ndarray, size: int) -> float:
    smax = singular_values.max(initial=0.0)
    return size * smax * RANK_RTOL


def numerical_rank(O: np.ndarray) -> tuple[int, np.ndarray, float]:
    """Rank, singular values and the threshold used to count them."""
    sv = np.linalg.svd(O, compute_uv=False)
    tol = rank_threshold(sv, O.shape[0])
    return int(np.sum(sv > tol)), sv, tol


def distinct_gamma(config: ModelConfig) -> bool:
    """True when at every node the healing rates of all viruses differ."""
    g = config.gamma
    return all(len(set(g[:, i].tolist())) == config.m for i in range(config.n))


@dataclass
class ObservabilityReport:
    O: np.ndarray
    numerical_rank: int
    singular_values: np.ndarray
    threshold: float
    locally_observable: bool
    distinct_gamma: bool
    regime: str = "disease_free"
    t: Optional[int] = None

    @property
    def smallest_singular_value(self) -> float:
        return float(self.singular_values.min()) if self.singular_values.size else 0.0

    @property
    def regime_tag(self) -> str:
        return self.regime if self.t is None else f"{self.regime}({self.t})"


def check_local_observability(O: np.ndarray, config: ModelConfig, regime: str = "disease_free",
                              t: Optional[int] = None) -> ObservabilityReport:
    rank, sv, tol = numerical_rank(O)
    return ObservabilityReport(O=O, numerical_rank=rank, singular_values=sv, threshold=tol,
                               locally_observable=rank == O.shape[0],
                               distinct_gamma=distinct_gamma(config), regime=regime, t=t)


def stack_outputs(traj: Trajectory, t: int, m: int) -> np.ndarray:
    """Outputs ``y[t], ..., y[t+m-1]`` as an ``(m, n)`` array."""
    if t < 0 or t + m - 1 > traj.horizon:
        raise WindowOutOfRange(f"window [{t}, {t + m - 1}] not covered by trajectory")
    return np.array(traj.outputs[t:t + m])


def reconstruct_window(outputs, O: np.ndarray) -> np.ndarray:
    """Recover ``X[t]`` (shape ``(m, n)``) from ``m`` stacked output vectors.

    Raises:
        SingularSystem: ``O`` fails the numerical rank test.
    """
    Y = np.asarray(outputs, dtype=float)
    m = Y.shape[0]
    rank, sv, tol = numerical_rank(O)
    if rank < O.shape[0]:
        raise SingularSystem(
            f"observability matrix has numerical rank {rank} < {O.shape[0]} "
            f"(smallest singular value {sv.min():.3e}, threshold {tol:.3e})")
    X = np.linalg.solve(O, Y.reshape(-1))
    return X.reshape(m, -1)
