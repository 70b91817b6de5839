"""Luenberger observer for the per-virus infection levels.

The observer runs a copy of the model on its own estimates and corrects every
virus at node ``i`` by ``L_i`` times the output innovation ``y_i - y_hat_i``.
The recovered fraction is not measured; it is estimated by accumulating the
estimated healing flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .model import ModelConfig, Trajectory, advance, susceptible_from

DEFAULT_GAIN = 0.5
DEFAULT_ERROR_THRESHOLD = 1e-6
# floor of the denominator in the relative error metric
RELATIVE_FLOOR = 1e-9


@dataclass
class ObserverConfig:
    L: np.ndarray
    x_hat0: np.ndarray
    r_hat0: np.ndarray
    error_threshold: float = DEFAULT_ERROR_THRESHOLD

    def __post_init__(self):
        self.L = np.array(self.L, dtype=float).reshape(-1)
        self.x_hat0 = np.atleast_2d(np.array(self.x_hat0, dtype=float))
        self.r_hat0 = np.array(self.r_hat0, dtype=float).reshape(-1)


def split_initial_estimate(y0: np.ndarray, config: ModelConfig) -> np.ndarray:
    """Attribute the first observed output equally to every virus.

    ``x_hat^k_i[0] = y_i[0] / (m c^k_i)``, which reproduces ``y[0]`` exactly.
    """
    return np.asarray(y0, dtype=float)[None, :] / (config.m * config.c)


def default_observer_config(config: ModelConfig, y0: np.ndarray, gain=DEFAULT_GAIN,
                            error_threshold: float = DEFAULT_ERROR_THRESHOLD) -> ObserverConfig:
    L = np.broadcast_to(np.asarray(gain, dtype=float), (config.n,)).copy()
    return ObserverConfig(L=L, x_hat0=split_initial_estimate(y0, config),
                          r_hat0=np.zeros(config.n), error_threshold=error_threshold)


class ObserverUpdate(NamedTuple):
    x_hat: np.ndarray
    r_hat: np.ndarray
    s_hat: np.ndarray
    innovation: np.ndarray


def innovation(y: np.ndarray, x_hat: np.ndarray, config: ModelConfig) -> np.ndarray:
    return np.asarray(y, dtype=float) - (config.c * x_hat).sum(axis=0)


def observer_step(x_hat: np.ndarray, r_hat: np.ndarray, y: np.ndarray, config: ModelConfig,
                  L: np.ndarray, s_hat: Optional[np.ndarray] = None) -> ObserverUpdate:
    """One observer update.

    ``s_hat`` defaults to ``1 - sum_k x_hat^k - r_hat``. The returned
    ``s_hat`` is carried forward with the model's own susceptible recursion
    minus the total correction, which keeps the same conservation identity
    without reconstructing it from rounded sums.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    r_hat = np.asarray(r_hat, dtype=float)
    if s_hat is None:
        s_hat = susceptible_from(x_hat, r_hat)
    innov = innovation(y, x_hat, config)
    s_next, x_next, r_next = advance(s_hat, x_hat, r_hat, config.B, config.gamma, config.h)
    correction = np.asarray(L, dtype=float) * innov
    x_next = x_next + correction
    s_next = s_next - config.m * correction
    return ObserverUpdate(x_next, r_next, s_next, innov)


@dataclass
class ObserverRun:
    """Observer history; ``errors`` is filled only when the truth was given."""

    estimates: np.ndarray
    r_hat: np.ndarray
    s_hat: np.ndarray
    innovations: np.ndarray
    errors: Optional[np.ndarray] = None
    truth: Optional[np.ndarray] = None
    error_threshold: float = DEFAULT_ERROR_THRESHOLD

    def _need_truth(self):
        if self.errors is None:
            raise ValueError("error metrics need the true trajectory")

    @property
    def max_abs_error(self) -> np.ndarray:
        """``max_{i,k} |x^k_i[t] - x_hat^k_i[t]|`` per time step."""
        self._need_truth()
        return np.abs(self.errors).max(axis=(1, 2))

    @property
    def relative_errors(self) -> np.ndarray:
        self._need_truth()
        return np.abs(self.errors) / np.maximum(self.truth, RELATIVE_FLOOR)

    @property
    def first_below_threshold(self) -> Optional[int]:
        """First step whose maximum absolute error is below the threshold."""
        self._need_truth()
        hits = np.flatnonzero(self.max_abs_error < self.error_threshold)
        return int(hits[0]) if hits.size else None

    def time_to_relative(self, fraction: float = 0.1) -> np.ndarray:
        """Per virus and node, the first step where the error drops below
        ``fraction`` of the infection level while that infection is still
        above the relative-metric floor; ``-1`` if it never does."""
        rel = self.relative_errors
        ok = (rel < fraction) & (self.truth > RELATIVE_FLOOR)
        first = np.where(ok.any(axis=0), ok.argmax(axis=0), -1)
        return first


def run_observer(outputs: Sequence[np.ndarray], config: ModelConfig, observer: ObserverConfig,
                 truth: Optional[Trajectory] = None) -> ObserverRun:
    """Feed the measured outputs ``y[0..T]`` through the observer.

    Returns estimates for ``t = 0..T``; ``y[t]`` drives the update to ``t + 1``.
    """
    Y = np.asarray(outputs, dtype=float)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise ValueError("outputs must be a nonempty sequence of length-n vectors")
    n, m = config.n, config.m
    if Y.shape[1] != n:
        raise ValueError(f"outputs have {Y.shape[1]} nodes, config has {n}")
    if observer.x_hat0.shape != (m, n) or observer.r_hat0.shape != (n,) or observer.L.shape != (n,):
        raise ValueError("observer dimensions do not match the model")
    if truth is not None and len(truth) != Y.shape[0]:
        raise ValueError(f"truth has {len(truth)} states but {Y.shape[0]} outputs were given")

    T = Y.shape[0]
    est = np.empty((T, m, n))
    r_hat = np.empty((T, n))
    s_hat = np.empty((T, n))
    innov = np.empty((T, n))
    x, r = observer.x_hat0, observer.r_hat0
    s = susceptible_from(x, r)
    for t in range(T):
        est[t], r_hat[t], s_hat[t] = x, r, s
        upd = observer_step(x, r, Y[t], config, observer.L, s_hat=s)
        innov[t] = upd.innovation
        x, r, s = upd.x_hat, upd.r_hat, upd.s_hat

    run = ObserverRun(estimates=est, r_hat=r_hat, s_hat=s_hat, innovations=innov,
                      error_threshold=observer.error_threshold)
    if truth is not None:
        run.truth = truth.x
        run.errors = run.truth - est
    return run
