"""Exponential eradication certificates for each virus.

A virus dies out exponentially fast when the spectral radius of its
linearised transition matrix ``M = I - h Gamma + h B`` is below one. The
certificate is a diagonal Lyapunov function ``V(x) = x^T P x`` whose
decrease also yields an explicit convergence-rate bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, optimize
from scipy.sparse import csgraph

from .model import EpidemicState, ModelConfig, VirusParams

log = logging.getLogger(__name__)

POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
# relative margin for negative definiteness of M^T P M - P
LYAPUNOV_MARGIN = 1e-12


class NotSchurError(ValueError):
    """No Lyapunov certificate exists because ``rho(M) >= 1``."""


class VerificationFailed(ArithmeticError):
    """A constructed certificate did not pass its eigenvalue check."""


def build_M(virus: VirusParams, h: float) -> np.ndarray:
    """Linearised transition matrix ``I - h Gamma + h B`` at full susceptibility."""
    n = virus.n
    return np.eye(n) - h * np.diag(virus.gamma) + h * virus.B


def build_M_tilde(state: EpidemicState, virus: VirusParams, h: float) -> np.ndarray:
    """State transition matrix ``I + h (S B - Gamma)`` of the infection update."""
    n = virus.n
    return np.eye(n) + h * (state.s[:, None] * virus.B - np.diag(virus.gamma))


@dataclass
class PowerIterationResult:
    value: float
    iterations: int
    converged: bool
    vector: np.ndarray = field(repr=False, default=None)


def power_iteration(M: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> PowerIterationResult:
    """Perron root of a nonnegative matrix by power iteration on ``M + I``.

    The unit shift keeps every iterate strictly positive and, for an
    irreducible ``M``, makes the Perron root strictly dominant. Each step
    brackets the root by the Collatz-Wielandt ratios
    ``min_i (Av)_i / v_i <= rho(A) <= max_i (Av)_i / v_i``; the loop stops once
    the bracket closes to ``tol`` relative to its upper end. For reducible
    matrices the bracket may stall, which is reported as non-convergence.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    A = M + np.eye(n)
    v = np.full(n, 1.0 / np.sqrt(n))
    lo = hi = np.nan
    for it in range(1, max_iter + 1):
        w = A @ v
        ratios = w / v
        lo, hi = ratios.min(), ratios.max()
        if hi - lo <= tol * hi:
            return PowerIterationResult(0.5 * (lo + hi) - 1.0, it, True, v)
        v = w / np.linalg.norm(w)
    return PowerIterationResult(0.5 * (lo + hi) - 1.0, max_iter, False, v)


def spectral_radius(M: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Spectral radius of an entrywise nonnegative matrix.

    The matrix is split into strongly connected components; the spectral
    radius is the largest Perron root over the irreducible diagonal blocks,
    each found by power iteration. A block that fails to converge falls back
    to a dense eigensolve.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    if np.any(M < 0):
        raise ValueError("spectral_radius expects an entrywise nonnegative matrix")
    ncomp, comp = csgraph.connected_components(M != 0, directed=True, connection="strong")
    rho = 0.0
    for c in range(ncomp):
        idx = np.flatnonzero(comp == c)
        block = M[np.ix_(idx, idx)]
        if len(idx) == 1:
            rho = max(rho, float(block[0, 0]))
            continue
        res = power_iteration(block, tol=tol, max_iter=max_iter)
        if res.converged:
            rho = max(rho, res.value)
        else:
            log.warning("power iteration did not converge in %d steps; using dense eigensolve", max_iter)
            rho = max(rho, float(np.max(np.abs(np.linalg.eigvals(block)))))
    return rho


def lyapunov_margin(M: np.ndarray, p: np.ndarray) -> float:
    """Largest eigenvalue of ``M^T diag(p) M - diag(p)``."""
    P = np.diag(p)
    return float(np.linalg.eigvalsh(M.T @ P @ M - P).max())


def _certifies(M, p) -> bool:
    return bool(np.all(p > 0)) and lyapunov_margin(M, p) < -LYAPUNOV_MARGIN * float(np.max(p))


def find_diagonal_lyapunov(M: np.ndarray) -> np.ndarray:
    """Positive diagonal ``p`` with ``M^T diag(p) M - diag(p)`` negative definite.

    For a nonnegative Schur matrix, ``xi = (I - M)^{-1} 1`` and
    ``eta = (I - M^T)^{-1} 1`` are both positive and ``p = eta / xi`` is a
    certificate. The candidate is always re-checked with a symmetric eigensolve;
    if the check fails the segment between the candidate and the diagonal of the
    dense discrete Lyapunov solution is searched.

    Raises:
        NotSchurError: ``rho(M) >= 1``.
        VerificationFailed: no verified certificate was found.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    rho = spectral_radius(M)
    if rho >= 1.0:
        raise NotSchurError(f"spectral radius {rho:.12g} >= 1")
    ones = np.ones(n)
    I = np.eye(n)
    xi = np.linalg.solve(I - M, ones)
    eta = np.linalg.solve(I - M.T, ones)
    candidate = eta / xi
    if _certifies(M, candidate):
        return candidate

    log.info("diagonal candidate failed verification; searching toward dense Lyapunov diagonal")
    dense = np.diag(linalg.solve_discrete_lyapunov(M.T, I)).copy()

    def mixed(theta):
        return (1.0 - theta) * candidate + theta * dense

    def score(theta):
        p = mixed(theta)
        if np.any(p <= 0):
            return np.inf
        return lyapunov_margin(M, p) / np.max(p)

    for theta in (1.0, 0.5):
        if _certifies(M, mixed(theta)):
            return mixed(theta)
    best = optimize.minimize_scalar(score, bounds=(0.0, 1.0), method="bounded",
                                    options={"xatol": 1e-10})
    p = mixed(best.x)
    if _certifies(M, p):
        return p
    raise VerificationFailed("no diagonal Lyapunov certificate passed verification")


@dataclass
class VirusCertificate:
    """Stability verdict for one virus.

    ``P`` holds the diagonal of the Lyapunov matrix. The sigma fields and the
    rate bound are ``None`` unless the virus is certified.
    """

    label: str
    rho: float
    ges_certified: bool
    P: Optional[np.ndarray] = None
    sigma1: Optional[float] = None
    sigma2: Optional[float] = None
    sigma3: Optional[float] = None
    rate_bound: Optional[float] = None

    @property
    def overshoot(self) -> Optional[float]:
        """Envelope constant ``sqrt(sigma2 / sigma1)``."""
        if not self.ges_certified:
            return None
        return float(np.sqrt(self.sigma2 / self.sigma1))

    def envelope(self, norm0: float, t) -> np.ndarray:
        """Upper bound on ``||x[t]||`` given ``||x[0]|| = norm0``."""
        if not self.ges_certified:
            raise ValueError(f"virus {self.label!r} is not certified")
        return self.overshoot * norm0 * self.rate_bound ** np.asarray(t, dtype=float)

    def lyapunov(self, x: np.ndarray) -> float:
        return float(x @ (self.P * x))


@dataclass
class StabilityReport:
    h: float
    viruses: list[VirusCertificate]

    @property
    def all_certified(self) -> bool:
        return all(v.ges_certified for v in self.viruses)


def certify_matrix(M: np.ndarray, label: str = "") -> VirusCertificate:
    """Certificate for an explicit transition matrix."""
    rho = spectral_radius(M)
    if rho >= 1.0:
        return VirusCertificate(label=label, rho=rho, ges_certified=False)
    try:
        p = find_diagonal_lyapunov(M)
    except (NotSchurError, VerificationFailed) as exc:
        log.warning("virus %s: %s", label, exc)
        return VirusCertificate(label=label, rho=rho, ges_certified=False)
    P = np.diag(p)
    sigma1 = float(p.min())
    sigma2 = float(p.max())
    sigma3 = float(np.linalg.eigvalsh(P - M.T @ P @ M).min())
    rate = float(np.sqrt(max(1.0 - sigma3 / sigma2, 0.0)))
    return VirusCertificate(label=label, rho=rho, ges_certified=True, P=p,
                            sigma1=sigma1, sigma2=sigma2, sigma3=sigma3, rate_bound=rate)


def certify(virus: VirusParams, h: float) -> VirusCertificate:
    """Spectral radius, Lyapunov certificate and rate bound for one virus."""
    return certify_matrix(build_M(virus, h), label=virus.label)


def stability_report(config: ModelConfig) -> StabilityReport:
    certs = []
    for label, virus in zip(config.virus_labels, config.viruses):
        cert = certify(virus, config.h)
        cert.label = label
        certs.append(cert)
    return StabilityReport(h=config.h, viruses=certs)
