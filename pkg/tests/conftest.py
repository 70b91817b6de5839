import numpy as np
import pytest

from competing_sir.model import EpidemicState, make_config
from competing_sir.scenario import load_bundled

# Europe parameters, transcribed independently of the bundled scenario file.
EUROPE_LABELS = ["UK", "ESP", "GER", "TUR", "RUS"]
EUROPE_B_COVID = [
    [0.08, 0.15, 0.24, 0.0, 0.06],
    [0.15, 0.12, 0.13, 0.11, 0.0],
    [0.24, 0.13, 0.25, 0.05, 0.04],
    [0.0, 0.09, 0.05, 0.11, 0.15],
    [0.06, 0.0, 0.04, 0.14, 0.09],
]
EUROPE_GAMMA_COVID = [0.15, 0.23, 0.17, 0.25, 0.2]
EUROPE_X0_COVID = [0.02, 0.04, 0.03, 0.01, 0.03]
EUROPE_C_COVID = [0.4] * 5
EUROPE_B_FLU = [
    [0.02, 0.05, 0.04, 0.0, 0.01],
    [0.05, 0.06, 0.07, 0.02, 0.0],
    [0.04, 0.07, 0.04, 0.03, 0.05],
    [0.0, 0.03, 0.04, 0.09, 0.07],
    [0.01, 0.0, 0.05, 0.07, 0.06],
]
EUROPE_GAMMA_FLU = [0.095, 0.12, 0.1, 0.15, 0.13]
EUROPE_X0_FLU = [0.001, 0.002, 0.0035, 0.002, 0.001]
EUROPE_C_FLU = [0.3] * 5


@pytest.fixture(scope="session")
def europe():
    return load_bundled("europe")


@pytest.fixture(scope="session")
def europe_config(europe):
    return europe.config


def random_config(rng, n, m, h=1.0, horizon=0, load=None):
    """A random config satisfying every modelling assumption."""
    B = rng.uniform(0.0, 1.0, size=(m, n, n)) * (rng.uniform(size=(m, n, n)) < 0.7)
    rows = B.sum(axis=(0, 2))
    target = rng.uniform(0.1, 1.0, size=n) if load is None else np.full(n, load)
    scale = np.where(rows > 0, target / (h * np.where(rows > 0, rows, 1.0)), 0.0)
    B = B * scale[None, :, None]
    gamma = rng.uniform(0.05, 1.0, size=(m, n))
    gamma *= rng.uniform(0.2, 1.0, size=n) / (h * gamma.sum(axis=0))
    c = rng.uniform(0.05, 1.0, size=(m, n))
    parts = rng.dirichlet(np.ones(m + 2), size=n)  # s, x^1..x^m, r per node
    s0, x0, r0 = parts[:, 0], parts[:, 1:m + 1].T, parts[:, m + 1]
    cfg = make_config(B, gamma, c, x0, h=h, horizon=horizon, r0=r0)
    # rebuild s so the simplex holds to rounding
    return cfg.replace(initial=EpidemicState(s=1.0 - x0.sum(axis=0) - r0, x=x0, r=r0))


def dense_rho(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def rescale_to_schur(cfg, rng):
    """Shrink each B^k until rho(I - h Gamma^k + h B^k) lands in (0.5, 0.97)."""
    from competing_sir.model import VirusParams

    h = cfg.h
    viruses = []
    for v in cfg.viruses:
        target = rng.uniform(0.5, 0.97)
        base = dense_rho(np.eye(v.n) - h * np.diag(v.gamma))
        if base >= target:
            # pure decay already slow; shrink everything toward the target
            viruses.append(VirusParams(B=0.0 * v.B, gamma=v.gamma, c=v.c, label=v.label))
            continue
        lo, hi = 0.0, 1.0
        rho_full = dense_rho(np.eye(v.n) - h * np.diag(v.gamma) + h * v.B)
        if rho_full <= target:
            viruses.append(v)
            continue
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if dense_rho(np.eye(v.n) - h * np.diag(v.gamma) + h * mid * v.B) < target:
                lo = mid
            else:
                hi = mid
        viruses.append(VirusParams(B=lo * v.B, gamma=v.gamma, c=v.c, label=v.label))
    return cfg.replace(viruses=tuple(viruses))
