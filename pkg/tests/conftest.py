"""Shared corpus and oracles for the test suite."""

import numpy as np
import pytest

from orlicztv import (
    DoublePhasePhi,
    Grid,
    PowerPhi,
    ScalarField,
    VariableExponentPhi,
    power_compose,
    random_lipschitz_field,
)

CORPUS_SHAPE = (12,)
CORPUS_H = 1.0 / 12


def build_corpus(grid: Grid):
    """(label, phi) pairs: the built-in families and their compositions.

    Spatial coefficients are random Lipschitz fields on ``grid``: the
    double-phase weight ranges over [0, 2] and the variable exponent over
    [1, 2].  Every base family is composed with outer powers 1.5 and 2.
    """
    weight = random_lipschitz_field(grid, 0.0, 2.0, seed=11)
    exponent = random_lipschitz_field(grid, 1.0, 2.0, seed=12)
    base = [
        ("power-1", PowerPhi(1.0)),
        ("power-1.5", PowerPhi(1.5)),
        ("power-2", PowerPhi(2.0)),
        ("double-phase", DoublePhasePhi(weight)),
        ("variable-exponent", VariableExponentPhi(exponent)),
    ]
    composed = [(f"{label}^{p:g}", power_compose(phi, p))
                for label, phi in base for p in (1.5, 2.0)]
    return base + composed


@pytest.fixture(scope="session")
def corpus_grid() -> Grid:
    return Grid(CORPUS_SHAPE, CORPUS_H)


@pytest.fixture(scope="session")
def phi_corpus(corpus_grid):
    return build_corpus(corpus_grid)


def random_fields(grid: Grid, count: int, seed: int, lo: float = -3.0,
                  hi: float = 3.0):
    """Deterministic stream of uniform random scalar fields on ``grid``."""
    rng = np.random.default_rng(seed)
    return [ScalarField(grid, rng.uniform(lo, hi, size=grid.shape))
            for _ in range(count)]


def two_level_denoise_oracle(height: float, step: float = 1e-3):
    """Brute-force minimum of ``|c2 - c1| + (1/2)c1^2 + (1/2)(c2 - height)^2``.

    This is the TV + L2 denoising energy restricted to two-level candidates
    for data that is 0 on the left half and ``height`` on the right half of
    a unit-measure domain; the true minimizer of that problem is two-level,
    so the restricted minimum is the global one.
    """
    c = np.arange(0.0, height + step, step)
    c1 = c[:, None]
    c2 = c[None, :]
    e = np.abs(c2 - c1) + 0.5 * c1 ** 2 + 0.5 * (c2 - height) ** 2
    i, j = np.unravel_index(int(np.argmin(e)), e.shape)
    return float(e[i, j]), float(c[i]), float(c[j])
