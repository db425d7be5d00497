"""Shared test setup.

The jit kernels compile on first call; the session fixture below pays that
cost once, up front, so the timed checks later in the suite measure the
numerics and not the compiler.
"""

import warnings

import pytest

from jacobilog import (
    EnsembleSpec,
    Seed,
    blocks,
    critical_indices,
    evolve,
    linearize,
    sample,
    sturm_count,
)
from jacobilog.scalar_regime import backward_weights, scalar_coefficients


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    spec = EnsembleSpec(kind="gbe", beta=2.0)
    mat = sample(4096, spec, Seed(987, 1))
    idx = critical_indices(4096, 1.0, 1.0)
    tr = evolve(mat, 1.0, kappa=1.0)
    linearize(mat, idx)
    backward_weights(scalar_coefficients(mat, idx))
    sturm_count(mat, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        blocks(tr, idx)
    return None


@pytest.fixture
def gbe_spec():
    return EnsembleSpec(kind="gbe", beta=2.0)
