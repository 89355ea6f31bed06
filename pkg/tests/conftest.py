import numpy as np
import pytest

from collchain.chain import ChainSpec, spectrum_for
from collchain.collision import assemble_tensor

_CACHE = {}


def tensor_for(variant="Exact", **changes):
    """Assembled tensor for the default chain with ``changes``, cached per session."""
    key = (variant, tuple(sorted(changes.items())))
    if key not in _CACHE:
        spec = ChainSpec(**changes)
        sp = spectrum_for(spec)
        _CACHE[key] = (spec, sp, assemble_tensor(spec, sp, variant, n_threads=2))
    return _CACHE[key]


@pytest.fixture(scope="session")
def default_chain():
    spec = ChainSpec()
    return spec, spectrum_for(spec)


@pytest.fixture(scope="session")
def exact():
    return tensor_for("Exact")


@pytest.fixture(scope="session")
def narrow():
    return tensor_for("Narrow")


@pytest.fixture(scope="session")
def local():
    return tensor_for("Local")


@pytest.fixture(scope="session")
def band():
    return tensor_for("BandResolved")


@pytest.fixture
def rng():
    return np.random.default_rng(7)
