import numpy as np
import pytest

from curvedqgt import geometry as geo
from curvedqgt import models


@pytest.fixture(scope="session")
def anharmonic():
    return models.get_model("anharmonic-1d")


@pytest.fixture(scope="session")
def morse():
    return models.get_model("morse-like")


@pytest.fixture(scope="session")
def coupled():
    return models.get_model("coupled-anharmonic-2d")


@pytest.fixture(scope="session")
def generalized():
    return models.get_model("generalized-anharmonic")


@pytest.fixture(scope="session")
def flat():
    return models.get_model("flat-oscillator-1d")


@pytest.fixture(scope="session")
def all_models(anharmonic, morse, coupled, generalized):
    return [anharmonic, morse, coupled, generalized]


def make_engine(model, lam, cfg=None):
    lamv = np.asarray(lam, dtype=float)
    return geo.GeometryEngine(
        model.psi, model.metric, model.domain_for(lamv), cfg,
        in_domain=model.in_domain,
    )


@pytest.fixture(scope="session")
def engine_factory():
    cache = {}

    def factory(model, lam, cfg=None):
        key = (model.name, model.hbar, tuple(np.asarray(lam, dtype=float)),
               id(cfg))
        if key not in cache:
            cache[key] = make_engine(model, lam, cfg)
        return cache[key]

    return factory
