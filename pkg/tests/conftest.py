import numpy as np
import pytest

import msgarch as mg


def random_two_regime(r: np.random.Generator, beta_floor: float = 0.0) -> mg.ModelParams:
    mu = r.uniform(-0.3, 0.3, 2)
    ga = r.uniform(0.1, 1.0, 2)
    al = r.uniform(0.0, 0.5, 2)
    be = r.uniform(beta_floor, 0.6, 2)
    p11, p22 = r.uniform(0.55, 0.95, 2)
    trans = np.array([[p11, 1 - p22], [1 - p11, p22]])
    return mg.make_params(mu, ga, al, be, trans)


def exactness_regime(r: np.random.Generator) -> mg.ModelParams:
    """beta = 0 with a common mean: path dependence vanishes, filter is exact."""
    mu = float(r.uniform(-0.2, 0.2))
    ga = r.uniform(0.1, 1.5, 2)
    al = r.uniform(0.05, 0.5, 2)
    p11, p22 = r.uniform(0.6, 0.95, 2)
    trans = np.array([[p11, 1 - p22], [1 - p11, p22]])
    return mg.make_params([mu, mu], ga, al, [0.0, 0.0], trans)


def exact_path_posterior(y, theta, init):
    from msgarch.model import enumerate_path_logdensities
    paths, ll = enumerate_path_logdensities(y, theta, init)
    return paths, np.exp(ll - np.logaddexp.reduce(ll))


def path_id(reg: np.ndarray) -> int:
    out = 0
    for t, v in enumerate(reg):
        out += int(v) << t
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
