import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate
from scipy.special import xlogy

from stratent.densities import Polynomial, TruncatedExponential, Uniform, make_density
from stratent.errors import ConfigError, ContractError
from stratent.gmt_core import ParamDomain


def _quad_entropy(pdf, a, b):
    return sp_integrate.quad(lambda t: -xlogy(pdf(t), pdf(t)), a, b, epsabs=1e-13, limit=200)[0]


@settings(max_examples=30, deadline=None)
@given(st.floats(-4, 4), st.floats(0.2, 3.0))
def test_truncated_exponential_closed_forms(rate, width):
    dom = ParamDomain([[1.0, 1.0 + width]])
    dens = TruncatedExponential(dom, rate)
    pdf = lambda t: dens.pdf(np.array([[t]]))[0]
    assert sp_integrate.quad(pdf, 1.0, 1.0 + width)[0] == pytest.approx(1.0, abs=1e-9)
    assert dens.entropy() == pytest.approx(_quad_entropy(pdf, 1.0, 1.0 + width), abs=1e-8)


def test_truncated_exponential_sampling_matches_cdf():
    dom = ParamDomain([[0.0, 2.0]])
    dens = TruncatedExponential(dom, 1.3)
    x = dens.sample(np.random.default_rng(0), 200_000)[:, 0]
    t = np.linspace(0, 2, 2001)
    mean = np.trapezoid(t * dens.pdf(t[:, None]), t)
    assert abs(x.mean() - mean) < 5 * x.std() / np.sqrt(len(x))
    assert x.min() >= 0 and x.max() <= 2


def test_polynomial_density_normalized_and_sampled():
    dom = ParamDomain([[0.0, 1.0], [0.0, 2.0]])
    dens = Polynomial(dom, [[0.5, 1.0], [0.0, 0.0, 3.0]])
    assert dens.check_normalization() == pytest.approx(1.0, abs=1e-9)
    x = dens.sample(np.random.default_rng(1), 100_000)
    # second factor is proportional to t^2 on [0, 2]: mean 3/2
    assert abs(x[:, 1].mean() - 1.5) < 5 * x[:, 1].std() / np.sqrt(len(x))
    p1 = lambda t: (0.5 + t) / 1.0
    p2 = lambda t: 3 * t * t / 8
    expected = _quad_entropy(p1, 0, 1) + _quad_entropy(p2, 0, 2)
    assert dens.entropy() == pytest.approx(expected, abs=1e-8)


def test_polynomial_negative_rejected():
    with pytest.raises(ContractError):
        Polynomial(ParamDomain([[0.0, 1.0]]), [1.0, -3.0])


def test_uniform_on_restricted_domain():
    disk = ParamDomain([[-1, 1], [-1, 1]], membership=lambda x: np.sum(x ** 2, axis=1) <= 1)
    dens = Uniform(disk)
    assert dens.volume == pytest.approx(np.pi, rel=5e-3)
    assert dens.pdf(np.array([[0.9, 0.9]]))[0] == 0.0
    x = dens.sample(np.random.default_rng(0), 1000)
    assert np.all(np.sum(x ** 2, axis=1) <= 1)


def test_make_density_errors():
    dom = ParamDomain([[0.0, 1.0]])
    with pytest.raises(ConfigError, match="unknown density family"):
        make_density("gamma", dom)
    with pytest.raises(ConfigError, match="unknown parameter"):
        make_density("uniform", dom, rate=1.0)
    with pytest.raises(ConfigError):
        make_density("truncated-exponential", ParamDomain.point(), rate=1.0)
    assert make_density("truncated-exponential", dom, rate=0.0).entropy() == pytest.approx(0.0)
