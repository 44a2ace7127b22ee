import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from nsgfb.estimators import GraphDenoiser, GraphFilterBank
from nsgfb.exceptions import DimensionMismatch
from nsgfb.pipelines import DenoiseConfig, denoise


@pytest.mark.parametrize("synthesis", ["bezout", "lifted-bezout", "least-squares"])
def test_filter_bank_roundtrip(rgg64, rng, synthesis):
    X = rng.standard_normal((5, 64))
    est = GraphFilterBank(rgg64, order=2, synthesis=synthesis).fit(X)
    Z = est.transform(X)
    assert Z.shape == (5, 128)
    assert np.abs(est.inverse_transform(Z) - X).max() < 1e-9


def test_filter_bank_checks(rgg64, rng):
    est = GraphFilterBank(rgg64)
    with pytest.raises(NotFittedError):
        est.transform(np.zeros((1, 64)))
    est.fit()
    with pytest.raises(DimensionMismatch):
        est.transform(np.zeros((1, 10)))
    with pytest.raises(DimensionMismatch):
        est.inverse_transform(np.zeros((1, 64)))
    with pytest.raises(ValueError):
        GraphFilterBank().fit()
    with pytest.raises(ValueError):
        GraphFilterBank(rgg64, synthesis="magic").fit()


def test_filter_bank_params(rgg64):
    est = GraphFilterBank(rgg64, order=3)
    assert est.get_params()["order"] == 3
    assert clone(est).order == 3


def test_denoiser_matches_function(rgg64, rng):
    X = rng.standard_normal((3, 64))
    est = GraphDenoiser(rgg64, bank="L", eta=0.1).fit()
    assert est.tau_ == pytest.approx(0.3)
    out = est.transform(X)
    for row, y in zip(X, out):
        assert np.allclose(y, denoise(rgg64, DenoiseConfig("L", 1, 0.3), row))


def test_denoiser_checks(rgg64):
    with pytest.raises(ValueError):
        GraphDenoiser(rgg64).fit()
    est = GraphDenoiser(rgg64, tau=0.1).fit()
    with pytest.raises(DimensionMismatch):
        est.transform(np.zeros((1, 3)))
