import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from retrial_osa import RetrialSpectrumModel
from retrial_osa.model import ParameterError


def test_get_set_params_round_trip():
    model = RetrialSpectrumModel(M=3, N=2, L=5)
    params = model.get_params()
    assert params["M"] == 3 and params["lambda_s"] == 1.5 and params["solver"] == "direct"
    model.set_params(theta=4.0)
    assert model.theta == 4.0
    assert clone(model).get_params() == model.get_params()


def test_fit_populates_attributes():
    model = RetrialSpectrumModel(M=1, N=1, L=0, solver="both").fit()
    np.testing.assert_allclose(model.stationary_.probabilities, [1 / 6, 1 / 2, 1 / 3], atol=1e-12)
    assert model.solver_disagreement_ < 1e-12
    assert model.metrics_.p_drop_exact == pytest.approx(13 / 15, abs=1e-12)
    assert model.probability((1, 0, 0)) == pytest.approx(1 / 3, abs=1e-12)
    assert len(model.state_space_) == model.generator_.dim == 3


def test_unfitted_access_raises():
    with pytest.raises(NotFittedError):
        RetrialSpectrumModel().probability((0, 0, 0))


def test_validation_happens_at_fit():
    model = RetrialSpectrumModel(M=0)
    with pytest.raises(ParameterError):
        model.fit()
    with pytest.raises(ValueError):
        RetrialSpectrumModel(solver="power").fit()


def test_ldqbd_only_solver():
    model = RetrialSpectrumModel(M=2, N=2, L=3, solver="ldqbd").fit()
    assert model.stationary_.method.value == "ldqbd"
    assert model.residual_ < 1e-12


def test_predict_over_parameter_points():
    model = RetrialSpectrumModel(M=2, N=2, L=10)
    points = [{"lambda_p": v} for v in (0.1, 0.3, 0.5)]
    drops = model.predict(points)
    assert drops.shape == (3,) and np.all(np.diff(drops) > 0)
    assert drops[0] == pytest.approx(RetrialSpectrumModel(M=2, N=2, L=10).fit().metrics_.p_drop_exact)
    assert model.get_params()["lambda_p"] == 0.1


def test_simulate_shortcut():
    est = RetrialSpectrumModel(M=1, N=1, L=0).simulate(horizon=2e3, replications=5, seed=1)
    assert est.replications == 5
