import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rexcessive import (BoundaryClassifier, ExcessiveFunctionEstimator, MartingaleClassifier, catalog,
                        derive_scale_speed)


def test_params_round_trip():
    est = ExcessiveFunctionEstimator(rate=2.0, direction="phi", n_nodes=500)
    assert est.get_params() == {"rate": 2.0, "direction": "phi", "n_nodes": 500}
    est.set_params(rate=0.3)
    twin = clone(est)
    assert twin.get_params()["rate"] == 0.3 and twin is not est
    assert MartingaleClassifier().get_params() == {"rates": (0.5, 1.0), "strict": True}
    assert BoundaryClassifier(x_ref=2.0).get_params() == {"x_ref": 2.0}


@pytest.mark.parametrize("est,method", [
    (ExcessiveFunctionEstimator(), "transform"),
    (BoundaryClassifier(), "predict"),
    (MartingaleClassifier(), "predict"),
])
def test_not_fitted(est, method):
    with pytest.raises(NotFittedError):
        getattr(est, method)([[1.0]] if method == "transform" else ["alpha"])


def test_excessive_transform_gbm():
    # psi = x^gamma_+ for GBM with mu = 0.1, sigma = 0.3 at r = 1
    mu, sig, r = 0.1, 0.3, 1.0
    b = mu / sig**2 - 0.5
    g = -b + math.sqrt(b * b + 2 * r / sig**2)
    est = ExcessiveFunctionEstimator(rate=r).fit(catalog("gbm", {"mu": mu, "sigma": sig}))
    x = np.array([[0.5], [1.0], [3.0]])
    out = est.transform(x)
    assert out.shape == (3, 1)
    np.testing.assert_allclose(out[:, 0], x[:, 0] ** g, rtol=1e-8)


def test_excessive_accepts_scale_speed_and_1d():
    ss = derive_scale_speed(catalog("bessel", {"delta": 3}))
    est = ExcessiveFunctionEstimator(rate=0.5, direction="decreasing").fit(ss)
    v = est.transform([2.0])
    assert v[0, 0] == pytest.approx(math.exp(-1.0) / 2.0, rel=1e-8)
    d = est.scale_derivative([2.0])
    assert d[0, 0] == pytest.approx(-math.exp(-1.0) * 3.0, rel=1e-6)


def test_excessive_rejects_bad_input():
    est = ExcessiveFunctionEstimator(rate=0.5).fit(catalog("brownian"))
    with pytest.raises(ValueError):
        est.transform([[math.nan]])
    with pytest.raises(ValueError):
        ExcessiveFunctionEstimator(rate=-1).fit(catalog("brownian"))
    with pytest.raises(TypeError):
        ExcessiveFunctionEstimator().fit(np.zeros((3, 1)))


def test_boundary_classifier():
    clf = BoundaryClassifier().fit(catalog("cir", {"kappa": 1, "theta": 1, "sigma": 2}))
    assert list(clf.predict(["alpha", "beta"])) == ["Accessible", "InaccessibleNatural"]
    assert "InaccessibleEntrance" in clf.classes_
    with pytest.raises(ValueError):
        clf.predict(["gamma"])


def test_martingale_classifier_bessel():
    clf = MartingaleClassifier(rates=[0.5]).fit(catalog("bessel", {"delta": 3}))
    out = clf.predict([[0.5], [3.0]])
    assert out.shape == (2, 2)
    assert list(out[0]) == ["Martingale", "StrictLocalMartingale"]
    assert clf.kotani_ == "Submartingale"
    with pytest.raises(ValueError):
        clf.predict([[0.0]])


def test_martingale_classifier_degenerate_at_absorbing_end():
    clf = MartingaleClassifier().fit(catalog("cir", {"kappa": 1, "theta": 1, "sigma": 2}))
    out = clf.predict([[0.0], [1.0]])
    assert out[0, 0] == "DegenerateZero"
    assert out[1, 0] == "Martingale"
    assert out[0, 1] == out[1, 1] == "Martingale"
