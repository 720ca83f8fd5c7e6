import numpy as np
import pytest
from conftest import random_full_rank
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from metastab.estimator import FEATURES, MetastabilityFeatures
from metastab.pauli import assemble_dense, zz_x


def test_fit_transform_shapes():
    est = MetastabilityFeatures(beta=1.0).fit(zz_x(2))
    rng = np.random.default_rng(0)
    states = np.stack([random_full_rank(4, rng) for _ in range(2)])
    out = est.transform(states)
    assert out.shape == (2, len(FEATURES))
    eps, ep, fi, adb, rel = out.T
    assert np.all(eps > 0) and np.all(rel > 0) and np.all(adb >= 0)
    assert np.allclose(ep, fi, rtol=1e-4)
    assert est.n_qubits_ == 2 and len(est.jump_labels_) == 6
    assert list(est.get_feature_names_out()) == list(FEATURES)


def test_gibbs_state_has_zero_features():
    est = MetastabilityFeatures(beta=0.5, region=[1]).fit("zz_x")
    out = est.transform(est.gibbs_)
    assert out.shape == (1, 5)
    assert np.abs(out).max() <= 1e-9
    assert est.jump_labels_ == ["IX", "IY", "IZ"]


def test_accepts_matrix_and_dict():
    H = assemble_dense(zz_x(2))
    a = MetastabilityFeatures().fit(H)
    b = MetastabilityFeatures().fit({"preset": "zz_x", "n": 2})
    assert np.allclose(a.gibbs_, b.gibbs_)


def test_clone_and_params():
    est = MetastabilityFeatures(beta=2.0, sigma=0.3, region=[0])
    c = clone(est)
    assert c.get_params() == est.get_params()
    assert not hasattr(c, "lindbladian_")
    c.set_params(beta=1.0)
    assert c.beta == 1.0


def test_errors():
    est = MetastabilityFeatures()
    with pytest.raises(NotFittedError):
        est.transform(np.eye(4) / 4)
    est.fit(zz_x(2))
    with pytest.raises(ValueError):
        est.transform(np.eye(8) / 8)
    with pytest.raises(ValueError):
        est.transform(np.diag([1.0, 1.0, 0.0, 0.0]))
