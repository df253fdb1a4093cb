import numpy as np
import pytest
from sklearn.base import clone

from quarticdual.estimator import QuarticDualSolver, check_instance
from quarticdual.instgen import generate


def test_params_roundtrip():
    est = QuarticDualSolver(beta=0.3, max_iter=50)
    params = est.get_params()
    assert params["beta"] == 0.3 and params["max_iter"] == 50
    other = clone(est)
    assert other.get_params() == params
    est.set_params(epsilon=1e-6)
    assert est.epsilon == 1e-6


def test_fit_qp(qp_hand):
    est = QuarticDualSolver().fit(qp_hand)
    assert est.report_.converged
    assert est.lambda_ is None
    assert est.x_[0] == pytest.approx(-1.0, abs=1e-4)
    assert est.score(qp_hand) >= -1e-6
    assert abs(est.certificate_.gap) == -est.score(qp_hand)


def test_fit_qq():
    inst = generate(3, 10, "qq2", 2)
    est = QuarticDualSolver(keep_trace=True).fit(inst)
    assert est.report_.converged and est.lambda_ > 0
    assert len(est.report_.trace) == est.report_.iterations
    assert inst.q2(est.x_) <= 0


def test_fit_rejects_non_instances():
    with pytest.raises(TypeError):
        QuarticDualSolver().fit(np.eye(3))
    with pytest.raises(TypeError):
        check_instance([1, 2])
