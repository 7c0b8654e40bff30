import math

import numpy as np
import pytest

import wml


def test_dyadic_space():
    s = wml.FilteredSpace.dyadic(3)
    assert s.depth == 3
    assert s.num_leaves == 8
    assert sum(s.leaf_probs()) == pytest.approx(1.0)
    back = wml.FilteredSpace.from_json(s.to_json())
    assert back.num_leaves == 8


def test_conditional_expectation_and_square_function():
    s = wml.FilteredSpace.dyadic(2)
    f = np.array([1.0, 0.0, 0.0, 0.0])
    assert wml.cond_expect(s, f, 1) == pytest.approx([0.5, 0.5, 0.0, 0.0])
    sq = wml.square_function(s, f)
    assert sq[0] == pytest.approx(math.sqrt(5) / 4)
    assert sq[2] == pytest.approx(0.25)


def test_weighted_square_function_identity_weight():
    s = wml.FilteredSpace.dyadic(3)
    rng = np.random.default_rng(1)
    f = rng.normal(size=(8, 2))
    w = np.broadcast_to(np.eye(2), (8, 2, 2)).copy()
    plain = wml.weighted_square_function(s, w, f, 3.0)
    norms = np.sqrt(sum(wml.square_function(s, f[:, i]) ** 2 for i in range(2)))
    assert plain == pytest.approx(norms, abs=1e-12)


def test_ap_characteristic_two_atoms():
    s = wml.FilteredSpace.dyadic(1)
    assert wml.ap_characteristic(s, np.array([4.0, 1.0]), 2.0) == pytest.approx(25 / 16)
    space, w = wml.power_weight(6, 0.0, 1 / 64)
    assert wml.ap_characteristic(space, np.array(w), 2.0) == pytest.approx(1.0)


def test_opnorm_estimators_agree():
    space, w = wml.power_weight(2, 1.0, 0.25)
    assert wml.opnorm_p2(space, w) == pytest.approx(wml.opnorm_p2(space, w, dense=True), abs=1e-6)
    g = wml.opnorm_general(space, np.array(w), 2.0, restarts=4)
    assert g <= wml.opnorm_p2(space, w) * (1 + 1e-9)
    assert g >= 0.98 * wml.opnorm_p2(space, w)


def test_rotating_weight_shape():
    space, w = wml.rotating_weight(4, 2, 1.0, 1 / 16)
    assert w.shape == (16, 2, 2)
    assert np.allclose(np.linalg.det(w), 1.0)
    assert wml.ap_characteristic(space, w, 2.0) > 1.0


def test_exponent_fit():
    ap = [2.0**i for i in range(6)]
    fit = wml.exponent_fit(ap, [3 * a for a in ap])
    assert fit["slope"] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        wml.exponent_fit([1.0, 2.0], [1.0, 2.0])


def test_small_suite():
    out = wml.run_suite(seed=3, count=5)
    assert out["instances"] == 5
    names = {line["name"] for line in out["lines"]}
    assert {"properties", "domination", "duality", "holder"} <= names
    bad = wml.run_suite(seed=3, count=5, cgamma=0.1)
    assert not bad["pass"]


def test_constants():
    assert wml.default_cgamma() == pytest.approx(8 * math.sqrt(math.e))
    assert wml.k_domination(wml.default_cgamma()) < 23
    assert wml.scalar_target_exponent(2.0) == 1.0
    assert wml.matrix_target_exponent(3.0) == pytest.approx(2 / 3)


def test_bad_shapes_raise():
    s = wml.FilteredSpace.dyadic(2)
    with pytest.raises(ValueError):
        wml.square_function(s, np.zeros(3))
    with pytest.raises(ValueError):
        wml.ap_characteristic(s, np.ones((4, 2, 3)), 2.0)
