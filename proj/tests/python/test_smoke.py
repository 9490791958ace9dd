import math

import pytest

import emachine as em


def test_similarity_kinds():
    assert em.similarity([1, 0, 2], [1, 0, 2], "scalar") == 5.0
    assert em.similarity([1, 0, 2], [1, 3, 1], "ratio") == 0.5
    assert em.correct_decoding([[1, 0], [0, 1]])


def test_field_learns_and_recalls():
    f = em.AssociativeField(seed=3)
    f.teach([1, 0], [0, 1])
    f.teach([0, 1], [1, 0])
    assert len(f) == 2
    assert f.cycle([1, 0]) == [0, 1]
    assert f.cycle([0, 1]) == [1, 0]


def test_empty_field_outputs_null():
    assert em.AssociativeField().cycle([1, 0]) is None


def test_wta_picks_largest_input():
    winner, settle = em.run_wta([0.2, 1.0, 0.5], seed=1)
    assert winner == 1
    assert settle > 0.0


def test_ghk_vanishes_at_nernst():
    c_in, c_out = 0.14, 0.005
    e = 8.3144 * 300.0 / 9.6484e4 * math.log(c_out / c_in)
    assert abs(em.ghk_current(e, 1e-6, c_in=c_in, c_out=c_out)) < 1e-12


TWO_STATE = {
    "states": 2,
    "rates": [
        {"from": 0, "to": 1, "kind": "const", "params": {"value": 2.0}},
        {"from": 1, "to": 0, "kind": "const", "params": {"value": 1.0}},
    ],
    "omega": {"table": [0.0, 1.0]},
}


def test_master_step_conserves_probability():
    spec = em.spec_from_dict(TWO_STATE)
    p = [1.0, 0.0]
    for _ in range(100):
        p = spec.master_step(p, [0.0], 0.01)
    assert sum(p) == pytest.approx(1.0, abs=1e-12)
    assert p[1] == pytest.approx(2.0 / 3.0 * (1.0 - math.exp(-3.0)), rel=1e-6)


def test_ensemble_is_seeded():
    spec = em.spec_from_dict(TWO_STATE)
    a = em.simulate_ensemble(spec, 500, [0.0], 0.01, 50, seed=5)
    b = em.simulate_ensemble(spec, 500, [0.0], 0.01, 50, seed=5)
    assert a == b
    assert all(sum(row) == 500 for row in a)


def test_robot_exams_agree():
    brain = em.Brain(seed=2)
    brain.train(["", "()", "(())", ")(", "(()", "()()"])
    real = brain.exam_real("()()")
    mental = brain.exam_mental("()()")
    assert real["verdict"] == "Y"
    assert mental["commands"] == real["commands"]
    restored = em.Brain.from_json(brain.to_json())
    assert restored.exam_real("()()")["commands"] == real["commands"]


def test_config_errors_are_reported():
    with pytest.raises(em.EmachineError, match="configuration error: similarity"):
        em.similarity([1, 0], [1], "ratio")


def test_verify_suite():
    report = em.verify("af-universality", seed=1)
    assert [r["pass"] for r in report["criteria"]] == [True]
