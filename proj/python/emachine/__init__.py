"""E-machine simulations: associative fields, tape robot, protein-molecule machines."""

import json

from ._emachine import (
    AssociativeField,
    Brain,
    EmachineError,
    PmmSpec,
    closed_form_u,
    correct_decoding,
    ghk_current,
    run_wta,
    similarity,
    simulate_ensemble,
    suite_names,
    teacher_episode,
)
from ._emachine import verify as _verify

__all__ = [
    "AssociativeField",
    "Brain",
    "EmachineError",
    "PmmSpec",
    "closed_form_u",
    "correct_decoding",
    "ghk_current",
    "run_wta",
    "similarity",
    "simulate_ensemble",
    "spec_from_dict",
    "suite_names",
    "teacher_episode",
    "verify",
]


def spec_from_dict(spec):
    """Builds a PmmSpec from the same structure the JSON configs use."""
    return PmmSpec.from_json(json.dumps(spec))


def verify(suite, seed=1):
    """Runs an acceptance suite and returns the parsed report."""
    return json.loads(_verify(suite, seed))
