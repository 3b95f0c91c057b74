"""Simulation harness: planted worlds with known answers.

``scenario`` describes cohorts of probes, ``generate`` materializes a
dataset plus its ground-truth sidecar, ``oracle`` recomputes aggregate
statistics independently, and ``mockdns`` serves resolver personalities
over real UDP for the live query path.
"""

from .scenario import Cohort, Scenario, ScenarioError, parse_scenario
from .generate import (
    ACCEPTANCE_TEMPLATE,
    GroundTruth,
    ProbeTruth,
    SIM_ROUNDS,
    SIM_TARGETS,
    SimResult,
    acceptance_scenarios,
    generate,
    truth_to_doc,
)
from .oracle import compare, embedded_address, oracle_stats
from .mockdns import Dns64Server

__all__ = [
    "ACCEPTANCE_TEMPLATE",
    "Cohort",
    "Dns64Server",
    "GroundTruth",
    "ProbeTruth",
    "SIM_ROUNDS",
    "SIM_TARGETS",
    "Scenario",
    "ScenarioError",
    "SimResult",
    "acceptance_scenarios",
    "compare",
    "embedded_address",
    "generate",
    "oracle_stats",
    "parse_scenario",
    "truth_to_doc",
]
