from energyforge.verify.checks import (
    CheckSection,
    check_closure,
    check_critical_structure,
    check_decomposition,
    check_euler,
    check_monotone,
    cross_check_oracle,
    sample_points,
)
from energyforge.verify.report import MorseCheckReport, run_checks
from energyforge.verify.self_test import self_test

__all__ = [
    "CheckSection",
    "MorseCheckReport",
    "check_closure",
    "check_critical_structure",
    "check_decomposition",
    "check_euler",
    "check_monotone",
    "cross_check_oracle",
    "run_checks",
    "sample_points",
    "self_test",
]
