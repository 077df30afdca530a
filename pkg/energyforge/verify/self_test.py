"""
Mutation self-test of the checker: each mutated input must trip its check.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from energyforge import constants
from energyforge.energy_builder.field import EnergyField
from energyforge.manifold_flow.system import FlowSystem
from energyforge.smale_order.order import OrderedSpectrum
from energyforge.utils import logger
from energyforge.verify.checks import CheckSection, check_closure, check_critical_structure, check_monotone


def reversed_order(spectrum: OrderedSpectrum) -> OrderedSpectrum:
    return replace(spectrum, order=tuple(reversed(spectrum.order)))


def perturbed_field(field: EnergyField, seed: int, noise: float = constants.SELF_TEST_NOISE) -> EnergyField:
    rng = np.random.default_rng(seed + 3)
    return replace(field, values=field.values + noise * rng.standard_normal(field.values.shape))


def self_test(
    field: EnergyField,
    system: FlowSystem,
    spectrum: OrderedSpectrum,
    seed: int = 0,
    n_samples: int = constants.DEFAULT_MONOTONE_SAMPLES,
    workers: int = 1,
) -> CheckSection:
    ordered = spectrum.ordered
    triggered = {}

    # phi increases along the reversed flow
    monotone = check_monotone(field, system.reversed(), ordered, n_samples=n_samples, seed=seed, workers=workers)
    triggered["time_reversed"] = {
        "check": "monotone",
        "triggered": not monotone.passed,
        "violations": monotone.results["violations"],
    }

    shuffled = check_closure(reversed_order(spectrum))
    triggered["reversed_order"] = {
        "check": "decomposition",
        "triggered": bool(shuffled),
        "closure_violations": len(shuffled),
    }

    critical = check_critical_structure(perturbed_field(field, seed), ordered, n_samples=n_samples, seed=seed)
    triggered["perturbed_grid"] = {
        "check": "critical_structure",
        "triggered": not critical.passed,
        "failed_fits": sum(1 for f in critical.results["fixed_points"] if not f["passed"]),
    }

    missed = [name for name, entry in triggered.items() if not entry["triggered"]]
    for name in missed:
        logger.warning(f"Self-test: mutation '{name}' did not trip the {triggered[name]['check']} check")
    return CheckSection(
        name="self_test",
        passed=not missed,
        thresholds={"noise": constants.SELF_TEST_NOISE},
        results=triggered,
        problems=[f"mutation '{name}' went undetected" for name in missed],
    )
