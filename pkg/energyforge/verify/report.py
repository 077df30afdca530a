from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from energyforge import constants
from energyforge.chain_recurrence.analysis import ChainAnalysis
from energyforge.energy_builder.field import EnergyField
from energyforge.manifold_flow.system import FlowSystem
from energyforge.smale_order.order import OrderedSpectrum
from energyforge.utils import logger
from energyforge.verify.checks import (
    CheckSection,
    check_critical_structure,
    check_decomposition,
    check_euler,
    check_monotone,
    cross_check_oracle,
)


@dataclass(frozen=True)
class MorseCheckReport:
    seed: int
    grid: int
    sections: Sequence[CheckSection]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.sections)

    @property
    def failed(self) -> list:
        return [s.name for s in self.sections if not s.passed]

    def section(self, name: str) -> CheckSection:
        for s in self.sections:
            if s.name == name:
                return s
        raise KeyError(name)

    def describe(self) -> dict:
        return {
            "seed": self.seed,
            "grid": self.grid,
            "passed": self.passed,
            "checks": {s.name: s.describe() for s in self.sections},
        }


def run_checks(
    field: EnergyField,
    system: FlowSystem,
    spectrum: OrderedSpectrum,
    analysis: Optional[ChainAnalysis] = None,
    seed: int = 0,
    n_samples: int = constants.DEFAULT_MONOTONE_SAMPLES,
    n_pairs: int = constants.DEFAULT_ORACLE_PAIRS,
    decomposition: bool = True,
    workers: int = 1,
) -> MorseCheckReport:
    """Run every check on a built field; the oracle check needs the chain analysis."""
    ordered = spectrum.ordered
    sections = [
        check_monotone(field, system, ordered, n_samples=n_samples, seed=seed, workers=workers),
        check_critical_structure(field, ordered, n_samples=n_samples, seed=seed),
        check_euler(ordered, system.manifold),
    ]
    if decomposition:
        sections.append(check_decomposition(field, system, spectrum, workers=workers))
    if analysis is not None:
        sections.append(cross_check_oracle(field, system, analysis, ordered, n_pairs=n_pairs, seed=seed, workers=workers))
    report = MorseCheckReport(seed=seed, grid=field.grid.resolution, sections=tuple(sections))
    if report.passed:
        logger.info(f"All {len(sections)} checks passed")
    else:
        logger.warning(f"Failed checks: {', '.join(report.failed)}")
    return report
