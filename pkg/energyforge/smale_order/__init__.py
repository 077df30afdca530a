from energyforge.smale_order.order import (
    OrderedSpectrum,
    SmaleRelation,
    compute_relation,
    geometric_gap,
    kind_positions,
    linear_extension,
    order_fixed_points,
)

__all__ = [
    "OrderedSpectrum",
    "SmaleRelation",
    "compute_relation",
    "geometric_gap",
    "kind_positions",
    "linear_extension",
    "order_fixed_points",
]
