"""
Shipped flow specs and the catalog vector fields they refer to.

Every catalog field has rate +-ln 2 at each of its fixed points, so near a
fixed point of index k it agrees to first order with the linear model flow
that doubles k coordinates and halves the others per unit time.
"""

from __future__ import annotations

import math
from pathlib import Path

CATALOG_DIR = Path(__file__).resolve().parent

LN2 = math.log(2.0)

CATALOG_FIELDS = {
    # source at x = 0, sink at x = 1/2
    "circle_two_points": {
        "manifold": "circle",
        "expressions": {"main": ["a*sin(2*pi*x)"]},
        "parameters": {"a": LN2 / (2.0 * math.pi)},
    },
    # minus the gradient of (a / 2 pi)(cos 2 pi x + cos 2 pi y): source (0, 0),
    # saddles (0, 1/2) and (1/2, 0), sink (1/2, 1/2)
    "torus_height_gradient": {
        "manifold": "torus",
        "expressions": {"main": ["a*sin(2*pi*x)", "a*sin(2*pi*y)"]},
        "parameters": {"a": LN2 / (2.0 * math.pi)},
    },
    # sink at the south pole, source at the north pole
    "sphere_north_south": {
        "manifold": "sphere",
        "expressions": {"south": ["-a*x", "-a*y"], "north": ["a*x", "a*y"]},
        "parameters": {"a": LN2},
    },
    "planar_saddle": {
        "manifold": "plane-disk",
        "expressions": {"main": ["a*x", "-a*y"]},
        "parameters": {"a": LN2},
    },
    # weak focus: linear part is a rotation, so the origin is not hyperbolic
    "planar_center": {
        "manifold": "plane-disk",
        "expressions": {"main": ["-y - x*(x^2 + y^2)^2", "x - y*(x^2 + y^2)^2"]},
        "parameters": {},
    },
}


def catalog_names() -> list[str]:
    return sorted(p.stem for p in CATALOG_DIR.glob("*.yaml"))


def resolve_spec(spec: str | Path) -> Path:
    """Map a spec argument to a file: an existing path, or a shipped catalog name."""
    path = Path(spec).expanduser()
    if path.exists():
        return path
    candidate = CATALOG_DIR / f"{spec}.yaml"
    if candidate.exists():
        return candidate
    return path
