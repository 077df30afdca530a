"""
Numerical constants for the energyforge pipeline.
"""

import math

# Integrator
DEFAULT_INTEGRATOR_TOL = 1e-9
DEFAULT_MAX_STEP = 0.05
MIN_STEP = 1e-12
# Step-size controller: safety factor and growth/shrink limits per step
STEP_SAFETY = 0.9
STEP_GROW_MAX = 4.0
STEP_SHRINK_MIN = 0.1

# Event location
EVENT_TIME_TOL = 1e-8
HIT_T_MAX = 100.0

# Manifolds
CHART_ROUNDTRIP_TOL = 1e-10
CHART_ROUNDTRIP_SAMPLES = 64
TRAPPING_SAMPLES = 360
# Sphere charts: a point stays in its chart while |u| <= SPHERE_SWITCH_RADIUS
SPHERE_SWITCH_RADIUS = 1.2
# Sphere charts own the closed unit disk; grids extend to SPHERE_GRID_HALF_WIDTH
SPHERE_HOME_RADIUS = 1.0
SPHERE_GRID_HALF_WIDTH = 1.25
# Declared overlap annulus of the two stereographic charts
SPHERE_OVERLAP = (0.5, 2.0)
FIELD_CONSISTENCY_TOL = 1e-6

# Chain recurrence
DEFAULT_TAU = 1.0
DEFAULT_SAMPLES_PER_BOX = 5
DEFAULT_COVER_RESOLUTION = {1: 256, 2: 32}
ORACLE_MAX_NODES = 400

# Fixed points
FIXED_POINT_TOL = 1e-10
DUPLICATE_TOL = 1e-6
HYPERBOLICITY_TOL = 1e-3
JACOBIAN_STEP = 1e-6
REMAINDER_FRACTION = 0.1
REMAINDER_SAMPLES = 64
# r_p never exceeds this share of the distance to the nearest other fixed point
CHART_SEPARATION_SHARE = 0.45
BRANCH_OFFSET = 1e-4
BRANCH_ARRIVAL_TOL = 1e-3
TRACE_T_MAX = 100.0

# Smale order
RELATION_RADIUS_FACTOR = 2.0

# Energy construction
DEFAULT_GRID = 256
MIN_GRID = 32
LEVEL_STEP = 1.0 / 3.0
# Saddle collar |x_s|^2 <= D_RADIUS_SQ on the lower level set
D_RADIUS_SQ = 0.25
# Local charts are valid for |x| <= CHART_BALL in scaled chart coordinates
CHART_BALL = 1.0
MAX_RESCALES = 20
PSI_SAMPLES = 64
PSI_CONSTANCY_TOL = 1e-4
SCAFFOLD_SAMPLES = 64
FLAGGED_NODE_SHARE = 1e-3
NODE_CHUNK = 4096

# Closed form of the level profile along the model saddle
MODEL_T2 = math.log(7.0 / 3.0, 4.0)

# Verification
MONOTONE_ABS_TOL = 1e-6
MONOTONE_GRADIENT_FACTOR = 2.0
# phi must drop by more than MONOTONE_ABS_TOL + this * h^2 |grad phi| over the longest horizon
MONOTONE_STRICT_FACTOR = 1.0
MONOTONE_HORIZONS = (0.1, 0.5, 1.0)
FIT_RADIUS_CELLS = 5
FIT_RESIDUAL_TOL = 1e-3
GRADIENT_FLOOR_SHARE = 0.05
GRADIENT_FAILURE_SHARE = 5e-3
DECOMPOSITION_T_MAX = 100.0
DECOMPOSITION_FAILURE_SHARE = 1e-3
FIXED_POINT_EXCLUSION_CELLS = 3
# fixed-point fits need at least this many nodes per fitted coefficient
FIT_NODES_PER_TERM = 2
# orbits count as converged within CONVERGENCE_CELLS grid steps of a fixed point
CONVERGENCE_CELLS = 2
DEFAULT_MONOTONE_SAMPLES = 1000
DEFAULT_ORACLE_PAIRS = 10000
# standard deviation of the noise added by the perturbed-grid self-test
SELF_TEST_NOISE = 0.05
MAX_REPORTED_PROBLEMS = 20

# Euler characteristics of the supported closed manifolds
EULER_CHARACTERISTIC = {"circle": 0, "torus": 0, "sphere": 2, "plane-disk": 1}
