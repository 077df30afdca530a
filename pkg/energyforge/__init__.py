"""Energy functions for gradient-like flows on 1- and 2-manifolds.

The pipeline: box-cover chain recurrence, fixed-point detection and
classification, the Smale order of the fixed points, an inductive
construction of a continuous Morse energy function, and numerical checks of
its properties.
"""

__version__ = "0.1.0"
