"""Desk-scale renormalization-group flow engine for the Gross-Neveu model.

Exact Grassmann/Berezin computations on finite mode sets serve as the oracle
for the continuum coupling flow (Polchinski equation in local truncation),
with the full analytic toolbox -- propagator scale decomposition, weights and
norms, localization/remainder operators, fixed-point map -- as testable
numeric components.
"""

__version__ = "0.1.0"
