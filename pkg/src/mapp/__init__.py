"""Movable-antenna secure-communication lab.

Scenario synthesis, PSO placement labeling, placement-forecasting models,
and secrecy-centric evaluation with a `mapp` command line front end.
"""

__version__ = "0.1.0"
