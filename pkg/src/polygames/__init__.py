"""Kernelized no-regret learning over combinatorial action sets.

Exact multiplicative-weights sampling, moments and loss estimation for
exponentially large polyhedral action families (Colonel Blotto allocations,
spanning trees, DAG s-t paths, m-sets) in full-information, semi-bandit and
bandit feedback, plus multi-player repeated-game simulation.
"""

__version__ = "0.1.0"
