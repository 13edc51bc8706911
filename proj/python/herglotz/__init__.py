"""Hybrid simulation of dissipative contact systems with impacts.

States are packed as ``[q, v, z]`` with ``v`` the velocity (Lagrangian
systems) or the momentum (Hamiltonian systems).
"""

from ._herglotz import (
    HerglotzError,
    HybridSystem,
    ImpactEvent,
    Trajectory,
    check_energy_decay,
    check_impacts,
    circular_billiard,
    circular_impact,
    elliptical_billiard,
    elliptical_impact,
    free_particle,
    resolve_impact,
    run_cli,
    simulate,
)

__all__ = [
    "HerglotzError",
    "HybridSystem",
    "ImpactEvent",
    "Trajectory",
    "check_energy_decay",
    "check_impacts",
    "circular_billiard",
    "circular_impact",
    "elliptical_billiard",
    "elliptical_impact",
    "free_particle",
    "resolve_impact",
    "run_cli",
    "simulate",
]
