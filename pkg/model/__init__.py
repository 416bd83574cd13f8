"""Physical model, rank-2 reduction and the reduced quadratic forms."""

from .physical import PhysicalProblem, relay_power, sinr, constraint_margin, random_channels
from .reduction import ReducedProblem, reduce, lift
from .quadforms import Tau, taus

__all__ = [
    'PhysicalProblem', 'relay_power', 'sinr', 'constraint_margin', 'random_channels',
    'ReducedProblem', 'reduce', 'lift', 'Tau', 'taus',
]
