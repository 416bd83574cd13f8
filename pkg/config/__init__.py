"""Configuration management for the relay beamforming solver."""

from .settings import Settings, SolverConfig

__all__ = ['Settings', 'SolverConfig']
