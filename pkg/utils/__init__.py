"""Utility modules for the relay beamforming solver."""

from .logger import get_logger, set_global_level

__all__ = ['get_logger', 'set_global_level']
