"""Penalty-based secrecy beamforming and its building blocks."""

from starpsb.optimizer.beamforming import optimize_beamforming
from starpsb.optimizer.psb import PsbResult, active_secrecy, run_psb

__all__ = ["PsbResult", "active_secrecy", "optimize_beamforming", "run_psb"]
