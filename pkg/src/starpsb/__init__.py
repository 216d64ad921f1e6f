"""starpsb: penalty-based secrecy beamforming for coupled phase-shift STAR-RIS networks."""

__version__ = "0.1.0"
