"""Secrecy schemes compared in the studies."""

from starpsb.schemes.baselines import SchemeContext, combine_time_switched, requantize
from starpsb.schemes.registry import SchemeRegistry, SchemeRunner, parse_scheme

__all__ = [
    "SchemeContext",
    "SchemeRegistry",
    "SchemeRunner",
    "combine_time_switched",
    "parse_scheme",
    "requantize",
]
