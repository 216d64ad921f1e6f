"""Achievable and secrecy rates for given beamformers and STAR-RIS coefficients.

Everything here uses the cascade form uᴴVᴴw. The `*_theta_form` functions
evaluate the same rates from the raw channels with an explicit Θ matrix and
exist to cross-check the cascade rewrite.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from starpsb.core.models import (
    EAVESDROPPERS,
    BeamformingSolution,
    CascadeSet,
    ChannelSet,
    SecrecyReport,
    Side,
    StarCoefficients,
    eavesdropper_surface,
)


def received_gain(V: np.ndarray, u: np.ndarray, w: np.ndarray) -> float:
    """|uᴴVᴴw|² for a vector beamformer."""
    return float(np.abs(np.vdot(u, V.conj().T @ w)) ** 2)


def received_power(V: np.ndarray, U: np.ndarray, W: np.ndarray) -> float:
    """Re Tr(W·V·U·Vᴴ), the lifted form of `received_gain`."""
    return float(np.real(np.trace(W @ V @ U @ V.conj().T)))


def _rate(signal: float, interference: float, sigma2: float) -> float:
    return float(np.log2(1.0 + signal / (interference + sigma2)))


def legit_rate(
    cascades: CascadeSet,
    coeffs: StarCoefficients,
    beams: BeamformingSolution,
    side: Side,
    sigma2: float,
) -> float:
    """Rate of the IU (side I, transmission) or OU (side O, reflection) stream."""
    V = cascades.legit(side)
    u = coeffs.u(side.surface)
    return _rate(
        received_gain(V, u, beams.w(side)),
        received_gain(V, u, beams.w(side.other)),
        sigma2,
    )


def eve_rate(
    cascades: CascadeSet,
    coeffs: StarCoefficients,
    beams: BeamformingSolution,
    k: int,
    target: Side,
    sigma2: float,
) -> float:
    """Rate at which eavesdropper E_k decodes the `target` stream."""
    V = cascades.eve(k)
    u = coeffs.u(eavesdropper_surface(k))
    return _rate(
        received_gain(V, u, beams.w(target)),
        received_gain(V, u, beams.w(target.other)),
        sigma2,
    )


def secrecy_report(
    cascades: CascadeSet,
    coeffs: StarCoefficients,
    beams: BeamformingSolution,
    sigma2: float,
) -> SecrecyReport:
    """All rates plus the clamped secrecy capacities.

    Ties in the worst eavesdropper resolve to E1.
    """
    return _assemble_report(
        lambda side: legit_rate(cascades, coeffs, beams, side, sigma2),
        lambda k, side: eve_rate(cascades, coeffs, beams, k, side, sigma2),
    )


def _assemble_report(
    legit: Callable[[Side], float], eve: Callable[[int, Side], float]
) -> SecrecyReport:
    values: dict[str, float | int] = {}
    secrecy: dict[Side, float] = {}
    for side in Side:
        legit_r = legit(side)
        eves = {k: eve(k, side) for k in EAVESDROPPERS}
        worst = 1 if eves[1] >= eves[2] else 2
        values[f"R_{side.value}"] = legit_r
        for k, r in eves.items():
            values[f"R_E{k}_{side.value}"] = r
        values[f"worst_eve_{side.value}"] = worst
        secrecy[side] = max(legit_r - eves[worst], 0.0)
        values[f"Rs_{side.value}"] = secrecy[side]
    values["min_secrecy"] = min(secrecy.values())
    return SecrecyReport(**values)  # type: ignore[arg-type]


def secrecy_gap(report: SecrecyReport, side: Side) -> float:
    """Unclamped R_ϱ − max_k R_Ek,ϱ."""
    return report.R(side) - max(report.R_E(k, side) for k in EAVESDROPPERS)


def _theta_gain(h: np.ndarray, u: np.ndarray, G: np.ndarray, w: np.ndarray) -> float:
    theta = np.diag(u)
    return float(np.abs(h.conj() @ theta.conj().T @ G @ w) ** 2)


def legit_rate_theta_form(
    channels: ChannelSet,
    coeffs: StarCoefficients,
    beams: BeamformingSolution,
    side: Side,
    sigma2: float,
) -> float:
    """`legit_rate` evaluated as |hᴴΘᴴGw|² from the raw channels."""
    h = channels.legit(side)
    u = coeffs.u(side.surface)
    return _rate(
        _theta_gain(h, u, channels.G, beams.w(side)),
        _theta_gain(h, u, channels.G, beams.w(side.other)),
        sigma2,
    )


def eve_rate_theta_form(
    channels: ChannelSet,
    coeffs: StarCoefficients,
    beams: BeamformingSolution,
    k: int,
    target: Side,
    sigma2: float,
) -> float:
    h = channels.eve(k)
    u = coeffs.u(eavesdropper_surface(k))
    return _rate(
        _theta_gain(h, u, channels.G, beams.w(target)),
        _theta_gain(h, u, channels.G, beams.w(target.other)),
        sigma2,
    )


def secrecy_report_theta_form(
    channels: ChannelSet,
    coeffs: StarCoefficients,
    beams: BeamformingSolution,
    sigma2: float,
) -> SecrecyReport:
    """Same report as `secrecy_report`, built from the Θ-matrix evaluation path."""
    return _assemble_report(
        lambda side: legit_rate_theta_form(channels, coeffs, beams, side, sigma2),
        lambda k, side: eve_rate_theta_form(channels, coeffs, beams, k, side, sigma2),
    )
