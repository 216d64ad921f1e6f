"""Brute-force references the optimizer is audited against.

All of them are exhaustive searches over finite grids, so they are only
practical at tiny dimensions (single-antenna BS, two elements).
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from starpsb.channels import build_cascades, generate_channels
from starpsb.config import PsbConfig
from starpsb.core.errors import AuditError
from starpsb.core.interfaces import SolverPort
from starpsb.core.models import (
    BeamformingSolution,
    CascadeSet,
    NetworkConfig,
    StarCoefficients,
    wrap_phase,
)
from starpsb.metrics import secrecy_report, secrecy_report_theta_form
from starpsb.optimizer import run_psb
from starpsb.optimizer.projection import HALF_PI, THREE_HALF_PI, element_objective, project_coupled
from starpsb.optimizer.quantize import grid_step

logger = logging.getLogger(__name__)

GRID_PHASES = 4096
GRID_SPLITS = 1025
DISCRETE_BITS = 3
DISCRETE_BETAS = (0.0, 0.25, 0.5, 0.75, 1.0)
POWER_SPLIT_POINTS = 2001
PROJECTION_TOL = 1e-6
RATE_TOL = 1e-9
END_TO_END_RATIO = 0.9
_CHUNK = 256


def grid_projection_oracle(
    a: np.ndarray,
    b: np.ndarray,
    *,
    phases: int = GRID_PHASES,
    splits: int = GRID_SPLITS,
) -> np.ndarray:
    """Per-element max of the coupled projection objective over a (θt, βt, branch) grid.

    For fixed βt and branch the objective is Re(e^{jθt}·z), so the best grid
    phase is the one nearest −∠z; this gives the exact grid maximum without
    enumerating every phase.
    """
    a = np.asarray(a, dtype=complex)[:, np.newaxis]
    b = np.asarray(b, dtype=complex)[:, np.newaxis]
    beta = np.linspace(0.0, 1.0, splits)[np.newaxis, :]
    step = 2 * math.pi / phases
    best = np.full(a.shape[0], -np.inf)
    for offset in (HALF_PI, THREE_HALF_PI):
        z = np.conj(a) * np.sqrt(beta) + np.conj(b) * np.sqrt(1.0 - beta) * np.exp(1j * offset)
        theta = np.round(-np.angle(z) / step) * step
        value = np.real(np.exp(1j * theta) * z)
        best = np.maximum(best, value.max(axis=1))
    return best


def audit_projection(n_elements: int, seed: int) -> dict:
    """Compare `project_coupled` with the grid oracle on random reference elements."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(n_elements) + 1j * rng.standard_normal(n_elements)
    b = rng.standard_normal(n_elements) + 1j * rng.standard_normal(n_elements)
    coeffs, _ = project_coupled(a, b)
    ours = element_objective(a, b, coeffs.beta_t, coeffs.beta_r, coeffs.theta_t, coeffs.theta_r)
    oracle = grid_projection_oracle(a, b)
    shortfall = oracle - ours
    failures = np.flatnonzero(shortfall > PROJECTION_TOL)
    return {
        "elements": n_elements,
        "seed": seed,
        "max_shortfall": float(np.max(shortfall)),
        "coupling_error": coeffs.coupling_error(),
        "passed": int(n_elements - failures.size),
        "failures": [
            {"index": int(i), "a": [a[i].real, a[i].imag], "b": [b[i].real, b[i].imag]}
            for i in failures[:20]
        ],
        "ok": bool(failures.size == 0),
    }


def _random_coefficients(rng: np.random.Generator, N: int) -> StarCoefficients:
    theta_t = wrap_phase(rng.uniform(0.0, 2 * math.pi, N))
    branch = np.where(rng.random(N) < 0.5, HALF_PI, THREE_HALF_PI)
    beta_t = rng.random(N)
    return StarCoefficients(
        beta_t=beta_t,
        beta_r=1.0 - beta_t,
        theta_t=theta_t,
        theta_r=wrap_phase(theta_t + branch),
    )


def _random_beams(rng: np.random.Generator, M: int, p_max: float) -> BeamformingSolution:
    w = rng.standard_normal((2, M)) + 1j * rng.standard_normal((2, M))
    w *= math.sqrt(p_max) / np.linalg.norm(w)
    return BeamformingSolution.from_vectors(w[0], w[1])


def audit_rates(networks: Sequence[NetworkConfig]) -> dict:
    """Cascade-form rates against the Θ-matrix evaluation on random points."""
    worst = 0.0
    failures = []
    for network in networks:
        rng = np.random.default_rng(network.rng_seed)
        channels = generate_channels(network)
        cascades = build_cascades(channels)
        coeffs = _random_coefficients(rng, network.N)
        beams = _random_beams(rng, network.M, network.P_max)
        lhs = secrecy_report(cascades, coeffs, beams, network.sigma2).model_dump()
        rhs = secrecy_report_theta_form(channels, coeffs, beams, network.sigma2).model_dump()
        delta = max(abs(float(lhs[k]) - float(rhs[k])) for k in lhs)
        worst = max(worst, delta)
        if delta > RATE_TOL:
            failures.append({"seed": network.rng_seed, "max_delta": delta})
    return {
        "instances": len(networks),
        "max_delta": worst,
        "failures": failures,
        "ok": not failures,
    }


@dataclass(frozen=True)
class DiscreteOptimum:
    """Best discrete configuration for a single-antenna BS."""

    value: float
    coefficients: StarCoefficients
    split: float


def _element_options(q: int, betas: Sequence[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    levels = 2**q
    quarter = levels // 4
    step = grid_step(q)
    opts = [
        (beta, k_t, (k_t + offset) % levels)
        for k_t in range(levels)
        for offset in (quarter, 3 * quarter)
        for beta in betas
    ]
    beta = np.array([o[0] for o in opts])
    theta_t = np.array([o[1] for o in opts]) * step
    theta_r = np.array([o[2] for o in opts]) * step
    return beta, theta_t, theta_r


def discrete_secrecy_oracle(
    cascades: CascadeSet,
    p_max: float,
    sigma2: float,
    *,
    q: int = DISCRETE_BITS,
    betas: Sequence[float] = DISCRETE_BETAS,
    power_points: int = POWER_SPLIT_POINTS,
) -> DiscreteOptimum:
    """Exhaustive max-min secrecy over coupled q-bit phases, a β grid and a power split.

    With one BS antenna each stream's gain is |w|²·|uᴴv|², so beamforming reduces
    to the split s of the full budget between the two streams.
    """
    if q < 2:
        raise ValueError("The coupled discrete oracle needs q >= 2")
    if cascades.M != 1:
        raise ValueError(f"The discrete oracle needs a single-antenna BS, got M={cascades.M}")
    N = cascades.N
    beta, theta_t, theta_r = _element_options(q, betas)
    n_opts = beta.size
    split = np.linspace(0.0, 1.0, power_points)[np.newaxis, :]
    p_i, p_o = split * p_max, (1.0 - split) * p_max

    rows = {
        name: np.conj(getattr(cascades, name)[0, :])
        for name in ("V_I", "V_O", "V_E1", "V_E2")
    }

    def rate(gain: np.ndarray, p_sig: np.ndarray, p_int: np.ndarray) -> np.ndarray:
        g = gain[:, np.newaxis]
        return np.log2(1.0 + p_sig * g / (p_int * g + sigma2))

    best_value, best_combo, best_split = -np.inf, (0,) * N, 0.5
    combos = list(itertools.product(range(n_opts), repeat=N))
    for start in range(0, len(combos), _CHUNK):
        idx = np.array(combos[start : start + _CHUNK])
        u_t = np.sqrt(beta[idx]) * np.exp(1j * theta_t[idx])
        u_r = np.sqrt(1.0 - beta[idx]) * np.exp(1j * theta_r[idx])
        g = {
            "I": np.abs(np.conj(u_t) @ rows["V_I"]) ** 2,
            "E1": np.abs(np.conj(u_t) @ rows["V_E1"]) ** 2,
            "O": np.abs(np.conj(u_r) @ rows["V_O"]) ** 2,
            "E2": np.abs(np.conj(u_r) @ rows["V_E2"]) ** 2,
        }
        rs_i = rate(g["I"], p_i, p_o) - np.maximum(rate(g["E1"], p_i, p_o), rate(g["E2"], p_i, p_o))
        rs_o = rate(g["O"], p_o, p_i) - np.maximum(rate(g["E1"], p_o, p_i), rate(g["E2"], p_o, p_i))
        value = np.minimum(np.maximum(rs_i, 0.0), np.maximum(rs_o, 0.0))
        flat = int(np.argmax(value))
        row, col = divmod(flat, value.shape[1])
        if value[row, col] > best_value:
            best_value = float(value[row, col])
            best_combo = tuple(int(i) for i in idx[row])
            best_split = float(split[0, col])

    chosen = np.array(best_combo)
    coefficients = StarCoefficients(
        beta_t=beta[chosen],
        beta_r=1.0 - beta[chosen],
        theta_t=wrap_phase(theta_t[chosen]),
        theta_r=wrap_phase(theta_r[chosen]),
    )
    return DiscreteOptimum(value=best_value, coefficients=coefficients, split=best_split)


def audit_end_to_end(
    networks: Sequence[NetworkConfig],
    config: PsbConfig,
    solver: SolverPort,
    *,
    q: int = DISCRETE_BITS,
) -> dict:
    """Quantized PSB against the discrete exhaustive optimum, one row per seed."""
    psb_config = config.model_copy(update={"q_bits": q, "coupled": True})
    rows = []
    for network in networks:
        cascades = build_cascades(generate_channels(network))
        oracle = discrete_secrecy_oracle(cascades, network.P_max, network.sigma2, q=q)
        result = run_psb(
            psb_config,
            cascades,
            p_max=network.P_max,
            sigma2=network.sigma2,
            solver=solver,
            seed=network.rng_seed,
        )
        ours = result.min_secrecy
        ok = ours >= END_TO_END_RATIO * oracle.value - PROJECTION_TOL
        rows.append(
            {
                "seed": network.rng_seed,
                "oracle": oracle.value,
                "psb": ours,
                "ratio": ours / oracle.value if oracle.value > PROJECTION_TOL else 1.0,
                "converged": result.converged,
                "ok": bool(ok),
            }
        )
        logger.info(
            "End-to-end audit seed=%d oracle=%.4f psb=%.4f", network.rng_seed, oracle.value, ours
        )
    passed = sum(r["ok"] for r in rows)
    required = math.ceil(END_TO_END_RATIO * len(rows))
    return {
        "seeds": len(rows),
        "passed": passed,
        "required": required,
        "rows": rows,
        "failures": [r for r in rows if not r["ok"]],
        "ok": passed >= required,
    }


def raise_for_audit(report: dict) -> None:
    """Raise AuditError naming every failing part and its offending inputs."""
    failed = {
        part: section["failures"]
        for part, section in report.items()
        if isinstance(section, dict) and not section.get("ok", True)
    }
    if failed:
        details = "; ".join(f"{part}: {items}" for part, items in failed.items())
        raise AuditError(f"Oracle audit failed ({details})")
