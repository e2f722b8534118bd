"""Equations of motion: Lindblad decay, SME coefficients, and conversions.

The Ito coefficients are computed from the measurement superoperators (one
lowering-operator channel per monitored quadrature), never transcribed
from per-scheme component displays, so the Kraus <-> Stratonovich-SME
equivalence can be checked as an identity.  All Bloch-coordinate rates are
closed-form polynomials; the diffusion Jacobians used by the Ito ->
Stratonovich conversion are analytic and cross-checked against finite
differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bloch
from .bloch import BlochVector
from .errors import ConfigError, IntegrationError
from .measure import Dyne, DualDyne, Jump, Readout, Scheme, SchemeConfig


def lindblad_rhs(q, gamma: float) -> np.ndarray:
    """Unmonitored decay rates (-gamma x / 2, -gamma y / 2, -gamma (1 + z))."""
    x, y, z = bloch.as_bloch(q)
    return np.array([-0.5 * gamma * x, -0.5 * gamma * y, -gamma * (1.0 + z)])


def analytic_decay(q0, t, gamma: float):
    """Closed-form unmonitored decay from q0 after time t.

    x and y shrink at rate gamma/2 while 1 + z shrinks at rate gamma.
    Scalar t returns a BlochVector; an array t returns an (len(t), 3) array.
    """
    x0, y0, z0 = bloch.as_bloch(q0)
    t_arr = np.asarray(t, dtype=float)
    half = np.exp(-0.5 * gamma * t_arr)
    full = half * half
    x = x0 * half
    y = y0 * half
    z = (1.0 + z0) * full - 1.0
    if t_arr.ndim == 0:
        return BlochVector(float(x), float(y), float(z))
    return np.stack([x, y, z], axis=-1)


# --- measurement channels -------------------------------------------------


def _channels(cfg: SchemeConfig):
    """(re c, im c, sqrt(eta_c)) for each monitored channel L_c = c sigma_-."""
    ct, st = math.cos(cfg.theta), math.sin(cfg.theta)
    if cfg.scheme is Scheme.HETERODYNE:
        amp = math.sqrt(cfg.gamma / 2.0)
        # L_I = amp e^{-i theta} sigma-, L_Q = i amp e^{-i theta} sigma-
        return [
            (amp * ct, -amp * st, 1.0, "r_i"),
            (amp * st, amp * ct, 1.0, "r_q"),
        ]
    if cfg.scheme in (Scheme.HOMODYNE, Scheme.HOMODYNE_INEFFICIENT):
        amp = math.sqrt(cfg.gamma)
        return [(amp * ct, -amp * st, math.sqrt(cfg.eta), "r")]
    raise ConfigError(
        "the photodetection channel has no diffusive (drift/diffusion) form"
    )


def _drive_rates(q, cfg: SchemeConfig) -> np.ndarray:
    x, y, z = q
    return np.array(
        [
            cfg.omega * z - cfg.delta * y,
            cfg.delta * x,
            -cfg.omega * x,
        ]
    )


@dataclass(frozen=True)
class DriftDiffusion:
    """Ito coefficients dq = drift dt + diffusion dW in Bloch coordinates."""

    drift: np.ndarray        # shape (3,)
    diffusion: np.ndarray    # shape (3, n_channels)
    channels: tuple


@dataclass(frozen=True)
class StratonovichDrift:
    """Drift of the Stratonovich form equivalent to the Ito coefficients."""

    drift: np.ndarray


def _backaction_column(q, a: float, b: float) -> np.ndarray:
    """Bloch components of M[rho, L] for L = (a + ib) sigma_-."""
    x, y, z = q
    s = a * x + b * y
    opz = 1.0 + z
    return np.array([a * opz - x * s, b * opz - y * s, -opz * s])


def _backaction_jacobian(q, a: float, b: float) -> np.ndarray:
    """d(column)/d(x, y, z), rows indexed by component."""
    x, y, z = q
    s = a * x + b * y
    opz = 1.0 + z
    return np.array(
        [
            [-s - x * a, -x * b, a],
            [-y * a, -s - y * b, b],
            [-opz * a, -opz * b, -s],
        ]
    )


def sme_coefficients(q, cfg: SchemeConfig) -> DriftDiffusion:
    """Ito drift a(q) and diffusion columns b_c(q) for a dyne scheme.

    The drift is the Lindblad decay plus the Rabi drive; each monitored
    channel contributes a sqrt(eta_c)-scaled backaction column.
    """
    q = bloch.as_bloch(q)
    drift = lindblad_rhs(q, cfg.gamma) + _drive_rates(q, cfg)
    cols, labels = [], []
    for a, b, root_eta, label in _channels(cfg):
        cols.append(root_eta * _backaction_column(q, a, b))
        labels.append(label)
    return DriftDiffusion(drift, np.stack(cols, axis=1), tuple(labels))


def strato_drift(q, cfg: SchemeConfig) -> StratonovichDrift:
    """Stratonovich drift A = a - (1/2) sum_c (b_c . grad) b_c."""
    q = bloch.as_bloch(q)
    drift = lindblad_rhs(q, cfg.gamma) + _drive_rates(q, cfg)
    for a, b, root_eta, _ in _channels(cfg):
        col = _backaction_column(q, a, b)
        jac = _backaction_jacobian(q, a, b)
        drift = drift - 0.5 * root_eta**2 * (jac @ col)
    return StratonovichDrift(drift)


def kraus_rhs(q, ro: Readout, cfg: SchemeConfig) -> np.ndarray:
    """Readout-conditioned O(dt) rates from the Kraus-operator expansion.

    Equals the Stratonovich drift plus diffusion times (r - signal) for
    every dyne scheme; the identity is exercised in the test suite.
    """
    q = bloch.as_bloch(q)
    x, y, z = q
    gamma = cfg.gamma
    ct, st = math.cos(cfg.theta), math.sin(cfg.theta)
    if cfg.scheme is Scheme.HETERODYNE:
        if not isinstance(ro, DualDyne):
            raise ConfigError("heterodyne expects a DualDyne readout")
        amp = math.sqrt(gamma / 2.0)
        kr = amp * (ro.r_i * ct + ro.r_q * st)
        ki = amp * (ro.r_q * ct - ro.r_i * st)
        lost = 0.0
        half_rate = 0.5 * gamma
    elif cfg.scheme in (Scheme.HOMODYNE, Scheme.HOMODYNE_INEFFICIENT):
        if not isinstance(ro, Dyne):
            raise ConfigError(f"{cfg.scheme.value} expects a Dyne readout")
        amp = math.sqrt(cfg.eta * gamma)
        kr = amp * ro.r * ct
        ki = -amp * ro.r * st
        lost = 0.5 * gamma * (1.0 - cfg.eta) * (1.0 + z)
        half_rate = 0.5 * gamma
    else:
        if isinstance(ro, Jump):
            raise ConfigError("photodetection has no diffusive equation of motion")
        raise ConfigError("scheme/readout mismatch")
    opz = 1.0 + z
    cross = kr * x + ki * y
    w = cross - half_rate * opz + lost
    rates = np.array(
        [
            kr * opz - half_rate * x - x * w,
            ki * opz - half_rate * y - y * w,
            -half_rate * opz - cross - lost - z * w,
        ]
    )
    return rates + _drive_rates(q, cfg)


# --- integrators ----------------------------------------------------------

#: Allowed overshoot of |q| past the sphere before an RK4 run is aborted.
BALL_EXIT_TOL = 1e-6


def integrate_deterministic(rhs, q0, t_final: float, dt: float):
    """Classical fixed-step RK4 for dq/dt = rhs(q); returns a Trajectory.

    Raises :class:`IntegrationError` if the state leaves the Bloch ball by
    more than BALL_EXIT_TOL or goes non-finite.
    """
    from .ensemble import Trajectory

    n_steps = int(round(t_final / dt))
    times = np.arange(n_steps + 1) * dt
    states = np.empty((n_steps + 1, 3))
    q = np.array(bloch.as_bloch(q0), dtype=float)
    states[0] = q
    for k in range(n_steps):
        k1 = rhs(q)
        k2 = rhs(q + 0.5 * dt * k1)
        k3 = rhs(q + 0.5 * dt * k2)
        k4 = rhs(q + dt * k3)
        q = q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(q)):
            raise IntegrationError("non-finite state during RK4", step=k)
        if q @ q > (1.0 + BALL_EXIT_TOL) ** 2:
            raise IntegrationError(
                f"state left the Bloch ball at step {k}: |q| = {np.linalg.norm(q)}",
                step=k,
            )
        states[k + 1] = q
    return Trajectory(times=times, states=states, readouts=None, scheme=None, seed=None)


def integrate_sme(q0, cfg: SchemeConfig, t_final: float, dt: float, rng: np.random.Generator):
    """Euler-Maruyama integration of the Ito SME in Bloch coordinates.

    Steps q -> q + a dt + b dW with dW ~ Normal(0, dt) per channel, then
    radially clamps |q| to the unit ball (the Ito step violates positivity
    at O(dt^2)).  Records the implied readouts r = signal + dW/dt.
    """
    from .ensemble import Trajectory

    if cfg.eps > EPS_SME_MAX:
        raise ConfigError(f"integrate_sme requires gamma*dt <= {EPS_SME_MAX}")
    n_steps = int(round(t_final / dt))
    times = np.arange(n_steps + 1) * dt
    states = np.empty((n_steps + 1, 3))
    q = np.array(bloch.as_bloch(q0), dtype=float)
    states[0] = q
    n_ch = len(_channels(cfg))
    readouts = np.empty((n_steps, n_ch))
    sqrt_dt = math.sqrt(dt)
    for k in range(n_steps):
        coeff = sme_coefficients(q, cfg)
        dw = rng.standard_normal(n_ch) * sqrt_dt
        signal = _ito_signals(q, cfg)
        readouts[k] = signal + dw / dt
        q = q + coeff.drift * dt + coeff.diffusion @ dw
        if not np.all(np.isfinite(q)):
            raise IntegrationError("non-finite state in Euler-Maruyama", step=k)
        norm = math.sqrt(q @ q)
        if norm > 1.0:
            q = q / norm
        states[k + 1] = q
    return Trajectory(
        times=times, states=states, readouts=readouts, scheme=cfg.scheme, seed=None
    )


EPS_SME_MAX = 0.01


def _ito_signals(q, cfg: SchemeConfig) -> np.ndarray:
    """sqrt(eta_c) <L_c + L_c^dag> per channel (the readout means)."""
    x, y, z = q
    out = []
    for a, b, root_eta, _ in _channels(cfg):
        out.append(root_eta * (a * x + b * y))
    return np.array(out)
