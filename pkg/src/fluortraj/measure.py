"""Kraus operators, conditioned state updates, and readout statistics.

One :class:`SchemeConfig` fixes the monitoring scheme and its parameters;
each ``kraus_*`` constructor returns the 2x2 operators for one timestep,
:func:`apply_update` performs the normalized positive-map update, and
:func:`sample_readout` draws an outcome from the O(dt) readout statistics
(Gaussian with variance 1/dt for the dyne schemes, Bernoulli for
photodetection).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from . import bloch
from .bloch import BlochVector, density_to_bloch
from .errors import ConfigError, ImpossibleOutcomeError


class Scheme(enum.Enum):
    PHOTODETECT = "photodetect"
    HETERODYNE = "heterodyne"
    HOMODYNE = "homodyne"
    HOMODYNE_INEFFICIENT = "homodyne-inefficient"


#: Schemes with a continuous (Gaussian) readout.
DYNE_SCHEMES = (Scheme.HETERODYNE, Scheme.HOMODYNE, Scheme.HOMODYNE_INEFFICIENT)

#: Weak-measurement guideline for eps = gamma * dt; exceeding it is allowed
#: but degrades the O(dt) readout statistics.
EPS_RECOMMENDED = 0.01


@dataclass(frozen=True)
class SchemeConfig:
    """Monitoring scheme plus physical parameters.

    ``gamma`` is the fluorescence rate (1/T1), ``dt`` the detector
    integration time in the same inverse units, ``theta`` the local
    oscillator phase, ``eta`` the collection efficiency (only the
    HOMODYNE_INEFFICIENT scheme uses it), and ``omega``/``delta`` the Rabi
    drive amplitude and detuning.
    """

    scheme: Scheme
    gamma: float = 1.0
    dt: float = 1e-3
    theta: float = 0.0
    eta: float = 1.0
    omega: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0.0 or self.dt <= 0.0:
            raise ConfigError("gamma and dt must be positive")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if self.eps >= 1.0:
            raise ConfigError(f"eps = gamma*dt = {self.eps} must be < 1")
        if self.scheme in (Scheme.PHOTODETECT, Scheme.HETERODYNE, Scheme.HOMODYNE):
            if self.eta != 1.0:
                raise ConfigError(
                    f"{self.scheme.value} is an ideal scheme; use "
                    "HOMODYNE_INEFFICIENT for eta < 1"
                )

    @property
    def eps(self) -> float:
        """Dimensionless measurement strength gamma * dt."""
        return self.gamma * self.dt


@dataclass(frozen=True)
class Jump:
    """Photodetection outcome for one timestep."""

    clicked: bool
    dt: float


@dataclass(frozen=True)
class Dyne:
    """Single homodyne readout sample, units 1/sqrt(time)."""

    r: float
    dt: float


@dataclass(frozen=True)
class DualDyne:
    """Heterodyne quadrature pair, units 1/sqrt(time)."""

    r_i: float
    r_q: float
    dt: float


Readout = Union[Jump, Dyne, DualDyne]


class KrausSet(NamedTuple):
    """Labeled 2x2 operators for one scheme at one timestep."""

    ops: tuple
    scheme: Scheme

    def matrix(self, label: str) -> np.ndarray:
        for name, m in self.ops:
            if name == label:
                return m
        raise KeyError(label)


def kraus_photodetect(cfg: SchemeConfig) -> KrausSet:
    """Click/no-click operator pair; completeness holds exactly."""
    eps = cfg.eps
    m0 = np.array([[math.sqrt(1.0 - eps), 0.0], [0.0, 1.0]], dtype=complex)
    m1 = np.array([[0.0, 0.0], [math.sqrt(eps), 0.0]], dtype=complex)
    return KrausSet((("no_click", m0), ("click", m1)), Scheme.PHOTODETECT)


def kraus_heterodyne(cfg: SchemeConfig, ro: DualDyne) -> KrausSet:
    """Coherent-state projection operator for a quadrature pair.

    The Gaussian prefactor exp(-|alpha|^2 / 2) is retained so that
    tr(M rho M^dag) is proportional to the readout probability density.
    """
    if cfg.scheme is not Scheme.HETERODYNE:
        raise ConfigError("kraus_heterodyne requires the HETERODYNE scheme")
    dt = cfg.dt
    alpha = math.sqrt(dt / 2.0) * np.exp(1.0j * cfg.theta) * (ro.r_i - 1.0j * ro.r_q)
    gauss = math.exp(-0.5 * abs(alpha) ** 2)
    m = gauss * np.array(
        [
            [math.sqrt(1.0 - cfg.eps), 0.0],
            [math.sqrt(cfg.eps) * np.conj(alpha), 1.0],
        ],
        dtype=complex,
    )
    return KrausSet((("dyne", m),), Scheme.HETERODYNE)


def kraus_homodyne(cfg: SchemeConfig, ro: Dyne) -> KrausSet:
    """Quadrature-eigenstate projection operator, normalized form.

    Carries the (dt/2pi)^(1/4) prefactor, so the POVM integrates to the
    identity with a plain dr measure.
    """
    if cfg.scheme is not Scheme.HOMODYNE:
        raise ConfigError("kraus_homodyne requires the HOMODYNE scheme")
    dt, r = cfg.dt, ro.r
    pref = (dt / (2.0 * math.pi)) ** 0.25 * math.exp(-r * r * dt / 4.0)
    m = pref * np.array(
        [
            [math.sqrt(1.0 - cfg.eps), 0.0],
            [dt * math.sqrt(cfg.gamma) * r * np.exp(-1.0j * cfg.theta), 1.0],
        ],
        dtype=complex,
    )
    return KrausSet((("dyne", m),), Scheme.HOMODYNE)


def kraus_homodyne_inefficient(cfg: SchemeConfig, ro: Dyne) -> KrausSet:
    """Operator pair for homodyne detection behind an eta beamsplitter.

    The lost-port outcome is traced in the Fock basis, giving one operator
    per lost-photon number j in {0, 1}; the state update sums both.
    """
    if cfg.scheme is not Scheme.HOMODYNE_INEFFICIENT:
        raise ConfigError(
            "kraus_homodyne_inefficient requires the HOMODYNE_INEFFICIENT scheme"
        )
    eps, eta = cfg.eps, cfg.eta
    x_big = math.sqrt(cfg.dt / 2.0) * ro.r
    gauss = math.exp(-0.5 * x_big * x_big)
    m0 = gauss * np.array(
        [
            [math.sqrt(1.0 - eps), 0.0],
            [
                math.sqrt(2.0 * eps * eta) * x_big * np.exp(-1.0j * cfg.theta),
                1.0,
            ],
        ],
        dtype=complex,
    )
    m1 = gauss * np.array(
        [[0.0, 0.0], [math.sqrt(eps * (1.0 - eta)), 0.0]], dtype=complex
    )
    return KrausSet((("kept", m0), ("lost", m1)), Scheme.HOMODYNE_INEFFICIENT)


def kraus_set(cfg: SchemeConfig, ro: Readout) -> KrausSet:
    """Dispatch to the scheme's Kraus constructor, checking readout type."""
    if cfg.scheme is Scheme.PHOTODETECT:
        if not isinstance(ro, Jump):
            raise ConfigError("photodetection takes a Jump readout")
        return kraus_photodetect(cfg)
    if cfg.scheme is Scheme.HETERODYNE:
        if not isinstance(ro, DualDyne):
            raise ConfigError("heterodyne takes a DualDyne readout")
        return kraus_heterodyne(cfg, ro)
    if not isinstance(ro, Dyne):
        raise ConfigError(f"{cfg.scheme.value} takes a Dyne readout")
    if cfg.scheme is Scheme.HOMODYNE:
        return kraus_homodyne(cfg, ro)
    return kraus_homodyne_inefficient(cfg, ro)


def drive_unitary(cfg: SchemeConfig) -> np.ndarray:
    """Exact one-step drive unitary exp(-i (delta sz + omega sy) dt / 2)."""
    omega_eff = math.hypot(cfg.omega, cfg.delta)
    half = 0.5 * omega_eff * cfg.dt
    if omega_eff == 0.0:
        return np.eye(2, dtype=complex)
    gen = (cfg.delta * bloch.SIGMA_Z + cfg.omega * bloch.SIGMA_Y) / omega_eff
    return math.cos(half) * np.eye(2, dtype=complex) - 1.0j * math.sin(half) * gen


def drive_rotation(cfg: SchemeConfig) -> np.ndarray:
    """SO(3) Bloch rotation equivalent to :func:`drive_unitary`.

    The drive generates dq/dt = w x q with w = (0, omega, delta); this is
    the Rodrigues rotation by |w| dt about w.
    """
    omega_eff = math.hypot(cfg.omega, cfg.delta)
    if omega_eff == 0.0:
        return np.eye(3)
    axis = np.array([0.0, cfg.omega, cfg.delta]) / omega_eff
    angle = omega_eff * cfg.dt
    k_cross = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return (
        math.cos(angle) * np.eye(3)
        + math.sin(angle) * k_cross
        + (1.0 - math.cos(angle)) * np.outer(axis, axis)
    )


def apply_update(rho: np.ndarray, ks: KrausSet, click: bool | None = None) -> np.ndarray:
    """Normalized conditional update rho -> sum_M M rho M^dag / tr(...).

    For photodetection ``click`` selects the branch; dyne schemes use their
    single operator; the inefficient scheme always sums both lost-port
    branches.  Raises :class:`ImpossibleOutcomeError` when the selected
    branch has zero probability.
    """
    rho = np.asarray(rho, dtype=complex)
    if ks.scheme is Scheme.PHOTODETECT:
        if click is None:
            raise ConfigError("photodetection update needs click=True/False")
        m = ks.matrix("click" if click else "no_click")
        numer = m @ rho @ m.conj().T
    else:
        if click is not None:
            raise ConfigError("click selector is only meaningful for photodetection")
        numer = np.zeros((2, 2), dtype=complex)
        for _, m in ks.ops:
            numer += m @ rho @ m.conj().T
    denom = float(np.trace(numer).real)
    if denom <= 0.0:
        raise ImpossibleOutcomeError(
            f"zero-probability branch for scheme {ks.scheme.value}"
        )
    out = numer / denom
    # restore exact hermiticity lost to rounding
    return 0.5 * (out + out.conj().T)


def signal_means(q, cfg: SchemeConfig) -> tuple:
    """Mean readout(s) of the scheme's Gaussian statistics at state q."""
    q = bloch.as_bloch(q)
    ct, st = math.cos(cfg.theta), math.sin(cfg.theta)
    m_i = q.x * ct - q.y * st
    if cfg.scheme is Scheme.HETERODYNE:
        m_q = q.y * ct + q.x * st
        amp = math.sqrt(cfg.gamma / 2.0)
        return (amp * m_i, amp * m_q)
    if cfg.scheme is Scheme.HOMODYNE:
        return (math.sqrt(cfg.gamma) * m_i,)
    if cfg.scheme is Scheme.HOMODYNE_INEFFICIENT:
        return (math.sqrt(cfg.eta * cfg.gamma) * m_i,)
    raise ConfigError("photodetection has no Gaussian readout mean")


def click_probability(q, cfg: SchemeConfig) -> float:
    """Per-step click probability gamma dt (1 + z) / 2."""
    q = bloch.as_bloch(q)
    return cfg.eps * (1.0 + q.z) / 2.0


def sample_readout(rho: np.ndarray, cfg: SchemeConfig, rng: np.random.Generator) -> Readout:
    """Draw one readout for the configured scheme.

    Jump outcomes are Bernoulli in the click probability; dyne outcomes are
    Gaussian with the scheme signal as mean and variance 1/dt.  The rng is
    advanced by exactly one uniform (jump), one normal (homodyne), or two
    normals in (I, Q) order (heterodyne).
    """
    q = density_to_bloch(rho, check=False)
    if cfg.scheme is Scheme.PHOTODETECT:
        return Jump(bool(rng.random() < click_probability(q, cfg)), cfg.dt)
    sigma = 1.0 / math.sqrt(cfg.dt)
    means = signal_means(q, cfg)
    if cfg.scheme is Scheme.HETERODYNE:
        r_i = means[0] + sigma * rng.standard_normal()
        r_q = means[1] + sigma * rng.standard_normal()
        return DualDyne(r_i, r_q, cfg.dt)
    return Dyne(means[0] + sigma * rng.standard_normal(), cfg.dt)


def log_prob_rate(rho: np.ndarray, ro: Readout, cfg: SchemeConfig) -> float:
    """O(dt) coefficient of ln p(r | rho) for the dyne schemes.

    Consistent with tr(M rho M^dag) through p = exp(C + G dt + O(dt^2))
    with a state-independent C.
    """
    q = density_to_bloch(rho, check=False)
    ct, st = math.cos(cfg.theta), math.sin(cfg.theta)
    m_i = q.x * ct - q.y * st
    if cfg.scheme is Scheme.HETERODYNE:
        if not isinstance(ro, DualDyne):
            raise ConfigError("heterodyne expects a DualDyne readout")
        m_q = q.y * ct + q.x * st
        amp = math.sqrt(cfg.gamma / 2.0)
        return (
            -0.5 * (ro.r_i - amp * m_i) ** 2
            - 0.5 * (ro.r_q - amp * m_q) ** 2
            + 0.25 * cfg.gamma * (q.x**2 + q.y**2)
            - 0.5 * cfg.gamma * (q.z + 1.0)
        )
    if cfg.scheme is Scheme.HOMODYNE:
        if not isinstance(ro, Dyne):
            raise ConfigError("homodyne expects a Dyne readout")
        return -0.5 * (ro.r - math.sqrt(cfg.gamma) * m_i) ** 2 - 0.5 * cfg.gamma * (
            1.0 + q.z - m_i * m_i
        )
    if cfg.scheme is Scheme.HOMODYNE_INEFFICIENT:
        if not isinstance(ro, Dyne):
            raise ConfigError("inefficient homodyne expects a Dyne readout")
        eg = cfg.eta * cfg.gamma
        return -0.5 * (ro.r - math.sqrt(eg) * m_i) ** 2 + 0.5 * eg * (
            m_i * m_i - q.z - 1.0
        )
    raise ConfigError("log_prob_rate is defined for the dyne schemes only")


class PovmResult(NamedTuple):
    """Completeness-check outcome: max-norm deviation from scale * identity."""

    deviation: float
    scale: float


#: Gauss-Hermite points per dyne axis used by :func:`povm_completeness`.
QUADRATURE_POINTS = 200


def povm_completeness(cfg: SchemeConfig, n_points: int = QUADRATURE_POINTS) -> PovmResult:
    """Deviation of the summed/integrated M^dag M from (scale x identity).

    Photodetection is summed exactly (scale 1).  Dyne integrals use
    Gauss-Hermite quadrature against the operators' own Gaussian envelope.
    The ideal dyne schemes compare against the identity with their standard
    integration measures (scale fixed to 1); the inefficient pair is only
    proportional to the identity, so the scale is fitted and reported.
    """
    if cfg.scheme is Scheme.PHOTODETECT:
        ks = kraus_photodetect(cfg)
        total = sum(m.conj().T @ m for _, m in ks.ops)
        return PovmResult(float(np.max(np.abs(total - np.eye(2)))), 1.0)

    nodes, weights = np.polynomial.hermite.hermgauss(n_points)
    dt = cfg.dt
    # Gauss-Hermite integrates exp(-s^2) f(s); the operators carry
    # exp(-r^2 dt / 2) per axis, so substitute r = s * sqrt(2 / dt).
    rs = nodes * math.sqrt(2.0 / dt)

    def stripped(m: np.ndarray, envelope: float) -> np.ndarray:
        return m / envelope

    total = np.zeros((2, 2), dtype=complex)
    if cfg.scheme is Scheme.HETERODYNE:
        # measure dt/(2 pi) dr_i dr_q
        for wi, ri in zip(weights, rs):
            for wq, rq in zip(weights, rs):
                m = kraus_heterodyne(cfg, DualDyne(ri, rq, dt)).ops[0][1]
                m = stripped(m, math.exp(-0.25 * dt * (ri * ri + rq * rq)))
                total += wi * wq * (m.conj().T @ m)
        total *= (dt / (2.0 * math.pi)) * (2.0 / dt)
        return PovmResult(float(np.max(np.abs(total - np.eye(2)))), 1.0)

    if cfg.scheme is Scheme.HOMODYNE:
        # measure dr; the (dt/2pi)^(1/4) prefactor is built into the operator
        for w, r in zip(weights, rs):
            m = kraus_homodyne(cfg, Dyne(r, dt)).ops[0][1]
            m = stripped(m, math.exp(-0.25 * dt * r * r))
            total += w * (m.conj().T @ m)
        total *= math.sqrt(2.0 / dt)
        return PovmResult(float(np.max(np.abs(total - np.eye(2)))), 1.0)

    # inefficient pair: proportional to the identity; fit the constant
    for w, r in zip(weights, rs):
        ks = kraus_homodyne_inefficient(cfg, Dyne(r, dt))
        env = math.exp(-0.25 * dt * r * r)
        for _, m in ks.ops:
            ms = stripped(m, env)
            total += w * (ms.conj().T @ ms)
    total *= math.sqrt(2.0 / dt)
    scale = float(np.trace(total).real) / 2.0
    return PovmResult(float(np.max(np.abs(total - scale * np.eye(2)))), scale)
