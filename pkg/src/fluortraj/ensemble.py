"""Monte Carlo trajectory ensembles via the positive Kraus-map engine.

Trajectories are generated by repeated application of the normalized
Kraus update (readout sampled first, drive rotation applied before the
measurement map), which preserves density-matrix validity at machine
precision per step.  Every trajectory owns a counter-based random stream
derived from ``(master_seed, trajectory_index)``, so ensembles are
bit-reproducible regardless of chunking or thread count, and any subset
of trajectories can be regenerated in isolation.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels, bloch
from .bloch import BlochVector
from .errors import ConfigError, GridMismatchError, OffEllipseError
from .measure import Scheme, SchemeConfig

#: Trajectories per work chunk; fixed so results do not depend on threads.
CHUNK_SIZE = 4096

#: Steps of pre-drawn noise held in memory per chunk.
NOISE_BLOCK = 512


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based random stream for one trajectory of one ensemble."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((master_seed, index)))
    )


def resolve_threads(threads: int | None) -> int:
    """Worker count: explicit argument, else FLUORTRAJ_THREADS, else cpu count."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("FLUORTRAJ_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Trajectory:
    """One monitored run: a time grid, states, and (optionally) readouts."""

    times: np.ndarray                 # (K,)
    states: np.ndarray                # (K, 3)
    readouts: np.ndarray | None       # (K - 1, n_channels) or None
    scheme: Scheme | None
    seed: tuple | None

    def __post_init__(self):
        if self.states.shape != (len(self.times), 3):
            raise GridMismatchError("states and times lengths disagree")
        if self.readouts is not None and len(self.readouts) != len(self.times) - 1:
            raise GridMismatchError("need exactly one readout per step")

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> BlochVector:
        return BlochVector(*self.states[-1])

    def polar_angles(self) -> np.ndarray:
        """atan2(x, z) along the trajectory."""
        return np.arctan2(self.states[:, 0], self.states[:, 2])


@dataclass(frozen=True)
class MeanTrajectory:
    """Pointwise ensemble mean with its standard error."""

    times: np.ndarray
    mean: np.ndarray      # (K, 3)
    stderr: np.ndarray    # (K, 3)
    n: int


@dataclass(frozen=True)
class Ensemble:
    """Immutable batch of trajectories sharing one configuration.

    ``indices`` are the per-trajectory stream indices; a post-selected
    subset keeps its original indices so it can be regenerated exactly.
    """

    cfg: SchemeConfig
    q0: BlochVector
    t_final: float
    store_every: int
    master_seed: int
    indices: np.ndarray               # (N,)
    times: np.ndarray                 # (K,)
    states: np.ndarray                # (N, K, 3)
    readouts: np.ndarray | None       # (N, K - 1, n_channels) or None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.indices)

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(
            times=self.times,
            states=self.states[i],
            readouts=None if self.readouts is None else self.readouts[i],
            scheme=self.cfg.scheme,
            seed=(self.master_seed, int(self.indices[i])),
        )

    def __iter__(self):
        return (self.trajectory(i) for i in range(len(self)))

    def final_states(self) -> np.ndarray:
        return self.states[:, -1, :]

    def subset(self, keep: np.ndarray, **meta) -> "Ensemble":
        return replace(
            self,
            indices=self.indices[keep],
            states=self.states[keep],
            readouts=None if self.readouts is None else self.readouts[keep],
            meta={**self.meta, **meta},
        )


def _noise_channels(scheme: Scheme) -> int:
    return 2 if scheme is Scheme.HETERODYNE else 1


def _step_fn(cfg: SchemeConfig):
    name = {
        Scheme.PHOTODETECT: "photodetect",
        Scheme.HETERODYNE: "heterodyne",
        Scheme.HOMODYNE: "homodyne",
        Scheme.HOMODYNE_INEFFICIENT: "homodyne",
    }[cfg.scheme]
    consts = _kernels.pack_constants(name, cfg.gamma, cfg.dt, cfg.theta, cfg.eta)
    return name, consts


def _simulate_chunk(cfg, q0, n_steps, idx, master_seed, store_every, store_readouts):
    """Advance one chunk of trajectories; returns (states, readouts|None)."""
    n = len(idx)
    kind, consts = _step_fn(cfg)
    rot = None
    if cfg.omega != 0.0 or cfg.delta != 0.0:
        from .measure import drive_rotation

        rot = np.ascontiguousarray(drive_rotation(cfg).reshape(-1))

    x = np.full(n, q0.x)
    y = np.full(n, q0.y)
    z = np.full(n, q0.z)
    k_stored = n_steps // store_every + 1
    states = np.empty((n, k_stored, 3))
    states[:, 0, 0] = x
    states[:, 0, 1] = y
    states[:, 0, 2] = z

    jump = kind == "photodetect"
    n_ch = _noise_channels(cfg.scheme)
    readouts = None
    if store_readouts:
        readouts = np.empty((n, n_steps, n_ch))
    gens = [trajectory_rng(master_seed, int(i)) for i in idx]

    if jump:
        click = np.empty(n, dtype=np.uint8)
    else:
        r_out = np.empty(n)
        if n_ch == 2:
            rq_out = np.empty(n)

    for start in range(0, n_steps, NOISE_BLOCK):
        blk = min(NOISE_BLOCK, n_steps - start)
        if jump:
            noise = np.empty((n, blk))
            for j, g in enumerate(gens):
                noise[j] = g.random(blk)
        else:
            noise = np.empty((n, blk, n_ch))
            for j, g in enumerate(gens):
                noise[j] = g.standard_normal((blk, n_ch))
        for s in range(blk):
            k = start + s
            if rot is not None:
                _kernels.rotate(x, y, z, rot)
            if jump:
                _kernels.step_photodetect(x, y, z, noise[:, s].copy(), click, consts)
                if readouts is not None:
                    readouts[:, k, 0] = click
            elif n_ch == 2:
                _kernels.step_heterodyne(
                    x, y, z,
                    noise[:, s, 0].copy(), noise[:, s, 1].copy(),
                    r_out, rq_out, consts,
                )
                if readouts is not None:
                    readouts[:, k, 0] = r_out
                    readouts[:, k, 1] = rq_out
            else:
                _kernels.step_homodyne(x, y, z, noise[:, s, 0].copy(), r_out, consts)
                if readouts is not None:
                    readouts[:, k, 0] = r_out
            if (k + 1) % store_every == 0:
                j = (k + 1) // store_every
                states[:, j, 0] = x
                states[:, j, 1] = y
                states[:, j, 2] = z

    if readouts is not None and store_every > 1:
        readouts = None  # sub-grid readouts cannot be attached to the stored grid
    return states, readouts


def simulate_ensemble(
    cfg: SchemeConfig,
    q0,
    t_final: float,
    n: int,
    master_seed: int,
    store_every: int = 1,
    store_readouts: bool = True,
    indices=None,
    threads: int | None = None,
) -> Ensemble:
    """Simulate ``n`` trajectories (or the given stream ``indices``).

    ``store_every`` decimates the stored states to every k-th step
    (readouts are dropped when decimating).  Passing explicit ``indices``
    regenerates exactly those trajectories of the (master_seed, cfg) run,
    bit-identically to their appearance in the full ensemble.
    """
    q0 = bloch.as_bloch(q0)
    if q0.norm() > 1.0 + bloch.BALL_TOL:
        raise ConfigError("initial state lies outside the Bloch ball")
    n_steps = int(round(t_final / cfg.dt))
    if n_steps < 1:
        raise ConfigError("t_final shorter than one timestep")
    if n_steps % store_every != 0:
        raise ConfigError("store_every must divide the step count")
    if indices is None:
        indices = np.arange(n, dtype=np.int64)
    else:
        indices = np.asarray(indices, dtype=np.int64)
    store_readouts = store_readouts and store_every == 1

    k_stored = n_steps // store_every + 1
    times = np.arange(k_stored) * (cfg.dt * store_every)
    states = np.empty((len(indices), k_stored, 3))
    readouts = (
        np.empty((len(indices), n_steps, _noise_channels(cfg.scheme)))
        if store_readouts
        else None
    )

    chunks = [
        slice(i, min(i + CHUNK_SIZE, len(indices)))
        for i in range(0, len(indices), CHUNK_SIZE)
    ]

    def run(sl):
        st, ro = _simulate_chunk(
            cfg, q0, n_steps, indices[sl], master_seed, store_every, store_readouts
        )
        states[sl] = st
        if readouts is not None:
            readouts[sl] = ro

    workers = resolve_threads(threads)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, chunks))
    else:
        for sl in chunks:
            run(sl)

    return Ensemble(
        cfg=cfg,
        q0=q0,
        t_final=t_final,
        store_every=store_every,
        master_seed=master_seed,
        indices=indices,
        times=times,
        states=states,
        readouts=readouts,
        meta={"engine": _kernels.ENGINE},
    )


def simulate_final_states(
    cfg: SchemeConfig, q0, t_final: float, n: int, master_seed: int,
    indices=None, threads: int | None = None,
) -> np.ndarray:
    """Final Bloch states only (streaming; no path storage)."""
    n_steps = int(round(t_final / cfg.dt))
    ens = simulate_ensemble(
        cfg, q0, t_final, n, master_seed,
        store_every=n_steps, store_readouts=False,
        indices=indices, threads=threads,
    )
    return ens.final_states()


def collect_indices(
    cfg: SchemeConfig,
    q0,
    t_final: float,
    master_seed: int,
    predicate,
    min_count: int,
    batch: int = 50_000,
    max_n: int = 5_000_000,
    threads: int | None = None,
):
    """Grow an ensemble batch-by-batch until ``predicate`` keeps min_count.

    ``predicate`` maps an (m, 3) array of final states to a boolean mask.
    Returns (kept_indices, n_total_simulated).  Stream indices are global,
    so the kept trajectories can be regenerated with simulate_ensemble.
    """
    kept: list[np.ndarray] = []
    total = 0
    n_kept = 0
    while n_kept < min_count:
        if total >= max_n:
            break
        m = min(batch, max_n - total)
        idx = np.arange(total, total + m, dtype=np.int64)
        finals = simulate_final_states(
            cfg, q0, t_final, m, master_seed, indices=idx, threads=threads
        )
        mask = predicate(finals)
        kept.append(idx[mask])
        n_kept += int(mask.sum())
        total += m
    indices = np.concatenate(kept) if kept else np.empty(0, dtype=np.int64)
    return indices, total


def ensemble_mean(ens: Ensemble) -> MeanTrajectory:
    """Pointwise arithmetic mean of the Bloch components with standard errors."""
    if len(ens) == 0:
        raise ConfigError("cannot average an empty ensemble")
    mean = ens.states.mean(axis=0)
    if len(ens) > 1:
        stderr = ens.states.std(axis=0, ddof=1) / math.sqrt(len(ens))
    else:
        stderr = np.zeros_like(mean)
    return MeanTrajectory(times=ens.times, mean=mean, stderr=stderr, n=len(ens))


def trace_distance(a, b) -> float:
    """Trace distance between qubit states: half the Bloch-vector distance."""
    da = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return 0.5 * float(np.linalg.norm(da, axis=-1)) if da.ndim == 1 else 0.5 * np.linalg.norm(da, axis=-1)


def post_select(ens: Ensemble, target, window: float, distance=None) -> Ensemble:
    """Keep trajectories ending within ``window`` of the target.

    ``target`` may be a Bloch vector (kept when the final trace distance,
    or a caller-supplied measure, is <= window) or a float, read as a
    polar angle on the xz great circle and compared signed:
    |theta(T) - theta_f| <= window.  An empty selection returns an empty
    ensemble, not an error.
    """
    if window <= 0.0:
        raise ConfigError("post-selection window must be positive")
    finals = ens.final_states()
    if isinstance(target, (int, float)) and not isinstance(target, bool):
        theta = np.arctan2(finals[:, 0], finals[:, 2])
        keep = np.abs(theta - float(target)) <= window
        meta = {"target_theta": float(target)}
    else:
        tgt = np.array(bloch.as_bloch(target), dtype=float)
        d = distance or trace_distance
        dist = np.array([d(f, tgt) for f in finals]) if distance else trace_distance(finals, tgt)
        keep = dist <= window
        meta = {"target": tuple(tgt)}
    return ens.subset(
        np.flatnonzero(keep),
        post_selection={
            **meta,
            "window": window,
            "distance": getattr(distance, "__name__", "trace_distance"),
        },
    )


def density_histogram(ens: Ensemble, t: float, bins: int = 100):
    """Normalized 2-D histogram of (x, z) at the stored time nearest t.

    Returns (hist, x_edges, z_edges); bin edges span [-1, 1]^2 and the
    counts sum to 1.
    """
    j = int(np.argmin(np.abs(ens.times - t)))
    if abs(ens.times[j] - t) > 0.5 * (ens.times[1] - ens.times[0]):
        raise ConfigError(f"time {t} outside the stored grid")
    edges = np.linspace(-1.0, 1.0, bins + 1)
    hist, xe, ze = np.histogram2d(
        ens.states[:, j, 0], ens.states[:, j, 2], bins=(edges, edges)
    )
    return hist / hist.sum(), xe, ze


@dataclass(frozen=True)
class EllipseLaw:
    """Instantaneous reachable ellipse for theta = 0 homodyne monitoring.

    All trajectories from one initial state lie on z_pm(x, t) with
    u(t) = eta + (u0 - eta) exp(gamma t); u0 is fixed by the initial
    state.  eta = 1 keeps u = 1 forever (pure states stay on the circle).
    """

    eta: float
    u0: float
    gamma: float = 1.0

    @classmethod
    def from_initial(cls, q0, eta: float, gamma: float = 1.0) -> "EllipseLaw":
        q0 = bloch.as_bloch(q0)
        if 1.0 + q0.z < 1e-12:
            raise ConfigError("ellipse law is undefined from the ground state")
        u0 = 2.0 / (1.0 + q0.z) - q0.x**2 / (1.0 + q0.z) ** 2
        return cls(eta=eta, u0=u0, gamma=gamma)

    def u(self, t):
        return self.eta + (self.u0 - self.eta) * np.exp(self.gamma * np.asarray(t))

    def z_branches(self, x, t):
        """(z_plus, z_minus) on the ellipse at time t; NaN outside |x| reach."""
        u = self.u(t)
        disc = 1.0 - u * np.asarray(x) ** 2
        root = np.sqrt(np.where(disc >= 0.0, disc, np.nan))
        return (1.0 + root) / u - 1.0, (1.0 - root) / u - 1.0


def ellipse_residual(q, t: float, law: EllipseLaw) -> float:
    """Distance |z - z_pm(x, t)| to the nearer ellipse branch.

    Raises :class:`OffEllipseError` when x lies beyond the ellipse tip
    (1 - u x^2 < 0), i.e. outside the reachable set.
    """
    q = bloch.as_bloch(q)
    u = float(law.u(t))
    disc = 1.0 - u * q.x * q.x
    if disc < 0.0:
        raise OffEllipseError(
            f"state x = {q.x} beyond the ellipse tip at t = {t} (1 - u x^2 = {disc:.3e})"
        )
    root = math.sqrt(disc)
    z_plus = (1.0 + root) / u - 1.0
    z_minus = (1.0 - root) / u - 1.0
    return min(abs(q.z - z_plus), abs(q.z - z_minus))


# --- serialization ----------------------------------------------------------

_READOUT_COLUMNS = {
    Scheme.PHOTODETECT: ("click",),
    Scheme.HETERODYNE: ("r_i", "r_q"),
    Scheme.HOMODYNE: ("r",),
    Scheme.HOMODYNE_INEFFICIENT: ("r",),
}


def _fmt(v: float, exact: bool) -> str:
    return float(v).hex() if exact else repr(float(v))


def _parse(s: str) -> float:
    return float.fromhex(s) if s.startswith(("0x", "-0x")) else float(s)


def save_ensemble(ens: Ensemble, directory, exact_floats: bool = True) -> Path:
    """Write trajectories.csv plus an ensemble.json sidecar.

    One CSV row per (trajectory, stored time); the last row of each
    trajectory has empty readout fields.  With ``exact_floats`` the state
    columns use hexadecimal float notation, making the round trip through
    :func:`load_ensemble` bit-exact.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ro_cols = _READOUT_COLUMNS[ens.cfg.scheme]
    csv_path = directory / "trajectories.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("traj", "t", "x", "y", "z") + ro_cols)
        for i in range(len(ens)):
            idx = int(ens.indices[i])
            for k, t in enumerate(ens.times):
                row = [idx, _fmt(t, exact_floats)]
                row += [_fmt(v, exact_floats) for v in ens.states[i, k]]
                if ens.readouts is not None and k < len(ens.times) - 1:
                    if ens.cfg.scheme is Scheme.PHOTODETECT:
                        row += [str(int(ens.readouts[i, k, 0]))]
                    else:
                        row += [_fmt(v, exact_floats) for v in ens.readouts[i, k]]
                else:
                    row += [""] * len(ro_cols)
                writer.writerow(row)
    sidecar = {
        "config": config_dict(ens.cfg),
        "q0": [ens.q0.x, ens.q0.y, ens.q0.z],
        "t_final": ens.t_final,
        "store_every": ens.store_every,
        "master_seed": ens.master_seed,
        "n": len(ens),
        "has_readouts": ens.readouts is not None,
        "exact_floats": exact_floats,
        "meta": _jsonable(ens.meta),
    }
    with open(directory / "ensemble.json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
    return csv_path


def load_ensemble(directory) -> Ensemble:
    """Reconstruct an ensemble written by :func:`save_ensemble`."""
    directory = Path(directory)
    with open(directory / "ensemble.json") as fh:
        sidecar = json.load(fh)
    cfg = config_from_dict(sidecar["config"])
    rows: dict[int, list] = {}
    with open(directory / "trajectories.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ro_cols = header[5:]
        for row in reader:
            rows.setdefault(int(row[0]), []).append(row[1:])
    indices = np.array(sorted(rows), dtype=np.int64)
    k = len(rows[int(indices[0])])
    times = np.array([_parse(r[0]) for r in rows[int(indices[0])]])
    states = np.empty((len(indices), k, 3))
    readouts = None
    if sidecar["has_readouts"]:
        readouts = np.empty((len(indices), k - 1, len(ro_cols)))
    for i, idx in enumerate(indices):
        for j, r in enumerate(rows[int(idx)]):
            states[i, j] = [_parse(r[1]), _parse(r[2]), _parse(r[3])]
            if readouts is not None and j < k - 1:
                readouts[i, j] = [_parse(v) for v in r[4 : 4 + len(ro_cols)]]
    return Ensemble(
        cfg=cfg,
        q0=BlochVector(*sidecar["q0"]),
        t_final=sidecar["t_final"],
        store_every=sidecar["store_every"],
        master_seed=sidecar["master_seed"],
        indices=indices,
        times=times,
        states=states,
        readouts=readouts,
        meta=sidecar.get("meta", {}),
    )


def config_dict(cfg: SchemeConfig) -> dict:
    return {
        "scheme": cfg.scheme.value,
        "gamma": cfg.gamma,
        "dt": cfg.dt,
        "theta": cfg.theta,
        "eta": cfg.eta,
        "omega": cfg.omega,
        "delta": cfg.delta,
    }


def config_from_dict(d: dict) -> SchemeConfig:
    return SchemeConfig(
        scheme=Scheme(d["scheme"]),
        gamma=d["gamma"],
        dt=d["dt"],
        theta=d.get("theta", 0.0),
        eta=d.get("eta", 1.0),
        omega=d.get("omega", 0.0),
        delta=d.get("delta", 0.0),
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
