"""Scenario configuration, topologies and channel realizations.

Distances are in kilometres, powers are linear Watts.  Quantities given in
dBm/dB are converted once, when a configuration is loaded.

Random numbers come from numpy's counter-based ``Philox`` bit generator keyed
by a ``SeedSequence`` built from ``(seed, *stream)``, see :func:`make_rng`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

__all__ = [
    "ScenarioConfig", "Topology", "ChannelSet", "make_rng",
    "db_to_lin", "lin_to_db", "dbm_to_watt", "watt_to_dbm",
    "path_loss_los", "path_loss_nlos", "noise_power",
    "draw_topology", "draw_channels", "draw_iid_channels", "generate",
]

THERMAL_NOISE_DBM_HZ = -174.0
MIN_DISTANCE_KM = 1e-3


# Unit conversions ---------------------------------------------------------

def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watt(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(x_w):
    return 10.0 * np.log10(np.asarray(x_w, dtype=float)) + 30.0


def _check_distance(d_km):
    d = np.asarray(d_km, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be positive")
    return d


def path_loss_los(d_km):
    """Line-of-sight path loss in dB for a BS-user distance in km."""
    return 103.8 + 20.9 * np.log10(_check_distance(d_km))


def path_loss_nlos(d_km):
    """Non-line-of-sight path loss in dB for a user-user distance in km."""
    return 145.4 + 37.5 * np.log10(_check_distance(d_km))


def noise_power(bandwidth_hz, nf_db):
    """Receiver noise power.

    Returns
    -------
    (dbm, watt) : tuple of float
    """
    if not bandwidth_hz > 0:
        raise ValueError("bandwidth must be positive")
    dbm = THERMAL_NOISE_DBM_HZ + 10.0 * np.log10(bandwidth_hz) + nf_db
    return float(dbm), float(dbm_to_watt(dbm))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent, replayable generator for ``(seed, *stream)``."""
    ss = np.random.SeedSequence([int(seed), *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# Configuration ------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and algorithmic parameters of one experiment.

    Powers are linear Watts, ``sigma_si2`` is the linear residual
    self-interference ratio.  Use :meth:`from_dict` to ingest a JSON
    document with ``*_dbm`` / ``*_db`` fields.
    """

    n_tx: int = 4
    n_rx: int = 2
    k_dl: int = 2
    k_ul: int = 2
    p_bs: float = float(dbm_to_watt(26.0))
    q_bar: float = float(dbm_to_watt(23.0))
    sigma_si2: float = 1e-10
    rician_k: float = 1.0
    bandwidth_hz: float = 10e6
    nf_dl_db: float = 9.0
    nf_bs_db: float = 5.0
    cell_radius_km: float = 0.1
    channel_mode: str = "realistic"
    seed: int = 0
    # fixed user layout (km); None means random drops
    dl_positions: Optional[tuple] = None
    ul_positions: Optional[tuple] = None
    # iterative algorithms
    epsilon: float = 1e-5
    window: int = 10
    max_iter: int = 500
    restarts: int = 3
    n_random: int = 1000
    # barrier solver
    gap_tol: float = 1e-7
    newton_tol: float = 1e-9
    barrier_mu: float = 10.0
    max_newton: int = 200

    def __post_init__(self):
        for name in ("n_tx", "n_rx"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("k_dl", "k_ul"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.k_dl + self.k_ul < 1:
            raise ValueError("at least one user is required")
        if not (self.p_bs > 0 and self.q_bar > 0):
            raise ValueError("power budgets must be positive")
        if self.sigma_si2 < 0 or self.rician_k < 0:
            raise ValueError("sigma_si2 and rician_k must be nonnegative")
        if not self.cell_radius_km > 0:
            raise ValueError("cell radius must be positive")
        if self.channel_mode not in ("iid", "realistic"):
            raise ValueError(f"unknown channel_mode {self.channel_mode!r}")

    @property
    def q_bar_vec(self) -> np.ndarray:
        return np.full(self.k_ul, float(self.q_bar))

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("dl_positions", "ul_positions"):
            if d[key] is not None:
                d[key] = [list(map(float, p)) for p in d[key]]
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        doc = dict(doc)
        doc.pop("description", None)
        conv = {"p_bs_dbm": ("p_bs", dbm_to_watt), "q_bar_dbm": ("q_bar", dbm_to_watt),
                "sigma_si2_db": ("sigma_si2", db_to_lin)}
        for key, (target, fn) in conv.items():
            if key in doc:
                if target in doc:
                    raise ValueError(f"both {key} and {target} given")
                val = doc.pop(key)
                doc[target] = 0.0 if val is None else float(fn(val))
        for key in ("dl_positions", "ul_positions"):
            if doc.get(key) is not None:
                doc[key] = tuple(tuple(map(float, p)) for p in doc[key])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def iid_config(**kw) -> ScenarioConfig:
    """The i.i.d. benchmark setting: unit noise, 20 dBW budgets, -30 dB SI."""
    base = dict(channel_mode="iid", p_bs=100.0, q_bar=100.0, sigma_si2=1e-3)
    base.update(kw)
    return ScenarioConfig(**base)


# Topology and channels -------------------------------------------------------

@dataclass(frozen=True)
class Topology:
    """User positions (km) relative to the BS at the origin."""

    dl_positions: np.ndarray
    ul_positions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dl_positions", _frozen(np.reshape(self.dl_positions, (-1, 2)), float))
        object.__setattr__(self, "ul_positions", _frozen(np.reshape(self.ul_positions, (-1, 2)), float))

    @property
    def d_dl(self):
        return np.maximum(np.hypot(*self.dl_positions.T), MIN_DISTANCE_KM)

    @property
    def d_ul(self):
        return np.maximum(np.hypot(*self.ul_positions.T), MIN_DISTANCE_KM)

    @property
    def d_cci(self):
        """(K_U, K_D) uplink-to-downlink user distances."""
        diff = self.ul_positions[:, None, :] - self.dl_positions[None, :, :]
        return np.maximum(np.hypot(diff[..., 0], diff[..., 1]), MIN_DISTANCE_KM)


@dataclass(frozen=True)
class ChannelSet:
    """One realization of every channel in the cell.

    Rows of ``h_dl`` (K_D, N_T) and ``h_ul`` (K_U, N_R) are the per-user
    vectors; ``g_cci[j, i]`` couples uplink user j into downlink user i and
    ``h_si`` is the (N_R, N_T) residual self-interference matrix.
    ``kappa_dl``/``kappa_ul`` keep the large-scale gains used in the draw.
    """

    h_dl: np.ndarray
    h_ul: np.ndarray
    g_cci: np.ndarray
    h_si: np.ndarray
    sigma_n2_dl: float
    sigma_n2_bs: float
    kappa_dl: np.ndarray = field(default=None)
    kappa_ul: np.ndarray = field(default=None)

    def __post_init__(self):
        h_dl = np.atleast_2d(np.asarray(self.h_dl, dtype=complex))
        h_ul = np.asarray(self.h_ul, dtype=complex)
        h_si = np.atleast_2d(np.asarray(self.h_si, dtype=complex))
        n_rx, n_tx = h_si.shape
        h_dl = h_dl.reshape(-1, n_tx)
        h_ul = h_ul.reshape(-1, n_rx)
        k_dl, k_ul = h_dl.shape[0], h_ul.shape[0]
        g = np.asarray(self.g_cci, dtype=complex).reshape(k_ul, k_dl)
        if not (self.sigma_n2_dl > 0 and self.sigma_n2_bs > 0):
            raise ValueError("noise powers must be positive")
        for a in (h_dl, h_ul, g, h_si):
            if not np.all(np.isfinite(a)):
                raise ValueError("channel entries must be finite")
        kd = np.ones(k_dl) if self.kappa_dl is None else np.asarray(self.kappa_dl, float)
        ku = np.ones(k_ul) if self.kappa_ul is None else np.asarray(self.kappa_ul, float)
        if kd.shape != (k_dl,) or ku.shape != (k_ul,):
            raise ValueError("large-scale gains do not match user counts")
        for name, val in (("h_dl", h_dl), ("h_ul", h_ul), ("g_cci", g), ("h_si", h_si)):
            object.__setattr__(self, name, _frozen(val))
        object.__setattr__(self, "kappa_dl", _frozen(kd, float))
        object.__setattr__(self, "kappa_ul", _frozen(ku, float))
        object.__setattr__(self, "sigma_n2_dl", float(self.sigma_n2_dl))
        object.__setattr__(self, "sigma_n2_bs", float(self.sigma_n2_bs))

    @property
    def n_tx(self):
        return self.h_si.shape[1]

    @property
    def n_rx(self):
        return self.h_si.shape[0]

    @property
    def k_dl(self):
        return self.h_dl.shape[0]

    @property
    def k_ul(self):
        return self.h_ul.shape[0]

    def replace(self, **changes) -> "ChannelSet":
        return dataclasses.replace(self, **changes)

    def without_cci(self) -> "ChannelSet":
        return self.replace(g_cci=np.zeros_like(self.g_cci))

    def normalized(self, p_bs, q_bar):
        """Channels in units where both noise powers and all budgets are one.

        SINRs are invariant under this rescaling; designs map back through
        ``Q = p_bs * Q_n`` and ``q = q_bar * q_n``.
        """
        q_bar = np.broadcast_to(np.asarray(q_bar, float), (self.k_ul,))
        s_dl, s_bs = self.sigma_n2_dl, self.sigma_n2_bs
        return self.replace(
            h_dl=self.h_dl * np.sqrt(p_bs / s_dl),
            h_ul=self.h_ul * np.sqrt(q_bar / s_bs)[:, None],
            g_cci=self.g_cci * np.sqrt(q_bar / s_dl)[:, None],
            h_si=self.h_si * np.sqrt(p_bs / s_bs),
            sigma_n2_dl=1.0, sigma_n2_bs=1.0,
        )


def draw_topology(config: ScenarioConfig, rng: np.random.Generator) -> Topology:
    """Drop every user uniformly over the disk of radius ``cell_radius_km``."""
    def drop(k):
        rad = config.cell_radius_km * np.sqrt(rng.random(k))
        ang = 2.0 * np.pi * rng.random(k)
        return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])

    return Topology(drop(config.k_dl), drop(config.k_ul))


def fixed_topology(config: ScenarioConfig) -> Optional[Topology]:
    if config.dl_positions is None and config.ul_positions is None:
        return None
    return Topology(config.dl_positions or np.zeros((0, 2)),
                    config.ul_positions or np.zeros((0, 2)))


def _draw_si(config, rng, h_bar=None):
    # the Gaussian part is always drawn so the stream layout
    # does not depend on sigma_si2
    z = _crandn(rng, config.n_rx, config.n_tx)
    if h_bar is None:
        h_bar = np.ones((config.n_rx, config.n_tx))
    k = config.rician_k
    mean = np.sqrt(config.sigma_si2 * k / (1.0 + k)) * h_bar
    return mean + np.sqrt(config.sigma_si2 / (1.0 + k)) * z


def draw_channels(config: ScenarioConfig, topology: Topology,
                  rng: np.random.Generator, h_bar=None) -> ChannelSet:
    """Path-loss scaled Rayleigh links plus a Rician SI channel."""
    if topology.dl_positions.shape[0] != config.k_dl or topology.ul_positions.shape[0] != config.k_ul:
        raise ValueError("topology does not match the configured user counts")
    kappa_dl = db_to_lin(-path_loss_los(topology.d_dl))
    kappa_ul = db_to_lin(-path_loss_los(topology.d_ul))
    kappa_cci = db_to_lin(-path_loss_nlos(topology.d_cci))
    h_dl = np.sqrt(kappa_dl)[:, None] * _crandn(rng, config.k_dl, config.n_tx)
    h_ul = np.sqrt(kappa_ul)[:, None] * _crandn(rng, config.k_ul, config.n_rx)
    g = np.sqrt(kappa_cci) * _crandn(rng, config.k_ul, config.k_dl)
    h_si = _draw_si(config, rng, h_bar)
    _, s_dl = noise_power(config.bandwidth_hz, config.nf_dl_db)
    _, s_bs = noise_power(config.bandwidth_hz, config.nf_bs_db)
    return ChannelSet(h_dl, h_ul, g, h_si, s_dl, s_bs, kappa_dl, kappa_ul)


def draw_iid_channels(config: ScenarioConfig, rng: np.random.Generator, h_bar=None) -> ChannelSet:
    """Unit-variance i.i.d. links, unit noise, no path loss."""
    h_dl = _crandn(rng, config.k_dl, config.n_tx)
    h_ul = _crandn(rng, config.k_ul, config.n_rx)
    g = _crandn(rng, config.k_ul, config.k_dl)
    h_si = _draw_si(config, rng, h_bar)
    return ChannelSet(h_dl, h_ul, g, h_si, 1.0, 1.0)


def generate(config: ScenarioConfig, rng: np.random.Generator,
             topology: Optional[Topology] = None) -> ChannelSet:
    """Draw one realization according to ``config.channel_mode``.

    In realistic mode the topology is, in order of preference, the given
    one, the configured fixed layout, or a fresh random drop from ``rng``.
    """
    if config.channel_mode == "iid":
        return draw_iid_channels(config, rng)
    if topology is None:
        topology = fixed_topology(config) or draw_topology(config, rng)
    return draw_channels(config, topology, rng)


def config_of(channels: ChannelSet, base: Optional[ScenarioConfig] = None, **kw) -> ScenarioConfig:
    """A config whose dimensions match ``channels`` (other fields from ``base``)."""
    base = base or ScenarioConfig()
    return base.replace(n_tx=channels.n_tx, n_rx=channels.n_rx,
                        k_dl=channels.k_dl, k_ul=channels.k_ul, **kw)


def as_jsonable(obj: Any):
    """Recursively convert numpy values for json.dumps."""
    if isinstance(obj, dict):
        return {k: as_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [as_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def user_positions(points: Sequence[Sequence[float]]) -> tuple:
    return tuple(tuple(map(float, p)) for p in points)
