"""Topology generation, task sampling and uplink data rates.

Units used throughout the package:

* data sizes in bits (1 MB = 8e6 bits), work in CPU cycles (1 "GHz" of
  work = 1e9 cycles), capacities in cycles/s, bandwidth in Hz;
* transmit power and noise power in milliwatts (only their ratio enters
  the rate formula), energies in joules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

MB = 8e6
GCYCLES = 1e9

MBS = "MBS"
SBS = "SBS"


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    path_loss_exponent: float = 4.0
    noise_mw: float = 1e-11
    gain_model: str = "unit"  # "unit" or "rayleigh" (exponential power fading)
    sbs_bandwidth: float = 5e6
    mbs_bandwidth: float = 10e6
    # how simultaneous MBS uploaders share b^m: "split" (b^m / k) or "full"
    mbs_sharing: str = "split"

    def __post_init__(self):
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be > 0")
        if self.noise_mw <= 0:
            raise ValueError("noise_mw must be > 0")
        if self.sbs_bandwidth <= 0 or self.mbs_bandwidth <= 0:
            raise ValueError("bandwidths must be > 0")
        if self.gain_model not in ("unit", "rayleigh"):
            raise ValueError(f"unknown gain_model {self.gain_model!r}")
        if self.mbs_sharing not in ("split", "full"):
            raise ValueError(f"unknown mbs_sharing {self.mbs_sharing!r}")

    def scaled_bandwidth(self, factor: float) -> "ChannelParams":
        return replace(self, sbs_bandwidth=self.sbs_bandwidth * factor,
                       mbs_bandwidth=self.mbs_bandwidth * factor)


@dataclass(frozen=True)
class Station:
    id: int
    kind: str
    position: tuple[float, float]
    coverage_radius: float
    capacity: float  # cycles/s
    energy_per_cycle: float  # J/cycle

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError("station capacity must be > 0")
        if self.energy_per_cycle < 0:
            raise ValueError("energy_per_cycle must be >= 0")
        if self.kind == SBS and not self.coverage_radius > 0:
            raise ValueError("SBS coverage radius must be > 0")


@dataclass(frozen=True)
class Device:
    id: int
    position: tuple[float, float]
    power_mw: float = 100.0
    local_capacity: float = 0.5e9
    switched_capacitance: float = 6e-27

    def __post_init__(self):
        if self.power_mw <= 0 or self.local_capacity <= 0 or self.switched_capacitance <= 0:
            raise ValueError("device power, local capacity and capacitance must be > 0")


@dataclass(frozen=True)
class TaskSpec:
    bits: float
    cycles: float
    deadline: float

    def __post_init__(self):
        if self.bits < 0 or self.cycles <= 0 or self.deadline <= 0:
            raise ValueError(f"invalid task {self}")


@dataclass(frozen=True)
class TopologyConfig:
    n_sbs: int = 10
    n_devices: int = 100
    mbs_radius: float = 500.0
    sbs_radius: float | list[float] = 80.0
    placement: str = "uniform"  # "uniform" or "hotspot"
    hotspot_fraction: float = 0.5
    mbs_capacity: float = 50e9
    sbs_capacity: float = 10e9
    energy_per_cycle: float = 1e-9
    device_power_mw: float = 100.0
    device_capacity: float = 0.5e9
    switched_capacitance: float = 6e-27
    max_retries: int = 10_000

    def sbs_radii(self) -> list[float]:
        if isinstance(self.sbs_radius, (list, tuple)):
            if len(self.sbs_radius) != self.n_sbs:
                raise TopologyError("sbs_radius list length must equal n_sbs")
            return [float(r) for r in self.sbs_radius]
        return [float(self.sbs_radius)] * self.n_sbs


@dataclass(frozen=True)
class Topology:
    stations: tuple[Station, ...]
    devices: tuple[Device, ...]
    distances: np.ndarray  # (N, M+1), column 0 is the MBS
    gains: np.ndarray  # (N, M+1)

    def __post_init__(self):
        self.distances.setflags(write=False)
        self.gains.setflags(write=False)

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def n_sbs(self) -> int:
        return len(self.stations) - 1

    @property
    def capacities(self) -> np.ndarray:
        """Station capacities ordered [MBS, SBS_1..SBS_M]."""
        return np.array([s.capacity for s in self.stations])

    @property
    def coverage_mask(self) -> np.ndarray:
        """(N, M) boolean: device i may use SBS j (strict r < gamma)."""
        radii = np.array([s.coverage_radius for s in self.stations[1:]])
        return self.distances[:, 1:] < radii[None, :]

    def with_gains(self, gains: np.ndarray) -> "Topology":
        gains = np.array(gains, dtype=float)
        if gains.shape != self.distances.shape:
            raise ValueError("gain matrix shape mismatch")
        return replace(self, gains=gains)


def _uniform_in_disc(rng, center, radius, n=None):
    # sqrt for area-uniform radius
    rho = radius * np.sqrt(rng.random(n))
    phi = 2 * np.pi * rng.random(n)
    return center[0] + rho * np.cos(phi), center[1] + rho * np.sin(phi)


def build_topology(cfg: TopologyConfig, seed: int) -> Topology:
    """Place one MBS at the origin, M non-overlapping SBSs and N devices."""
    if cfg.n_devices < 1:
        raise TopologyError("topology needs at least one device")
    if cfg.n_sbs < 0:
        raise TopologyError("n_sbs must be >= 0")
    rng = np.random.default_rng(seed)
    radii = cfg.sbs_radii()
    if any(r <= 0 for r in radii):
        raise TopologyError("SBS radii must be > 0")

    centers: list[tuple[float, float]] = []
    for j, rad in enumerate(radii):
        if rad >= cfg.mbs_radius:
            raise TopologyError(f"SBS {j + 1} radius {rad} does not fit in the MBS cell")
        for _ in range(cfg.max_retries):
            x, y = _uniform_in_disc(rng, (0.0, 0.0), cfg.mbs_radius - rad)
            ok = all(math.hypot(x - cx, y - cy) >= rad + radii[k]
                     for k, (cx, cy) in enumerate(centers))
            if ok:
                centers.append((float(x), float(y)))
                break
        else:
            raise TopologyError(
                f"could not place SBS {j + 1} without coverage overlap "
                f"after {cfg.max_retries} retries")

    stations = [Station(0, MBS, (0.0, 0.0), math.inf, cfg.mbs_capacity, cfg.energy_per_cycle)]
    for j, (c, rad) in enumerate(zip(centers, radii), start=1):
        stations.append(Station(j, SBS, c, rad, cfg.sbs_capacity, cfg.energy_per_cycle))

    if cfg.placement == "uniform":
        xs, ys = _uniform_in_disc(rng, (0.0, 0.0), cfg.mbs_radius, cfg.n_devices)
    elif cfg.placement == "hotspot":
        xs = np.empty(cfg.n_devices)
        ys = np.empty(cfg.n_devices)
        for i in range(cfg.n_devices):
            if centers and rng.random() < cfg.hotspot_fraction:
                k = int(rng.integers(len(centers)))
                x, y = _uniform_in_disc(rng, centers[k], radii[k])
            else:
                x, y = _uniform_in_disc(rng, (0.0, 0.0), cfg.mbs_radius)
            xs[i], ys[i] = x, y
    else:
        raise TopologyError(f"unknown placement rule {cfg.placement!r}")

    devices = tuple(
        Device(i, (float(xs[i]), float(ys[i])), cfg.device_power_mw,
               cfg.device_capacity, cfg.switched_capacitance)
        for i in range(cfg.n_devices))
    dev_pos = np.column_stack([xs, ys])
    st_pos = np.array([s.position for s in stations])
    dist = np.linalg.norm(dev_pos[:, None, :] - st_pos[None, :, :], axis=2)
    return Topology(tuple(stations), devices, dist, np.ones_like(dist))


def draw_gains(topology: Topology, chan: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Channel power gains for every device/station pair."""
    shape = topology.distances.shape
    if chan.gain_model == "unit":
        return np.ones(shape)
    return rng.exponential(1.0, size=shape)


def candidate_stations(device_id: int, topology: Topology) -> set[int]:
    if not 0 <= device_id < topology.n_devices:
        raise KeyError(f"unknown device id {device_id}")
    cover = topology.coverage_mask[device_id]
    return {0} | {j + 1 for j in np.flatnonzero(cover)}


def _received_power(topology: Topology, chan: ChannelParams, i: int, station: int) -> float:
    r = topology.distances[i, station]
    if r <= 0:
        raise ValueError(f"device {i} is co-located with station {station}")
    p = topology.devices[i].power_mw
    return p * topology.gains[i, station] * r ** (-chan.path_loss_exponent)


def shannon_rate(bandwidth: float, signal_mw: float, noise_mw: float,
                 interference_mw: float = 0.0) -> float:
    """b * log2(1 + S / (noise + I)); all powers in mW."""
    return bandwidth * math.log2(1.0 + signal_mw / (noise_mw + interference_mw))


def uplink_rate_sbs(i: int, j: int, topology: Topology, chan: ChannelParams,
                    interferers=()) -> float:
    """Rate of device ``i`` to SBS ``j`` (1-based station index).

    ``interferers`` is an iterable of (device, serving_station) pairs; each
    one transmitting to an SBS other than ``j`` adds its received power at
    ``j`` to the denominator.  MBS uploaders are orthogonal and ignored.
    """
    if not 1 <= j <= topology.n_sbs:
        raise ValueError(f"station {j} is not an SBS")
    signal = _received_power(topology, chan, i, j)
    interference = 0.0
    for k, serving in interferers:
        if k == i or serving == j or serving == 0:
            continue
        interference += _received_power(topology, chan, k, j)
    return shannon_rate(chan.sbs_bandwidth, signal, chan.noise_mw, interference)


def uplink_rate_mbs(i: int, topology: Topology, chan: ChannelParams) -> float:
    signal = _received_power(topology, chan, i, 0)
    return shannon_rate(chan.mbs_bandwidth, signal, chan.noise_mw)


def rate_matrices(topology: Topology, chan: ChannelParams, serving=None, sharers=None):
    """Vectorised rates for every device.

    ``serving`` (length N, station index or -1 for silent) selects which
    devices currently transmit to which SBS; it defines the interferer set.
    ``sharers`` is the number of simultaneous MBS uploaders a device shares
    b^m with (array or scalar, >= 1); ignored when sharing is "full".
    Returns (rs, rm): rs is (N, M) with zeros outside coverage, rm is (N,).
    """
    n, m1 = topology.distances.shape
    if np.any(topology.distances <= 0):
        raise ValueError("device co-located with a station")
    p = np.array([d.power_mw for d in topology.devices])
    rx = p[:, None] * topology.gains * topology.distances ** (-chan.path_loss_exponent)

    interf = np.zeros((n, m1 - 1))
    if serving is not None and m1 > 1:
        serving = np.asarray(serving)
        onehot = serving[:, None] == np.arange(1, m1)[None, :]
        tx = onehot.any(axis=1)
        rx_s = rx[:, 1:]
        total = (rx_s * tx[:, None]).sum(axis=0)
        same_cell = (rx_s * onehot).sum(axis=0)
        own = rx_s * (tx[:, None] & ~onehot)
        interf = np.maximum(total[None, :] - same_cell[None, :] - own, 0.0)

    rs = chan.sbs_bandwidth * np.log2(1.0 + rx[:, 1:] / (chan.noise_mw + interf))
    rs = np.where(topology.coverage_mask, rs, 0.0)

    bm = chan.mbs_bandwidth
    if chan.mbs_sharing == "split" and sharers is not None:
        bm = bm / np.maximum(np.asarray(sharers, dtype=float), 1.0)
    rm = bm * np.log2(1.0 + rx[:, 0] / chan.noise_mw)
    return rs, rm


# ---------------------------------------------------------------- tasks

TASK_TYPES = {
    1: (50 * MB, 5 * GCYCLES),
    2: (50 * MB, 0.5 * GCYCLES),
    3: (5 * MB, 5 * GCYCLES),
}


@dataclass(frozen=True)
class TaskDistConfig:
    bits_mb: tuple[float, float] = (5.0, 50.0)
    gcycles: tuple[float, float] = (0.5, 5.0)
    deadline: float = 1.0
    # "uniform" draws from the ranges; 1/2/3 use a fixed task type;
    # "mixed" draws a type uniformly per device
    kind: str | int = "uniform"
    types: tuple[int, ...] = field(default=(1, 2, 3))


def sample_tasks(n: int, dist: TaskDistConfig, seed) -> list[TaskSpec]:
    lo_d, hi_d = dist.bits_mb
    lo_c, hi_c = dist.gcycles
    if lo_d > hi_d or lo_c > hi_c:
        raise ValueError("inverted task range")
    if lo_d < 0 or lo_c <= 0 or dist.deadline <= 0:
        raise ValueError("task ranges must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    kind = dist.kind
    if kind == "uniform":
        bits = rng.uniform(lo_d, hi_d, n) * MB
        cyc = rng.uniform(lo_c, hi_c, n) * GCYCLES
    elif kind == "mixed":
        picks = rng.choice(np.array(dist.types), size=n)
        bits = np.array([TASK_TYPES[int(t)][0] for t in picks])
        cyc = np.array([TASK_TYPES[int(t)][1] for t in picks])
    elif int(kind) in TASK_TYPES:
        b, c = TASK_TYPES[int(kind)]
        bits = np.full(n, b)
        cyc = np.full(n, c)
    else:
        raise ValueError(f"unknown task kind {kind!r}")
    return [TaskSpec(float(b), float(c), float(dist.deadline)) for b, c in zip(bits, cyc)]
