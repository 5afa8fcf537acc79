"""Channel data model, per-user SVD decomposition and scenario generation.

A system carries ``num_users`` receivers.  User ``k`` owns an
``rx[k] x num_tx`` channel block ``H_k``; stacking the blocks gives the
aggregate channel.  Each user transports ``layers[k]`` spatial layers,
carved out of ``H_k`` by a reduced SVD.  Layers are ordered user-major,
singular values descending inside each user.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConfigError,
    DimensionError,
    RankDeficiencyError,
    SelectionError,
)
from .numerics import (
    RANK_TOLERANCE,
    as_complex_matrix,
    complex_normal,
    reduced_svd,
)

__all__ = [
    "SystemDims",
    "ChannelSet",
    "ChannelDecomposition",
    "ScenarioConfig",
    "decompose",
    "generate_scenario",
    "calibrate_noise",
    "save_channels",
    "load_channels",
]

# Path power profile of the synthetic generator: the leading
# DOMINANT_PATHS paths decay slowly (PATH_POWER_DECAY per path) and the
# remainder drops off steeply (TAIL_POWER_DECAY per path).  Slow decay
# up front keeps the singular values a user actually transmits on close
# together; the steep tail keeps almost all channel energy inside the
# served subspace so residual-path interference stays negligible even
# when thermal noise is low.
PATH_POWER_DECAY = 0.1
TAIL_POWER_DECAY = 6.0
DOMINANT_PATHS = 2

# Transmit-side scattering geometry.  Every realization sees the same
# fixed landscape of scatterer clusters, placed at evenly spaced
# beamspace bins of the array; only the users move between seeds.  A
# user's path direction mixes the cluster's central beam (weight
# SHARED_PATH_WEIGHT) with a random combination of the beams within
# SCATTER_SPREAD_BINS bins of it, the local angular spread each user
# sees on its own line of sight.  The shared part couples users'
# subspaces the way co-located clusters do, which is the regime where
# regularization choices actually separate; fully independent
# directions in dimension num_tx would be nearly orthogonal and make
# the correlation cap vacuous.
SHARED_PATH_WEIGHT = 0.55
SCATTER_SPREAD_BINS = 2

_DUMP_MAGIC = b"PRECHAN1"


@dataclass(frozen=True)
class SystemDims:
    """Array sizes of one downlink system.

    Attributes
    ----------
    num_tx : int
        Transmit antennas at the base station.
    rx : tuple of int
        Receive antennas per user.
    layers : tuple of int
        Spatial layers per user; ``layers[k] <= min(rx[k], num_tx)``.
    """

    num_tx: int
    rx: tuple
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "rx", tuple(int(r) for r in self.rx))
        object.__setattr__(self, "layers", tuple(int(l) for l in self.layers))
        if self.num_tx < 1:
            raise ConfigError(f"num_tx must be >= 1, got {self.num_tx}")
        if len(self.rx) != len(self.layers) or not self.rx:
            raise ConfigError("rx and layers must be equal-length, nonempty")
        for k, (r, l) in enumerate(zip(self.rx, self.layers)):
            if r < 1:
                raise ConfigError(f"rx[{k}] must be >= 1, got {r}")
            if not 1 <= l <= min(r, self.num_tx):
                raise ConfigError(
                    f"layers[{k}]={l} outside [1, min(rx={r}, num_tx={self.num_tx})]"
                )
        if self.total_layers > self.num_tx:
            raise ConfigError(
                f"total layers {self.total_layers} exceed num_tx {self.num_tx}"
            )

    @property
    def num_users(self) -> int:
        return len(self.rx)

    @property
    def total_rx(self) -> int:
        return sum(self.rx)

    @property
    def total_layers(self) -> int:
        return sum(self.layers)

    def layer_slice(self, k: int) -> slice:
        """Index range of user k's layers in the stacked layer order."""
        start = sum(self.layers[:k])
        return slice(start, start + self.layers[k])

    def rx_slice(self, k: int) -> slice:
        """Index range of user k's antennas in the stacked receive order."""
        start = sum(self.rx[:k])
        return slice(start, start + self.rx[k])


@dataclass(frozen=True)
class ChannelSet:
    """Per-user channel blocks for one realization."""

    dims: SystemDims
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(as_complex_matrix(b, f"blocks[{k}]") for k, b in enumerate(self.blocks))
        object.__setattr__(self, "blocks", blocks)
        if len(blocks) != self.dims.num_users:
            raise DimensionError(
                f"expected {self.dims.num_users} blocks, got {len(blocks)}"
            )
        for k, b in enumerate(blocks):
            want = (self.dims.rx[k], self.dims.num_tx)
            if b.shape != want:
                raise DimensionError(f"blocks[{k}] shape {b.shape} != {want}")

    @property
    def stacked(self) -> np.ndarray:
        """All user blocks stacked into one (total_rx, num_tx) matrix."""
        return np.vstack(self.blocks)


@dataclass(frozen=True)
class ChannelDecomposition:
    """Stacked reduced SVDs of the per-user channels.

    ``v`` has one orthonormal row per layer (user-major order), ``s``
    the matching singular values, and ``u_blocks[k]`` the left factors
    of user k with orthonormal rows, so that
    ``H_k = u_blocks[k]^H @ diag(s_k) @ v_k``.
    """

    dims: SystemDims
    u_blocks: tuple
    s: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.v.shape != (self.dims.total_layers, self.dims.num_tx):
            raise DimensionError(
                f"v shape {self.v.shape} != "
                f"({self.dims.total_layers}, {self.dims.num_tx})"
            )
        if self.s.shape != (self.dims.total_layers,):
            raise DimensionError(f"s shape {self.s.shape} bad")
        if len(self.u_blocks) != self.dims.num_users:
            raise DimensionError("u_blocks count mismatch")
        for k, u in enumerate(self.u_blocks):
            want = (self.dims.layers[k], self.dims.rx[k])
            if u.shape != want:
                raise DimensionError(f"u_blocks[{k}] shape {u.shape} != {want}")
        if np.any(self.s <= 0):
            raise RankDeficiencyError("all stacked singular values must be positive")

    @classmethod
    def from_blocks(cls, u_blocks, s_blocks, v_blocks) -> "ChannelDecomposition":
        """Assemble a decomposition from per-user (u, s, v) triplets."""
        u_blocks = tuple(as_complex_matrix(u, "u") for u in u_blocks)
        v_list = [as_complex_matrix(v, "v") for v in v_blocks]
        s_list = [np.asarray(s, dtype=float) for s in s_blocks]
        if not (len(u_blocks) == len(s_list) == len(v_list)):
            raise DimensionError("block lists must have equal length")
        dims = SystemDims(
            num_tx=v_list[0].shape[1],
            rx=tuple(u.shape[1] for u in u_blocks),
            layers=tuple(len(s) for s in s_list),
        )
        return cls(
            dims=dims,
            u_blocks=u_blocks,
            s=np.concatenate(s_list),
            v=np.vstack(v_list),
        )

    def s_block(self, k: int) -> np.ndarray:
        return self.s[self.dims.layer_slice(k)]

    def v_block(self, k: int) -> np.ndarray:
        return self.v[self.dims.layer_slice(k)]

    @property
    def user_of_layer(self) -> np.ndarray:
        """Owning user index of each stacked layer."""
        return np.repeat(np.arange(self.dims.num_users), self.dims.layers)

    @property
    def c_matrix(self) -> np.ndarray:
        """Cross-user correlation matrix ``V V^H - I``.

        Zero diagonal blocks within each user; off-diagonal blocks
        measure leakage between users' layer subspaces.
        """
        lt = self.dims.total_layers
        return self.v @ self.v.conj().T - np.eye(lt)


def decompose(channels: ChannelSet) -> ChannelDecomposition:
    """Reduced per-user SVD of every channel block.

    Raises :class:`RankDeficiencyError` if a block cannot support its
    configured number of layers.
    """
    u_blocks, s_blocks, v_blocks = [], [], []
    for k, h in enumerate(channels.blocks):
        keep = channels.dims.layers[k]
        r = reduced_svd(h, keep)
        if r.s[-1] <= RANK_TOLERANCE * r.s[0] or r.s[0] == 0:
            raise RankDeficiencyError(
                f"user {k}: channel rank below {keep} requested layers"
            )
        u_blocks.append(r.u)
        s_blocks.append(r.s)
        v_blocks.append(r.v)
    return ChannelDecomposition.from_blocks(u_blocks, s_blocks, v_blocks)


@dataclass(frozen=True)
class ScenarioConfig:
    """Synthetic multi-path scenario parameters.

    The generator draws a pool of candidate user channels, keeps a
    subset whose dominant right singular vectors are mutually weakly
    correlated, and optionally spreads per-user path loss.  All users
    share ``rx_per_user`` antennas and ``layers_per_user`` layers.
    """

    num_tx: int = 64
    num_users: int = 4
    rx_per_user: int = 16
    layers_per_user: int = 2
    num_paths: int = 6
    candidate_pool: int = 64
    corr_threshold: float = 0.3
    path_loss: str = "equal"
    path_loss_range_db: tuple = (-10.0, 10.0)
    seed: int = 0
    max_retries: int = 100

    def __post_init__(self):
        if self.num_users < 1:
            raise ConfigError("num_users must be >= 1")
        if self.candidate_pool < self.num_users:
            raise ConfigError("candidate_pool must cover num_users")
        if self.num_paths < self.layers_per_user:
            raise ConfigError(
                f"num_paths={self.num_paths} cannot support "
                f"{self.layers_per_user} layers per user"
            )
        if self.num_paths > min(self.rx_per_user, self.num_tx):
            raise ConfigError(
                f"num_paths={self.num_paths} exceeds the antenna count "
                f"available for orthonormal path frames "
                f"(min(rx_per_user, num_tx)={min(self.rx_per_user, self.num_tx)})"
            )
        if not 0 < self.corr_threshold <= 1:
            raise ConfigError("corr_threshold must be in (0, 1]")
        if self.path_loss not in ("equal", "varied"):
            raise ConfigError(f"unknown path_loss mode {self.path_loss!r}")
        lo, hi = self.path_loss_range_db
        if lo > hi:
            raise ConfigError("path_loss_range_db must be (lo, hi) with lo <= hi")
        if self.max_retries < 1:
            raise ConfigError("max_retries must be >= 1")
        _ = self.dims  # validates layer/antenna consistency

    @property
    def dims(self) -> SystemDims:
        return SystemDims(
            num_tx=self.num_tx,
            rx=(self.rx_per_user,) * self.num_users,
            layers=(self.layers_per_user,) * self.num_users,
        )


def _path_powers(num_paths: int) -> np.ndarray:
    """Two-slope path power profile, normalized to unit total."""
    lead = min(DOMINANT_PATHS, num_paths)
    powers = np.empty(num_paths)
    powers[:lead] = np.exp(-PATH_POWER_DECAY * np.arange(lead))
    if num_paths > lead:
        powers[lead:] = powers[lead - 1] * np.exp(
            -TAIL_POWER_DECAY * np.arange(1, num_paths - lead + 1)
        )
    return powers / powers.sum()


def _scatter_environment(num_tx: int, num_paths: int):
    """Fixed scatterer landscape for a given array and path count.

    Clusters sit at evenly spaced beamspace bins of a uniform linear
    array.  Returns ``(centers, surroundings)``: ``centers`` holds the
    central steering vector of each cluster as columns, and
    ``surroundings[i]`` the steering vectors within
    ``SCATTER_SPREAD_BINS`` bins of cluster i.  Deterministic, no
    randomness; the landscape is part of the scenario definition.
    """
    t = np.arange(num_tx)

    def beam(b):
        return np.exp(-2j * np.pi * t * (b % num_tx) / num_tx) / np.sqrt(num_tx)

    bins = [(i * num_tx) // num_paths for i in range(num_paths)]
    centers = np.stack([beam(b) for b in bins], axis=1)
    surroundings = [
        np.stack(
            [beam(b + d) for d in range(-SCATTER_SPREAD_BINS, SCATTER_SPREAD_BINS + 1)],
            axis=1,
        )
        for b in bins
    ]
    return centers, surroundings


def _draw_candidate(rng, config: ScenarioConfig, environment) -> np.ndarray:
    """One multi-path channel block, unit Frobenius norm.

    Receive and transmit path directions are orthonormal frames, so the
    block's singular values equal the path amplitude profile exactly.
    Each transmit direction mixes the cluster's central beam with a
    random unit vector from the beams around it; the shared central
    part couples users together, the local part makes each user's view
    of the cluster its own.  Unit Frobenius norm keeps squared singular
    values at O(1), so the scalar ridge built from the calibrated noise
    level lands between the matching and inverting regimes across the
    usual SINR grid instead of swamping the unit-scale layer-row Gram.
    """
    centers, surroundings = environment
    powers = _path_powers(config.num_paths)
    a, _ = np.linalg.qr(complex_normal(rng, (config.rx_per_user, config.num_paths), 1.0))
    own = np.empty((config.num_tx, config.num_paths), dtype=complex)
    for i, basis in enumerate(surroundings):
        v = basis @ complex_normal(rng, (basis.shape[1],), 1.0)
        own[:, i] = v / np.linalg.norm(v)
    mixed = (
        np.sqrt(1.0 - SHARED_PATH_WEIGHT) * own
        + np.sqrt(SHARED_PATH_WEIGHT) * centers
    )
    b, _ = np.linalg.qr(mixed)
    return (a * np.sqrt(powers)) @ b.conj().T


def _dominant_direction(h: np.ndarray) -> np.ndarray:
    return reduced_svd(h, keep=1).v[0]


def generate_scenario(config: ScenarioConfig) -> ChannelSet:
    """Draw one channel realization satisfying the correlation cap.

    The scatterer landscape is fixed by the array geometry; each seed
    only redraws user placements within it, so seed-to-seed variation
    reflects user geometry rather than a new world per draw.  Candidates
    are scanned greedily in draw order; a candidate joins the selection
    when the squared correlation of its dominant direction with every
    already-selected user stays at or below ``corr_threshold``.  If a
    pool yields fewer than ``num_users`` compatible candidates, the next
    seed is tried, up to ``max_retries`` pools, after which
    :class:`SelectionError` is raised.  Output is deterministic in
    ``config.seed``.
    """
    environment = _scatter_environment(config.num_tx, config.num_paths)
    for attempt in range(config.max_retries):
        rng = np.random.default_rng(config.seed + attempt)
        chosen = []
        directions = []
        for _ in range(config.candidate_pool):
            h = _draw_candidate(rng, config, environment)
            d = _dominant_direction(h)
            if all(
                abs(d @ other.conj()) ** 2 <= config.corr_threshold
                for other in directions
            ):
                chosen.append(h)
                directions.append(d)
                if len(chosen) == config.num_users:
                    break
        if len(chosen) < config.num_users:
            continue
        if config.path_loss == "varied":
            lo, hi = config.path_loss_range_db
            gains_db = rng.uniform(lo, hi, size=config.num_users)
            scales = 10.0 ** (gains_db / 20.0)
            chosen = [h * c for h, c in zip(chosen, scales)]
        return ChannelSet(dims=config.dims, blocks=tuple(chosen))
    raise SelectionError(
        f"no {config.num_users}-user subset met corr<= {config.corr_threshold}"
        f" in {config.max_retries} pools from seed {config.seed}"
    )


def calibrate_noise(decomp: ChannelDecomposition, power: float, target_susinr_db: float) -> float:
    """Noise variance that places the realization at a target average
    single-user SINR.

    The single-user SINR of user k is
    ``(power / (layers_k * noise_var)) * geomean(s_k^2)`` and the
    average is the geometric mean over users; this solves that relation
    for ``noise_var`` given the target in dB.
    """
    if power <= 0:
        raise ConfigError(f"power must be positive, got {power}")
    target = 10.0 ** (target_susinr_db / 10.0)
    log_terms = []
    for k in range(decomp.dims.num_users):
        s_k = decomp.s_block(k)
        log_terms.append(2.0 * np.mean(np.log(s_k)) - np.log(decomp.dims.layers[k]))
    return power / target * np.exp(np.mean(log_terms))


def save_channels(path, channels: ChannelSet) -> None:
    """Write a channel set to a self-describing binary dump."""
    header = json.dumps(
        {
            "num_tx": channels.dims.num_tx,
            "rx": list(channels.dims.rx),
            "layers": list(channels.dims.layers),
        }
    ).encode()
    with open(path, "wb") as f:
        f.write(_DUMP_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for b in channels.blocks:
            f.write(np.ascontiguousarray(b, dtype=np.complex128).tobytes())


def load_channels(path) -> ChannelSet:
    """Read a channel set written by :func:`save_channels`."""
    with open(path, "rb") as f:
        magic = f.read(len(_DUMP_MAGIC))
        if magic != _DUMP_MAGIC:
            raise ValueError(f"bad magic {magic!r}, not a channel dump")
        (hlen,) = struct.unpack("<I", f.read(4))
        meta = json.loads(f.read(hlen).decode())
        dims = SystemDims(
            num_tx=meta["num_tx"], rx=tuple(meta["rx"]), layers=tuple(meta["layers"])
        )
        blocks = []
        for k in range(dims.num_users):
            count = dims.rx[k] * dims.num_tx
            raw = f.read(count * 16)
            if len(raw) != count * 16:
                raise ValueError("truncated channel dump")
            blocks.append(
                np.frombuffer(raw, dtype=np.complex128).reshape(dims.rx[k], dims.num_tx)
            )
    return ChannelSet(dims=dims, blocks=tuple(blocks))
