"""Room-level miss-rate experiments and Monte Carlo validation.

Alice and Eve are placed on a horizontal grid inside a room, every unordered
pair of grid points is treated as one (Alice, Eve) placement, and the analytic
miss rate is averaged over pairs for each bandwidth / tone count / SNR setting.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .authenticator import (
    TestConfig,
    analytic_rates,
    db_to_linear,
    decision_threshold,
    noncentrality,
    simulate_measurements,
    statistic_batch,
)
from .propagation import (
    FrequencyResponse,
    GeometryError,
    PathComponent,
    ProbeConfig,
    Scene,
    frequency_response,
    path_arrays,
    response_samples,
    trace_paths,
)
from .special import noncentral_chi2_cdf_many

log = logging.getLogger(__name__)

MC_BLOCK = 4096


@dataclass(frozen=True)
class RoomGrid:
    """Horizontal transmitter grid covering one room.

    ``x`` and ``y`` are the room's ``(min, max)`` extents in meters. Points
    start ``margin`` in from the low corner and step by ``spacing`` while
    staying at least ``margin`` from the far walls.
    """

    room_id: str
    x: tuple[float, float]
    y: tuple[float, float]
    spacing: float = 0.2
    height: float = 2.0
    margin: float = 0.1
    positions: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if not self.spacing > 0:
            raise ValueError(f"room {self.room_id}: spacing must be positive")
        axes = []
        for lo, hi in (self.x, self.y):
            usable = (hi - lo) - 2 * self.margin
            if not usable > 0:
                raise GeometryError(f"room {self.room_id}: extent is not larger than twice the margin")
            count = int(math.floor(usable / self.spacing + 1e-9)) + 1
            axes.append(lo + self.margin + self.spacing * np.arange(count))
        xs, ys = axes
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(self.height))])
        pts.setflags(write=False)
        object.__setattr__(self, "positions", pts)

    @property
    def n_points(self) -> int:
        return self.positions.shape[0]

    @property
    def n_pairs(self) -> int:
        n = self.n_points
        return n * (n - 1) // 2


def build_room_grid(room_id: str, x, y, spacing: float = 0.2, height: float = 2.0, margin: float = 0.1) -> RoomGrid:
    return RoomGrid(room_id, tuple(x), tuple(y), spacing=spacing, height=height, margin=margin)


@dataclass(frozen=True)
class SweepSpec:
    W: tuple[float, ...] = (0.05e9, 0.1e9, 0.2e9, 0.3e9, 0.4e9, 0.5e9)
    M: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    gamma_db: tuple[float, ...] = (90.0, 100.0, 110.0, 120.0)
    alpha: float = 0.01
    f0: float = 5e9
    max_order: int = 3
    pair_cap: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "W", tuple(float(v) for v in self.W))
        object.__setattr__(self, "M", tuple(int(v) for v in self.M))
        object.__setattr__(self, "gamma_db", tuple(float(v) for v in self.gamma_db))
        if not (self.W and self.M and self.gamma_db):
            raise ValueError("sweep value lists must be nonempty")
        if self.pair_cap is not None and self.pair_cap < 1:
            raise ValueError("pair_cap must be at least 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    def probes(self) -> list[ProbeConfig]:
        return [ProbeConfig(self.f0, w, m) for w in self.W for m in self.M]


@dataclass(frozen=True)
class SweepRow:
    room: str
    W: float
    M: int
    gamma_db: float
    mean_beta: float
    std_beta: float
    n_pairs: int


class PathCache:
    """Traces each transmitter position to a fixed receiver once.

    Ray geometry does not depend on the probe, so one trace per position
    serves every (W, M) combination. ``trace_count`` counts actual traces.
    """

    def __init__(self, scene: Scene, rx, max_order: int = 3, f0: float = 5e9):
        self.scene = scene
        self.rx = np.asarray(rx, dtype=float)
        self.max_order = max_order
        self.f0 = f0
        self.trace_count = 0
        self._paths: dict[tuple[float, float, float], tuple[np.ndarray, np.ndarray]] = {}

    def _key(self, pos) -> tuple[float, float, float]:
        return tuple(float(v) for v in pos)  # type: ignore[return-value]

    def prefetch(self, positions: np.ndarray, workers: int = 1) -> None:
        todo = list(dict.fromkeys(k for k in map(self._key, positions) if k not in self._paths))
        if not todo:
            return
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_trace_arrays, [(self.scene, k, self.rx, self.max_order, self.f0) for k in todo], chunksize=8))
        else:
            results = [_trace_arrays((self.scene, k, self.rx, self.max_order, self.f0)) for k in todo]
        for key, arrays in zip(todo, results):
            self._paths[key] = arrays
        self.trace_count += len(todo)

    def arrays(self, pos) -> tuple[np.ndarray, np.ndarray]:
        key = self._key(pos)
        if key not in self._paths:
            self.prefetch(np.asarray([key]))
        return self._paths[key]

    def paths(self, pos) -> list[PathComponent]:
        return trace_paths(self.scene, pos, self.rx, self.max_order, self.f0)

    def response(self, pos, probe: ProbeConfig) -> FrequencyResponse:
        amp, delay = self.arrays(pos)
        return FrequencyResponse(probe, response_samples(amp, delay, probe.frequencies))

    def responses(self, positions: np.ndarray, probe: ProbeConfig, workers: int = 1) -> np.ndarray:
        """``(n_positions, M)`` array of true responses."""
        self.prefetch(positions, workers)
        freqs = probe.frequencies
        return np.array([response_samples(*self.arrays(p), freqs) for p in positions])


def _trace_arrays(args) -> tuple[np.ndarray, np.ndarray]:
    scene, pos, rx, max_order, f0 = args
    return path_arrays(trace_paths(scene, pos, rx, max_order, f0))


def evaluate_pair(
    scene: Scene,
    bob,
    alice,
    eve,
    probe: ProbeConfig,
    alpha: float,
    gamma_db: float,
    max_order: int = 3,
) -> float:
    """Analytic miss rate for one Alice/Eve placement."""
    h_ab = frequency_response(trace_paths(scene, alice, bob, max_order, probe.f0), probe)
    h_eb = frequency_response(trace_paths(scene, eve, bob, max_order, probe.f0), probe)
    sigma2 = probe.M / db_to_linear(gamma_db)
    _, beta = analytic_rates(noncentrality(h_eb, h_ab, sigma2), probe.M, alpha)
    return beta


def select_pairs(n_points: int, pair_cap: int | None, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Unordered pair indices, optionally a seeded uniform subsample in pair order."""
    i, j = np.triu_indices(n_points, k=1)
    if pair_cap is not None and pair_cap < i.size:
        pick = np.sort(np.random.default_rng(seed).choice(i.size, size=pair_cap, replace=False))
        i, j = i[pick], j[pick]
    return i, j


def squared_distances(responses: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Phase-aligned ``sum |H_j - H_i e^{j phi*}|^2`` for every pair (Alice ``i``, Eve ``j``)."""
    d, _ = statistic_batch(responses[j], responses[i], 1.0)
    return d


def room_sweep(
    scene: Scene,
    bob,
    grid: RoomGrid,
    sweep: SweepSpec,
    seed: int = 0,
    workers: int = 1,
    cache: PathCache | None = None,
) -> list[SweepRow]:
    """Mean and (population) standard deviation of the miss rate over Alice/Eve pairs.

    Rows come out ordered by W, then M, then gamma.
    """
    if cache is None:
        cache = PathCache(scene, bob, sweep.max_order, sweep.f0)
    i, j = select_pairs(grid.n_points, sweep.pair_cap, seed)
    log.info("room %s: %d points, %d pairs", grid.room_id, grid.n_points, i.size)
    cache.prefetch(grid.positions, workers)
    rows = []
    for probe in sweep.probes():
        d = squared_distances(cache.responses(grid.positions, probe), i, j)
        k = decision_threshold(sweep.alpha, probe.M)
        for g in sweep.gamma_db:
            sigma2 = probe.M / db_to_linear(g)
            beta = noncentral_chi2_cdf_many(k, 2 * probe.M, d / sigma2)
            # fsum: exact, so the mean does not depend on pair order
            mean = math.fsum(beta) / beta.size
            rows.append(
                SweepRow(
                    room=grid.room_id,
                    W=probe.bandwidth,
                    M=probe.M,
                    gamma_db=g,
                    mean_beta=mean,
                    std_beta=math.sqrt(math.fsum((beta - mean) ** 2) / beta.size),
                    n_pairs=int(i.size),
                )
            )
    return rows


def _mc_block(args) -> tuple[int, int]:
    h_ab, h_eb, sigma2, k, seed, block, n = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    ref = simulate_measurements(h_ab, sigma2, rng, n)
    own = simulate_measurements(h_ab, sigma2, rng, n)
    L0, _ = statistic_batch(own, ref, sigma2)
    ref = simulate_measurements(h_ab, sigma2, rng, n)
    imp = simulate_measurements(h_eb, sigma2, rng, n)
    L1, _ = statistic_batch(imp, ref, sigma2)
    return int(np.count_nonzero(L0 >= k)), int(np.count_nonzero(L1 < k))


def monte_carlo_rates(
    H_AB: FrequencyResponse,
    H_EB: FrequencyResponse,
    config: TestConfig,
    trials: int,
    seed: int = 0,
    workers: int = 1,
) -> tuple[float, float]:
    """Empirical false-alarm and miss rates of :func:`~phyauth.authenticator.authenticate`.

    Each trial measures the reference afresh and then either Alice (for the
    false-alarm estimate) or Eve (for the miss estimate). Trials are grouped
    in fixed blocks of ``MC_BLOCK`` with one random stream per block, derived
    from ``seed`` and the block index, so results do not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if H_AB.probe != config.probe or H_EB.probe != config.probe:
        raise ValueError("responses do not use the configured probe")
    sigma2 = config.sigma2
    k = decision_threshold(config.alpha, config.probe.M)
    jobs = []
    for block, start in enumerate(range(0, trials, MC_BLOCK)):
        n = min(MC_BLOCK, trials - start)
        jobs.append((H_AB.samples, H_EB.samples, sigma2, k, seed, block, n))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_mc_block, jobs))
    else:
        counts = [_mc_block(job) for job in jobs]
    false_alarms = sum(c[0] for c in counts)
    misses = sum(c[1] for c in counts)
    return false_alarms / trials, misses / trials
