"""Image-method specular ray tracing in an axis-aligned indoor scene.

A :class:`Scene` is a rectangular building box whose six faces always reflect,
plus optional interior partitions. Partitions both reflect and transmit; a ray
leg that passes through one is attenuated by its transmission coefficient.
Antennas are isotropic and every ray amplitude follows the free-space field
gain ``lambda0 / (4 pi d)`` scaled by the coefficients it picks up.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SPEED_OF_LIGHT = 2.99792458e8
MAX_ORDER = 6
DROP_RATIO = 1e-12

# edge tolerance when testing whether a hit point lies on a finite rectangle
_ON_SURFACE_TOL = 1e-9
# legs touching a partition this close to an endpoint do not count as crossings
_LEG_END_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid transmitter/receiver placement or scene geometry."""


class ProbeMismatchError(ValueError):
    """Two frequency responses were sampled on different probe grids."""


@dataclass(frozen=True)
class Surface:
    """Axis-aligned rectangle lying in the plane ``coords[axis] == offset``.

    ``lo``/``hi`` give the rectangle bounds along the two remaining axes, in
    increasing axis order.
    """

    axis: int
    offset: float
    lo: tuple[float, float]
    hi: tuple[float, float]
    rho: float = 0.6
    tau: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        if self.axis not in (0, 1, 2):
            raise GeometryError(f"surface axis must be 0, 1 or 2, got {self.axis}")
        if not 0.0 <= self.rho <= 1.0:
            raise GeometryError(f"reflection coefficient out of [0, 1] on surface {self.name!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise GeometryError(f"transmission coefficient out of [0, 1] on surface {self.name!r}")
        if not (self.lo[0] <= self.hi[0] and self.lo[1] <= self.hi[1]):
            raise GeometryError(f"surface {self.name!r} has inverted bounds")

    @property
    def in_plane_axes(self) -> tuple[int, int]:
        return tuple(i for i in range(3) if i != self.axis)  # type: ignore[return-value]


_FACE_NAMES = ("x0", "x1", "y0", "y1", "z0", "z1")


@dataclass(frozen=True)
class Scene:
    """Building box ``[0, L] x [0, W] x [0, H]`` with reflective faces and partitions.

    ``wall_rho`` is either one coefficient for all six faces or a mapping from
    face name (``x0``, ``x1``, ``y0``, ``y1``, ``z0`` floor, ``z1`` ceiling) to
    coefficient; unnamed faces default to 0.6.
    """

    size: tuple[float, float, float]
    wall_rho: float | dict[str, float] = 0.6
    partitions: tuple[Surface, ...] = ()
    surfaces: tuple[Surface, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        size = tuple(float(v) for v in self.size)
        if len(size) != 3 or min(size) <= 0:
            raise GeometryError(f"scene dimensions must be three positive lengths, got {self.size}")
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "partitions", tuple(self.partitions))
        if isinstance(self.wall_rho, dict):
            unknown = set(self.wall_rho) - set(_FACE_NAMES)
            if unknown:
                raise GeometryError(f"unknown wall names {sorted(unknown)}")
            rhos = [float(self.wall_rho.get(n, 0.6)) for n in _FACE_NAMES]
        else:
            rhos = [float(self.wall_rho)] * 6
        walls = []
        for axis in range(3):
            others = [i for i in range(3) if i != axis]
            lo = (0.0, 0.0)
            hi = (size[others[0]], size[others[1]])
            for side, offset in enumerate((0.0, size[axis])):
                name = _FACE_NAMES[2 * axis + side]
                walls.append(Surface(axis, offset, lo, hi, rho=rhos[2 * axis + side], tau=0.0, name=name))
        for p in self.partitions:
            if not 0.0 < p.offset < size[p.axis]:
                raise GeometryError(f"partition {p.name!r} lies outside the building")
        object.__setattr__(self, "surfaces", tuple(walls) + self.partitions)

    @classmethod
    def free_space(cls, size: tuple[float, float, float]) -> Scene:
        """A box whose faces neither reflect nor block, i.e. free space."""
        return cls(size, wall_rho=0.0)

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p > 0.0) and np.all(p < np.asarray(self.size)))

    def _arrays(self) -> dict[str, np.ndarray]:
        cache = self.__dict__.get("_array_cache")
        if cache is None:
            s = self.surfaces
            cache = {
                "axis": np.array([x.axis for x in s]),
                "offset": np.array([x.offset for x in s]),
                "lo": np.array([x.lo for x in s]),
                "hi": np.array([x.hi for x in s]),
                "rho": np.array([x.rho for x in s]),
                "tau": np.array([x.tau for x in s]),
                "others": np.array([x.in_plane_axes for x in s]),
            }
            object.__setattr__(self, "_array_cache", cache)
        return cache


@dataclass(frozen=True)
class PathComponent:
    """One specular ray between a transmitter and a receiver."""

    amplitude: float
    delay: float
    path_length: float
    bounce_count: int
    surfaces: tuple[int, ...] = ()


@dataclass(frozen=True)
class ProbeConfig:
    """Multi-tone channel probe: ``M`` tones across ``bandwidth`` centred on ``f0``."""

    f0: float
    bandwidth: float
    M: int

    def __post_init__(self) -> None:
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.M < 1 or int(self.M) != self.M:
            raise ValueError(f"tone count must be a positive integer, got {self.M}")
        if not self.f0 - self.bandwidth / 2 > 0:
            raise ValueError("lowest probe frequency must be positive")

    @property
    def spacing(self) -> float:
        return self.bandwidth / self.M

    @property
    def frequencies(self) -> np.ndarray:
        m = np.arange(1, self.M + 1)
        return self.f0 - self.bandwidth / 2 + m * self.spacing

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f0


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    """Complex channel gains sampled at the tones of ``probe``."""

    probe: ProbeConfig
    samples: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != (self.probe.M,):
            raise ValueError(f"expected {self.probe.M} samples, got shape {s.shape}")
        object.__setattr__(self, "samples", s)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrequencyResponse):
            return NotImplemented
        return self.probe == other.probe and np.array_equal(self.samples, other.samples)

    def __mul__(self, factor: complex) -> FrequencyResponse:
        return FrequencyResponse(self.probe, self.samples * factor)

    __rmul__ = __mul__


def check_same_probe(a: FrequencyResponse, b: FrequencyResponse) -> None:
    if a.probe != b.probe:
        raise ProbeMismatchError(f"probe mismatch: {a.probe} vs {b.probe}")


@lru_cache(maxsize=64)
def _sequences(usable: tuple[int, ...], order: int) -> np.ndarray:
    # all sequences of `order` surface indices drawn from `usable`, no immediate repeats
    idx = np.array(usable, dtype=int)
    seqs = np.zeros((1, 0), dtype=int)
    for _ in range(order):
        if seqs.shape[1] == 0:
            seqs = idx.reshape(-1, 1)
            continue
        last = seqs[:, -1]
        rep = np.repeat(seqs, idx.size, axis=0)
        ext = np.tile(idx, seqs.shape[0])
        keep = ext != np.repeat(last, idx.size)
        seqs = np.column_stack([rep[keep], ext[keep]])
    seqs.setflags(write=False)
    return seqs


def _penetration_gain(arr: dict[str, np.ndarray], n_walls: int, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Product of partition transmission coefficients crossed by each leg."""
    n_total = arr["axis"].size
    gain = np.ones(starts.shape[0])
    for s in range(n_walls, n_total):
        ax = arr["axis"][s]
        off = arr["offset"][s]
        u, v = arr["others"][s]
        d = ends[:, ax] - starts[:, ax]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (off - starts[:, ax]) / d
            pu = starts[:, u] + t * (ends[:, u] - starts[:, u])
            pv = starts[:, v] + t * (ends[:, v] - starts[:, v])
        t_ok = np.isfinite(t) & (t > _LEG_END_TOL) & (t < 1.0 - _LEG_END_TOL)
        lo, hi = arr["lo"][s], arr["hi"][s]
        inside = (pu >= lo[0]) & (pu <= hi[0]) & (pv >= lo[1]) & (pv <= hi[1])
        gain = np.where(t_ok & inside, gain * arr["tau"][s], gain)
    return gain


def trace_paths(scene: Scene, tx, rx, max_order: int = 3, f0: float = 5e9) -> list[PathComponent]:
    """Enumerate specular paths from ``tx`` to ``rx`` by the image method.

    Every reflection sequence up to ``max_order`` bounces is built by mirroring
    ``tx`` across each surface in turn, then validated by walking back from
    ``rx`` and checking that each hit lands on the finite surface between the
    previous and next points. Amplitudes are evaluated at the wavelength of
    ``f0``; paths weaker than ``1e-12`` times the unobstructed line-of-sight
    amplitude are dropped. The result is sorted by delay.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if not 0 <= max_order <= MAX_ORDER:
        raise GeometryError(f"max_order must be in [0, {MAX_ORDER}], got {max_order}")
    for label, p in (("tx", tx), ("rx", rx)):
        if p.shape != (3,) or not scene.contains(p):
            raise GeometryError(f"{label} position {p.tolist()} is not strictly inside the scene")
    if np.array_equal(tx, rx):
        raise GeometryError("tx and rx coincide")

    arr = scene._arrays()
    n_walls = 6
    lam0 = SPEED_OF_LIGHT / f0
    los_length = float(np.linalg.norm(rx - tx))
    los_amp = lam0 / (4 * np.pi * los_length)
    usable = tuple(int(i) for i in np.flatnonzero(arr["rho"] > 0))

    found: list[PathComponent] = []
    for order in range(max_order + 1):
        seqs = _sequences(usable, order)
        if seqs.shape[0] == 0 or (order and not usable):
            continue
        n = seqs.shape[0]
        # images[:, i] is tx mirrored across seqs[:, 0..i]
        images = np.empty((n, order + 1, 3))
        images[:, 0] = tx
        for i in range(order):
            s = seqs[:, i]
            img = images[:, i].copy()
            ax = arr["axis"][s]
            rows = np.arange(n)
            img[rows, ax] = 2 * arr["offset"][s] - img[rows, ax]
            images[:, i + 1] = img
        length = np.linalg.norm(rx - images[:, order], axis=1)

        # walk back from rx: hit point on surface seqs[:, i] lies on segment image_i+1 -> next
        points = np.empty((n, order + 2, 3))
        points[:, 0] = tx
        points[:, order + 1] = rx
        valid = np.ones(n, dtype=bool)
        nxt = np.broadcast_to(rx, (n, 3)).copy()
        rows = np.arange(n)
        for i in range(order - 1, -1, -1):
            s = seqs[:, i]
            ax = arr["axis"][s]
            off = arr["offset"][s]
            src = images[:, i + 1]
            d = nxt[rows, ax] - src[rows, ax]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (off - src[rows, ax]) / d
                valid &= np.isfinite(t) & (t > 0) & (t < 1)
                hit = src + t[:, None] * (nxt - src)
            uv = arr["others"][s]
            pu = hit[rows, uv[:, 0]]
            pv = hit[rows, uv[:, 1]]
            lo, hi = arr["lo"][s], arr["hi"][s]
            valid &= (pu >= lo[:, 0] - _ON_SURFACE_TOL) & (pu <= hi[:, 0] + _ON_SURFACE_TOL)
            valid &= (pv >= lo[:, 1] - _ON_SURFACE_TOL) & (pv <= hi[:, 1] + _ON_SURFACE_TOL)
            points[:, i + 1] = hit
            nxt = hit
        if not valid.any():
            continue
        seqs, points, length = seqs[valid], points[valid], length[valid]
        n = seqs.shape[0]

        gain = np.prod(arr["rho"][seqs], axis=1) if order else np.ones(n)
        if arr["axis"].size > n_walls:
            for leg in range(order + 1):
                gain *= _penetration_gain(arr, n_walls, points[:, leg], points[:, leg + 1])
        amp = lam0 / (4 * np.pi * length) * gain
        for k in np.flatnonzero(amp >= DROP_RATIO * los_amp):
            found.append(
                PathComponent(
                    amplitude=float(amp[k]),
                    delay=float(length[k] / SPEED_OF_LIGHT),
                    path_length=float(length[k]),
                    bounce_count=order,
                    surfaces=tuple(int(x) for x in seqs[k]),
                )
            )
    found.sort(key=lambda p: (p.delay, p.bounce_count, p.surfaces))
    return found


def path_arrays(paths: list[PathComponent]) -> tuple[np.ndarray, np.ndarray]:
    """Amplitudes and delays of ``paths`` as two arrays."""
    amp = np.array([p.amplitude for p in paths], dtype=float)
    delay = np.array([p.delay for p in paths], dtype=float)
    return amp, delay


def response_samples(amplitudes: np.ndarray, delays: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """``sum_k a_k exp(-j 2 pi f tau_k)`` at each frequency in ``freqs``."""
    phase = np.exp(-2j * np.pi * np.outer(freqs, delays))
    return phase @ amplitudes


def frequency_response(paths: list[PathComponent], probe: ProbeConfig) -> FrequencyResponse:
    """Sample the multipath transfer function at the probe tones.

    Ray amplitudes are held at their centre-frequency values across the band;
    only the phase carries the frequency dependence.
    """
    if not paths:
        raise ValueError("at least one path is required")
    amp, delay = path_arrays(paths)
    return FrequencyResponse(probe, response_samples(amp, delay, probe.frequencies))
