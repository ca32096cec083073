"""Scenario files (JSON) and result serialization.

Scenario schema (all lengths in meters, frequencies in Hz)::

    {
      "name": "reference office",
      "building": {
        "size": [120, 14, 4],
        "wall_rho": 0.6,                       # or {"x0": .., "z0": .., ...}
        "partitions": [
          {"name": "corridor-s", "axis": "y", "offset": 5.5,
           "lo": [0, 0], "hi": [120, 4], "rho": 0.6, "tau": 0.4}
        ]
      },
      "bob": [45.6, 6.2, 3.0],
      "rooms": [
        {"id": "room1", "x": [0, 3], "y": [0, 2],
         "spacing": 0.2, "height": 2.0, "margin": 0.1}
      ],
      "probe": {"f0": 5e9, "bandwidth": 1e8, "M": 5},
      "noise": {"P_T": 100, "kT": 4e-18, "N_F": 10, "b": 2.5e6},
      "sweep": {"W": [...], "M": [...], "gamma_db": [...], "alpha": 0.01,
                "max_order": 3, "pair_cap": null},
      "seed": 0
    }

Only ``building.size``, ``bob`` and ``rooms`` are required.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .authenticator import NoiseBudget
from .experiment import RoomGrid, SweepRow, SweepSpec
from .propagation import GeometryError, ProbeConfig, Scene, Surface

CSV_FIELDS = ("room", "W_hz", "M", "gamma_db", "mean_beta", "std_beta", "n_pairs")
_AXES = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}
_AXIS_NAMES = "xyz"


class ScenarioParseError(Exception):
    """Scenario file is unreadable or not well-formed JSON."""


class ScenarioValidationError(Exception):
    """Scenario parsed but violates a geometric or parameter constraint."""


@dataclass(frozen=True)
class Scenario:
    scene: Scene
    bob: tuple[float, float, float]
    rooms: tuple[RoomGrid, ...]
    probe: ProbeConfig = ProbeConfig(5e9, 0.1e9, 5)
    noise: NoiseBudget = NoiseBudget()
    sweep: SweepSpec = SweepSpec()
    seed: int = 0
    name: str = ""

    def room(self, room_id: str) -> RoomGrid:
        for r in self.rooms:
            if r.room_id == room_id:
                return r
        raise KeyError(f"no room named {room_id!r}; known: {[r.room_id for r in self.rooms]}")


def reference_scenario_path() -> Path:
    return Path(str(resources.files("phyauth") / "data" / "reference_scenario.json"))


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise ScenarioValidationError(f"{where}: missing required field {key!r}")
    return obj[key]


def _vec(value: Any, n: int, where: str) -> tuple[float, ...]:
    try:
        out = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ScenarioValidationError(f"{where}: expected {n} numbers, got {value!r}") from None
    if len(out) != n:
        raise ScenarioValidationError(f"{where}: expected {n} numbers, got {len(out)}")
    return out


def scenario_from_dict(doc: dict) -> Scenario:
    """Build and validate a :class:`Scenario` from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ScenarioValidationError("scenario: top level must be an object")
    building = _require(doc, "building", "scenario")
    size = _vec(_require(building, "size", "building"), 3, "building.size")
    partitions = []
    for n, p in enumerate(building.get("partitions", [])):
        where = f"building.partitions[{n}]"
        axis = _require(p, "axis", where)
        if axis not in _AXES:
            raise ScenarioValidationError(f"{where}.axis: must be x, y or z")
        try:
            partitions.append(
                Surface(
                    axis=_AXES[axis],
                    offset=float(_require(p, "offset", where)),
                    lo=_vec(_require(p, "lo", where), 2, f"{where}.lo"),
                    hi=_vec(_require(p, "hi", where), 2, f"{where}.hi"),
                    rho=float(p.get("rho", 0.6)),
                    tau=float(p.get("tau", 0.4)),
                    name=str(p.get("name", f"partition{n}")),
                )
            )
        except GeometryError as exc:
            raise ScenarioValidationError(f"{where}: {exc}") from None
    try:
        scene = Scene(size, wall_rho=building.get("wall_rho", 0.6), partitions=tuple(partitions))
    except GeometryError as exc:
        raise ScenarioValidationError(f"building: {exc}") from None

    bob = _vec(_require(doc, "bob", "scenario"), 3, "bob")
    if not scene.contains(bob):
        raise ScenarioValidationError(f"bob: position {list(bob)} is not strictly inside the building")

    rooms = []
    seen: set[str] = set()
    for n, r in enumerate(_require(doc, "rooms", "scenario")):
        where = f"rooms[{n}]"
        rid = str(_require(r, "id", where))
        if rid in seen:
            raise ScenarioValidationError(f"{where}.id: duplicate room id {rid!r}")
        seen.add(rid)
        try:
            grid = RoomGrid(
                rid,
                _vec(_require(r, "x", where), 2, f"{where}.x"),
                _vec(_require(r, "y", where), 2, f"{where}.y"),
                spacing=float(r.get("spacing", 0.2)),
                height=float(r.get("height", 2.0)),
                margin=float(r.get("margin", 0.1)),
            )
        except (GeometryError, ValueError) as exc:
            raise ScenarioValidationError(f"{where}: {exc}") from None
        if not all(scene.contains(p) for p in grid.positions[[0, -1]]):
            raise ScenarioValidationError(f"{where}: grid for room {rid!r} leaves the building")
        if any(np.array_equal(p, bob) for p in grid.positions):
            raise ScenarioValidationError(f"{where}: grid point coincides with bob")
        rooms.append(grid)
    if not rooms:
        raise ScenarioValidationError("rooms: at least one room is required")

    try:
        pr = doc.get("probe", {})
        probe = ProbeConfig(float(pr.get("f0", 5e9)), float(pr.get("bandwidth", 0.1e9)), int(pr.get("M", 5)))
    except ValueError as exc:
        raise ScenarioValidationError(f"probe: {exc}") from None
    try:
        nz = doc.get("noise", {})
        noise = NoiseBudget(
            P_T=float(nz.get("P_T", 100.0)),
            kT=float(nz.get("kT", 4.0e-18)),
            N_F=float(nz.get("N_F", 10.0)),
            b=float(nz.get("b", 2.5e6)),
        )
    except ValueError as exc:
        raise ScenarioValidationError(f"noise: {exc}") from None
    try:
        sw = dict(doc.get("sweep", {}))
        sweep = SweepSpec(**{"f0": probe.f0, **sw})
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError(f"sweep: {exc}") from None
    if not 0 <= sweep.max_order <= 6:
        raise ScenarioValidationError("sweep.max_order: must be between 0 and 6")

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ScenarioValidationError("seed: must be a nonnegative integer")
    return Scenario(scene, bob, tuple(rooms), probe, noise, sweep, seed, str(doc.get("name", "")))


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file.

    Raises:
        ScenarioParseError: unreadable file or malformed JSON.
        ScenarioValidationError: the document violates a constraint; the
            message starts with the offending field.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None
    return scenario_from_dict(doc)


def scenario_to_dict(sc: Scenario) -> dict:
    walls = sc.scene.wall_rho
    return {
        "name": sc.name,
        "building": {
            "size": list(sc.scene.size),
            "wall_rho": dict(walls) if isinstance(walls, dict) else walls,
            "partitions": [
                {
                    "name": p.name,
                    "axis": _AXIS_NAMES[p.axis],
                    "offset": p.offset,
                    "lo": list(p.lo),
                    "hi": list(p.hi),
                    "rho": p.rho,
                    "tau": p.tau,
                }
                for p in sc.scene.partitions
            ],
        },
        "bob": list(sc.bob),
        "rooms": [
            {"id": r.room_id, "x": list(r.x), "y": list(r.y), "spacing": r.spacing, "height": r.height, "margin": r.margin}
            for r in sc.rooms
        ],
        "probe": {"f0": sc.probe.f0, "bandwidth": sc.probe.bandwidth, "M": sc.probe.M},
        "noise": asdict(sc.noise),
        "sweep": {
            "W": list(sc.sweep.W),
            "M": list(sc.sweep.M),
            "gamma_db": list(sc.sweep.gamma_db),
            "alpha": sc.sweep.alpha,
            "f0": sc.sweep.f0,
            "max_order": sc.sweep.max_order,
            "pair_cap": sc.sweep.pair_cap,
        },
        "seed": sc.seed,
    }


def dump_scenario(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")


def format_number(x: float | int) -> str:
    """Shortest round-tripping positional decimal, without exponent or trailing ``.0``."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return np.format_float_positional(float(x), trim="-")


def _row_dict(row: SweepRow) -> dict:
    return {
        "room": row.room,
        "W_hz": row.W,
        "M": row.M,
        "gamma_db": row.gamma_db,
        "mean_beta": row.mean_beta,
        "std_beta": row.std_beta,
        "n_pairs": row.n_pairs,
    }


def render_results(rows: list[SweepRow], fmt: str = "csv", extra: dict[str, list[str]] | None = None) -> str:
    """Serialize sweep rows as CSV or JSON text.

    ``extra`` prepends additional string columns (one list entry per row).
    """
    if not rows:
        raise ValueError("no rows to emit")
    extra = extra or {}
    dicts = []
    for n, row in enumerate(rows):
        d = {name: values[n] for name, values in extra.items()}
        d.update(_row_dict(row))
        dicts.append(d)
    if fmt == "json":
        return json.dumps(dicts, indent=2) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*extra, *CSV_FIELDS])
    for d in dicts:
        writer.writerow([v if isinstance(v, str) else format_number(v) for v in d.values()])
    return buf.getvalue()


def emit_results(rows: list[SweepRow], fmt: str = "csv", destination=None) -> None:
    """Write sweep rows to a path, a text stream, or standard output."""
    text = render_results(rows, fmt)
    if destination is None:
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", newline="") as fh:
            fh.write(text)
