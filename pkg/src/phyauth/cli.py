"""Command-line entry point: ``phyauth {trace,test,sweep,montecarlo,plotdata}``.

Data goes to standard output (or ``--out``), logs to standard error. Exit
status is 0 on success, 1 for an invalid scenario or arguments, 2 for any
other runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .authenticator import NoiseBudget, TestConfig, analytic_rates, authenticate, noncentrality, simulate_measurement
from .experiment import PathCache, SweepSpec, monte_carlo_rates, room_sweep, select_pairs
from .propagation import FrequencyResponse, GeometryError, ProbeConfig, frequency_response, trace_paths
from .scenario import (
    ScenarioParseError,
    ScenarioValidationError,
    format_number,
    load_scenario,
    reference_scenario_path,
    render_results,
)

log = logging.getLogger("phyauth")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


def _point(text: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}")
    return vals  # type: ignore[return-value]


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _probe(args, sc) -> ProbeConfig:
    return ProbeConfig(
        sc.probe.f0,
        args.bandwidth if args.bandwidth is not None else sc.probe.bandwidth,
        args.tones if args.tones is not None else sc.probe.M,
    )


def _noise(args, sc) -> NoiseBudget:
    if args.gamma_db is None:
        return sc.noise
    return NoiseBudget.from_gamma_db(args.gamma_db, kT=sc.noise.kT, N_F=sc.noise.N_F, b=sc.noise.b)


def _rooms(args, sc):
    if args.room is None:
        return list(sc.rooms)
    try:
        return [sc.room(args.room)]
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None


def _sweep_spec(args, sc) -> SweepSpec:
    sw = sc.sweep
    changes = {}
    if args.pair_cap is not None:
        changes["pair_cap"] = args.pair_cap
    if getattr(args, "W", None):
        changes["W"] = args.W
    if getattr(args, "M", None):
        changes["M"] = args.M
    if getattr(args, "gammas", None):
        changes["gamma_db"] = args.gammas
    return replace(sw, **changes)


def _seed(args, sc) -> int:
    return sc.seed if args.seed is None else args.seed


def cmd_trace(args, sc) -> str:
    probe = _probe(args, sc)
    tx = args.tx if args.tx is not None else tuple(sc.rooms[0].positions[0])
    rx = args.rx if args.rx is not None else sc.bob
    paths = trace_paths(sc.scene, tx, rx, args.max_order if args.max_order is not None else sc.sweep.max_order, probe.f0)
    resp = frequency_response(paths, probe)
    doc = {
        "tx": list(map(float, tx)),
        "rx": list(map(float, rx)),
        "probe": {"f0": probe.f0, "bandwidth": probe.bandwidth, "M": probe.M},
        "paths": [
            {
                "amplitude": p.amplitude,
                "delay_s": p.delay,
                "path_length_m": p.path_length,
                "bounce_count": p.bounce_count,
                "surfaces": [sc.scene.surfaces[s].name for s in p.surfaces],
            }
            for p in paths
        ],
        "response": [
            {"f_hz": float(f), "re": float(h.real), "im": float(h.imag)} for f, h in zip(probe.frequencies, resp.samples)
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def _load_responses(path: str, probe: ProbeConfig) -> tuple[FrequencyResponse, FrequencyResponse]:
    try:
        doc = json.loads(Path(path).read_text())
        ref = np.array([complex(a, b) for a, b in doc["reference"]])
        claim = np.array([complex(a, b) for a, b in doc["claimant"]])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"--responses: cannot read measured responses: {exc}") from None
    if ref.size != claim.size:
        raise UsageError("--responses: reference and claimant lengths differ")
    probe = replace(probe, M=int(ref.size))
    return FrequencyResponse(probe, claim), FrequencyResponse(probe, ref)


def cmd_test(args, sc) -> str:
    probe = _probe(args, sc)
    noise = _noise(args, sc)
    if args.responses:
        claimant, reference = _load_responses(args.responses, probe)
        config = TestConfig(claimant.probe, args.alpha, noise)
        outcome = authenticate(claimant, reference, config)
    else:
        config = TestConfig(probe, args.alpha, noise)
        room = sc.rooms[0]
        alice = args.alice if args.alice is not None else tuple(room.positions[0])
        claim = args.claimant if args.claimant is not None else alice
        order = sc.sweep.max_order
        h_ab = frequency_response(trace_paths(sc.scene, alice, sc.bob, order, probe.f0), probe)
        h_t = frequency_response(trace_paths(sc.scene, claim, sc.bob, order, probe.f0), probe)
        rng = np.random.default_rng(_seed(args, sc))
        ref_hat = simulate_measurement(h_ab, config.sigma2, rng)
        t_hat = simulate_measurement(h_t, config.sigma2, rng)
        outcome = authenticate(t_hat, ref_hat, config, true_claimant=h_t, true_reference=h_ab)
    doc = {
        "L": outcome.L,
        "k": outcome.k,
        "phi_star": outcome.phi_star,
        "accept": outcome.accept,
        "mu_L": outcome.mu_L,
        "beta": outcome.beta,
        "alpha": config.alpha,
        "M": config.probe.M,
        "gamma_db": config.noise.gamma_db,
    }
    return json.dumps(doc, indent=2) + "\n"


def cmd_sweep(args, sc) -> str:
    sweep = _sweep_spec(args, sc)
    seed = _seed(args, sc)
    rows = []
    for room in _rooms(args, sc):
        rows.extend(room_sweep(sc.scene, sc.bob, room, sweep, seed=seed, workers=args.parallelism))
    return render_results(rows, args.format)


def cmd_plotdata(args, sc) -> str:
    """Two slices per room: mean miss rate vs W at fixed M, and vs M at fixed W."""
    base = _sweep_spec(args, sc)
    seed = _seed(args, sc)
    slices = [
        ("vs_W", replace(base, M=(args.fixed_M,))),
        ("vs_M", replace(base, W=(args.fixed_W,))),
    ]
    rows, labels = [], []
    for room in _rooms(args, sc):
        cache = PathCache(sc.scene, sc.bob, base.max_order, base.f0)
        for label, spec in slices:
            part = room_sweep(sc.scene, sc.bob, room, spec, seed=seed, workers=args.parallelism, cache=cache)
            rows.extend(part)
            labels.extend([label] * len(part))
    return render_results(rows, args.format, extra={"slice": labels})


def cmd_montecarlo(args, sc) -> str:
    probe = _probe(args, sc)
    seed = _seed(args, sc)
    rng = np.random.default_rng(seed)
    cache = PathCache(sc.scene, sc.bob, sc.sweep.max_order, probe.f0)
    gammas = args.gammas or (_noise(args, sc).gamma_db,)
    records = []
    for room in _rooms(args, sc):
        i, j = select_pairs(room.n_points, None, seed)
        picks = rng.choice(i.size, size=min(args.pairs, i.size), replace=False)
        for n, p in enumerate(picks):
            alice, eve = room.positions[i[p]], room.positions[j[p]]
            h_ab, h_eb = cache.response(alice, probe), cache.response(eve, probe)
            for g in gammas:
                noise = NoiseBudget.from_gamma_db(g, kT=sc.noise.kT, N_F=sc.noise.N_F, b=sc.noise.b)
                config = TestConfig(probe, args.alpha, noise)
                a_hat, b_hat = monte_carlo_rates(h_ab, h_eb, config, args.trials, seed=seed + n, workers=args.parallelism)
                mu = noncentrality(h_eb, h_ab, config.sigma2)
                _, beta = analytic_rates(mu, probe.M, args.alpha)
                records.append(
                    {
                        "room": room.room_id,
                        "alice": ",".join(format_number(float(v)) for v in alice),
                        "eve": ",".join(format_number(float(v)) for v in eve),
                        "gamma_db": g,
                        "M": probe.M,
                        "W_hz": probe.bandwidth,
                        "trials": args.trials,
                        "mu_L": mu,
                        "alpha_hat": a_hat,
                        "beta_hat": b_hat,
                        "beta_analytic": beta,
                    }
                )
    if args.format == "json":
        return json.dumps(records, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(records[0])
    for r in records:
        writer.writerow([v if isinstance(v, str) else format_number(v) for v in r.values()])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default=None, help="scenario JSON file (default: bundled reference office)")
    common.add_argument("--seed", type=int, default=None, help="master seed (default: scenario seed)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", default=None, help="write data here instead of stdout")
    common.add_argument("--parallelism", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--bandwidth", type=float, default=None, help="probe bandwidth W in Hz")
    probe.add_argument("--tones", type=int, default=None, help="probe tone count M")

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument("--room", default=None, help="restrict to one room id")
    sweep.add_argument("--pair-cap", type=int, default=None)
    sweep.add_argument("--W", type=_floats, default=None, help="comma-separated bandwidths in Hz")
    sweep.add_argument("--M", type=_ints, default=None, help="comma-separated tone counts")
    sweep.add_argument("--gammas", type=_floats, default=None, help="comma-separated gamma values in dB")

    parser = argparse.ArgumentParser(prog="phyauth", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", parents=[common, probe], help="dump rays and frequency response for one link")
    p.add_argument("--tx", type=_point, default=None)
    p.add_argument("--rx", type=_point, default=None, help="default: bob")
    p.add_argument("--max-order", type=int, default=None)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("test", parents=[common, probe], help="run one authentication decision")
    p.add_argument("--alice", type=_point, default=None)
    p.add_argument("--claimant", type=_point, default=None, help="true claimant position (default: alice)")
    p.add_argument("--responses", default=None, help="JSON with measured 'reference' and 'claimant' [[re, im], ...]")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--gamma-db", type=float, default=None)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("sweep", parents=[common, sweep], help="room-mean miss rates over (W, M, gamma)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plotdata", parents=[common, sweep], help="miss-rate slices vs W and vs M")
    p.add_argument("--fixed-M", type=int, default=5)
    p.add_argument("--fixed-W", type=float, default=0.1e9)
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("montecarlo", parents=[common, probe], help="empirical vs analytic error rates")
    p.add_argument("--room", default=None)
    p.add_argument("--pairs", type=int, default=5, help="random Alice/Eve pairs per room")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--gamma-db", type=float, default=None)
    p.add_argument("--gammas", type=_floats, default=None)
    p.set_defaults(func=cmd_montecarlo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        sc = load_scenario(args.scenario or reference_scenario_path())
        _write(args.func(args, sc), args.out)
    except (ScenarioParseError, ScenarioValidationError, UsageError, GeometryError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
