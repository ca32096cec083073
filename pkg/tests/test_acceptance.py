"""Acceptance suite. One PASS/FAIL line per criterion is printed in the
terminal summary; run with ``pytest tests/test_acceptance.py`` or directly
as a script.
"""

import math
import os
import time
import warnings
from itertools import product

import numpy as np
import pytest
from scipy import stats

from phyauth.authenticator import (
    NoiseBudget,
    TestConfig,
    analytic_rates,
    decision_threshold,
    noise_variance,
    noncentrality,
    simulate_measurements,
    statistic_batch,
)
from phyauth.experiment import PathCache, SweepSpec, evaluate_pair, monte_carlo_rates, room_sweep
from phyauth.propagation import SPEED_OF_LIGHT, ProbeConfig, Scene, Surface, trace_paths
from phyauth.special import chi2_cdf, chi2_quantile, noncentral_chi2_cdf

PROBE = ProbeConfig(5e9, 0.1e9, 5)
ALPHA = 0.01


def criterion(number, title):
    return pytest.mark.criterion(number, title)


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False


def ncx2_sampling_oracle(x, dof, mu, draws, seed, chunk=1_000_000):
    # fraction of |N(m, I)|^2 <= x with |m|^2 = mu, counted in chunks
    rng = np.random.default_rng(seed)
    hits, done = 0, 0
    while done < draws:
        n = min(chunk, draws - done)
        z = rng.standard_normal((n, dof))
        z[:, 0] += math.sqrt(mu)
        hits += int(np.count_nonzero(np.einsum("ij,ij->i", z, z) <= x))
        done += n
    return hits / draws


# ---------------------------------------------------------------- criterion 1


@criterion(1, "statistical kernel exactness")
def test_c1_kernel(note):
    with Timer(60) as t:
        k = chi2_quantile(0.99, 10)
        assert k == pytest.approx(23.2093, abs=1e-3)
        assert chi2_cdf(2, 2) == pytest.approx(1 - math.exp(-1), abs=1e-12)
        n = 10_000_000
        for (x, d, mu), seed in zip([(4.0, 2, 4.0), (23.2093, 10, 10.0)], (11, 12)):
            p = noncentral_chi2_cdf(x, d, mu)
            p_hat = ncx2_sampling_oracle(x, d, mu, n, seed)
            sigma = math.sqrt(p * (1 - p) / n)
            note(f"F({x}; {d}, {mu}) = {p:.6f}, sampled {p_hat:.6f}, |diff| = {abs(p - p_hat) / sigma:.2f} sigma")
            assert abs(p - p_hat) <= 3 * sigma
    note(f"k = {k:.6f}; runtime {t.elapsed:.1f} s")
    assert t.elapsed < t.limit


# ---------------------------------------------------------------- criterion 2


def _h0_rate(reference, trials, seed):
    room = reference.room("room3")
    cache = PathCache(reference.scene, reference.bob)
    h_ab = cache.response(room.positions[100], PROBE)
    config = TestConfig(PROBE, ALPHA, NoiseBudget.from_gamma_db(120))
    alpha_hat, _ = monte_carlo_rates(h_ab, h_ab, config, trials, seed=seed)
    return alpha_hat


@criterion(2, "type-I calibration at 120 dB")
def test_c2_false_alarm(reference, note):
    trials = 100_000
    with Timer(60) as t:
        alpha_hat = _h0_rate(reference, trials, seed=2024)
    k = decision_threshold(ALPHA, 5)
    predicted = 1 - chi2_cdf(k, 9)
    note(f"alpha_hat = {alpha_hat:.5f} over {trials} trials; required [0.007, 0.013]; runtime {t.elapsed:.1f} s")
    note(f"chi-square(2M - 1) prediction for the noisy phase minimizer: {predicted:.5f}")
    assert t.elapsed < t.limit
    assert 0.007 <= alpha_hat <= 0.013


# ---------------------------------------------------------------- criterion 3


@criterion(3, "analytic vs empirical miss rate")
def test_c3_analytic_vs_empirical(reference, note):
    trials = 10_000
    rng = np.random.default_rng(303)
    cache = PathCache(reference.scene, reference.bob)
    worst, violations, total = 0.0, [], 0
    with Timer(600) as t:
        for n in range(100):
            room = reference.rooms[rng.integers(len(reference.rooms))]
            a, e = rng.choice(room.n_points, size=2, replace=False)
            h_ab = cache.response(room.positions[a], PROBE)
            h_eb = cache.response(room.positions[e], PROBE)
            for g in (110.0, 120.0):
                config = TestConfig(PROBE, ALPHA, NoiseBudget.from_gamma_db(g))
                _, beta_hat = monte_carlo_rates(h_ab, h_eb, config, trials, seed=1000 + n)
                _, beta = analytic_rates(noncentrality(h_eb, h_ab, config.sigma2), PROBE.M, ALPHA)
                allowed = max(0.01, 3 * math.sqrt(beta * (1 - beta) / trials))
                gap = abs(beta_hat - beta)
                worst = max(worst, gap)
                total += 1
                if gap > allowed:
                    violations.append((room.room_id, int(a), int(e), g, beta, beta_hat))
    note(f"{len(violations)}/{total} placements outside tolerance; worst |gap| = {worst:.4f}; runtime {t.elapsed:.1f} s")
    for v in violations[:5]:
        note("  {} alice#{} eve#{} at {:g} dB: analytic {:.4f}, empirical {:.4f}".format(*v))
    assert t.elapsed < t.limit
    assert not violations


# ---------------------------------------------------------------- criterion 4


@criterion(4, "miss-rate trends in the reference scene")
def test_c4_trends(reference, note):
    room = reference.room("room3")
    spec = SweepSpec(pair_cap=2000)
    with Timer(300) as t:
        rows = room_sweep(reference.scene, reference.bob, room, spec, seed=reference.seed, workers=os.cpu_count() or 1)
    bad = []
    for w, m in product(spec.W, spec.M):
        means = [r.mean_beta for r in rows if r.W == w and r.M == m]
        assert len(means) == len(spec.gamma_db)
        if any(b > a for a, b in zip(means, means[1:])):
            bad.append((w, m, means))
    (target,) = [r for r in rows if r.W == 0.1e9 and r.M == 5 and r.gamma_db == 120.0]
    note(f"{room.room_id}: {len(rows)} rows, {len(bad)} non-monotone (W, M) cells; runtime {t.elapsed:.1f} s")
    status = "met" if target.mean_beta < 0.05 else "EXCEEDED"
    note(f"soft target beta_bar < 0.05 at 120 dB, M=5, W=100 MHz: {target.mean_beta:.4f} ({status})")
    if target.mean_beta >= 0.05:
        warnings.warn(f"soft target exceeded: beta_bar = {target.mean_beta:.4f}", stacklevel=1)
    assert t.elapsed < t.limit
    assert not bad


# ---------------------------------------------------------------- criterion 5


@criterion(5, "optimal phase beats a 3600-point grid")
def test_c5_phase_optimality(note):
    rng = np.random.default_rng(505)
    n, m = 1000, 5
    sigma2 = noise_variance(NoiseBudget.from_gamma_db(100), m)
    with Timer(60) as t:
        truth = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) * 1e-4
        other = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) * 1e-4
        ref = np.concatenate([simulate_measurements(h, sigma2, rng, 1) for h in truth])
        claim = np.concatenate(
            [simulate_measurements(h if i % 2 else o, sigma2, rng, 1) for i, (h, o) in enumerate(zip(truth, other))]
        )
        L, _ = statistic_batch(claim, ref, sigma2)
        grid = np.arange(3600) * (2 * np.pi / 3600)
        rot = np.exp(1j * grid)
        worst = -np.inf
        for i in range(n):
            Lg = np.sum(np.abs(claim[i][None, :] - ref[i][None, :] * rot[:, None]) ** 2, axis=1) / sigma2
            worst = max(worst, L[i] - Lg.min())
    note(f"max L(phi*) - grid minimum = {worst:.3e}; runtime {t.elapsed:.1f} s")
    assert t.elapsed < t.limit
    assert worst <= 1e-9


# ---------------------------------------------------------------- criterion 6


def _mirror(p, s):
    q = np.array(p, dtype=float)
    q[s.axis] = 2 * s.offset - q[s.axis]
    return q


def _crosses(a, b, s, tol=1e-9):
    # strict interior crossing of the finite rectangle s by the segment a -> b
    da = a[s.axis] - s.offset
    db = b[s.axis] - s.offset
    if da * db >= 0:
        return False
    t = da / (da - db)
    if not tol < t < 1 - tol:
        return False
    p = a + t * (b - a)
    u, v = s.in_plane_axes
    return s.lo[0] <= p[u] <= s.hi[0] and s.lo[1] <= p[v] <= s.hi[1]


def mirror_enumeration(scene, tx, rx, max_order, f0=5e9):
    """Exhaustive scalar image-method oracle: (delay, amplitude, bounces) triples."""
    tx, rx = np.asarray(tx, float), np.asarray(rx, float)
    lam0 = SPEED_OF_LIGHT / f0
    partitions = scene.surfaces[6:]
    reflective = [n for n, s in enumerate(scene.surfaces) if s.rho > 0]
    out = []
    for order in range(max_order + 1):
        for seq in product(reflective, repeat=order):
            if any(a == b for a, b in zip(seq, seq[1:])):
                continue
            images = [tx]
            for n in seq:
                images.append(_mirror(images[-1], scene.surfaces[n]))
            # walk back from rx through the image chain
            pts, target, ok = [rx], rx, True
            for depth in range(order, 0, -1):
                s = scene.surfaces[seq[depth - 1]]
                img = images[depth]
                da, db = target[s.axis] - s.offset, img[s.axis] - s.offset
                if da * db >= 0:
                    ok = False
                    break
                hit = target + da / (da - db) * (img - target)
                u, v = s.in_plane_axes
                if not (s.lo[0] <= hit[u] <= s.hi[0] and s.lo[1] <= hit[v] <= s.hi[1]):
                    ok = False
                    break
                pts.append(hit)
                target = hit
            if not ok:
                continue
            pts.append(tx)
            pts = pts[::-1]
            length = sum(float(np.linalg.norm(b - a)) for a, b in zip(pts, pts[1:]))
            gain = math.prod(scene.surfaces[n].rho for n in seq)
            for a, b in zip(pts, pts[1:]):
                for s in partitions:
                    if _crosses(a, b, s):
                        gain *= s.tau
            amp = lam0 / (4 * math.pi * length) * gain
            if amp > 0:
                out.append((length / SPEED_OF_LIGHT, amp, order))
    return sorted(out)


def _walls(**rho):
    walls = dict.fromkeys(("x0", "x1", "y0", "y1", "z0", "z1"), 0.0)
    walls.update(rho)
    return walls


MIRROR_SCENES = [
    ("one wall", Scene((10, 8, 4), wall_rho=_walls(z0=0.7)), (2, 3, 1.5), (7, 5, 2.5)),
    ("floor+ceiling", Scene((10, 8, 4), wall_rho=_walls(z0=0.7, z1=0.5)), (2, 3, 1.5), (7, 5, 2.5)),
    ("corner", Scene((10, 8, 4), wall_rho=_walls(x0=0.6, y0=0.6)), (2, 3, 1.5), (7, 5, 2.5)),
    ("parallel walls", Scene((6, 8, 4), wall_rho=_walls(x0=0.6, x1=0.6)), (1, 2, 1.0), (4.5, 7, 3.0)),
    (
        "wall+partition",
        Scene((10, 8, 4), wall_rho=_walls(y1=0.6), partitions=(Surface(1, 3.0, (3.0, 0.5), (6.0, 3.0), rho=0.5, tau=0.4),)),
        (2, 1.5, 1.5),
        (8, 2.0, 2.2),
    ),
    (
        "partition between",
        Scene((10, 8, 4), wall_rho=_walls(z0=0.8), partitions=(Surface(0, 5.0, (0.5, 0.5), (7.5, 3.5), rho=0.6, tau=0.3),)),
        (2, 3.0, 1.5),
        (8, 4.5, 2.0),
    ),
]


@criterion(6, "propagation correctness")
def test_c6_free_space(note):
    worst = 0.0
    rng = np.random.default_rng(606)
    scene = Scene.free_space((50, 40, 30))
    for _ in range(50):
        tx, rx = rng.uniform(0.5, 29.5, (2, 3))
        (p,) = trace_paths(scene, tx, rx, 3)
        d = float(np.linalg.norm(rx - tx))
        expected = SPEED_OF_LIGHT / 5e9 / (4 * math.pi * d)
        worst = max(worst, abs(p.amplitude / expected - 1))
    note(f"free space: worst relative amplitude error {worst:.1e}")
    assert worst <= 1e-12


@criterion(6, "propagation correctness")
def test_c6_reciprocity(reference, note):
    rng = np.random.default_rng(607)
    worst = 0.0
    for _ in range(10):
        a = rng.uniform([0.3, 0.3, 0.3], np.array(reference.scene.size) - 0.3)
        b = rng.uniform([0.3, 0.3, 0.3], np.array(reference.scene.size) - 0.3)
        fwd = sorted((p.delay, p.amplitude) for p in trace_paths(reference.scene, a, b, 3))
        rev = sorted((p.delay, p.amplitude) for p in trace_paths(reference.scene, b, a, 3))
        assert len(fwd) == len(rev)
        for (d1, a1), (d2, a2) in zip(fwd, rev):
            worst = max(worst, abs(d2 / d1 - 1), abs(a2 / a1 - 1))
    note(f"reciprocity: worst relative delay/amplitude mismatch {worst:.1e}")
    assert worst <= 1e-12


@criterion(6, "propagation correctness")
@pytest.mark.parametrize("name,scene,tx,rx", MIRROR_SCENES, ids=[s[0] for s in MIRROR_SCENES])
def test_c6_mirror_enumeration(name, scene, tx, rx):
    traced = sorted((p.delay, p.amplitude, p.bounce_count) for p in trace_paths(scene, tx, rx, 2))
    oracle = mirror_enumeration(scene, tx, rx, 2)
    assert len(traced) == len(oracle)
    for (d1, a1, o1), (d2, a2, o2) in zip(traced, oracle):
        assert o1 == o2
        assert d1 == pytest.approx(d2, rel=1e-12)
        assert a1 == pytest.approx(a2, rel=1e-12)


# ---------------------------------------------------------------- criterion 7


@criterion(7, "degenerate identities")
def test_c7_zero_noncentrality():
    _, beta = analytic_rates(0.0, 5, ALPHA)
    assert beta == pytest.approx(1 - ALPHA, abs=1e-12)


@criterion(7, "degenerate identities")
def test_c7_eve_at_alice(reference):
    room = reference.room("room2")
    for n in (0, 350, 712):
        p = room.positions[n]
        beta = evaluate_pair(reference.scene, reference.bob, p, p, PROBE, ALPHA, 110.0)
        assert beta == pytest.approx(1 - ALPHA, abs=1e-12)


@criterion(7, "degenerate identities")
def test_c7_h0_ks(reference, note):
    rng = np.random.default_rng(707)
    cache = PathCache(reference.scene, reference.bob)
    h = cache.response(reference.room("room4").positions[42], PROBE).samples
    sigma2 = noise_variance(NoiseBudget.from_gamma_db(120), PROBE.M)
    n = 100_000
    L, _ = statistic_batch(simulate_measurements(h, sigma2, rng, n), simulate_measurements(h, sigma2, rng, n), sigma2)
    p_2m = stats.kstest(L, stats.chi2(2 * PROBE.M).cdf).pvalue
    p_2m1 = stats.kstest(L, stats.chi2(2 * PROBE.M - 1).cdf).pvalue
    note(f"KS p-value vs chi-square({2 * PROBE.M}) = {p_2m:.3g}; vs chi-square({2 * PROBE.M - 1}) = {p_2m1:.3g}")
    assert p_2m > 0.01


# ---------------------------------------------------------------- criterion 8


@criterion(8, "room sweep performance with trace cache")
def test_c8_performance(reference, note):
    room = reference.room("room1")
    assert room.n_pairs == 11_175
    spec = SweepSpec(W=(0.05e9, 0.1e9, 0.2e9, 0.3e9, 0.5e9), M=(1, 5))
    workers = os.cpu_count() or 1
    cache = PathCache(reference.scene, reference.bob, spec.max_order, spec.f0)
    with Timer(60) as t:
        rows = room_sweep(reference.scene, reference.bob, room, spec, workers=workers, cache=cache)
    note(f"{len(rows)} rows over {room.n_pairs} pairs in {t.elapsed:.1f} s on {workers} core(s); {cache.trace_count} traces")
    assert len(rows) == 10 * 4
    assert all(r.n_pairs == 11_175 for r in rows)
    assert cache.trace_count == room.n_points
    assert t.elapsed < t.limit


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
