"""Channel-response hypothesis test for transmitter authentication.

The receiver keeps a noisy reference response for the legitimate transmitter
and compares every later measurement against it after removing the unknown
common phase. Under H0 (same transmitter) the normalized squared distance is
chi-square with ``2M`` degrees of freedom; under H1 it is noncentral
chi-square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .propagation import FrequencyResponse, ProbeConfig, check_same_probe
from .special import chi2_quantile, noncentral_chi2_cdf

THERMAL_NOISE_DENSITY = 4.0e-18  # mW/Hz, about -174 dBm/Hz
_ZERO_INNER = 1e-300
TWO_PI = 2.0 * math.pi


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class NoiseBudget:
    """Transmit power and receiver noise, all in mW / Hz units.

    ``gamma`` is total transmit power over per-tone receiver noise power,
    ``P_T / (kT * N_F * b)``.
    """

    P_T: float = 100.0
    kT: float = THERMAL_NOISE_DENSITY
    N_F: float = 10.0
    b: float = 2.5e6

    def __post_init__(self) -> None:
        for name in ("P_T", "kT", "N_F", "b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"noise budget field {name} must be positive")

    @classmethod
    def from_gamma_db(cls, gamma_db: float, kT: float = THERMAL_NOISE_DENSITY, N_F: float = 10.0, b: float = 2.5e6) -> NoiseBudget:
        """Budget whose transmit power yields the requested ``gamma_db``."""
        return cls(P_T=db_to_linear(gamma_db) * kT * N_F * b, kT=kT, N_F=N_F, b=b)

    @property
    def noise_power(self) -> float:
        return self.kT * self.N_F * self.b

    @property
    def gamma(self) -> float:
        return self.P_T / self.noise_power

    @property
    def gamma_db(self) -> float:
        return linear_to_db(self.gamma)


@dataclass(frozen=True)
class TestConfig:
    probe: ProbeConfig
    alpha: float = 0.01
    noise: NoiseBudget = NoiseBudget()

    __test__ = False  # not a pytest class

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def sigma2(self) -> float:
        return noise_variance(self.noise, self.probe.M)


@dataclass(frozen=True)
class TestOutcome:
    """Result of one authentication decision.

    ``accept`` is True when the claimant is judged to be the legitimate
    transmitter. ``mu_L`` and ``beta`` are only filled in when the true
    (noiseless) channels are known.
    """

    L: float
    k: float
    phi_star: float
    accept: bool
    mu_L: float | None = None
    beta: float | None = None

    __test__ = False


def noise_variance(budget: NoiseBudget, M: int) -> float:
    """Per-measurement noise variance, normalized to per-tone transmit power: ``M / gamma``."""
    if M < 1:
        raise ValueError(f"tone count must be positive, got {M}")
    return M / budget.gamma


def simulate_measurement(H: FrequencyResponse, sigma2: float, rng: np.random.Generator) -> FrequencyResponse:
    """One noisy, phase-rotated snapshot ``H * exp(j phi) + N``.

    ``phi`` is uniform on ``[0, 2 pi)`` and common to all tones; each tone gets
    circular complex Gaussian noise of total variance ``sigma2``.
    """
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    return FrequencyResponse(H.probe, simulate_measurements(H.samples, sigma2, rng, 1)[0])


def simulate_measurements(samples: np.ndarray, sigma2: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` independent snapshots of ``samples`` as an ``(n, M)`` array."""
    samples = np.asarray(samples, dtype=complex)
    phi = rng.uniform(0.0, TWO_PI, size=n)
    noise = rng.standard_normal((n, samples.size, 2))
    noise = (noise[..., 0] + 1j * noise[..., 1]) * math.sqrt(sigma2 / 2.0)
    return samples[None, :] * np.exp(1j * phi)[:, None] + noise


def _phase_of(inner: np.ndarray) -> np.ndarray:
    phi = np.mod(np.angle(inner), TWO_PI)
    phi = np.where(np.abs(inner) < _ZERO_INNER, 0.0, phi)
    # mod can round 2pi - eps up to exactly 2pi
    return np.where(phi >= TWO_PI, 0.0, phi)


def optimal_phase(H_t: FrequencyResponse, H_ref: FrequencyResponse) -> float:
    """Rotation of ``H_ref`` that best matches ``H_t``, in ``[0, 2 pi)``.

    This is the argument of ``sum_m H_t[m] * conj(H_ref[m])``; a vanishing
    inner product gives 0.
    """
    check_same_probe(H_t, H_ref)
    inner = np.vdot(H_ref.samples, H_t.samples)
    return float(_phase_of(np.asarray(inner)))


def statistic_batch(H_t: np.ndarray, H_ref: np.ndarray, sigma2: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise test statistic and aligning phase for ``(n, M)`` response arrays."""
    inner = np.sum(H_t * np.conj(H_ref), axis=-1)
    phi = _phase_of(inner)
    diff = H_t - H_ref * np.exp(1j * phi)[..., None]
    L = np.sum(diff.real**2 + diff.imag**2, axis=-1) / sigma2
    return L, phi


def test_statistic(H_t_hat: FrequencyResponse, H_ref_hat: FrequencyResponse, sigma2: float) -> tuple[float, float]:
    """Phase-minimized normalized distance ``L`` and the minimizing phase."""
    check_same_probe(H_t_hat, H_ref_hat)
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    L, phi = statistic_batch(H_t_hat.samples, H_ref_hat.samples, sigma2)
    return float(L), float(phi)


test_statistic.__test__ = False  # type: ignore[attr-defined]


def decision_threshold(alpha: float, M: int) -> float:
    """Threshold giving false-alarm rate ``alpha`` against chi-square(2M)."""
    return chi2_quantile(1.0 - alpha, 2 * M)


def noncentrality(H_EB: FrequencyResponse, H_AB: FrequencyResponse, sigma2: float) -> float:
    """Noncentrality of the impostor statistic, from noiseless channels."""
    check_same_probe(H_EB, H_AB)
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    mu, _ = statistic_batch(H_EB.samples, H_AB.samples, sigma2)
    return float(mu)


def analytic_rates(mu_L: float, M: int, alpha: float) -> tuple[float, float]:
    """Threshold ``k`` and miss rate ``beta`` for an impostor with noncentrality ``mu_L``."""
    k = decision_threshold(alpha, M)
    return k, noncentral_chi2_cdf(k, 2 * M, mu_L)


def authenticate(
    H_t_hat: FrequencyResponse,
    H_ref_hat: FrequencyResponse,
    config: TestConfig,
    true_claimant: FrequencyResponse | None = None,
    true_reference: FrequencyResponse | None = None,
) -> TestOutcome:
    """Decide whether the claimant's measured response matches the stored reference.

    The claimant is accepted iff ``L < k``; ``L == k`` rejects. If both true
    channels are supplied, the analytic noncentrality and miss rate are
    attached to the outcome.
    """
    check_same_probe(H_t_hat, H_ref_hat)
    if H_t_hat.probe != config.probe:
        raise ValueError("measured responses do not use the configured probe")
    sigma2 = config.sigma2
    L, phi = test_statistic(H_t_hat, H_ref_hat, sigma2)
    k = decision_threshold(config.alpha, config.probe.M)
    mu = beta = None
    if true_claimant is not None and true_reference is not None:
        mu = noncentrality(true_claimant, true_reference, sigma2)
        _, beta = analytic_rates(mu, config.probe.M, config.alpha)
    return TestOutcome(L=L, k=k, phi_star=phi, accept=bool(L < k), mu_L=mu, beta=beta)
