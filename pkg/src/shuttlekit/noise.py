"""Noise models: correlation functions, spectra, memory kernels and seeded
sample paths.

The fluctuating variable ``x(t)`` has zero mean and correlation
``E[x(t) x(s)] = alpha(t - s)``.  Spectra use the convention
``S(Omega) = (1 / 2 pi) * integral alpha(tau) cos(Omega tau) dtau`` over
the whole real line.  The memory kernels are

    g0(t) = int_0^t alpha(u) du,   g1(t) = int_0^t alpha(u) u du.
"""

from dataclasses import dataclass, replace
import math

import numpy as np
import scipy.signal
from scipy.special import gammainc

from .errors import ConfigurationError
from .numerics import expint_ei


@dataclass(frozen=True)
class DiracWeight:
    """Distributional correlation ``weight * delta(lag)``; never evaluated pointwise."""

    weight: float


@dataclass(frozen=True)
class NoiseKernels:
    g0: object
    g1: object


def _ei_safe(t, tau):
    """``t * Ei(-t / tau)`` style factors need Ei only where t > 0."""
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = expint_ei(-t[pos] / tau)
    return out


@dataclass(frozen=True)
class White:
    """White noise ``alpha = gamma * delta``; ``gamma = 0`` is the noiseless limit."""

    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")

    kind = "white"

    @property
    def intensity(self):
        return self.gamma

    @property
    def min_correlation_time(self):
        return 0.0

    def unit(self):
        return replace(self, gamma=1.0)

    def correlation(self, lag):
        return DiracWeight(self.gamma)

    def spectrum(self, omega):
        return np.broadcast_to(self.gamma / (2.0 * math.pi), np.shape(omega)) * 1.0

    def kernels(self):
        half = 0.5 * self.gamma
        return NoiseKernels(
            g0=lambda t: np.full(np.shape(t), half) if np.ndim(t) else half,
            g1=lambda t: np.zeros(np.shape(t)) if np.ndim(t) else 0.0,
        )

    def g0_integral(self, T):
        return 0.5 * self.gamma * T


@dataclass(frozen=True)
class OrnsteinUhlenbeck:
    """Lorentzian noise with ``alpha(t) = D / (2 tau) exp(-|t| / tau)``."""

    D: float
    tau: float

    def __post_init__(self):
        if not self.D >= 0 or not self.tau > 0:
            raise ValueError("OU noise needs D >= 0 and tau > 0")

    kind = "ou"

    @property
    def intensity(self):
        return self.D

    @property
    def min_correlation_time(self):
        return self.tau

    @property
    def variance(self):
        return self.D / (2.0 * self.tau)

    def unit(self):
        return replace(self, D=1.0)

    def correlation(self, lag):
        return self.variance * np.exp(-np.abs(lag) / self.tau)

    def spectrum(self, omega):
        omega = np.asarray(omega, dtype=float)
        return self.D / (2.0 * math.pi * (1.0 + (omega * self.tau) ** 2))

    def kernels(self):
        D, tau = self.D, self.tau
        return NoiseKernels(
            g0=lambda t: 0.5 * D * gammainc(1.0, np.asarray(t) / tau),
            g1=lambda t: 0.5 * D * tau * gammainc(2.0, np.asarray(t) / tau),
        )

    def g0_integral(self, T):
        """``int_0^T g0 = (D/2) (T - tau + tau exp(-T/tau))``."""
        return 0.5 * self.D * (T - self.tau * gammainc(1.0, T / self.tau))


@dataclass(frozen=True)
class Flicker:
    """Superposition of OU processes with correlation times log-uniform in
    ``[tau1, tau2]``; ``C = alpha(0)``."""

    C: float
    tau1: float
    tau2: float

    def __post_init__(self):
        if not self.C >= 0 or not (0 < self.tau1 < self.tau2):
            raise ValueError("flicker noise needs C >= 0 and 0 < tau1 < tau2")

    kind = "flicker"

    @property
    def log_ratio(self):
        return math.log(self.tau2 / self.tau1)

    @property
    def intensity(self):
        return 2.0 * self.C * (self.tau2 - self.tau1) / self.log_ratio

    @property
    def min_correlation_time(self):
        return self.tau1

    @property
    def variance(self):
        return self.C

    def unit(self):
        # scale C so that the intensity is one
        return replace(self, C=self.log_ratio / (2.0 * (self.tau2 - self.tau1)))

    def correlation(self, lag):
        t = np.abs(np.atleast_1d(np.asarray(lag, dtype=float)))
        out = np.full_like(t, self.C)
        pos = t > 0
        tp = t[pos]
        out[pos] = self.C / self.log_ratio * (expint_ei(-tp / self.tau1) - expint_ei(-tp / self.tau2))
        return float(out[0]) if np.ndim(lag) == 0 else out

    def spectrum(self, omega):
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        t1, t2 = self.tau1, self.tau2
        out = np.empty_like(w)
        small = w * t2 < 1e-8
        out[small] = self.C * (t2 - t1) / (math.pi * self.log_ratio)
        ws = w[~small]
        out[~small] = self.C * (np.arctan(ws * t2) - np.arctan(ws * t1)) / (math.pi * ws * self.log_ratio)
        return float(out[0]) if np.ndim(omega) == 0 else out

    def _bracket(self, fn, t):
        t = np.asarray(t, dtype=float)
        arr = np.atleast_1d(t)
        val = fn(arr, self.tau2) - fn(arr, self.tau1)
        return float(val[0]) if t.ndim == 0 else val

    @staticmethod
    def _g0_primitive(t, tau):
        # tau (1 - e^{-t/tau}) - t Ei(-t/tau); the t Ei term vanishes at t = 0
        return tau * gammainc(1.0, t / tau) - t * _ei_safe(t, tau)

    @staticmethod
    def _g1_primitive(t, tau):
        # (1/2) [tau^2 (1 - e^{-x} - x e^{-x}) - t^2 Ei(-x)],  x = t / tau
        return 0.5 * (tau * tau * gammainc(2.0, t / tau) - t * t * _ei_safe(t, tau))

    def kernels(self):
        pref = self.C / self.log_ratio
        return NoiseKernels(
            g0=lambda t: pref * self._bracket(self._g0_primitive, t),
            g1=lambda t: pref * self._bracket(self._g1_primitive, t),
        )

    def components(self, per_decade=10):
        """Discrete OU superposition ``[(tau_i, variance_i)]`` used for sampling."""
        M = max(1, math.ceil(per_decade * math.log10(self.tau2 / self.tau1)))
        step = self.log_ratio / M
        taus = self.tau1 * np.exp(step * (np.arange(M) + 0.5))
        var = self.C * step / self.log_ratio
        return [(float(tau), var) for tau in taus]


NoiseModel = White | OrnsteinUhlenbeck | Flicker


def correlation(model, lag):
    if lag < 0:
        raise ValueError("lag must be non-negative")
    return model.correlation(lag)


def spectrum(model, omega):
    if np.any(np.asarray(omega) < 0):
        raise ValueError("spectrum is defined for omega >= 0")
    return model.spectrum(omega)


def kernels(model):
    return model.kernels()


def from_mapping(cfg):
    """Build a model from ``{"kind": ..., "gamma"/"D"/"tau"/"C"/"tau1"/"tau2": ...}``."""
    kind = cfg.get("kind")
    try:
        if kind == "white":
            return White(float(cfg["gamma"]))
        if kind == "ou":
            return OrnsteinUhlenbeck(float(cfg["D"]), float(cfg["tau"]))
        if kind == "flicker":
            return Flicker(float(cfg["C"]), float(cfg["tau1"]), float(cfg["tau2"]))
    except KeyError as exc:
        raise ConfigurationError(f"noise.kind={kind} requires noise.{exc.args[0]}") from None
    raise ConfigurationError(f"unknown noise kind {kind!r}")


# -- sample paths -----------------------------------------------------------

def member_rng(seed, member):
    """Independent generator for ensemble member ``member`` of run ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(member),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class NoisePath:
    """Samples ``x(t_k)`` on ``t_k = k dt``, ``k = 0..N``.

    For white noise each sample is the (band-limited) value held over
    ``[t_k, t_k + dt)``; the last sample is unused by propagators.
    """

    dt: float
    values: np.ndarray
    seed: int
    model: object

    @property
    def grid(self):
        return self.dt * np.arange(len(self.values))

    @property
    def step_values(self):
        """Value held constant over each step ``[t_k, t_{k+1})``."""
        if isinstance(self.model, White):
            return self.values[:-1]
        return 0.5 * (self.values[:-1] + self.values[1:])


def _ou_samples(rng, n, dt, tau, var):
    a = math.exp(-dt / tau)
    s = math.sqrt(var * -math.expm1(-2.0 * dt / tau))
    x0 = math.sqrt(var) * rng.standard_normal()
    innov = s * rng.standard_normal(n)
    y = scipy.signal.lfilter([1.0], [1.0, -a], innov, zi=[a * x0])[0]
    return np.concatenate(([x0], y))


def check_step(model, dt, period=None):
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    if period is not None and dt > period / 200.0 * (1 + 1e-12):
        raise ConfigurationError(f"dt={dt!r} exceeds T0/200")
    tmin = model.min_correlation_time
    if tmin > 0 and dt > tmin / 10.0 * (1 + 1e-12):
        raise ConfigurationError(f"dt={dt!r} exceeds the shortest correlation time / 10")


def sample_path(model, T, dt, seed, member=0, period=None):
    """Draw one realization on ``ceil(T/dt)`` equal steps covering ``[0, T]``."""
    check_step(model, dt, period)
    n = max(1, math.ceil(T / dt - 1e-9))
    h = T / n
    rng = member_rng(seed, member)
    if isinstance(model, White):
        vals = math.sqrt(model.gamma / h) * rng.standard_normal(n + 1)
    elif isinstance(model, OrnsteinUhlenbeck):
        vals = _ou_samples(rng, n, h, model.tau, model.variance)
    else:
        vals = np.zeros(n + 1)
        for tau, var in model.components():
            vals += _ou_samples(rng, n, h, tau, var)
    return NoisePath(dt=h, values=vals, seed=seed, model=model)
