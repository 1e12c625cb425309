"""Non-perturbative checks: closed moment equations and Monte-Carlo
ensembles of exact Gaussian-state evolutions.

Both propagate the state relative to a reference path ``r(t)`` (normally
the designed trajectory ``q_c``): ``u = <q> - r``, ``w = <p> - m r'`` plus
central second moments.  Working with deviations keeps excitations of
order ``1e-3 hbar omega`` resolvable next to transport distances of
hundreds of micrometres.

Spring-constant noise couples through ``L = (m w^2 / 2)(q - q0)^2``,
position noise through ``L = K (q - q0)``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import os
import warnings

import numpy as np
from scipy.constants import hbar

from ._backend import kernels
from .errors import DivergenceError, UncertaintyFloorWarning
from .noise import White, check_step, sample_path
from .trajectories import Protocol

SPRING = "spring"
FLOOR_RTOL = 1e-9
POSITION = "position"
_CODES = {SPRING: 0, POSITION: 1}


@dataclass(frozen=True)
class MomentState:
    """First and second moments stored as reference + deviation + central parts."""

    ref_q: float
    ref_p: float
    dev_q: float
    dev_p: float
    var_q: float
    var_p: float
    cov: float

    @classmethod
    def from_raw(cls, mean_q, mean_p, m2_q, m2_p, cross):
        return cls(
            ref_q=mean_q, ref_p=mean_p, dev_q=0.0, dev_p=0.0,
            var_q=m2_q - mean_q**2,
            var_p=m2_p - mean_p**2,
            cov=0.5 * cross - mean_q * mean_p,
        )

    @property
    def mean_q(self):
        return self.ref_q + self.dev_q

    @property
    def mean_p(self):
        return self.ref_p + self.dev_p

    @property
    def m2_q(self):
        return self.var_q + self.mean_q**2

    @property
    def m2_p(self):
        return self.var_p + self.mean_p**2

    @property
    def cross(self):
        return 2.0 * (self.cov + self.mean_q * self.mean_p)

    @property
    def uncertainty_product(self):
        return self.var_q * self.var_p - self.cov**2

    def to_dict(self):
        return {
            "mean_q": self.mean_q,
            "mean_p": self.mean_p,
            "m2_q": self.m2_q,
            "m2_p": self.m2_p,
            "cross": self.cross,
            "var_q": self.var_q,
            "var_p": self.var_p,
            "cov": self.cov,
        }


@dataclass(frozen=True)
class MomentRun:
    """Final state of a moment-equation run with its drive context."""

    state: MomentState
    q0_final: float
    energy: float
    excitation: float
    min_uncertainty: float
    history: np.ndarray | None = None
    times: np.ndarray | None = None


@dataclass(frozen=True)
class GaussianEnsembleResult:
    mean_energy: float
    std_error: float
    member_count: int
    seed: int
    flagged: int = 0
    excitation: float = 0.0
    min_uncertainty: float = math.inf


def energy_from_moments(ms, params, q0_final):
    """``<H0> = <p^2>/2m + (m w^2 / 2) <(q - q0_final)^2>``."""
    m, w = params.mass, params.omega
    off = (ms.ref_q - q0_final) + ms.dev_q
    return (ms.var_p + ms.mean_p**2) / (2.0 * m) + 0.5 * m * w**2 * (ms.var_q + off**2)


def ground_state(params):
    """Central moments of Fock state ``n`` in the trap."""
    m, w = params.mass, params.omega
    f = 2 * params.n + 1
    return f * hbar / (2.0 * m * w), f * hbar * m * w / 2.0, 0.0


def default_step(params, model=None):
    dt = params.period / 1000.0
    if model is not None and model.min_correlation_time > 0:
        dt = min(dt, model.min_correlation_time / 10.0)
    return dt


@dataclass(frozen=True)
class Drive:
    """Reference-path drive sampled on the half-step grid."""

    h: float
    n_steps: int
    lag: np.ndarray
    mis: np.ndarray
    rdot: np.ndarray
    ref_q_end: float
    ref_p_end: float
    q0_end: float

    @property
    def times(self):
        return self.h * np.arange(self.n_steps + 1)


def make_drive(traj, params, dt, time_scale=1.0):
    """Sample the drive for trap path ``q0(eps t)`` over ``[0, T / eps]``.

    Energies are measured in the final trap centred at ``q_c(T)`` (``= d``);
    protocols whose trap jumps at the endpoints jump back there at ``T``.
    The reference is ``r(t) = q_c(eps t)``; for ``eps = 1`` it obeys Newton's
    equation exactly and ``mis`` vanishes.
    """
    eps = float(time_scale)
    if not eps > 0:
        raise ValueError("time_scale must be positive")
    T = traj.duration
    t_end = T / eps
    n = max(1, math.ceil(t_end / dt - 1e-9))
    h = t_end / n
    s = np.minimum(eps * (0.5 * h) * np.arange(2 * n + 1), T)
    q, qd, qdd = traj.eval(s)
    if traj.kind is Protocol.BANG_BANG:
        lag = q - 0.5 * traj.params.distance
    else:
        lag = -qdd / traj.params.omega**2
    mis = -params.omega**2 * lag - eps * eps * qdd
    if eps == 1.0 and traj.kind is not Protocol.BANG_BANG and params.omega == traj.params.omega:
        mis = np.zeros_like(mis)
    return Drive(
        h=h, n_steps=n, lag=lag, mis=mis, rdot=eps * qd,
        ref_q_end=float(q[-1]), ref_p_end=params.mass * eps * float(qd[-1]),
        q0_end=float(q[-1]),
    )


def _kernel_arrays(model, h, n_steps):
    if model is None:
        z = np.zeros(2 * n_steps + 1)
        return z, z
    t = (0.5 * h) * np.arange(2 * n_steps + 1)
    ker = model.kernels()
    g0 = np.broadcast_to(np.asarray(ker.g0(t), dtype=float), t.shape).copy()
    g1 = np.broadcast_to(np.asarray(ker.g1(t), dtype=float), t.shape).copy()
    return g0, g1


def _finish(hist, drive, params, keep_history):
    bad = ~np.all(np.isfinite(hist), axis=1)
    if bad.any():
        k = int(np.argmax(bad))
        raise DivergenceError(f"moment equations diverged at t={k * drive.h!r}", t=k * drive.h)
    u, w, vq, vp, c = hist[-1]
    ms = MomentState(
        ref_q=drive.ref_q_end, ref_p=drive.ref_p_end,
        dev_q=float(u), dev_p=float(w),
        var_q=float(vq), var_p=float(vp), cov=float(c),
    )
    energy = energy_from_moments(ms, params, drive.q0_end)
    floor = float(np.min(hist[:, 2] * hist[:, 3] - hist[:, 4] ** 2))
    if floor < 0.25 * hbar**2 * (1.0 - FLOOR_RTOL):
        warnings.warn(
            f"uncertainty product fell to {floor / (0.25 * hbar**2):.3g} hbar^2/4; "
            "noise correlation time is outside the short-memory regime",
            UncertaintyFloorWarning, stacklevel=3,
        )
    return MomentRun(
        state=ms,
        q0_final=drive.q0_end,
        energy=energy,
        excitation=energy - params.mode_energy,
        min_uncertainty=floor,
        history=hist if keep_history else None,
        times=drive.times if keep_history else None,
    )


def evolve_moments_spring(traj, params, model, dt=None, history=False, time_scale=1.0):
    """Integrate the closed moment equations under spring-constant noise.

    ``model=None`` gives the noiseless evolution.  Returns a :class:`MomentRun`;
    its ``state`` is the :class:`MomentState` at the final time.
    """
    dt = default_step(params, model) if dt is None else dt
    drive = make_drive(traj, params, dt, time_scale)
    g0, g1 = _kernel_arrays(model, drive.h, drive.n_steps)
    vq, vp, c = ground_state(params)
    hist = kernels.moments_rk4(
        0, np.array([0.0, 0.0, vq, vp, c]), drive.h,
        drive.lag, drive.mis, drive.rdot, g0, g1,
        params.mass, params.omega, 0.0,
    )
    return _finish(np.asarray(hist), drive, params, history)


def evolve_moments_position(traj, params, pos, dt=None, history=False):
    """Integrate the moment equations under trap-position noise."""
    model = None if pos is None else pos.model
    dt = default_step(params, model) if dt is None else dt
    drive = make_drive(traj, params, dt)
    g0, g1 = _kernel_arrays(model, drive.h, drive.n_steps)
    vq, vp, c = ground_state(params)
    k2 = 0.0 if pos is None else pos.K**2
    hist = kernels.moments_rk4(
        1, np.array([0.0, 0.0, vq, vp, c]), drive.h,
        drive.lag, drive.mis, drive.rdot, g0, g1,
        params.mass, params.omega, k2,
    )
    return _finish(np.asarray(hist), drive, params, history)


def thread_count():
    env = os.environ.get("SHUTTLEKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def _member_noise(model, T, h, seed, members, period):
    rows = [sample_path(model, T, h, seed, member=i, period=period).step_values for i in members]
    return np.vstack(rows)


def mc_ensemble_energy(traj, params, model, coupling=SPRING, K=None, members=10_000,
                       seed=0, dt=None, chunk=256, workers=None):
    """Monte-Carlo mean of the final energy over sampled noise realizations.

    Every member draws its own stream from ``(seed, member index)``, so the
    result is bit-identical for any chunk size or worker count.
    """
    if coupling not in _CODES:
        raise ValueError(f"coupling must be {SPRING!r} or {POSITION!r}")
    if coupling == POSITION and (K is None or not K > 0):
        raise ValueError("position coupling needs K > 0")
    if members < 100:
        raise ValueError("members must be at least 100")
    dt = default_step(params, model) if dt is None else dt
    check_step(model, dt, params.period)
    drive = make_drive(traj, params, dt)
    T = traj.duration
    vq, vp, c = ground_state(params)
    state0 = np.array([0.0, 0.0, vq, vp, c])
    code = _CODES[coupling]
    kc = 0.0 if K is None else float(K)
    noiseless = isinstance(model, White) and model.gamma == 0.0

    def run_chunk(lo):
        idx = range(lo, min(lo + chunk, members))
        if noiseless:
            x = np.zeros((len(idx), drive.n_steps))
        else:
            x = _member_noise(model, T, dt, seed, idx, params.period)
        return np.asarray(kernels.gaussian_members(
            code, state0, drive.h, drive.lag, drive.mis, x,
            params.mass, params.omega, kc,
        ))

    starts = list(range(0, members, chunk))
    nw = thread_count() if workers is None else max(1, workers)
    if nw == 1:
        parts = [run_chunk(lo) for lo in starts]
    else:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            parts = list(ex.map(run_chunk, starts))
    res = np.vstack(parts)

    m, w = params.mass, params.omega
    u, dp, vq_f, vp_f = res[:, 0], res[:, 1], res[:, 2], res[:, 3]
    off = (drive.ref_q_end - drive.q0_end) + u
    pm = drive.ref_p_end + dp
    energies = (vp_f + pm**2) / (2.0 * m) + 0.5 * m * w**2 * (vq_f + off**2)
    ok = np.isfinite(energies) & np.all(np.isfinite(res), axis=1)
    flagged = int(members - np.count_nonzero(ok))
    if flagged > 0.01 * members:
        raise DivergenceError(f"{flagged} of {members} members diverged")
    good = energies[ok]
    n_good = good.size
    # shift by the first member so identical members give exactly zero spread
    dev = good - good[0]
    dmean = np.sum(dev) / n_good
    mean = float(good[0] + dmean)
    std = float(np.sqrt(np.sum((dev - dmean) ** 2) / (n_good - 1))) if n_good > 1 else 0.0
    return GaussianEnsembleResult(
        mean_energy=mean,
        std_error=std / math.sqrt(n_good),
        member_count=n_good,
        seed=int(seed),
        flagged=flagged,
        excitation=mean - params.mode_energy,
        min_uncertainty=float(np.min(res[ok, 5])) if n_good else math.nan,
    )

