"""Systematic spring-constant errors.

A trajectory designed for ``omega`` but run in a trap of frequency
``omega_1 = omega sqrt(1 + lam)`` leaves the ion displaced by ``f(t)`` with

    f'' + omega_1^2 f = lam q_c'',

so the final excitation is ``(m lam^2 / 2)(I_cos^2 + I_sin^2)`` with the
Fourier integrals of ``q_c''`` taken at ``omega_1``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .numerics import QuadratureRule, integrate, quadrature_nodes
from .trajectories import PhysicalParams


@dataclass(frozen=True)
class SystematicError:
    """Relative spring-constant error ``lam`` (actual stiffness ``omega^2 (1 + lam)``)."""

    lam: float

    def __post_init__(self):
        if not self.lam > -1.0:
            raise ValueError("lam must exceed -1")

    def omega1(self, omega):
        return omega * math.sqrt(1.0 + self.lam)


@dataclass(frozen=True)
class TimeScaleError:
    """Clock error: the trap follows ``q0(eps t)`` instead of ``q0(t)``."""

    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")


def _rule(traj, omega_eval):
    T = traj.duration
    period = traj.params.period
    if omega_eval > 0:
        period = min(period, 2.0 * math.pi / omega_eval)
    return QuadratureRule.for_interval(0.0, T, period=period), list(traj.breakpoints)


def fourier_conditions(traj, omega_eval):
    """``(int q_c'' cos(w t) dt, int q_c'' sin(w t) dt)`` over ``[0, T]``."""
    rule, bps = _rule(traj, omega_eval)
    t, w = quadrature_nodes(0.0, traj.duration, rule, bps)
    a = traj.eval(t)[2]
    ph = omega_eval * t
    return float(np.dot(w, a * np.cos(ph))), float(np.dot(w, a * np.sin(ph)))


def systematic_excitation(traj, params, err):
    """Exact final excitation for the stiffness error ``err``.

    The nominal frequency is the one the trajectory was designed for;
    ``params`` supplies the mass.
    """
    if err.lam == 0.0:
        return 0.0
    w1 = err.omega1(traj.params.omega)
    ic, is_ = fourier_conditions(traj, w1)
    return 0.5 * params.mass * err.lam**2 * (ic * ic + is_ * is_)


def classical_mismatch_path(traj, params, err):
    """Displacement ``f`` of the ion from ``q_c`` under the error ``err``.

    Returns a callable ``t -> (f(t), f'(t))`` accepting scalars or arrays.
    """
    lam = err.lam
    w1 = err.omega1(traj.params.omega)
    rule, bps = _rule(traj, w1)

    def partial(t):
        if t <= 0.0:
            return 0.0, 0.0
        cuts = [b for b in bps if b < t]
        ic = integrate(lambda s: traj.eval(s)[2] * np.cos(w1 * s), 0.0, t, rule, cuts)
        is_ = integrate(lambda s: traj.eval(s)[2] * np.sin(w1 * s), 0.0, t, rule, cuts)
        return ic, is_

    def path(t):
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        f = np.empty_like(ts)
        fd = np.empty_like(ts)
        for i, ti in enumerate(ts):
            if lam == 0.0:
                f[i] = fd[i] = 0.0
                continue
            ic, is_ = partial(float(ti))
            s, c = math.sin(w1 * ti), math.cos(w1 * ti)
            f[i] = lam / w1 * (s * ic - c * is_)
            fd[i] = lam * (c * ic + s * is_)
        if np.ndim(t) == 0:
            return float(f[0]), float(fd[0])
        return f, fd

    return path


def mismatch_energy(traj, params, err):
    """Final oscillation energy of the mismatch mode, ``(m/2)(f'^2 + w1^2 f^2)``."""
    f, fd = classical_mismatch_path(traj, params, err)(traj.duration)
    w1 = err.omega1(traj.params.omega)
    return 0.5 * params.mass * (fd * fd + w1 * w1 * f * f)


def timescale_equivalence(err, params):
    """Map a clock error onto a stiffness error in scaled time ``s = eps t``.

    Returns ``(params', lam_eff, energy_scale)`` with ``m' = eps m``,
    ``omega' = omega / eps`` and ``lam_eff = 1/eps^2 - 1``.  The scaled-frame
    Hamiltonian is ``H / eps``, so lab-frame energies are scaled-frame
    energies times ``energy_scale = eps``.
    """
    eps = err.eps
    primed = PhysicalParams(
        mass=eps * params.mass,
        omega=params.omega / eps,
        distance=params.distance,
        duration=params.duration,
        n=params.n,
        delta=params.delta,
    )
    return primed, 1.0 / eps**2 - 1.0, eps


def timescale_excitation(traj, params, err):
    """Lab-frame excitation predicted for the clock error ``err``."""
    primed, lam, scale = timescale_equivalence(err, params)
    return scale * systematic_excitation(traj, primed, SystematicError(lam))


def lambda_sweep(trajs, params, lams):
    """Excitation for each trajectory at each ``lam``; shape ``(len(lams), len(trajs))``."""
    out = np.empty((len(lams), len(trajs)))
    for i, lam in enumerate(lams):
        err = SystematicError(float(lam))
        for j, tr in enumerate(trajs):
            out[i, j] = systematic_excitation(tr, params, err)
    return out
