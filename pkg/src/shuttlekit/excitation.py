"""Perturbative excitation energy of the transported mode.

For spring-constant noise the final energy is

    E = E_n + hbar w^3 (n + 1/2) int g0 dt + m int [g0 qc''^2 + w^2 g1 qc' qc''] dt

and the excitation is ``E_e = intensity * G(T)``.  Position noise gives
``E_e = (K^2 / m) int g0 dt`` independent of the trajectory.
"""

from dataclasses import dataclass, asdict
import math

import numpy as np
from scipy.constants import hbar
from scipy.special import gammainc

from .noise import Flicker, OrnsteinUhlenbeck, White
from .numerics import QuadratureRule, graded_breakpoints, integrate
from .trajectories import Protocol

#: Perturbative-validity policy: warn when E_e exceeds this fraction of hbar*omega.
WARN_FRACTION = 0.1


@dataclass(frozen=True)
class ExcitationReport:
    E_n: float
    G: float
    E_e: float
    static_term: float
    dynamic_term: float
    intensity: float
    method: str
    warning_perturbative: bool = False

    def to_dict(self):
        return {
            "E_n_J": self.E_n,
            "G_SI": self.G,
            "E_e_J": self.E_e,
            "terms": {"static": self.static_term, "dynamic": self.dynamic_term},
            "intensity": self.intensity,
            "method": self.method,
            "warning_perturbative": self.warning_perturbative,
        }

    @property
    def energy(self):
        return self.E_n + self.E_e


@dataclass(frozen=True)
class PositionNoiseParams:
    """Trap-shaking coupling ``L = K (q - q0)``."""

    K: float
    model: object

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("K must be positive")


def _report(params, static, dynamic, intensity, method):
    G = static + dynamic
    E_e = intensity * G
    return ExcitationReport(
        E_n=params.mode_energy,
        G=G,
        E_e=E_e,
        static_term=static,
        dynamic_term=dynamic,
        intensity=intensity,
        method=method,
        warning_perturbative=bool(E_e > WARN_FRACTION * params.hbar_omega),
    )


def quadrature_setup(traj, tmin=0.0, a=0.0, b=None):
    """Rule and breakpoints for integrals over a trajectory.

    Panels align with segment boundaries; geometric grading near ``t = 0``
    resolves kernel boundary layers of width ``tmin``.
    """
    T = traj.duration if b is None else b
    rule = QuadratureRule.for_interval(a, T, period=traj.params.period)
    bps = [p for p in traj.breakpoints if a < p < T]
    if tmin > 0:
        panel = (T - a) / rule.panel_count
        bps += [p for p in graded_breakpoints(a, a + panel, tmin / 4.0)]
    return rule, bps


def _check_rest(traj):
    d, T = traj.params.distance, traj.duration
    _, v0, _ = traj.eval(0.0)
    _, v1, _ = traj.eval(T)
    tol = 1e-9 * d / T
    if abs(v0) > tol or abs(v1) > tol:
        raise ValueError("closed noise forms need zero boundary velocities")


def spring_excitation_generic(traj, params, model):
    """Quadrature of the memory-kernel energy formula for any noise model."""
    unit = model.unit()
    ker = unit.kernels()
    m, w, n = params.mass, params.omega, params.n
    T = params.duration
    rule, bps = quadrature_setup(traj, model.min_correlation_time)

    def dyn(t):
        _, qd, qdd = traj.eval(t)
        return ker.g0(t) * qdd**2 + w**2 * ker.g1(t) * qd * qdd

    static = hbar * w**3 * (n + 0.5) * integrate(ker.g0, 0.0, T, rule, bps)
    dynamic = m * integrate(dyn, 0.0, T, rule, bps)
    return _report(params, static, dynamic, model.intensity, "quadrature")


def accel_square_integral(traj):
    """``int_0^T qc''(t)^2 dt``."""
    rule, bps = quadrature_setup(traj)
    return integrate(lambda t: traj.eval(t)[2] ** 2, 0.0, traj.duration, rule, bps)


def white_static(params, T=None):
    T = params.duration if T is None else T
    return hbar * params.omega**3 * (2 * params.n + 1) * T / 4.0


def white_dynamic_closed(kind, params, traj=None):
    """Closed forms of ``(m/2) int qc''^2``; None when no closed form applies."""
    m, d, T, w = params.mass, params.distance, params.duration, params.omega
    if kind is Protocol.QUINTIC:
        return 60.0 * m * d**2 / (7.0 * T**3)
    if kind is Protocol.UNBOUNDED_OPTIMAL:
        return 6.0 * m * d**2 / T**3
    if kind is Protocol.BANG_BANG:
        return m * w**4 * d**2 * T / 16.0
    if kind is Protocol.BOUNDED_OPTIMAL:
        if traj is not None and "fallback_unbounded" in traj.annotations:
            return 6.0 * m * d**2 / T**3
        t1, t2 = traj.info["t1"], traj.info["t2"]
        c1 = traj.info.get("c1", 0.0)
        delta = params.delta
        return 0.5 * m * w**4 * (2.0 * delta**2 * t1 + c1**2 * t2**3 / 12.0)
    return None


def white_G(traj, params):
    """White-noise sensitivity from protocol closed forms (septic: quadrature)."""
    dyn = white_dynamic_closed(traj.kind, params, traj)
    method = "closed_form"
    if dyn is None:
        dyn = 0.5 * params.mass * accel_square_integral(traj)
        method = "quadrature"
    return _report(params, white_static(params), dyn, 1.0, method)


def white_excitation(traj, params, gamma):
    rep = white_G(traj, params)
    return _report(params, rep.static_term, rep.dynamic_term, gamma, rep.method)


def t_min_analytic(kind, params):
    """Duration minimizing the white-noise G for the quintic or unbounded cubic."""
    m, d, w, n = params.mass, params.distance, params.omega, params.n
    if kind is Protocol.QUINTIC:
        return (720.0 * m * d**2 / (7.0 * (2 * n + 1) * hbar * w**3)) ** 0.25
    if kind is Protocol.UNBOUNDED_OPTIMAL:
        return (72.0 * m * d**2 / ((2 * n + 1) * hbar * w**3)) ** 0.25
    raise ValueError(f"no closed-form minimum for {kind}")


def ou_excitation_closed(traj, params, D, tau):
    """OU closed form with the g1 term integrated by parts."""
    _check_rest(traj)
    m, w, n, T = params.mass, params.omega, params.n, params.duration
    static = hbar * w**3 / 4.0 * (2 * n + 1) * (T - tau * gammainc(1.0, T / tau))
    rule, bps = quadrature_setup(traj, tau)

    def f(t):
        _, qd, qdd = traj.eval(t)
        return gammainc(1.0, t / tau) * qdd**2 - w**2 * t / (2.0 * tau) * np.exp(-t / tau) * qd**2

    dynamic = 0.5 * m * integrate(f, 0.0, T, rule, bps)
    return _report(params, static, dynamic, D, "closed_form")


def ou_small_tau(traj, params, D, tau):
    """Linear-in-tau approximation of the OU sensitivity."""
    m, w, n, T = params.mass, params.omega, params.n, params.duration
    a0 = traj.eval(0.0)[2]
    static = hbar * w**3 / 2.0 * (n + 0.5) * (T - tau)
    dynamic = 0.5 * m * (accel_square_integral(traj) - tau * a0**2)
    return _report(params, static, dynamic, D, "approximation")


def flicker_excitation_closed(traj, params, C, tau1, tau2):
    """Closed flicker form built from exponential integrals."""
    _check_rest(traj)
    model = Flicker(C, tau1, tau2)
    m, w, n, T = params.mass, params.omega, params.n, params.duration
    dt = tau2 - tau1

    def static_prim(tau):
        x = T / tau
        return tau * T * (2.0 - math.exp(-x)) + tau**2 * math.expm1(-x) - T**2 * _ei(-x)

    static = hbar * w**3 / (4.0 * dt) * (n + 0.5) * (static_prim(tau2) - static_prim(tau1))
    rule, bps = quadrature_setup(traj, tau1)

    def f(t):
        _, qd, qdd = traj.eval(t)
        g0b = Flicker._g0_primitive(t, tau2) - Flicker._g0_primitive(t, tau1)
        eib = _ei_arr(t, tau2) - _ei_arr(t, tau1)
        return qdd**2 * g0b + 0.5 * w**2 * t * qd**2 * eib

    dynamic = m / (2.0 * dt) * integrate(f, 0.0, T, rule, bps)
    return _report(params, static, dynamic, model.intensity, "closed_form")


def flicker_small_tau(traj, params, C, tau1, tau2):
    """Approximation valid for ``tau2 << T``."""
    m, w, n, T = params.mass, params.omega, params.n, params.duration
    tbar = 0.5 * (tau1 + tau2)
    a0 = traj.eval(0.0)[2]
    static = hbar * w**3 / 2.0 * (n + 0.5) * (T - tbar)
    dynamic = 0.5 * m * (accel_square_integral(traj) - tbar * a0**2)
    return _report(params, static, dynamic, Flicker(C, tau1, tau2).intensity, "approximation")


def _ei(x):
    from .numerics import expint_ei

    return expint_ei(x)


def _ei_arr(t, tau):
    from .noise import _ei_safe

    return _ei_safe(np.asarray(t, dtype=float), tau)


def position_excitation(params, pos, T=None):
    """Excitation from trap-position noise; depends only on the duration."""
    T = params.duration if T is None else T
    model = pos.model
    unit = model.unit()
    if isinstance(unit, (White, OrnsteinUhlenbeck)):
        g0_int = unit.g0_integral(T)
        method = "closed_form"
    else:
        g0 = unit.kernels().g0
        rule = QuadratureRule.for_interval(0.0, T, period=params.period)
        bps = graded_breakpoints(0.0, T / rule.panel_count, unit.min_correlation_time / 4.0)
        g0_int = integrate(g0, 0.0, T, rule, bps)
        method = "quadrature"
    G = pos.K**2 / params.mass * g0_int
    return _report(params, G, 0.0, model.intensity, method)


def spring_excitation(traj, params, model):
    """Closed form where one exists, otherwise the generic quadrature."""
    if isinstance(model, White):
        return white_excitation(traj, params, model.gamma)
    if isinstance(model, OrnsteinUhlenbeck):
        return ou_excitation_closed(traj, params, model.D, model.tau)
    return flicker_excitation_closed(traj, params, model.C, model.tau1, model.tau2)


def report_json(rep):
    return asdict(rep) | rep.to_dict()
