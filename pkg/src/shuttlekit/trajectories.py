"""Classical center-of-mass paths for shuttling protocols and the induced
trap path.

Every protocol produces a piecewise-analytic ``q_c(t)`` on ``[0, T]`` with
``q_c(0) = 0``, ``q_c(T) = d`` and zero velocity at both ends.  The trap
center follows from Newton's equation in the trap,
``q0 = q_c + q_c'' / omega**2``.
"""

from dataclasses import dataclass, field, replace
import enum
import math

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.constants import atomic_mass, electron_mass, hbar

from .errors import DomainError, InfeasibleError, InvalidDurationError, SingularMatrixError
from .numerics import QuadratureRule, integrate, solve_dense

#: Mass of a singly ionized 40Ca ion (kg).
CA40_ION_MASS = 39.962590863 * atomic_mass - electron_mass


@dataclass(frozen=True)
class PhysicalParams:
    """Experiment context.

    Attributes
    ----------
    mass : float
        Ion mass (kg).
    omega : float
        Trap angular frequency (rad/s).
    distance : float
        Transport distance ``d`` (m).
    duration : float
        Transport time ``T`` (s).
    n : int
        Motional mode transported.
    delta : float, optional
        Bound on ``|q0 - q_c|`` (m); only the bounded-optimal protocol uses it.
    """

    mass: float
    omega: float
    distance: float
    duration: float
    n: int = 0
    delta: float | None = None

    def __post_init__(self):
        for name in ("mass", "omega", "distance", "duration"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if int(self.n) != self.n or self.n < 0:
            raise ValueError("mode index n must be a non-negative integer")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive when given")

    @property
    def period(self):
        return 2.0 * math.pi / self.omega

    @property
    def hbar_omega(self):
        return hbar * self.omega

    @property
    def mode_energy(self):
        """(n + 1/2) hbar omega."""
        return (self.n + 0.5) * hbar * self.omega

    def with_duration(self, duration):
        return replace(self, duration=duration)


def figure_params(duration_periods=0.5, delta_fraction=0.5, n=0):
    """40Ca+ in a 1.4 MHz trap moved by 280 um, duration given in trap periods."""
    omega = 2.0 * math.pi * 1.4e6
    d = 280e-6
    return PhysicalParams(
        mass=CA40_ION_MASS,
        omega=omega,
        distance=d,
        duration=duration_periods * 2.0 * math.pi / omega,
        n=n,
        delta=None if delta_fraction is None else delta_fraction * d,
    )


class Protocol(str, enum.Enum):
    QUINTIC = "quintic"
    UNBOUNDED_OPTIMAL = "unbounded"
    BOUNDED_OPTIMAL = "bounded"
    BANG_BANG = "bangbang"
    ROBUST_SEPTIC = "septic"


@dataclass(frozen=True)
class PolyPiece:
    """``sum_k coef[k] * s**k`` with ``s = (t - origin) / scale``."""

    coef: tuple
    origin: float
    scale: float

    def derivs(self, t):
        c = np.asarray(self.coef, dtype=float)
        s = (t - self.origin) / self.scale
        c1 = P.polyder(c)
        c2 = P.polyder(c, 2)
        return (
            P.polyval(s, c),
            P.polyval(s, c1) / self.scale,
            P.polyval(s, c2) / self.scale**2,
        )


@dataclass(frozen=True)
class TrigPiece:
    """``a + b cos(omega t) + c sin(omega t)``."""

    a: float
    b: float
    c: float
    omega: float

    def derivs(self, t):
        w = self.omega
        cs, sn = np.cos(w * t), np.sin(w * t)
        return (
            self.a + self.b * cs + self.c * sn,
            w * (-self.b * sn + self.c * cs),
            -w * w * (self.b * cs + self.c * sn),
        )


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    piece: PolyPiece | TrigPiece


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-analytic ``q_c(t)`` on ``[0, T]``.

    ``info`` carries protocol constants (switching times, polynomial
    coefficients); ``annotations`` records non-fatal notes such as the
    bounded-optimal fallback to the unbounded solution.
    """

    kind: Protocol
    segments: tuple
    params: PhysicalParams
    info: dict = field(default_factory=dict, compare=False)
    annotations: tuple = ()

    @property
    def duration(self):
        return self.params.duration

    @property
    def breakpoints(self):
        """Interior segment boundaries."""
        return tuple(s.start for s in self.segments[1:])

    def _check(self, t):
        T = self.duration
        tol = 1e-12 * T
        if np.any(t < -tol) or np.any(t > T + tol):
            raise DomainError(f"t outside [0, T={T!r}]")
        return np.clip(t, 0.0, T)

    def eval(self, t):
        """``(q_c, q_c', q_c'')`` at ``t``; ``q_c''`` is right-continuous at
        interior boundaries and takes its left limit at ``T``."""
        scalar = np.ndim(t) == 0
        t = self._check(np.atleast_1d(np.asarray(t, dtype=float)))
        starts = np.array([s.start for s in self.segments])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1)
        q = np.empty_like(t)
        qd = np.empty_like(t)
        qdd = np.empty_like(t)
        for i, seg in enumerate(self.segments):
            mask = idx == i
            if mask.any():
                q[mask], qd[mask], qdd[mask] = seg.piece.derivs(t[mask])
        if scalar:
            return float(q[0]), float(qd[0]), float(qdd[0])
        return q, qd, qdd

    def trap_path(self, t):
        """Trap center ``q0(t)``."""
        q, _, qdd = self.eval(t)
        if self.kind is Protocol.BANG_BANG:
            half = 0.5 * self.params.distance
            return half if np.ndim(q) == 0 else np.full_like(q, half)
        return q + qdd / self.params.omega**2


def evaluate(traj, t):
    return traj.eval(t)


def trap_path(traj, t):
    return traj.trap_path(t)


def _poly(coef, origin, scale):
    return PolyPiece(tuple(float(c) for c in coef), float(origin), float(scale))


def synth_quintic(params):
    d, T = params.distance, params.duration
    seg = Segment(0.0, T, _poly([0, 0, 0, 10 * d, -15 * d, 6 * d], 0.0, T))
    return Trajectory(Protocol.QUINTIC, (seg,), params)


def synth_unbounded_optimal(params):
    d, T = params.distance, params.duration
    seg = Segment(0.0, T, _poly([0, 0, 3 * d, -2 * d], 0.0, T))
    return Trajectory(Protocol.UNBOUNDED_OPTIMAL, (seg,), params)


def bounded_window(params, delta=None):
    """Durations ``(T_lo, T_hi)`` for which the bounded-optimal solution exists."""
    delta = params.delta if delta is None else delta
    if delta is None:
        raise ValueError("bounded-optimal protocol needs params.delta")
    k = params.distance / (params.omega**2 * delta)
    return math.sqrt(4.0 * k), math.sqrt(6.0 * k)


def synth_bounded_optimal(params):
    """Minimum of the squared acceleration integral with ``|q0 - q_c| <= delta``.

    Above the time window the constraint is inactive and the unbounded cubic
    is returned (annotated ``"fallback_unbounded"``); below it there is no
    solution.
    """
    d, T, w, delta = params.distance, params.duration, params.omega, params.delta
    lo, hi = bounded_window(params)
    rtol = 1e-12
    if T < lo * (1.0 - rtol):
        raise InfeasibleError(
            f"T={T!r} s is below the bounded-optimal window [{lo!r}, {hi!r}]"
        )
    if T > hi * (1.0 + rtol):
        traj = synth_unbounded_optimal(params)
        return replace(traj, kind=Protocol.BOUNDED_OPTIMAL,
                       annotations=("fallback_unbounded",),
                       info={"t1": 0.0, "t2": T, "window": (lo, hi)})

    inner = max(0.0, 1.0 - 4.0 * d / (w**2 * T**2 * delta))
    t1 = 0.5 * T * (1.0 - math.sqrt(3.0) * math.sqrt(inner))
    t1 = min(max(t1, 0.0), 0.5 * T)
    t2 = T - 2.0 * t1
    a = w**2 * delta
    segments = []
    info = {"t1": t1, "t2": t2, "window": (lo, hi)}
    if t1 > 0.0:
        segments.append(Segment(0.0, t1, _poly([0, 0, 0.5 * a * T**2], 0.0, T)))
    if t2 > 0.0:
        c1 = 2.0 * delta / t2
        v0 = 0.25 * a * (T + 2.0 * t1)
        c2 = 0.5 * (d - v0 * T)
        info.update(c1=c1, v0=v0, c2=c2)
        # cubic about T/2 in s = (t - T/2) / T
        coef = [0.5 * v0 * T + c2, v0 * T, 0.0, -w**2 * c1 * T**3 / 6.0]
        segments.append(Segment(t1, T - t1, _poly(coef, 0.5 * T, T)))
    if t1 > 0.0:
        segments.append(Segment(T - t1, T, _poly([d, 0, -0.5 * a * T**2], T, T)))
    return Trajectory(Protocol.BOUNDED_OPTIMAL, tuple(segments), params, info=info)


def bangbang_duration(params, k):
    return (2 * k + 1) * math.pi / params.omega


def synth_bangbang(params, k=None):
    """Trap jumps to ``d/2``, waits ``(2k+1)`` half periods, jumps to ``d``."""
    w, T, d = params.omega, params.duration, params.distance
    x = w * T / math.pi
    k_near = max(0, int(round((x - 1.0) / 2.0)))
    if k is None:
        k = k_near
    if k < 0:
        raise ValueError("k must be non-negative")
    T_valid = bangbang_duration(params, k)
    if abs(T - T_valid) > 1e-9 * T_valid:
        nearest = bangbang_duration(params, k_near)
        raise InvalidDurationError(
            f"bang-bang needs T = (2k+1) pi / omega; T={T!r} s is not valid "
            f"(nearest valid T = {nearest!r} s, k={k_near})",
            nearest=nearest,
        )
    seg = Segment(0.0, T, TrigPiece(0.5 * d, -0.5 * d, 0.0, w))
    return Trajectory(Protocol.BANG_BANG, (seg,), params, info={"k": k})


def septic_system(params):
    """Linear system for the degree-7 coefficients in ``s = t / T`` (units of d)."""
    a = params.omega * params.duration
    k = np.arange(8)
    A = np.zeros((8, 8))
    b = np.zeros(8)
    A[0] = k == 0                  # q(0) = 0
    A[1] = 1.0                     # q(1) = 1
    b[1] = 1.0
    A[2] = k == 1                  # q'(0) = 0
    A[3] = k                       # q'(1) = 0
    A[4] = 2.0 * (k == 2)          # q''(0) = 0
    A[5] = k * (k - 1)             # q''(1) = 0
    rule = QuadratureRule.for_interval(0.0, 1.0, period=2.0 * math.pi / a)
    for j in range(2, 8):
        A[6, j] = j * (j - 1) * integrate(lambda s: s ** (j - 2) * np.cos(a * s), 0.0, 1.0, rule)
        A[7, j] = j * (j - 1) * integrate(lambda s: s ** (j - 2) * np.sin(a * s), 0.0, 1.0, rule)
    return A, b


def synth_robust_septic(params):
    """Degree-7 polynomial whose acceleration has no Fourier component at
    the nominal trap frequency, in addition to the six end conditions."""
    A, b = septic_system(params)
    try:
        c = solve_dense(A, b)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"septic system is singular at T={params.duration!r} s; "
            f"perturb T by about 1e-6*T"
        ) from exc
    d, T = params.distance, params.duration
    seg = Segment(0.0, T, _poly(d * c, 0.0, T))
    return Trajectory(Protocol.ROBUST_SEPTIC, (seg,), params, info={"coef_s": tuple(c)})


def synthesize(kind, params, k=None):
    kind = Protocol(kind)
    if kind is Protocol.QUINTIC:
        return synth_quintic(params)
    if kind is Protocol.UNBOUNDED_OPTIMAL:
        return synth_unbounded_optimal(params)
    if kind is Protocol.BOUNDED_OPTIMAL:
        return synth_bounded_optimal(params)
    if kind is Protocol.BANG_BANG:
        return synth_bangbang(params, k)
    return synth_robust_septic(params)


def time_reversed(traj):
    """The path ``d - q_c(T - t)``."""
    d, T = traj.params.distance, traj.duration
    segs = []
    for seg in reversed(traj.segments):
        p = seg.piece
        if isinstance(p, PolyPiece):
            c = [-ck * (-1) ** i for i, ck in enumerate(p.coef)]
            c[0] += d
            newp = _poly(c, T - p.origin, p.scale)
        else:
            wT = p.omega * T
            newp = TrigPiece(
                d - p.a,
                -(p.b * math.cos(wT) + p.c * math.sin(wT)),
                -(p.b * math.sin(wT) - p.c * math.cos(wT)),
                p.omega,
            )
        segs.append(Segment(T - seg.end, T - seg.start, newp))
    return replace(traj, segments=tuple(segs))


def dump_rows(traj, points=1001):
    """Rows ``(t, q_c, qdot_c, qddot_c, q_0)`` on a uniform grid."""
    t = np.linspace(0.0, traj.duration, points)
    q, qd, qdd = traj.eval(t)
    q0 = traj.trap_path(t)
    return np.column_stack([t, q, qd, qdd, q0])
