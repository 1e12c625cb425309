"""Shared numerical kernels: composite Gauss-Legendre quadrature, Ei for
negative arguments, a small dense solver and a fixed-step RK4 integrator."""

from dataclasses import dataclass
from functools import lru_cache
import math
import warnings

import numpy as np
import scipy.linalg

from ._backend import kernels
from .errors import DivergenceError, DomainError, EvaluationError, SingularMatrixError

EULER_GAMMA = 0.57721566490153286061


@lru_cache(maxsize=16)
def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class QuadratureRule:
    """Composite Gauss-Legendre rule: ``panel_count`` equal panels over the
    interval, each with ``nodes_per_panel`` nodes."""

    panel_count: int = 32
    nodes_per_panel: int = 32

    def __post_init__(self):
        if self.panel_count < 1 or self.nodes_per_panel < 1:
            raise ValueError("panel_count and nodes_per_panel must be positive")

    @classmethod
    def for_interval(cls, a, b, period=None, nodes_per_panel=32):
        """At least 16 panels per ``period`` and never fewer than 32."""
        panels = 32
        if period is not None and period > 0:
            panels = max(panels, math.ceil(16.0 * (b - a) / period))
        return cls(panel_count=panels, nodes_per_panel=nodes_per_panel)


def graded_breakpoints(a, b, scale, ratio=2.0):
    """Geometric breakpoints ``a + scale * ratio**k`` inside ``(a, b)``.

    Used to resolve boundary layers of width ``scale`` at ``a``.
    """
    pts = []
    if scale <= 0:
        return pts
    x = scale
    while a + x < b:
        pts.append(a + x)
        x *= ratio
    return pts


def quadrature_nodes(a, b, rule=None, breakpoints=()):
    """Nodes and weights of the composite rule over ``[a, b]``.

    Panels never straddle a breakpoint.  Within each sub-interval between
    breakpoints the panel count is proportional to its length (at least one).
    """
    if rule is None:
        rule = QuadratureRule()
    if b < a:
        raise DomainError(f"integration bounds reversed: a={a!r} > b={b!r}")
    if b == a:
        return np.empty(0), np.empty(0)
    cuts = sorted({float(p) for p in breakpoints if a < p < b})
    edges = [float(a), *cuts, float(b)]
    x, w = _gauss_legendre(rule.nodes_per_panel)
    length = b - a
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        n_pan = max(1, math.ceil(rule.panel_count * (hi - lo) / length - 1e-9))
        pe = np.linspace(lo, hi, n_pan + 1)
        half = 0.5 * np.diff(pe)
        mid = 0.5 * (pe[:-1] + pe[1:])
        nodes.append((mid[:, None] + half[:, None] * x[None, :]).ravel())
        weights.append((half[:, None] * w[None, :]).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def integrate(f, a, b, rule=None, breakpoints=()):
    """Integrate ``f`` over ``[a, b]``.

    ``f`` is called once with the array of all quadrature nodes and must
    return an array of the same shape.

    Raises
    ------
    EvaluationError
        If ``f`` is non-finite at any node; ``exc.t`` holds the first such node.
    """
    t, w = quadrature_nodes(a, b, rule, breakpoints)
    if t.size == 0:
        return 0.0
    vals = np.asarray(f(t), dtype=float)
    if vals.shape != t.shape:
        vals = np.broadcast_to(vals, t.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        t_bad = float(t[np.argmax(bad)])
        raise EvaluationError(f"integrand is not finite at t={t_bad!r}", t=t_bad)
    return float(np.dot(w, vals))


def expint_ei(x):
    """Exponential integral Ei(x) for strictly negative ``x``.

    Scalars return a float, arrays an array.  Values below about -745
    underflow to -0.0.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr < 0.0)):
        raise DomainError("expint_ei requires x < 0")
    out = kernels.expint_ei_array(arr.ravel()).reshape(arr.shape)
    if out.ndim == 0:
        return float(out)
    return out


def solve_dense(A, b):
    """Solve ``A x = b`` by LU with partial pivoting after row equilibration.

    Raises
    ------
    SingularMatrixError
        If a pivot falls below 1e-14 after scaling.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    if A.ndim != 2 or A.shape != (n, n) or b.shape != (n,):
        raise ValueError("A must be square and b conformant")
    if n > 16:
        raise ValueError("solve_dense is meant for systems with n <= 16")
    scale = np.max(np.abs(A), axis=1)
    if np.any(scale == 0.0):
        raise SingularMatrixError("matrix has an all-zero row")
    As = A / scale[:, None]
    bs = b / scale
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrixError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(As, check_finite=True)
    if np.min(np.abs(np.diag(lu))) < 1e-14:
        raise SingularMatrixError("matrix is numerically singular")
    return scipy.linalg.lu_solve((lu, piv), bs)


@dataclass(frozen=True)
class OdeStepperConfig:
    step_size: float

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")

    @classmethod
    def for_frequency(cls, omega, steps_per_period=1000):
        return cls(step_size=2.0 * math.pi / omega / steps_per_period)


def evolve_ode(field, y0, t0, t1, cfg):
    """Classical RK4 from ``t0`` to ``t1`` with ``ceil((t1 - t0) / step)`` equal steps."""
    if t1 < t0:
        raise DomainError("evolve_ode requires t0 <= t1")
    y = np.array(y0, dtype=float)
    if t1 == t0:
        return y
    n = max(1, math.ceil((t1 - t0) / cfg.step_size - 1e-12))
    h = (t1 - t0) / n
    for k in range(n):
        t = t0 + k * h
        k1 = np.asarray(field(t, y), dtype=float)
        k2 = np.asarray(field(t + 0.5 * h, y + 0.5 * h * k1), dtype=float)
        k3 = np.asarray(field(t + 0.5 * h, y + 0.5 * h * k2), dtype=float)
        k4 = np.asarray(field(t + h, y + h * k3), dtype=float)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite state at t={t + h!r}", t=t + h)
    return y
