"""Acceptance criteria, one (or, for the invariant suite, several) tests each.

Every test checks its own wall-clock budget; the terminal summary prints a
PASS/FAIL line per criterion.
"""

import math
import time

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest
import scipy.integrate as spi
from scipy.constants import hbar
from scipy.optimize import minimize_scalar

from shuttlekit import excitation as ex
from shuttlekit import oracle as orc
from shuttlekit import robustness as rb
from shuttlekit.excitation import PositionNoiseParams
from shuttlekit.noise import Flicker, OrnsteinUhlenbeck, White
from shuttlekit.trajectories import Protocol, bounded_window, figure_params, synthesize

from conftest import all_protocols

FLOOR = hbar**2 / 4 * (1 - 1e-9)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f} s, budget {self.seconds} s"


def _white_g(kind, p0, T):
    p = p0.with_duration(T)
    return ex.white_G(synthesize(kind, p), p).G


@pytest.mark.criterion(1, "T_min reproduction")
def test_t_min_reproduction():
    with Budget(1.0):
        p0 = figure_params(1.0)
        T0 = p0.period
        for kind, target in ((Protocol.QUINTIC, 73.2), (Protocol.UNBOUNDED_OPTIMAL, 66.9)):
            res = minimize_scalar(lambda x: _white_g(kind, p0, x * T0), bounds=(10.0, 200.0),
                                  method="bounded", options={"xatol": 1e-6})
            assert res.x == pytest.approx(target, rel=5e-3), kind
            assert res.x == pytest.approx(ex.t_min_analytic(kind, p0) / T0, rel=1e-5)


@pytest.mark.criterion(2, "bang-bang vs unbounded at T0/2")
def test_bangbang_vs_unbounded():
    with Budget(1.0):
        p = figure_params(0.5)
        bb = ex.white_G(synthesize(Protocol.BANG_BANG, p), p).G
        un = ex.white_G(synthesize(Protocol.UNBOUNDED_OPTIMAL, p), p).G
        assert bb > un
        assert (bb - un) / un < 0.02


@pytest.mark.criterion(3, "bounded-optimal window continuity")
@pytest.mark.parametrize("frac", [0.5, 0.02])
def test_bounded_window_continuity(frac):
    with Budget(1.0):
        p0 = figure_params(1.0, delta_fraction=frac)
        hi = bounded_window(p0)[1]
        p = p0.with_duration(hi)
        tr = synthesize(Protocol.BOUNDED_OPTIMAL, p)
        assert "fallback_unbounded" not in tr.annotations
        bounded = ex.white_G(tr, p).G
        unbounded = ex.white_G(synthesize(Protocol.UNBOUNDED_OPTIMAL, p), p).G
        assert bounded == pytest.approx(unbounded, rel=1e-9)


@pytest.mark.criterion(4, "oracle vs perturbation, white noise")
def test_oracle_white():
    with Budget(10.0):
        p = figure_params(5.0)
        tr = synthesize(Protocol.QUINTIC, p)
        gamma = 1e-4 / p.omega
        pred = ex.white_excitation(tr, p, gamma).E_e
        a = orc.evolve_moments_spring(tr, p, White(gamma)).excitation
        b = orc.evolve_moments_spring(tr, p, White(2 * gamma)).excitation
        assert a == pytest.approx(pred, rel=0.02)
        assert b / a == pytest.approx(2.0, rel=0.01)


@pytest.mark.criterion(5, "oracle vs perturbation, OU and flicker")
def test_oracle_coloured():
    with Budget(30.0):
        p = figure_params(5.0)
        tr = synthesize(Protocol.QUINTIC, p)
        tau = 0.1 / p.omega
        G = ex.ou_excitation_closed(tr, p, 1.0, tau).G
        D = 1e-2 * p.hbar_omega / G
        got = orc.evolve_moments_spring(tr, p, OrnsteinUhlenbeck(D, tau)).excitation
        assert got == pytest.approx(D * G, rel=0.02)

        unit = ex.flicker_excitation_closed(tr, p, 1.0, 1e-10, 1e-7)
        C = 1e-2 * p.hbar_omega / unit.E_e
        pred = ex.flicker_excitation_closed(tr, p, C, 1e-10, 1e-7).E_e
        got = orc.evolve_moments_spring(tr, p, Flicker(C, 1e-10, 1e-7)).excitation
        assert got == pytest.approx(pred, rel=0.05)


@pytest.mark.slow
@pytest.mark.criterion(6, "Monte-Carlo agreement")
def test_monte_carlo():
    with Budget(120.0):
        p = figure_params(5.0)
        tr = synthesize(Protocol.QUINTIC, p)
        tau = 0.05 / p.omega
        G = ex.ou_excitation_closed(tr, p, 1.0, tau).G
        model = OrnsteinUhlenbeck(1e-3 * p.hbar_omega / G, tau)
        pred = ex.ou_excitation_closed(tr, p, model.D, tau).E_e
        assert pred == pytest.approx(1e-3 * p.hbar_omega, rel=1e-12)
        a = orc.mc_ensemble_energy(tr, p, model, members=10_000, seed=20240611)
        b = orc.mc_ensemble_energy(tr, p, model, members=10_000, seed=20240611, workers=1, chunk=1000)
        assert a.flagged == 0 and a.member_count == 10_000
        assert abs(a.excitation - pred) < 3 * a.std_error
        assert a.mean_energy == b.mean_energy and a.std_error == b.std_error


@pytest.mark.criterion(7, "position-noise trajectory independence")
def test_position_noise_independence():
    with Budget(5.0):
        p = figure_params(0.5)
        model = OrnsteinUhlenbeck(1e-9, 0.05 * p.period)
        pos = PositionNoiseParams(2e-21, model)
        kinds = (Protocol.QUINTIC, Protocol.UNBOUNDED_OPTIMAL, Protocol.BANG_BANG)
        vals = [orc.evolve_moments_position(synthesize(k, p), p, pos).excitation for k in kinds]
        g0_int = spi.quad(lambda t: float(model.kernels().g0(t)), 0.0, p.duration, epsabs=0, epsrel=1e-13)[0]
        ref = pos.K**2 / p.mass * g0_int * model.intensity
        for v in vals:
            assert v == pytest.approx(vals[0], rel=1e-9)
            assert v == pytest.approx(ref, rel=1e-8)


def _slope(x, y):
    return np.polyfit(np.log(x), np.log(y), 1)[0]


@pytest.mark.criterion(8, "small-tau expansions are O(tau^2)")
def test_small_tau_scaling():
    with Budget(10.0):
        p = figure_params(5.0)
        tr = synthesize(Protocol.UNBOUNDED_OPTIMAL, p)
        taus = np.logspace(-5, -3, 9) / p.omega
        ou = [abs(ex.ou_excitation_closed(tr, p, 1.0, t).G - ex.ou_small_tau(tr, p, 1.0, t).G) for t in taus]
        fl = [abs(ex.flicker_excitation_closed(tr, p, 1.0, 0.1 * t, t).G
                  - ex.flicker_small_tau(tr, p, 1.0, 0.1 * t, t).G) for t in taus]
        assert _slope(taus, ou) == pytest.approx(2.0, abs=0.2)
        assert _slope(taus, fl) == pytest.approx(2.0, abs=0.2)


@pytest.mark.criterion(9, "robustness scaling of septic vs quintic")
def test_robustness_scaling():
    with Budget(5.0):
        p = figure_params(6.5)
        trs = [synthesize(Protocol.QUINTIC, p), synthesize(Protocol.ROBUST_SEPTIC, p)]
        lams = np.linspace(-0.05, 0.05, 101)
        e = rb.lambda_sweep(trs, p, lams)
        assert np.all(e[:, 1] <= e[:, 0])
        small = np.array([1e-4, 2e-4, 4e-4, 8e-4])
        near = rb.lambda_sweep(trs, p, small)
        assert _slope(small, near[:, 0]) == pytest.approx(2.0, abs=0.1)
        assert _slope(small, near[:, 1]) == pytest.approx(4.0, abs=0.1)


@pytest.mark.criterion(10, "time-scale error equivalence")
def test_timescale_equivalence():
    with Budget(5.0):
        p = figure_params(6.5)
        tr = synthesize(Protocol.QUINTIC, p)
        err = rb.TimeScaleError(0.98)
        direct = orc.evolve_moments_spring(tr, p, None, time_scale=err.eps).excitation
        assert direct == pytest.approx(rb.timescale_excitation(tr, p, err), rel=0.01)


periods = st.sampled_from([0.5, 1.5, 2.5, 4.5]) | st.floats(0.6, 9.0)
few = settings(max_examples=12, deadline=None)


@pytest.mark.criterion(11, "invariant suites")
@few
@given(periods)
def test_invariant_newton_and_boundaries(per):
    p = figure_params(per)
    d, T = p.distance, p.duration
    t = np.linspace(0.0, T, 1001)
    for tr in all_protocols(p):
        q, v, a = tr.eval(t)
        assert abs(q[0]) <= 1e-12 * d and abs(q[-1] - d) <= 1e-12 * d
        assert abs(v[0]) <= 1e-9 * d / T and abs(v[-1]) <= 1e-9 * d / T
        res = a + p.omega**2 * (q - tr.trap_path(t))
        assert np.max(np.abs(res)) <= 1e-9 * p.omega**2 * d


@pytest.mark.criterion(11, "invariant suites")
@settings(max_examples=8, deadline=None)
@given(st.floats(0.5, 9.0), st.floats(-1.5, 0.0), st.floats(-4.0, -1.0), st.booleans())
def test_invariant_uncertainty_floor(per, log_wtau, log_ee, flicker):
    # short-memory regime (correlation time up to 1/omega), perturbative intensity
    p = figure_params(per)
    tau = 10.0**log_wtau / p.omega
    target = 10.0**log_ee * p.hbar_omega
    for tr in all_protocols(p):
        if flicker:
            model = Flicker(1.0, 0.1 * tau, tau)
            model = Flicker(target / abs(ex.spring_excitation(tr, p, model).E_e), 0.1 * tau, tau)
        else:
            model = OrnsteinUhlenbeck(target / abs(ex.ou_excitation_closed(tr, p, 1.0, tau).G), tau)
        assert orc.evolve_moments_spring(tr, p, model).min_uncertainty >= FLOOR
        pos = PositionNoiseParams(1e-20, model)
        assert orc.evolve_moments_position(tr, p, pos).min_uncertainty >= FLOOR


def _cosine_transform(corr, omega, upper, scale):
    edges = np.concatenate(([0.0], np.geomspace(1e-3 * scale, upper, 40)))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if omega > 0:
            total += spi.quad(corr, a, b, weight="cos", wvar=omega, limit=400)[0]
        else:
            total += spi.quad(corr, a, b, limit=400)[0]
    return total / math.pi


@pytest.mark.criterion(11, "invariant suites")
@few
@given(st.floats(0.0, 20.0), st.floats(1.5, 3.0))
def test_invariant_wiener_khinchin(omega_tau, decades):
    ou = OrnsteinUhlenbeck(D=1.5, tau=0.2)
    w = omega_tau / ou.tau
    got = _cosine_transform(lambda t: float(ou.correlation(t)), w, 80 * ou.tau, ou.tau)
    assert got == pytest.approx(float(ou.spectrum(w)), rel=1e-7)
    fl = Flicker(C=0.3, tau1=1e-3, tau2=10.0**(decades - 3))
    w = omega_tau / fl.tau2
    got = _cosine_transform(lambda t: float(fl.correlation(t)), w, 80 * fl.tau2, fl.tau1)
    assert got == pytest.approx(float(fl.spectrum(w)), rel=1e-6)


@pytest.mark.criterion(11, "invariant suites")
@few
@given(periods, st.floats(0.01, 0.5))
def test_invariant_route_equivalence(per, frac):
    p = figure_params(per)
    T = p.duration
    models = (White(1.0), OrnsteinUhlenbeck(1.0, frac * T), Flicker(1.0, 1e-3 * frac * T, frac * T))
    for tr in all_protocols(p):
        for m in models:
            closed = ex.spring_excitation(tr, p, m).G
            generic = ex.spring_excitation_generic(tr, p, m).G
            assert closed == pytest.approx(generic, rel=1e-7), (tr.kind, m)
