import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shuttlekit import robustness as rb
from shuttlekit.numerics import OdeStepperConfig, evolve_ode
from shuttlekit.oracle import evolve_moments_spring
from shuttlekit.robustness import SystematicError, TimeScaleError
from shuttlekit.trajectories import Protocol, figure_params, synthesize, time_reversed

from conftest import all_protocols


@pytest.fixture(scope="module")
def fig5():
    p = figure_params(6.5)
    return p, synthesize(Protocol.QUINTIC, p), synthesize(Protocol.ROBUST_SEPTIC, p)


def test_error_types():
    with pytest.raises(ValueError):
        SystematicError(-1.0)
    with pytest.raises(ValueError):
        TimeScaleError(0.0)
    assert SystematicError(0.21).omega1(2.0) == pytest.approx(2.2)


def test_zero_lambda_and_non_negativity(fig5):
    p, q, s = fig5
    for tr in (q, s):
        assert rb.systematic_excitation(tr, p, SystematicError(0.0)) == 0.0
        for lam in np.linspace(-0.3, 0.3, 13):
            assert rb.systematic_excitation(tr, p, SystematicError(lam)) >= 0.0


def test_septic_beats_quintic(fig5):
    p, q, s = fig5
    eq = rb.systematic_excitation(q, p, SystematicError(0.05))
    es = rb.systematic_excitation(s, p, SystematicError(0.05))
    assert eq > 0 and es * 10 <= eq
    table = rb.lambda_sweep([q, s], p, np.linspace(-0.05, 0.05, 101))
    assert table.shape == (101, 2)
    assert np.all(table[:, 1] <= table[:, 0])


def _slope(tr, p, lams):
    e = [rb.systematic_excitation(tr, p, SystematicError(l)) for l in lams]
    return np.polyfit(np.log(lams), np.log(e), 1)[0]


def test_near_origin_slopes(fig5):
    p, q, s = fig5
    lams = np.geomspace(1e-4, 1e-3, 9)
    assert _slope(s, p, lams) == pytest.approx(4.0, abs=0.1)
    assert _slope(q, p, lams) == pytest.approx(2.0, abs=0.1)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.5, 0.5))
def test_fourier_definition_consistency(lam):
    p = figure_params(6.5)
    tr = synthesize(Protocol.QUINTIC, p)
    err = SystematicError(lam)
    ic, is_ = rb.fourier_conditions(tr, err.omega1(p.omega))
    expected = 0.5 * p.mass * lam**2 * (ic**2 + is_**2)
    assert rb.systematic_excitation(tr, p, err) == pytest.approx(expected, rel=1e-10, abs=0.0)


@pytest.mark.parametrize("lam", [-0.05, -0.02, 0.02, 0.05])
def test_time_reversal_invariance(fig5, lam):
    p, q, s = fig5
    for tr in (q, s):
        a = rb.systematic_excitation(tr, p, SystematicError(lam))
        b = rb.systematic_excitation(time_reversed(tr), p, SystematicError(lam))
        assert b == pytest.approx(a, rel=1e-9)


def test_mismatch_path(fig5):
    p, q, s = fig5
    err = SystematicError(0.03)
    path = rb.classical_mismatch_path(q, p, err)
    f0, fd0 = path(0.0)
    assert f0 == 0.0 and fd0 == 0.0
    for tr in (q, s):
        e54 = rb.systematic_excitation(tr, p, err)
        assert rb.mismatch_energy(tr, p, err) == pytest.approx(e54, rel=1e-9)
    zero = rb.classical_mismatch_path(q, p, SystematicError(0.0))
    f, fd = zero(np.linspace(0, p.duration, 5))
    assert np.all(f == 0.0) and np.all(fd == 0.0)


def test_mismatch_path_solves_its_ode():
    p = figure_params(2.0)
    tr = synthesize(Protocol.QUINTIC, p)
    err = SystematicError(0.1)
    w1 = err.omega1(p.omega)
    field = lambda t, y: np.array([y[1], -w1**2 * y[0] + err.lam * tr.eval(min(t, p.duration))[2]])
    y = evolve_ode(field, [0.0, 0.0], 0.0, p.duration, OdeStepperConfig.for_frequency(w1, 2000))
    f, fd = rb.classical_mismatch_path(tr, p, err)(p.duration)
    assert f == pytest.approx(y[0], rel=1e-7)
    assert fd == pytest.approx(y[1], rel=1e-7)


def test_timescale_mapping():
    p = figure_params(6.5)
    prime, lam, scale = rb.timescale_equivalence(TimeScaleError(1.0), p)
    assert lam == 0.0 and scale == 1.0 and prime == p
    prime, lam, scale = rb.timescale_equivalence(TimeScaleError(0.99), p)
    assert lam == pytest.approx(0.020304, abs=1e-6)
    assert prime.mass == pytest.approx(0.99 * p.mass)
    assert prime.omega == pytest.approx(p.omega / 0.99)
    assert scale == 0.99


@pytest.mark.parametrize("eps", [0.98, 1.01])
def test_timescale_equivalence_against_simulation(eps):
    p = figure_params(6.5)
    tr = synthesize(Protocol.QUINTIC, p)
    direct = evolve_moments_spring(tr, p, None, time_scale=eps).excitation
    reduced = rb.timescale_excitation(tr, p, TimeScaleError(eps))
    assert direct == pytest.approx(reduced, rel=1e-2)


def test_fourier_sweep_relation_for_all_protocols():
    p = figure_params(4.5)
    for tr in all_protocols(p):
        for w in (0.5 * p.omega, p.omega, 1.7 * p.omega):
            lam = (w / p.omega) ** 2 - 1
            ic, is_ = rb.fourier_conditions(tr, w)
            e = rb.systematic_excitation(tr, p, SystematicError(lam))
            assert e == pytest.approx(0.5 * p.mass * lam**2 * (ic**2 + is_**2), rel=1e-10, abs=1e-300)
