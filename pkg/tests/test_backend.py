import os
import subprocess
import sys

import numpy as np
import pytest

from shuttlekit import _backend
from shuttlekit.noise import OrnsteinUhlenbeck
from shuttlekit.oracle import _kernel_arrays, ground_state, make_drive
from shuttlekit.trajectories import Protocol, figure_params, synthesize

compiled = pytest.mark.skipif(not _backend.compiled_available(), reason="extension not built")


def test_backend_selection():
    assert _backend.BACKEND in ("compiled", "python")
    assert _backend.get_kernels("python").SPRING == 0
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")


def _setup(protocol=Protocol.QUINTIC, periods=1.0):
    p = figure_params(periods)
    tr = synthesize(protocol, p)
    drive = make_drive(tr, p, p.period / 400)
    model = OrnsteinUhlenbeck(1e-9, 0.1 / p.omega)
    g0, g1 = _kernel_arrays(model, drive.h, drive.n_steps)
    state0 = np.array([0.0, 0.0, *ground_state(p)])
    return p, drive, g0, g1, state0


@compiled
def test_ei_parity():
    x = -np.geomspace(1e-12, 700, 5001)
    a = _backend.get_kernels("python").expint_ei_array(x)
    b = _backend.get_kernels("compiled").expint_ei_array(x)
    assert np.allclose(a, b, rtol=1e-15, atol=0)


@compiled
@pytest.mark.parametrize("coupling", [0, 1])
@pytest.mark.parametrize("protocol", [Protocol.QUINTIC, Protocol.BANG_BANG])
def test_moment_parity(coupling, protocol):
    p, drive, g0, g1, s0 = _setup(protocol, 1.5 if protocol is Protocol.BANG_BANG else 1.0)
    args = (coupling, s0, drive.h, drive.lag, drive.mis, drive.rdot, g0, g1, p.mass, p.omega, 1e-40)
    a = _backend.get_kernels("python").moments_rk4(*args)
    b = _backend.get_kernels("compiled").moments_rk4(*args)
    assert a.shape == b.shape == (drive.n_steps + 1, 5)
    scale = np.max(np.abs(a), axis=0) + 1e-300
    assert np.max(np.abs(a - b) / scale) < 1e-12


@compiled
@pytest.mark.parametrize("coupling", [0, 1])
def test_member_parity(coupling):
    p, drive, _, _, s0 = _setup()
    rng = np.random.default_rng(0)
    x = 0.01 * rng.standard_normal((7, drive.n_steps))
    args = (coupling, s0, drive.h, drive.lag, drive.mis, x, p.mass, p.omega, 1e-20)
    a = _backend.get_kernels("python").gaussian_members(*args)
    b = _backend.get_kernels("compiled").gaussian_members(*args)
    assert a.shape == b.shape == (7, 6)
    scale = np.max(np.abs(a), axis=0) + 1e-300
    assert np.max(np.abs(a - b) / scale) < 1e-12


def test_pure_python_switch():
    env = dict(os.environ, SHUTTLEKIT_PURE_PYTHON="1")
    code = ("import shuttlekit, shuttlekit.numerics as n; "
            "print(shuttlekit.BACKEND, n.expint_ei(-1.0))")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    name, val = out.stdout.split()
    assert name == "python"
    assert float(val) == pytest.approx(-0.21938393439552029, rel=1e-15)
