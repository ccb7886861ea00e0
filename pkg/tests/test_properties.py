"""Property-based checks over randomly drawn inputs."""

from __future__ import annotations

import dataclasses

import numpy as np
from conftest import small_tables
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import simpson

from superatom import (
    ControlSamples,
    IntegratorConfig,
    PhysicalParams,
    PulseParams,
    Shape,
    build_model,
    dominant_leakage,
    evolve,
    pi_pulse_amplitude,
    sample_pulse,
    savitzky_golay,
)
from superatom.optimizer import GrapeProblem

finite = st.floats(-50, 50, allow_nan=False)
SMALL = build_model(PhysicalParams(n_max=2, sigma=4.0), small_tables(2))
QUICK = IntegratorConfig(output_points=5)


@given(x=finite, y=finite, z=finite)
def test_hamiltonian_hermitian(x, y, z):
    H = SMALL.hamiltonian(x, y, z)
    assert np.max(np.abs(H - H.conj().T)) < 1e-13


@given(
    seed=st.integers(0, 2**32 - 1),
    x=finite, y=finite, z=finite,
)
def test_lindblad_trace_and_hermiticity_preserving(seed, x, y, z):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(SMALL.dim, SMALL.dim)) + 1j * rng.normal(size=(SMALL.dim, SMALL.dim))
    rho = X @ X.conj().T
    rho /= np.trace(rho)
    out = SMALL.lindblad_rhs(rho, x, y, z)
    assert abs(np.trace(out)) < 1e-11
    assert np.max(np.abs(out - out.conj().T)) < 1e-11


@given(T=st.floats(0.05, 2.0))
def test_pi_pulse_area(T):
    grid = np.linspace(0, T, 4001)
    s = sample_pulse(PulseParams(Shape.SINE_SQUARED), T, grid)
    assert abs(simpson(s.omega_x, x=grid) - np.pi) < 1e-8
    # the mean of sin² is 1/2
    assert abs(pi_pulse_amplitude(T) * T / 2 - np.pi) < 1e-14


@given(
    A=st.floats(5, 40),
    alpha=st.floats(-2, 2),
    dd=st.floats(-10, 10),
    T=st.floats(0.1, 0.6),
)
def test_trajectory_invariants_hold(A, alpha, dd, T):
    p = PulseParams(Shape.PERTURBATIVE_DRAG, A=A, delta_d=dd, alpha=alpha, delta_leak=-9.0)
    traj = evolve(SMALL, p, T, QUICK)
    for rho in traj.rho:
        assert abs(np.trace(rho).real - 1) < 1e-8
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-10
        assert np.linalg.eigvalsh(rho).min() >= -1e-7


@given(dd=st.floats(-15, 15), A=st.floats(10, 40))
def test_frame_equivalence(dd, A):
    p = PulseParams(Shape.DETUNED_SINE_SQUARED, A=A, delta_d=dd)
    a = evolve(SMALL, p, 0.25, QUICK)
    b = evolve(SMALL, p.with_(frame="phase"), 0.25, QUICK)
    assert np.max(np.abs(a.populations - b.populations)) < 1e-6


@given(s=st.floats(0.5, 2.0))
def test_sigma_scaling(s):
    p = PhysicalParams(n_max=2, sigma=4.0)
    q = dataclasses.replace(p, sigma=p.sigma * s, c6=p.c6 * s**6)
    a = evolve(SMALL, PulseParams(), 0.25, QUICK)
    b = evolve(build_model(q, small_tables(2)), PulseParams(), 0.25, QUICK)
    assert np.max(np.abs(a.populations - b.populations)) < 1e-10


@given(
    a=arrays(float, 30, elements=st.floats(-10, 10)),
    b=arrays(float, 30, elements=st.floats(-10, 10)),
    c=st.floats(-3, 3),
)
def test_savitzky_golay_linear(a, b, c):
    grid = np.linspace(0, 1, 30)
    z = np.zeros(30)
    fa = savitzky_golay(ControlSamples(grid, a, z, z)).omega_x
    fb = savitzky_golay(ControlSamples(grid, b, z, z)).omega_x
    fab = savitzky_golay(ControlSamples(grid, a + c * b, z, z)).omega_x
    np.testing.assert_allclose(fab, fa + c * fb, atol=1e-9)


@given(u=arrays(float, (8, 3), elements=st.floats(-100, 100)))
def test_projection_is_feasible_and_idempotent(u):
    prob = GrapeProblem(0.25, 8)
    x = prob.project(u)
    assert prob.violation(x) <= 1e-9
    np.testing.assert_allclose(prob.project(x), x, atol=1e-9)


@given(pops=st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_dominant_leakage_is_first_maximum(pops):
    d = {f"S{k}": v for k, v in enumerate(pops)}
    label = dominant_leakage(d)
    assert d[label] == max(pops)
    assert int(label[1:]) == pops.index(max(pops))


@given(A=st.floats(10, 40), dd=st.floats(-5, 5))
def test_evolve_is_deterministic(A, dd):
    p = PulseParams(Shape.DETUNED_SINE_SQUARED, A=A, delta_d=dd)
    a = evolve(SMALL, p, 0.25, QUICK)
    b = evolve(SMALL, p, 0.25, QUICK)
    assert np.array_equal(a.rho, b.rho)
