from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import simpson

from superatom import (
    ControlSamples,
    InvalidArgument,
    PulseParams,
    Shape,
    pi_pulse_amplitude,
    read_controls,
    sample_pulse,
    savitzky_golay,
    write_controls,
)
from superatom.pulses import piecewise_from_samples, samples_from_piecewise

T = 0.25


def fd(f, t, h=1e-6):
    return (f(t + h) - f(t - h)) / (2 * h)


class TestPiPulse:
    @pytest.mark.parametrize("T_, expected", [(0.25, 8 * math.pi), (1.0, 2 * math.pi), (0.5, 4 * math.pi)])
    def test_values(self, T_, expected):
        assert pi_pulse_amplitude(T_) == pytest.approx(expected, rel=1e-15)

    def test_quoted_in_mhz(self):
        assert pi_pulse_amplitude(0.25) / (2 * math.pi) == pytest.approx(4.0)

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_rejects(self, bad):
        with pytest.raises(InvalidArgument):
            pi_pulse_amplitude(bad)

    def test_area(self):
        grid = np.linspace(0, T, 2001)
        s = sample_pulse(PulseParams(Shape.SINE_SQUARED), T, grid)
        assert abs(simpson(s.omega_x, x=grid) - math.pi) < 1e-8


class TestShapes:
    def test_sine_squared_midpoint(self):
        s = sample_pulse(PulseParams(Shape.SINE_SQUARED), T, [T / 2])
        assert s.omega_x[0] == pytest.approx(2 * math.pi / T)
        assert s.omega_y[0] == 0 and s.omega_z[0] == 0

    def test_sine_squared_ignores_detuning(self):
        s = sample_pulse(PulseParams(Shape.SINE_SQUARED, delta_d=3.0), T, [0.1])
        assert s.omega_z[0] == 0

    def test_detuned(self):
        s = sample_pulse(PulseParams(Shape.DETUNED_SINE_SQUARED, A=20.0, delta_d=-1.5), T, [0.0, 0.1, T])
        np.testing.assert_allclose(s.omega_z, -1.5)
        assert s.omega_x[1] == pytest.approx(20.0 * math.sin(math.pi * 0.1 / T) ** 2)

    def test_perturbative_matches_numerical_derivative(self):
        A, alpha, dl = 23.0, -0.8, -12.0
        p = PulseParams(Shape.PERTURBATIVE_DRAG, A=A, delta_d=0.3, alpha=alpha, delta_leak=dl)
        om = lambda t: A * math.sin(math.pi * t / T) ** 2  # noqa: E731
        for t in (0.03, 0.11, 0.2):
            s = sample_pulse(p, T, [t])
            assert s.omega_y[0] == pytest.approx(-alpha * fd(om, t) / dl, rel=1e-7)
            assert s.omega_z[0] == 0.3

    def test_nonperturbative_matches_numerical_derivative(self):
        A, alpha, b, dl = 23.0, 1.1, 0.66, -12.4
        p = PulseParams(Shape.NON_PERTURBATIVE_DRAG, A=A, alpha=alpha, beta_leak=b, delta_leak=dl)
        g = lambda t: math.atan(b * A * math.sin(math.pi * t / T) ** 2 / dl)  # noqa: E731
        for t in (0.02, 0.09, 0.17):
            assert sample_pulse(p, T, [t]).omega_y[0] == pytest.approx(-(alpha / b) * fd(g, t), rel=1e-7)

    def test_multilevel_matches_numerical_derivatives(self):
        A, a, a1, a2, d1, d2 = 20.0, 0.4, -0.3, 0.7, -12.4, -4.9
        p = PulseParams(Shape.MULTI_LEVEL_DRAG, A=A, alpha=a, alpha1=a1, alpha2=a2,
                        delta_leak=d1, delta_leak2=d2)
        om = lambda t: A * math.sin(math.pi * t / T) ** 2  # noqa: E731
        dom = lambda t: fd(om, t, 1e-5)  # noqa: E731
        for t in (0.05, 0.13):
            s = sample_pulse(p, T, [t])
            assert s.omega_x[0] == pytest.approx(om(t) + a2 * fd(dom, t, 1e-5) / (d1 * d2), rel=1e-6)
            assert s.omega_y[0] == pytest.approx(-(a / d1 + a1 / d2) * dom(t), rel=1e-7)

    def test_endpoints(self):
        kw = dict(A=21.0, delta_d=0.2, alpha=0.9, beta_leak=0.5, delta_leak=-10.0)
        for shape in (Shape.SINE_SQUARED, Shape.DETUNED_SINE_SQUARED, Shape.PERTURBATIVE_DRAG,
                      Shape.NON_PERTURBATIVE_DRAG):
            s = sample_pulse(PulseParams(shape, **kw), T, [0.0, T])
            assert np.all(np.abs(s.omega_x) < 1e-12)
            assert np.all(np.abs(s.omega_y) < 1e-10)

    def test_multilevel_endpoint_nonzero(self):
        A, a2, d1, d2 = 21.0, 0.5, -10.0, -3.0
        p = PulseParams(Shape.MULTI_LEVEL_DRAG, A=A, alpha2=a2, delta_leak=d1, delta_leak2=d2)
        s = sample_pulse(p, T, [0.0])
        assert s.omega_x[0] == pytest.approx(a2 * 2 * math.pi**2 * A / T**2 / (d1 * d2))
        assert s.omega_x[0] != 0

    def test_nonperturbative_weak_limit(self):
        dl, A = -50.0, 25.0
        b = 0.01 * abs(dl) / A
        grid = np.linspace(0, T, 4001)
        yp = sample_pulse(PulseParams(Shape.PERTURBATIVE_DRAG, A=A, alpha=1.0, delta_leak=dl), T, grid).omega_y
        yn = sample_pulse(PulseParams(Shape.NON_PERTURBATIVE_DRAG, A=A, alpha=1.0, beta_leak=b, delta_leak=dl),
                          T, grid).omega_y
        assert np.max(np.abs(yn - yp)) / np.max(np.abs(yp)) < 1e-3

    def test_perturbative_limit_order(self):
        dl, A = -20.0, 25.0
        grid = np.linspace(0, T, 2001)
        yp = sample_pulse(PulseParams(Shape.PERTURBATIVE_DRAG, A=A, alpha=1.0, delta_leak=dl), T, grid).omega_y
        ratios, devs = [], []
        for r in 0.4 / 2.0 ** np.arange(6):
            b = r * abs(dl) / A
            yn = sample_pulse(PulseParams(Shape.NON_PERTURBATIVE_DRAG, A=A, alpha=1.0, beta_leak=b,
                                          delta_leak=dl), T, grid).omega_y
            ratios.append(r)
            devs.append(np.max(np.abs(yn - yp)) / np.max(np.abs(yp)))
        order = np.polyfit(np.log(ratios), np.log(devs), 1)[0]
        assert order >= 1.9

    def test_phase_frame_rotates_drive(self):
        p = PulseParams(Shape.PERTURBATIVE_DRAG, A=22.0, delta_d=3.0, alpha=0.5, delta_leak=-9.0)
        t = np.array([0.05, 0.12])
        d = sample_pulse(p, T, t)
        ph = sample_pulse(p.with_(frame="phase"), T, t)
        z = (d.omega_x + 1j * d.omega_y) * np.exp(1j * 3.0 * t)
        np.testing.assert_allclose(ph.omega_x + 1j * ph.omega_y, z, atol=1e-12)
        assert np.all(ph.omega_z == 0)


class TestValidation:
    @pytest.mark.parametrize("p", [
        PulseParams(Shape.PERTURBATIVE_DRAG, alpha=1.0),
        PulseParams(Shape.NON_PERTURBATIVE_DRAG, alpha=1.0, delta_leak=-1.0),
        PulseParams(Shape.MULTI_LEVEL_DRAG, delta_leak=-1.0),
        PulseParams(Shape.PIECEWISE_CONSTANT),
        PulseParams(Shape.SINE_SQUARED, A=float("inf")),
    ])
    def test_missing_coefficients(self, p):
        with pytest.raises(InvalidArgument):
            sample_pulse(p, T)

    def test_grid_outside(self):
        with pytest.raises(InvalidArgument):
            sample_pulse(PulseParams(), T, [0.0, 0.3])

    def test_bad_frame(self):
        with pytest.raises(InvalidArgument):
            PulseParams(frame="lab")

    def test_segments_shape(self):
        with pytest.raises(InvalidArgument):
            PulseParams(Shape.PIECEWISE_CONSTANT, segments=np.zeros((3, 2)))

    def test_samples_validation(self):
        with pytest.raises(InvalidArgument):
            ControlSamples([0.0, 0.0], [1.0, 1.0], [0.0, 0.0])
        with pytest.raises(InvalidArgument):
            ControlSamples([0.0, 1.0], [1.0], [0.0, 0.0])
        with pytest.raises(InvalidArgument):
            ControlSamples([0.0, 1.0], [1.0, np.nan], [0.0, 0.0])


class TestPiecewise:
    def test_zero_order_hold(self):
        seg = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        p = PulseParams(Shape.PIECEWISE_CONSTANT, segments=seg)
        s = sample_pulse(p, 1.0, [0.0, 0.49, 0.5, 0.99, 1.0])
        np.testing.assert_array_equal(s.omega_x, [1, 1, 4, 4, 4])
        np.testing.assert_array_equal(s.omega_z, [3, 3, 6, 6, 6])

    def test_round_trip(self):
        seg = np.arange(12.0).reshape(4, 3)
        p = PulseParams(Shape.PIECEWISE_CONSTANT, segments=seg, edges=[0, 0.1, 0.2, 0.3, 0.4])
        back = piecewise_from_samples(samples_from_piecewise(p, 0.4))
        np.testing.assert_array_equal(back.segments, seg)
        np.testing.assert_array_equal(back.edges, p.edges)

    def test_file_round_trip(self, tmp_path):
        s = sample_pulse(PulseParams(Shape.PERTURBATIVE_DRAG, alpha=0.3, delta_leak=-4.0), T)
        write_controls(s, tmp_path / "c.csv")
        r = read_controls(tmp_path / "c.csv")
        np.testing.assert_array_equal(r.channels, s.channels)
        np.testing.assert_array_equal(r.grid, s.grid)

    def test_bad_header(self, tmp_path):
        (tmp_path / "c.csv").write_text("a,b,c,d\n0,0,0,0\n")
        with pytest.raises(InvalidArgument):
            read_controls(tmp_path / "c.csv")


class TestSavitzkyGolay:
    grid = np.linspace(0, 1, 50)

    def test_constant(self):
        c = np.full(50, 2.5)
        out = savitzky_golay(ControlSamples(self.grid, c, -c, c), 7, 3)
        np.testing.assert_allclose(out.omega_x, 2.5, atol=1e-12)
        np.testing.assert_allclose(out.omega_y, -2.5, atol=1e-12)

    def test_cubic_exact(self):
        c = self.grid**3 - 0.5 * self.grid
        out = savitzky_golay(ControlSamples(self.grid, c, c, c), 7, 3)
        np.testing.assert_allclose(out.omega_x, c, atol=1e-10)

    def test_grid_unchanged(self):
        s = ControlSamples(self.grid, np.sin(self.grid), np.zeros(50), np.zeros(50))
        assert np.array_equal(savitzky_golay(s).grid, self.grid)

    def test_nonuniform(self):
        g = np.sort(np.r_[self.grid[:-1], 0.995])
        with pytest.raises(InvalidArgument):
            savitzky_golay(ControlSamples(g, g, g, g))

    @pytest.mark.parametrize("w, o", [(6, 3), (3, 3), (51, 3)])
    def test_bad_window(self, w, o):
        s = ControlSamples(self.grid, self.grid, self.grid, self.grid)
        with pytest.raises(InvalidArgument):
            savitzky_golay(s, w, o)
