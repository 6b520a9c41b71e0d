import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shearlab.pulsed import (LatticeMap, PulsedState, closed_form_check, heat_pulse, iterate,
                             pullback)
from shearlab.spectral import SpectralField2D, Wavevector, mixing_scale, norm_l2


def integer_oracle(n: int) -> int:
    """Minus the summed heat exponents: after step j the single mode is (1, j + 1)."""
    return -sum(1 + (j + 1) ** 2 for j in range(1, n + 1))


class TestLatticeMap:
    def test_determinant_guard(self):
        with pytest.raises(ValueError):
            LatticeMap(((2, 0), (0, 1)))

    def test_dual(self):
        assert LatticeMap.shear().dual((1, 1)) == Wavevector(1, 2)
        assert LatticeMap.cat().dual((1, 0)) == Wavevector(2, 1)
        assert LatticeMap.identity().dual((3, -2)) == Wavevector(3, -2)

    def test_pullback_matches_pointwise_composition(self):
        lmap = LatticeMap.cat()
        state = PulsedState.from_amplitudes({(1, 2): 0.3 - 0.1j, (2, -1): 0.2j})
        moved = pullback(state, lmap)

        def as_field(st):
            amps = {}
            for k in st.modes:
                if (k.kx, k.ky) > (0, 0):
                    a = math.exp(st.log_mag(k)) * np.exp(1j * st.phase(k))
                    amps[(k.kx, k.ky)], amps[(-k.kx, -k.ky)] = a, np.conj(a)
            return SpectralField2D.from_modes(amps)

        x, y = np.random.default_rng(0).uniform(-3, 3, (2, 20))
        (a, b), (c, d) = lmap.m
        direct = as_field(state).evaluate(a * x + b * y, c * x + d * y)
        assert np.allclose(as_field(moved).evaluate(x, y), direct, atol=1e-13)


class TestState:
    def test_rejects_mean(self):
        with pytest.raises(ValueError):
            PulsedState({(0, 0): (0.0, 0.0)})

    def test_rejects_missing_partner(self):
        with pytest.raises(ValueError):
            PulsedState({(1, 0): (0.0, 0.0)})

    def test_canonical_norms_match_dense_field(self):
        st_ = PulsedState.canonical()
        dense = SpectralField2D.from_modes({(1, 1): 0.5, (-1, -1): 0.5})
        assert math.exp(st_.log_l2()) == pytest.approx(norm_l2(dense), rel=1e-15)
        assert st_.mixing_scale() == pytest.approx(mixing_scale(dense), rel=1e-15)

    def test_heat_pulse_negative_tau(self):
        with pytest.raises(ValueError):
            heat_pulse(PulsedState.canonical(), -1.0)


class TestClosedForm:
    def test_fifty_steps(self):
        start = time.perf_counter()
        _, series = iterate(PulsedState.canonical(), n=50)
        elapsed = time.perf_counter() - start
        for row in series.rows:
            n = int(row.t)
            log_ref, mix_ref = closed_form_check(n)
            assert log_ref == integer_oracle(n)
            assert abs(row.log_l2 - log_ref) <= 1e-12
            assert abs(row.mix_scale - mix_ref) <= 1e-15
        assert elapsed < 1.0

    def test_deep_underflow_is_representable(self):
        final, series = iterate(PulsedState.canonical(), n=50)
        assert series.absolute_log_l2()[-1] < -40000
        assert math.isfinite(final.log_l2())

    def test_continuing_a_series(self):
        mid, series = iterate(PulsedState.canonical(), n=20)
        _, series = iterate(mid, n=30, reference=PulsedState.canonical(), series=series)
        assert len(series) == 51
        assert series.rows[-1].log_l2 == closed_form_check(50)[0]

    def test_negative_n(self):
        with pytest.raises(ValueError):
            closed_form_check(-1)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([((1, 1), (0, 1)), ((2, 1), (1, 1)), ((0, 1), (1, 0)), ((1, 0), (3, 1))]),
       st.integers(1, 6))
def test_pullback_preserves_l2(m, n):
    state = PulsedState.from_amplitudes({(1, 0): 1.0, (2, 3): 0.5j})
    out, series = iterate(state, LatticeMap(m), n=n, tau=0.0)
    assert abs(series.rows[-1].log_l2) <= 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.floats(0.01, 2.0))
def test_heat_strictly_decreases_l2(n, tau):
    _, series = iterate(PulsedState.from_amplitudes({(1, 0): 1.0, (0, 2): 0.3}),
                        LatticeMap.cat(), n=n, tau=tau)
    assert np.all(np.diff(series.column("log_l2")) < 0)
