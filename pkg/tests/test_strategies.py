import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qreadout import (
    INFINITE,
    Benchmark,
    CellModel,
    ConfigError,
    ProbeParams,
    bayes_error_floor,
    binary_entropy,
    classical_hb,
    classical_mv,
    classical_pc,
    quantum_gain,
    quantum_pc,
)


def _all(model, mu, eta=1.0):
    return [
        classical_hb(model, mu, eta),
        classical_pc(model, mu, eta),
        classical_mv(model, mu, eta),
        quantum_pc(model, ProbeParams(mu, eta=eta)),
    ]


def sigmas(hi):
    # zero, or wide enough for a nonempty discretization window
    return st.one_of(st.just(0.0), st.floats(1e-6, hi))


def small_model(rng):
    """Gaussian levels on k <= 3 points, coarse enough to enumerate by hand."""
    k = int(rng.integers(1, 4))
    t0, t1 = rng.uniform(0.05, 0.95, 2)
    s0, s1 = rng.uniform(0.0, 0.08, 2)
    return CellModel.gaussian(t0, s0, t1, s1, k=k, n_sigma=1.5)


class TestHelstromBound:
    def test_identical_deltas(self):
        m = CellModel.gaussian(0.7, 0.0, 0.7, 0.0)
        r = classical_hb(m, 1e3)
        assert r.p_err == 0.5 and r.info_bits == 0.0

    def test_narrow_deltas(self, narrow_perfect):
        r = classical_hb(narrow_perfect, 1e4)
        assert r.p_err == pytest.approx(oracles.helstrom_pair(1e4, 0.972, 0.982), abs=1e-12)
        assert r.p_err == pytest.approx(0.26240, abs=5e-5)
        assert r.info_bits == pytest.approx(1 - binary_entropy(r.p_err), abs=0)

    def test_no_energy(self, narrow):
        assert classical_hb(narrow, 0.0).p_err == 0.5

    @pytest.mark.parametrize("seed", range(20))
    def test_perfect_memory_reduction(self, seed):
        rng = np.random.default_rng(seed)
        mu = 10 ** rng.uniform(0, 5)
        t0, t1 = rng.uniform(0.5, 1.0, 2)
        m = CellModel.gaussian(t0, 0.0, t1, 0.0)
        assert classical_hb(m, mu).p_err == pytest.approx(oracles.helstrom_pair(mu, t0, t1), abs=1e-12)

    def test_rejects_unequal_priors(self):
        m = CellModel.gaussian(0.5, 0.0, 0.9, 0.0, p0=0.3)
        with pytest.raises(ConfigError):
            classical_hb(m, 10.0)


class TestClassicalPC:
    def test_identical_mixtures(self, narrow):
        m = CellModel(narrow.g1, narrow.g1)
        assert classical_pc(m, 1e4).p_err == pytest.approx(0.5, abs=1e-12)

    def test_threshold_oracle(self, narrow_perfect):
        got = classical_pc(narrow_perfect, 1e4).p_err
        assert got == pytest.approx(oracles.poisson_ml_threshold_error(1e4, 0.972, 0.982), abs=1e-12)

    def test_below_helstrom_information(self, narrow):
        assert classical_pc(narrow, 1e4).info_bits <= classical_hb(narrow, 1e4).info_bits

    @pytest.mark.parametrize("seed", range(15))
    def test_brute_force_oracle(self, seed):
        rng = np.random.default_rng(seed)
        m = small_model(rng)
        mu = float(rng.uniform(0.1, 5.0))
        want = oracles.brute_classical_pc(m.g0.taus, m.g0.weights, m.g1.taus, m.g1.weights, mu)
        assert classical_pc(m, mu).p_err == pytest.approx(want, abs=1e-10)

    @pytest.mark.parametrize("mu, eta", [(1e3, 0.8), (1e4, 0.5), (37.0, 0.3)])
    def test_loss_is_energy_rescaling(self, asym, mu, eta):
        assert classical_pc(asym, mu, eta).p_err == classical_pc(asym, eta * mu).p_err
        assert classical_hb(asym, mu, eta).p_err == classical_hb(asym, eta * mu).p_err


class TestClassicalMV:
    def test_equals_pc_for_perfect_levels(self, narrow_perfect):
        for mu in (10.0, 1e3, 1e4):
            assert classical_mv(narrow_perfect, mu).p_err == classical_pc(narrow_perfect, mu).p_err

    def test_asym_ordering(self, asym):
        for mu in np.logspace(2, 5, 7):
            assert classical_mv(asym, mu).info_bits <= classical_pc(asym, mu).info_bits + 1e-12

    def test_no_energy(self, asym):
        assert classical_mv(asym, 0.0).p_err == pytest.approx(0.5, abs=1e-15)


class TestQuantumPC:
    def test_identical_levels(self, narrow):
        m = CellModel(narrow.g0, narrow.g0)
        assert quantum_pc(m, ProbeParams(1e3)).p_err == pytest.approx(0.5, abs=1e-12)

    def test_identical_deltas(self):
        m = CellModel.gaussian(0.6, 0.0, 0.6, 0.0)
        assert quantum_pc(m, ProbeParams(50.0, eta=0.7)).info_bits == 0.0

    def test_narrow_beats_helstrom(self, narrow):
        assert quantum_pc(narrow, ProbeParams(1e4)).info_bits > classical_hb(narrow, 1e4).info_bits

    @pytest.mark.parametrize("seed", range(12))
    @pytest.mark.parametrize("modes, eta, eta_idler", [(INFINITE, 1.0, None), (2, 1.0, None),
                                                        (INFINITE, 0.7, None), (1, 0.6, 0.9)])
    def test_brute_force_oracle(self, seed, modes, eta, eta_idler):
        rng = np.random.default_rng(100 + seed)
        m = small_model(rng)
        mu = float(rng.uniform(0.1, 5.0))
        want = oracles.brute_quantum_pc(
            m.g0.taus, m.g0.weights, m.g1.taus, m.g1.weights, mu, modes, eta, eta_idler)
        got = quantum_pc(m, ProbeParams(mu, modes, eta, eta_idler)).p_err
        assert got == pytest.approx(want, abs=1e-10)

    def test_diagnostics(self, narrow):
        r = quantum_pc(narrow, ProbeParams(1e3, eta=0.9))
        assert r.diagnostics["mass_deficit"] < 1e-9
        assert r.diagnostics["k"] == 101
        assert r.diagnostics["collapsed"] is False


class TestInvariants:
    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.3, 0.99), sigmas(0.01), st.floats(0.3, 0.99), sigmas(0.01), st.floats(0.0, 400.0))
    def test_ranges_and_information(self, t0, s0, t1, s1, mu):
        m = CellModel.gaussian(t0, s0, t1, s1, k=21)
        for r in _all(m, mu):
            assert 0.0 <= r.p_err <= 0.5
            assert 0.0 <= r.info_bits <= 1.0
            assert r.info_bits == 1.0 - binary_entropy(r.p_err)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 1.0), sigmas(0.05), st.floats(0.0, 1.0), sigmas(0.05), st.floats(0.0, 1e5),
           st.integers(1, 41))
    def test_counting_below_helstrom(self, t0, s0, t1, s1, mu, k):
        m = CellModel.gaussian(t0, s0, t1, s1, k=k)
        assert classical_pc(m, mu).info_bits <= classical_hb(m, mu).info_bits + 1e-9
        assert classical_mv(m, mu).info_bits <= classical_hb(m, mu).info_bits + 1e-9

    @pytest.mark.parametrize("mu", [1e2, 1e3, 1e4, 1e5])
    @pytest.mark.parametrize("name", ["narrow", "broad", "asym"])
    @pytest.mark.parametrize("strategy", ["CHB", "CPC", "CMV", "QUANTUM"])
    def test_error_above_bayes_floor(self, request, name, mu, strategy):
        m = request.getfixturevalue(name)
        run = {
            "CHB": lambda: classical_hb(m, mu),
            "CPC": lambda: classical_pc(m, mu),
            "CMV": lambda: classical_mv(m, mu),
            "QUANTUM": lambda: quantum_pc(m, ProbeParams(mu)),
        }[strategy]
        assert run().p_err >= bayes_error_floor(m) - 1e-9

    @pytest.mark.parametrize("mu", [20.0, 300.0])
    def test_efficiency_monotone(self, narrow, mu):
        m = narrow.with_k(31)
        etas = [0.2, 0.4, 0.6, 0.8, 1.0]
        runs = np.array([[r.info_bits for r in _all(m, mu, eta)] for eta in etas])
        assert np.all(np.diff(runs, axis=0) >= -1e-9)


class TestQuantumGain:
    @pytest.mark.parametrize("bench", list(Benchmark))
    def test_zero_for_identical_levels(self, bench):
        m = CellModel.gaussian(0.95, 0.002, 0.95, 0.002, k=21)
        assert quantum_gain(m, 1e3, benchmark=bench) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("bench", list(Benchmark))
    def test_zero_for_identical_deltas(self, bench):
        m = CellModel.gaussian(0.95, 0.0, 0.95, 0.0)
        assert quantum_gain(m, 1e3, benchmark=bench) == 0.0

    def test_reuses_quantum_result(self, narrow):
        q = quantum_pc(narrow, ProbeParams(1e3))
        g = quantum_gain(narrow, 1e3, benchmark="HB", quantum=q)
        assert g == q.info_bits - classical_hb(narrow, 1e3).info_bits
