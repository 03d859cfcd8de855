import hashlib
import json
import math
import struct
from pathlib import Path

import numpy as np
import pytest

from latgauge.chains import ChainConfig, Trace, ChainTrace, run_chains
from latgauge.errors import InsufficientSamples
from latgauge.seeding import (
    derive_aux_rng,
    derive_chain_seed,
    rng_from_words,
    rng_state_words,
    stream_state,
)
from latgauge.stats import (
    Estimate,
    autocovariance,
    bin_means,
    estimate_series,
    integrated_autocorrelation_time,
    jackknife,
    jackknife_covariance,
)

GOLDEN = Path(__file__).parent / "data" / "seed_vectors_master0.json"
PCG_MULT = 0x2360ED051FC65DA44385DF649FCCF645
M128 = (1 << 128) - 1


def pcg64_reference(state, inc, n):
    """Pure-Python PCG64 XSL-RR 128/64: advance the LCG, then output."""
    out = []
    for _ in range(n):
        state = (state * PCG_MULT + inc) & M128
        hi, lo = state >> 64, state & ((1 << 64) - 1)
        x, rot = hi ^ lo, hi >> 58
        out.append(((x >> rot) | (x << (64 - rot))) & ((1 << 64) - 1))
    return out


def ar1(rng, n, phi, n_chains=1):
    x = np.empty((n_chains, n))
    x[:, 0] = rng.standard_normal(n_chains) / math.sqrt(1 - phi ** 2)
    eps = rng.standard_normal((n_chains, n))
    for t in range(1, n):
        x[:, t] = phi * x[:, t - 1] + eps[:, t]
    return x


class TestSeeding:
    def test_same_inputs_same_state(self):
        a, b = derive_chain_seed(42, 3), derive_chain_seed(42, 3)
        assert a.bit_generator.state == b.bit_generator.state
        assert np.array_equal(a.random(10), b.random(10))

    def test_no_shared_outputs_between_chains(self):
        a = set(derive_chain_seed(0, 0).bit_generator.random_raw(1000).tolist())
        b = set(derive_chain_seed(0, 1).bit_generator.random_raw(1000).tolist())
        assert not a & b

    def test_derivation_matches_hash(self):
        h = hashlib.sha256(b"latgauge-chain" + struct.pack("<QQ", 7, 2)).digest()
        assert stream_state(7, 2) == (int.from_bytes(h[:16], "little"), int.from_bytes(h[16:], "little") | 1)

    def test_golden_vectors(self):
        golden = json.loads(GOLDEN.read_text())
        assert golden["master_seed"] == 0
        for chain in golden["chains"]:
            state, inc = stream_state(0, chain["index"])
            assert (str(state), str(inc)) == (chain["state"], chain["inc"])
            raw = derive_chain_seed(0, chain["index"]).bit_generator.random_raw(len(chain["first_raw_u64"]))
            expected = [int(v) for v in chain["first_raw_u64"]]
            assert raw.tolist() == expected
            assert pcg64_reference(state, inc, len(expected)) == expected

    def test_aux_streams_are_separate(self):
        assert derive_aux_rng(0, 0).random() != derive_chain_seed(0, 0).random()

    def test_state_words_round_trip(self):
        rng = derive_chain_seed(5, 1)
        rng.random(3)
        rng.integers(0, 10, dtype=np.uint32)  # leaves a buffered 32-bit half
        clone = rng_from_words(rng_state_words(rng))
        assert np.array_equal(clone.integers(0, 1 << 30, 20), rng.integers(0, 1 << 30, 20))

    def test_seed_range(self):
        with pytest.raises(ValueError):
            derive_chain_seed(-1, 0)
        with pytest.raises(ValueError):
            derive_chain_seed(1 << 64, 0)


class TestAutocorrelation:
    def test_white_noise(self):
        x = np.random.default_rng(0).standard_normal((4, 20_000))
        tau, _ = integrated_autocorrelation_time(x)
        assert tau == pytest.approx(0.5, abs=0.05)

    def test_ar1_matches_closed_form(self):
        phi = 0.8
        x = ar1(np.random.default_rng(1), 50_000, phi, 4)
        tau, w = integrated_autocorrelation_time(x)
        exact = 0.5 * (1 + phi) / (1 - phi)
        assert tau == pytest.approx(exact, rel=0.1)
        assert w >= 6 * tau - 1

    def test_autocovariance_lag0_is_variance(self):
        x = np.random.default_rng(2).standard_normal((3, 1000))
        assert autocovariance(x)[0] == pytest.approx(np.mean((x - x.mean()) ** 2))

    def test_constant_series(self):
        assert integrated_autocorrelation_time(np.ones(500)) == (0.5, 0)


class TestEstimateSeries:
    def test_stderr_formula(self):
        x = ar1(np.random.default_rng(3), 10_000, 0.5, 2)
        e = estimate_series(x)
        assert e.stderr == pytest.approx(x.std() * math.sqrt(2 * e.tau_int / x.size))
        assert e.tau_int >= 0.5 and e.n_samples == x.size

    def test_coverage_on_ar1(self):
        # error bars should cover the true mean about as often as a Gaussian says
        rng = np.random.default_rng(4)
        z = []
        for _ in range(200):
            e = estimate_series(ar1(rng, 2000, 0.7, 2))
            z.append(e.mean / e.stderr)
        assert 0.8 < np.std(z) < 1.25

    def test_constant(self):
        e = estimate_series(np.full((2, 100), 3.0))
        assert e.mean == 3.0 and e.stderr == 0.0

    def test_complex(self):
        x = np.random.default_rng(5).standard_normal(400) + 1j
        e = estimate_series(x)
        assert isinstance(e.mean, complex) and e.mean.imag == pytest.approx(1.0)
        assert e.to_dict()["im"] == pytest.approx(1.0)

    def test_too_few(self):
        with pytest.raises(InsufficientSamples):
            estimate_series(np.zeros(99))

    def test_consistency_helper(self):
        e = Estimate(0.1, 0.05, 0.5, 100)
        assert e.consistent_with(0.0) and not e.consistent_with(0.0, n_sigma=1.0)


class TestJackknife:
    def test_mean_matches_naive_error(self):
        x = np.random.default_rng(6).standard_normal(10_000)
        value, err = jackknife(lambda m: m, x)
        assert value == pytest.approx(x.mean())
        assert err == pytest.approx(x.std() / 100, rel=0.25)

    def test_bins_do_not_straddle_chains(self):
        x = np.vstack([np.zeros(10), np.ones(10)])
        b = bin_means(x, 4)
        assert set(b[:2]) == {0.0} and set(b[2:]) == {1.0}

    def test_too_many_bins(self):
        with pytest.raises(InsufficientSamples):
            bin_means(np.zeros((4, 5)), 50)

    def test_covariance_of_correlated_gaussians(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal(20_000)
        b = 0.5 * a + rng.standard_normal(20_000)
        value, err = jackknife_covariance(a, b)
        assert abs(value - 0.5) <= 3 * err
        assert err < 0.02

    def test_covariance_explicit_product(self):
        rng = np.random.default_rng(8)
        a, b = rng.standard_normal((2, 5000))
        v1, e1 = jackknife_covariance(a, b)
        v2, e2 = jackknife_covariance(a, b, f_for_product=a * b, g_for_product=np.ones_like(a))
        assert v1 == pytest.approx(v2) and e1 == pytest.approx(e2)


class TestChainDriver:
    def test_config_defaults(self):
        cfg = ChainConfig(1000)
        assert cfg.burn_in == 200 and cfg.n_chains == 4 and cfg.thinning == 1
        assert cfg.n_measurements == 800

    def test_thinning(self):
        cfg = ChainConfig(100, 10, 7)
        assert cfg.measured_sweeps().tolist() == list(range(10, 100, 7))
        assert cfg.n_measurements == len(cfg.measured_sweeps())

    @pytest.mark.parametrize("kw", [dict(sweeps=10, burn_in=10), dict(sweeps=0), dict(sweeps=10, thinning=0),
                                    dict(sweeps=10, n_chains=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ChainConfig(**kw)

    def test_budget(self):
        with pytest.raises(InsufficientSamples):
            ChainConfig(40, 10, 1, 3).check_budget()
        ChainConfig(50, 0, 1, 2).check_budget()

    def test_run_chains_uses_derived_seeds(self):
        def job(i, rng):
            return ChainTrace(np.arange(3), rng.random((3, 1)))

        traces = run_chains(job, 3, seed=11, workers=1)
        for i, t in enumerate(traces):
            assert np.array_equal(t.values, derive_chain_seed(11, i).random((3, 1)))
        merged = Trace.merge(traces)
        assert merged.values.shape == (3, 3, 1)
