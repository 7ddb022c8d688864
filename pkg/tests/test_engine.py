import math

import numpy as np
import pytest

from tailkit.cramer import NotContracting
from tailkit.engine import (
    SimConfig,
    _block_rng,
    backward_perpetuity,
    default_burn_in,
    get_family,
    iterate_forward,
    load_samples,
    pathwise_domination_check,
    sample_perpetuity,
    sample_stationary,
    sample_sup_pi,
    save_batch,
    sup_pi,
)
from tailkit.measure import Atom, AtomicMeasure, ParametricDriver, TailkitError


def m(*entries, label=""):
    return AtomicMeasure(tuple(Atom(*e) for e in entries), label=label)


COUNTEREXAMPLE = m((3.0, 1.0, -1.0, 0.2), (0.5, -1.0, 0.0, 0.8))
HALFLINE_UP = m((2.0, -1.0, None, 1 / 3), (0.5, 1.0, None, 2 / 3))
DEGENERATE = m((2.0, -1.0, None, 1 / 3), (0.5, 0.5, None, 2 / 3))


class TestIterateForward:
    def test_deterministic_contraction(self):
        # single atom (1/2, 1): geometric series converging to b/(1-a) = 2
        final, _ = iterate_forward(
            get_family("affine"), m((0.5, 1.0)), x0=0.0, n=50, rng=_block_rng(0, 0)
        )
        assert abs(final - 2.0) < 1e-14

    def test_letac_single_step(self):
        # max(3*(-5)+1, 3*(-1)+1) = max(-14, -2) = -2
        final, traj = iterate_forward(
            get_family("letac"),
            m((3.0, 1.0, -1.0)),
            x0=-5.0,
            n=1,
            rng=_block_rng(0, 0),
            record=True,
        )
        assert final == -2.0
        assert traj == [-5.0, -2.0]

    def test_maxzero_clamp(self):
        final, _ = iterate_forward(
            get_family("maxzero"), m((0.5, -10.0)), x0=1.0, n=1, rng=_block_rng(0, 0)
        )
        assert final == 0.0

    def test_letac_requires_c(self):
        with pytest.raises(TailkitError, match="threshold"):
            iterate_forward(get_family("letac"), m((0.5, 1.0)), 0.0, 1, _block_rng(0, 0))


class TestSampleStationary:
    def test_degenerate_collapses(self):
        batch = sample_stationary(
            get_family("affine"), DEGENERATE, SimConfig(n_samples=2000, seed=1)
        )
        assert np.max(np.abs(batch.values - 1.0)) <= 1e-9

    def test_letac_counterexample_bounded(self):
        batch = sample_stationary(
            get_family("letac"), COUNTEREXAMPLE, SimConfig(n_samples=20_000, seed=2)
        )
        assert float(np.max(batch.values)) <= -1.0 + 1e-12

    def test_halfline_support_reaches_far(self):
        # escape orbit: iterating (2,-1) from x > 1 doubles the gap to 1
        batch = sample_stationary(
            get_family("affine"), HALFLINE_UP, SimConfig(n_samples=10**5, seed=3)
        )
        assert float(np.max(batch.values)) > 100.0

    def test_maxzero_nonnegative(self):
        batch = sample_stationary(
            get_family("maxzero"),
            m((2.0, -1.0, None, 1 / 3), (0.5, -0.5, None, 2 / 3)),
            SimConfig(n_samples=5000, seed=4),
        )
        assert np.min(batch.values) >= 0.0

    def test_extremal_floor(self):
        meas = m((2.0, 0.5, None, 1 / 3), (0.5, 0.25, None, 2 / 3))
        batch = sample_stationary(
            get_family("extremal"), meas, SimConfig(n_samples=5000, seed=5)
        )
        assert np.min(batch.values) >= 0.25

    def test_not_contracting_rejected(self):
        with pytest.raises(NotContracting):
            sample_stationary(get_family("affine"), m((2.0, 0.0)), SimConfig(seed=6))

    def test_default_burn_in_formula(self):
        mla = 0.2 * math.log(3.0) - 0.8 * math.log(2.0)
        assert default_burn_in(COUNTEREXAMPLE) == math.ceil(40 * math.log(10) / abs(mla))

    def test_coupling_gap_reported(self):
        batch = sample_stationary(
            get_family("affine"), HALFLINE_UP, SimConfig(n_samples=100, seed=7)
        )
        mla = -math.log(2.0) / 3
        bound = 1e6 * math.exp(batch.burn_in_used * mla) * 1e6  # generous safety
        assert batch.coupling_gap is not None
        assert batch.coupling_gap <= max(bound, 1e-9)

    def test_parametric_driver(self):
        driver = ParametricDriver("lognormal_normal", {"mu": -1.0, "sigma": 0.2})
        batch = sample_stationary(
            get_family("affine"), driver, SimConfig(n_samples=1000, seed=8)
        )
        assert batch.values.shape == (1000,)
        assert np.all(np.isfinite(batch.values))


class TestReproducibility:
    def test_bit_identical_rerun(self):
        cfg = SimConfig(n_samples=5000, chains=8, seed=11)
        b1 = sample_stationary(get_family("affine"), HALFLINE_UP, cfg)
        b2 = sample_stationary(get_family("affine"), HALFLINE_UP, cfg)
        assert np.array_equal(b1.values, b2.values)
        assert b1.digest() == b2.digest()

    def test_worker_count_irrelevant(self):
        cfg = SimConfig(n_samples=5000, chains=8, seed=12)
        b1 = sample_stationary(get_family("affine"), HALFLINE_UP, cfg, n_workers=1)
        b3 = sample_stationary(get_family("affine"), HALFLINE_UP, cfg, n_workers=3)
        assert np.array_equal(b1.values, b3.values)

    def test_seed_changes_batch(self):
        b1 = sample_stationary(
            get_family("affine"), HALFLINE_UP, SimConfig(n_samples=1000, seed=13)
        )
        b2 = sample_stationary(
            get_family("affine"), HALFLINE_UP, SimConfig(n_samples=1000, seed=14)
        )
        assert not np.array_equal(b1.values, b2.values)

    def test_atom_order_irrelevant(self):
        shuffled = m((0.5, 1.0, None, 2 / 3), (2.0, -1.0, None, 1 / 3))
        cfg = SimConfig(n_samples=2000, seed=15)
        b1 = sample_stationary(get_family("affine"), HALFLINE_UP, cfg)
        b2 = sample_stationary(get_family("affine"), shuffled, cfg)
        assert np.array_equal(b1.values, b2.values)

    def test_affine_equivariance_in_b(self):
        lam = 3.0
        _, traj = iterate_forward(
            get_family("affine"), HALFLINE_UP, 0.25, 500, _block_rng(16, 0), record=True
        )
        _, traj_scaled = iterate_forward(
            get_family("affine"),
            HALFLINE_UP.scale_b(lam),
            lam * 0.25,
            500,
            _block_rng(16, 0),
            record=True,
        )
        for x, y in zip(traj, traj_scaled):
            assert abs(lam * x - y) <= 4 * np.spacing(max(abs(lam * x), 1.0))


class TestPerpetuity:
    def test_deterministic_negative(self):
        # single atom (1/2, -1): sum -(1/2)^k = -2 in the limit
        draw = backward_perpetuity(
            m((0.5, -1.0)), SimConfig(truncation_eps=1e-12), _block_rng(20, 0)
        )
        assert abs(draw.value + 2.0) <= 4e-12
        assert draw.pi_reached < 1e-12
        assert not draw.hit_max_steps

    def test_deterministic_positive(self):
        draw = backward_perpetuity(m((0.5, 1.0)), SimConfig(), _block_rng(21, 0))
        assert abs(draw.value - 2.0) <= 4e-12

    def test_all_negative_shifts_give_negative_values(self):
        meas = m((3.0, -1.0, None, 0.2), (0.5, -2.0, None, 0.8))
        batch = sample_perpetuity(meas, SimConfig(n_samples=5000, seed=22))
        assert np.max(batch.values) < 0.0

    def test_matches_forward_in_law(self):
        fwd = sample_stationary(
            get_family("affine"), HALFLINE_UP, SimConfig(n_samples=30_000, seed=23)
        )
        bwd = sample_perpetuity(HALFLINE_UP, SimConfig(n_samples=30_000, seed=24))
        from tailkit.tailstats import ks_distance

        assert ks_distance(fwd.values, bwd.values) < 0.02

    def test_not_contracting(self):
        with pytest.raises(NotContracting):
            backward_perpetuity(m((2.0, 1.0)), SimConfig(), _block_rng(25, 0))


class TestSupPi:
    def test_contracting_atom_gives_one(self):
        draw = sup_pi(m((0.5, 0.0)), SimConfig(), _block_rng(30, 0))
        assert draw.value == 1.0

    def test_expanding_rejected(self):
        with pytest.raises(NotContracting):
            sup_pi(m((2.0, 0.0)), SimConfig(), _block_rng(31, 0))

    def test_batch_at_least_one(self):
        batch = sample_sup_pi(
            m((3.0, 0.0, None, 0.2), (0.5, 0.0, None, 0.8)),
            SimConfig(n_samples=20_000, seed=32),
        )
        assert np.min(batch.values) >= 1.0
        # heavy tail with exponent 1: far excursions must occur
        assert np.max(batch.values) > 50.0


class TestDomination:
    @pytest.mark.parametrize("family", ["letac", "maxzero", "affine"])
    def test_minorant_never_exceeds(self, family):
        v = pathwise_domination_check(
            get_family(family), COUNTEREXAMPLE, n_paths=200, n_steps=300, seed=40
        )
        assert v <= 1e-12

    def test_extremal_minorant(self):
        meas = m((2.0, 1.5, None, 1 / 3), (0.5, -0.5, None, 2 / 3))
        v = pathwise_domination_check(
            get_family("extremal"), meas, n_paths=200, n_steps=300, seed=41
        )
        assert v <= 1e-12

    def test_affine_vs_itself_identical(self):
        v = pathwise_domination_check(
            get_family("affine"),
            HALFLINE_UP,
            n_paths=100,
            n_steps=100,
            seed=42,
            family_low=get_family("affine"),
        )
        assert v == 0.0


class TestBatchIO:
    def test_text_round_trip(self, tmp_path):
        batch = sample_stationary(
            get_family("affine"), HALFLINE_UP, SimConfig(n_samples=500, seed=50)
        )
        path = tmp_path / "samples.txt"
        save_batch(path, batch, fmt="text")
        assert np.array_equal(load_samples(path), batch.values)

    def test_binary_round_trip(self, tmp_path):
        batch = sample_stationary(
            get_family("affine"), HALFLINE_UP, SimConfig(n_samples=500, seed=51)
        )
        path = tmp_path / "samples.bin"
        save_batch(path, batch, fmt="binary")
        assert path.read_bytes()[:4] == b"TKSB"
        assert np.array_equal(load_samples(path), batch.values)

    def test_bad_format(self, tmp_path):
        batch = sample_stationary(
            get_family("affine"), HALFLINE_UP, SimConfig(n_samples=10, seed=52)
        )
        with pytest.raises(TailkitError):
            save_batch(tmp_path / "x", batch, fmt="csv")


class TestConfigValidation:
    def test_bad_counts(self):
        with pytest.raises(TailkitError):
            SimConfig(n_samples=0)
        with pytest.raises(TailkitError):
            SimConfig(chains=0)
        with pytest.raises(TailkitError):
            SimConfig(burn_in=0)

    def test_bad_floors(self):
        with pytest.raises(TailkitError):
            SimConfig(truncation_eps=0.0)
        with pytest.raises(TailkitError):
            SimConfig(pi_floor=1.5)
