import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseval.audio import AudioBuffer, measure_power
from pseval.errors import AlignmentError, DegenerateSignalError
from pseval.mixing import (
    FINETUNE_SNR_POLICY,
    MixtureSpec,
    PSE_TEST_SNR_POLICY,
    SnrPolicy,
    assign_noises,
    draw_snr,
    solve_gain,
    synthesize_mixture,
)

from helpers import noiselike, speechlike


def _spec(snr_db, seed=1234):
    return MixtureSpec(
        mixture_id="m", speaker_id="spk", clean_id="c", noise_id="n",
        snr_db=snr_db, seed=seed,
    )


def test_solve_gain_equal_powers_zero_snr():
    clean = AudioBuffer(np.ones(16000), 16000)
    noise = AudioBuffer(np.where(np.arange(16000) % 2 == 0, 1.0, -1.0), 16000)
    assert solve_gain(clean, noise, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_solve_gain_ten_db_closed_form():
    clean = AudioBuffer(np.ones(16000), 16000)
    noise = AudioBuffer(np.where(np.arange(16000) % 2 == 0, 1.0, -1.0), 16000)
    assert solve_gain(clean, noise, 10.0) == pytest.approx(10 ** -0.5, abs=1e-12)


def test_solve_gain_silent_inputs():
    clean = AudioBuffer(np.zeros(1000), 16000)
    noise = AudioBuffer(np.ones(1000), 16000)
    with pytest.raises(DegenerateSignalError):
        solve_gain(clean, noise, 0.0)
    with pytest.raises(DegenerateSignalError):
        solve_gain(noise, clean, 0.0)


def test_solve_gain_rate_mismatch():
    a = AudioBuffer(np.ones(100), 16000)
    b = AudioBuffer(np.ones(100), 8000)
    with pytest.raises(AlignmentError):
        solve_gain(a, b, 0.0)


def test_snr_roundtrip_random():
    rng = np.random.default_rng(11)
    for _ in range(30):
        clean = AudioBuffer(speechlike(rng, rng.uniform(0.5, 1.5), 16000), 16000)
        noise = AudioBuffer(noiselike(rng, rng.uniform(0.4, 2.0), 16000), 16000)
        target = float(rng.uniform(-20, 20))
        result = synthesize_mixture(_spec(target, int(rng.integers(2**62))), clean, noise)
        noise_part = result.mixture.samples / result.joint_scale - clean.samples
        measured = 10 * np.log10(
            measure_power(clean).active_power / np.mean(noise_part**2)
        )
        assert measured == pytest.approx(target, abs=1e-9)


def test_mixture_length_matches_clean_with_short_noise():
    rng = np.random.default_rng(12)
    clean = AudioBuffer(speechlike(rng, 2.0, 16000), 16000)
    noise = AudioBuffer(noiselike(rng, 0.25, 16000), 16000)
    result = synthesize_mixture(_spec(0.0), clean, noise)
    assert len(result.mixture) == len(clean)
    assert len(result.reference) == len(clean)


def test_high_snr_mixture_is_nearly_clean():
    rng = np.random.default_rng(13)
    clean = AudioBuffer(speechlike(rng, 1.5, 16000), 16000)
    noise = AudioBuffer(noiselike(rng, 1.0, 16000), 16000)
    result = synthesize_mixture(_spec(60.0), clean, noise)
    residual = result.mixture.samples / result.joint_scale - clean.samples
    residual_db = 10 * np.log10(np.mean(residual**2) / np.mean(clean.samples**2))
    assert residual_db < -50.0


def test_synthesis_is_deterministic():
    rng = np.random.default_rng(14)
    clean = AudioBuffer(speechlike(rng, 1.0, 16000), 16000)
    noise = AudioBuffer(noiselike(rng, 0.7, 16000), 16000)
    a = synthesize_mixture(_spec(2.5, seed=99), clean, noise)
    b = synthesize_mixture(_spec(2.5, seed=99), clean, noise)
    assert np.array_equal(a.mixture.samples, b.mixture.samples)
    assert a.realized_gain == b.realized_gain
    c = synthesize_mixture(_spec(2.5, seed=100), clean, noise)
    assert not np.array_equal(a.mixture.samples, c.mixture.samples)


def test_peak_normalization_is_joint():
    n = 16000
    clean = AudioBuffer(0.9 * np.sin(np.arange(n) / 8.0), 16000)
    noise = AudioBuffer(np.sin(np.arange(n) / 3.0), 16000)
    result = synthesize_mixture(_spec(-5.0), clean, noise)
    assert np.max(np.abs(result.mixture.samples)) <= 0.999 + 1e-12
    assert result.joint_scale < 1.0
    assert np.array_equal(result.reference.samples, clean.samples * result.joint_scale)


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(min_value=0.01, max_value=1.5), seed=st.integers(0, 2**31))
def test_synthesis_linearity_under_input_scaling(scale, seed):
    rng = np.random.default_rng(seed)
    clean = speechlike(rng, 0.6, 16000)
    noise = noiselike(rng, 0.5, 16000)
    spec = _spec(3.0, seed=seed)
    base = synthesize_mixture(spec, AudioBuffer(clean, 16000), AudioBuffer(noise, 16000))
    scaled = synthesize_mixture(
        spec, AudioBuffer(scale * clean, 16000), AudioBuffer(scale * noise, 16000)
    )
    lhs = scaled.mixture.samples / scaled.joint_scale
    rhs = scale * base.mixture.samples / base.joint_scale
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))


def test_snr_policy_validation():
    with pytest.raises(ValueError):
        SnrPolicy(kind="discrete_set", values=())
    with pytest.raises(ValueError):
        SnrPolicy(kind="uniform_range", low=5.0, high=-5.0)
    with pytest.raises(ValueError):
        SnrPolicy(kind="gaussian")


def test_draw_snr_discrete_membership_and_determinism():
    for i in range(64):
        value = draw_snr(PSE_TEST_SNR_POLICY, 7, "spk1", f"utt{i}", "test")
        assert value in (-2.5, 0.0, 2.5)
    a = draw_snr(PSE_TEST_SNR_POLICY, 7, "spk1", "utt0", "test")
    b = draw_snr(PSE_TEST_SNR_POLICY, 7, "spk1", "utt0", "test")
    assert a == b
    assert draw_snr(PSE_TEST_SNR_POLICY, 8, "spk1", "utt0", "test") in (-2.5, 0.0, 2.5)


def test_draw_snr_uniform_statistics():
    draws = np.array([
        draw_snr(FINETUNE_SNR_POLICY, 21, "spk", f"u{i}", "train") for i in range(10_000)
    ])
    assert np.all((draws >= -5.0) & (draws <= 5.0))
    assert abs(float(np.mean(draws))) < 0.1


def test_assign_noises_contract():
    pool = [f"noise{i:03d}" for i in range(88)]
    speakers = [f"spk{i:02d}" for i in range(20)]
    table = assign_noises(speakers, pool, per_speaker=5, master_seed=3)
    assert set(table) == set(speakers)
    for ids in table.values():
        assert len(ids) == 5 and len(set(ids)) == 5
        assert set(ids) <= set(pool)
    again = assign_noises(list(reversed(speakers)), pool, per_speaker=5, master_seed=3)
    assert table == again
    assert assign_noises(speakers, pool, 5, master_seed=4) != table


def test_assign_noises_whole_pool():
    pool = ["a", "b", "c"]
    table = assign_noises(["s"], pool, per_speaker=3, master_seed=0)
    assert sorted(table["s"]) == pool
    with pytest.raises(ValueError):
        assign_noises(["s"], pool, per_speaker=4, master_seed=0)
