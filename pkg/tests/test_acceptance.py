"""End-to-end acceptance gate.

One test per shipping criterion; the verbose pytest line for each test is
the pass/fail record.  The slow criteria share session-scoped trained
checkpoints (a 20-tune toy run and a single-song memorization run) and
every timed criterion asserts its own wall-clock budget.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from folkgen.generation import GenerationConfig, batch_generate, continue_song
from folkgen.gru import (forward_sequence, gradient_check, gru_step,
                         init_network, initial_state)
from folkgen.model import init_state, next_duration_dist, next_pitch_dist
from folkgen.pipeline import encoded_to_abc, load_corpus, normalize_corpus, \
    parse_single_tune
from folkgen.representation import (SONG_ENDING, build_vocabulary,
                                    encode_song, transition_stats)
from folkgen.training import TrainConfig, split_corpus, train

FIXTURE = Path(__file__).parent / "fixtures" / "fixture_corpus.abc"


# --------------------------------------------------------------------------
# Shared trained models

@pytest.fixture(scope="session")
def toy_run(fixture_songs):
    """20-tune corpus, hidden size 32, 30 epochs; shared by the learning,
    generation and corpus-echo criteria."""
    config = TrainConfig(epochs=30, hidden_size=32, rng_seed=0)
    start = time.monotonic()
    checkpoint, report = train(fixture_songs, config)
    return checkpoint, report, time.monotonic() - start


@pytest.fixture(scope="session")
def memorization_run(fixture_songs):
    """Single-song corpus, hidden size 32, 200 epochs.  Five updates per
    epoch: the corpus holds one song, so more resampling per epoch only
    repeats the same gradient and would blow the time budget."""
    config = TrainConfig(epochs=200, hidden_size=32, rng_seed=0,
                         songs_per_epoch=5, eval_sample=5)
    start = time.monotonic()
    checkpoint, report = train(fixture_songs[:1], config)
    return checkpoint, report, time.monotonic() - start


@pytest.fixture(scope="session")
def sampled_batch(toy_run):
    checkpoint, _, _ = toy_run
    config = GenerationConfig(rng_seed=0, max_notes=1000, num_samples=100)
    return batch_generate(checkpoint, config)


# --------------------------------------------------------------------------
# Criterion 1: analytic gradients match finite differences

def test_gradient_correctness():
    # both coupled-network shapes at hidden size 8: with 5 duration and
    # 7 pitch tokens the rhythm net maps 12 -> 5 and the melody net 12 -> 7
    start = time.monotonic()
    rng = np.random.default_rng(0)
    for out_width in (5, 7):
        net = init_network(12, out_width, (8, 8, 8), rng)
        inputs = [rng.uniform(-1, 1, 12) for _ in range(12)]
        targets = [int(rng.integers(out_width)) for _ in range(12)]
        report = gradient_check(net, inputs, targets, num_coords=200,
                                epsilon=1e-5, tolerance=1e-6, rng=rng)
        assert report.passed, (out_width, report.worst)
        assert report.max_relative_error < 1e-6
    assert time.monotonic() - start < 30.0


# --------------------------------------------------------------------------
# Criterion 2: every emitted distribution is a distribution

def test_softmax_and_transition_normalization(fixture_encoded,
                                              fixture_vocab):
    rng = np.random.default_rng(1)
    for trial in range(20):
        net = init_network(6, 9, (5, 5, 5), rng)
        state = initial_state(net)
        for _ in range(10):
            state, probs, _ = gru_step(net, state, rng.uniform(-2, 2, 6))
            assert abs(probs.sum() - 1.0) <= 1e-12
            assert np.all(probs > 0)
    for which in ("pitch", "duration"):
        matrix = transition_stats(fixture_encoded, fixture_vocab, which)
        for row, obs in zip(matrix.probs, matrix.observed):
            if obs:
                assert abs(row.sum() - 1.0) <= 1e-12


# --------------------------------------------------------------------------
# Criterion 3: recurrence matches an independent transcription

def test_step_matches_straight_line_transcription():
    def oracle(params, h_prev, x):
        feed = x
        new_h = []
        for layer, hp in zip(params.layers, h_prev):
            z = 1.0 / (1.0 + np.exp(-(layer.w_yz @ feed + layer.w_hz @ hp
                                      + layer.b_z)))
            r = 1.0 / (1.0 + np.exp(-(layer.w_yr @ feed + layer.w_hr @ hp
                                      + layer.b_r)))
            h_tilde = np.tanh(layer.w_yh @ feed + r * (layer.w_hh @ hp))
            h = z * hp + (1.0 - z) * h_tilde
            new_h.append(h)
            feed = np.concatenate([feed, h])
        logits = params.output.w_yo @ feed + params.output.b_o
        e = np.exp(logits - logits.max())
        return new_h, e / e.sum()

    rng = np.random.default_rng(2)
    for _ in range(1000):
        x_width = int(rng.integers(2, 8))
        o_width = int(rng.integers(2, 8))
        sizes = tuple(int(rng.integers(2, 7)) for _ in range(3))
        net = init_network(x_width, o_width, sizes, rng)
        for layer in net.layers:
            layer.b_z[:] = rng.uniform(-1, 1, layer.b_z.shape)
            layer.b_r[:] = rng.uniform(-1, 1, layer.b_r.shape)
            layer.h0[:] = rng.uniform(-1, 1, layer.h0.shape)
        state = initial_state(net)
        x = rng.uniform(-2, 2, x_width)
        new_state, probs, _ = gru_step(net, state, x)
        ref_h, ref_probs = oracle(net, state.h, x)
        for mine, ref in zip(new_state.h, ref_h):
            assert np.max(np.abs(mine - ref)) <= 1e-12
        assert np.max(np.abs(probs - ref_probs)) <= 1e-12


# --------------------------------------------------------------------------
# Criterion 4: a single song can be memorized and replayed

def test_memorization(memorization_run, fixture_songs):
    checkpoint, report, secs = memorization_run
    assert secs < 300.0
    final = report.epochs[-1]
    assert final.test_rhythm_nll + final.test_melody_nll < 0.05

    vocab = checkpoint.model.vocab
    encoded = encode_song(fixture_songs[0], vocab)
    half = len(encoded) // 2
    seed = type(encoded)(encoded.pitch_indices[:half],
                         encoded.duration_indices[:half])
    out = continue_song(checkpoint.model, seed,
                        GenerationConfig(temperature=1e-6,
                                         max_notes=len(encoded) + 10))
    assert out.terminated == "ended_naturally"
    assert out.encoded == encoded


# --------------------------------------------------------------------------
# Criterion 5: the model beats uniform and first-order Markov baselines

def markov_nll(matrix, seqs, smoothing_counts):
    """Mean per-song NLL of an add-one-smoothed first-order chain."""
    size = matrix.probs.shape[0]
    row_totals = smoothing_counts.sum(axis=1)
    smoothed = (smoothing_counts + 1.0) / (row_totals[:, None] + size)
    # sanity: the unsmoothed chain is exactly transition_stats' estimate
    observed = row_totals > 0
    ml = np.zeros_like(smoothing_counts)
    ml[observed] = smoothing_counts[observed] / row_totals[observed, None]
    assert np.allclose(ml, matrix.probs, atol=1e-12)
    nlls = []
    for seq in seqs:
        steps = [-np.log(smoothed[a, b]) for a, b in zip(seq, seq[1:])]
        nlls.append(np.mean(steps))
    return float(np.mean(nlls))


def transition_counts(seqs, size):
    counts = np.zeros((size, size))
    for seq in seqs:
        for a, b in zip(seq, seq[1:]):
            counts[a, b] += 1.0
    return counts


def test_toy_corpus_learning(toy_run, fixture_songs):
    checkpoint, report, secs = toy_run
    assert secs < 900.0
    vocab = checkpoint.model.vocab
    best = min(report.epochs,
               key=lambda r: r.test_rhythm_nll + r.test_melody_nll)

    # uniform baselines
    assert best.test_rhythm_nll < np.log(vocab.num_durations)
    assert best.test_melody_nll < np.log(vocab.num_pitches)

    # Markov baselines fit on the identical train split
    train_norm, test_norm = split_corpus(fixture_songs, 0.8, 0)
    train_enc = [encode_song(s, vocab) for s in train_norm]
    test_enc = [encode_song(s, vocab) for s in test_norm]
    for which, attr, model_nll in (
            ("duration", "duration_indices", best.test_rhythm_nll),
            ("pitch", "pitch_indices", best.test_melody_nll)):
        matrix = transition_stats(train_enc, vocab, which)
        counts = transition_counts([getattr(s, attr) for s in train_enc],
                                   matrix.probs.shape[0])
        baseline = markov_nll(matrix, [getattr(s, attr) for s in test_enc],
                              counts)
        assert model_nll < baseline, (which, model_nll, baseline)


# --------------------------------------------------------------------------
# Criterion 6: published corpus yield and size statistics

def _norbeck_path():
    env = os.environ.get("FOLKGEN_NORBECK")
    candidates = [env] if env else []
    candidates += ["/root/pkg/data/norbeck", "/root/data/norbeck"]
    for cand in candidates:
        if cand and Path(cand).exists():
            return Path(cand)
    return None


def test_public_corpus_yield():
    corpus = _norbeck_path()
    if corpus is None:
        pytest.skip("public corpus not present "
                    "(set FOLKGEN_NORBECK to its directory)")
    scores, skips = load_corpus(corpus)
    total = len(scores) + len(skips)
    assert total > 0
    assert len(scores) / total >= 0.90
    songs, norm_skips = normalize_corpus(scores)
    assert len(songs) >= 2158 * 0.9
    lengths = np.array([len(s.pitches) for s in songs], dtype=np.float64)
    assert abs(lengths.mean() - 136) <= 13.6
    assert abs(lengths.std() - 84) <= 8.4


# --------------------------------------------------------------------------
# Criterion 7: lossless round trips

def test_round_trip_exactness(fixture_scores, fixture_songs, fixture_vocab):
    from folkgen.notation import emit_abc
    from folkgen.representation import decode_song
    for score in fixture_scores:
        replayed = parse_single_tune(emit_abc(score))
        assert [(e.pitch, e.duration) for e in replayed.events] == \
            [(e.pitch, e.duration) for e in score.events]
    for song in fixture_songs:
        encoded = encode_song(song, fixture_vocab)
        decoded = decode_song(encoded, fixture_vocab, base=song.base)
        assert [e.pitch for e in decoded.events] == song.pitches
        assert [e.duration / song.base for e in decoded.events] == \
            song.durations


# --------------------------------------------------------------------------
# Criterion 8: sampling terminates, reproduces, and degrades to greedy

def test_generation_termination_and_determinism(toy_run, sampled_batch):
    checkpoint, _, _ = toy_run
    songs, stats = sampled_batch
    assert stats.n == 100
    assert stats.terminated == 1.0
    assert all(len(s.encoded) <= 1000 for s in songs)

    config = GenerationConfig(rng_seed=0, max_notes=1000, num_samples=100)
    replay, _ = batch_generate(checkpoint, config)
    vocab = checkpoint.model.vocab
    for a, b in zip(songs, replay):
        assert a.encoded == b.encoded
        assert encoded_to_abc(a.encoded, vocab) == \
            encoded_to_abc(b.encoded, vocab)

    # temperature -> 0 equals an explicit argmax rollout
    model = checkpoint.model
    seed = songs[0].encoded
    seed = type(seed)(seed.pitch_indices[:2], seed.duration_indices[:2])
    cold = continue_song(model, seed,
                         GenerationConfig(temperature=1e-6, max_notes=1000))
    state = init_state(model)
    pitches = list(seed.pitch_indices)
    durations = list(seed.duration_indices)
    dur_dist = None
    for n in range(len(seed)):
        dur_dist = next_duration_dist(model, state, durations[n], pitches[n])
    for n in range(len(seed) - 1):
        next_pitch_dist(model, state, pitches[n], durations[n + 1])
    while len(pitches) < 1000:
        d_next = int(np.argmax(dur_dist))
        pitch_dist = next_pitch_dist(model, state, pitches[-1], d_next)
        p_next = int(np.argmax(pitch_dist))
        pitches.append(p_next)
        durations.append(d_next)
        if p_next == model.vocab.ending_index:
            break
        dur_dist = next_duration_dist(model, state, d_next, p_next)
    assert cold.encoded.pitch_indices == tuple(pitches)
    assert cold.encoded.duration_indices == tuple(durations)


# --------------------------------------------------------------------------
# Criterion 9: the unit duration dominates unigram statistics

def test_unit_duration_is_unigram_mode(fixture_encoded, fixture_vocab,
                                       toy_run, sampled_batch):
    unit = fixture_vocab.unit_duration_index

    def mode(songs):
        counts = np.zeros(fixture_vocab.num_durations)
        for song in songs:
            for d in song.duration_indices:
                counts[d] += 1
        return int(np.argmax(counts))

    assert mode(fixture_encoded) == unit

    checkpoint, _, _ = toy_run
    songs, _ = sampled_batch
    sampled_unit = checkpoint.model.vocab.unit_duration_index
    assert mode([s.encoded for s in songs]) == sampled_unit
