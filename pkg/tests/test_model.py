import numpy as np
import pytest

from folkgen.gru import zeros_like_params
from folkgen.model import (Checkpoint, MelodyModel, init_state, melody_input,
                           new_model, next_duration_dist, next_pitch_dist,
                           rhythm_input, song_gradients, song_training_arrays,
                           teacher_forced_nll)
from folkgen.representation import EncodedSong


def zeroed(model):
    return MelodyModel(zeros_like_params(model.rhythm_net),
                       zeros_like_params(model.melody_net), model.vocab)


class TestConstruction:
    def test_network_widths(self, untrained_model):
        vocab = untrained_model.vocab
        p, d = vocab.num_pitches, vocab.num_durations
        assert untrained_model.rhythm_net.input_width == d + p
        assert untrained_model.rhythm_net.output_width == d
        assert untrained_model.melody_net.input_width == p + d
        assert untrained_model.melody_net.output_width == p

    def test_mismatched_widths_rejected(self, untrained_model, fixture_vocab):
        with pytest.raises(ValueError):
            MelodyModel(untrained_model.melody_net,
                        untrained_model.rhythm_net, fixture_vocab)

    def test_seeded_init_is_deterministic(self, fixture_vocab):
        a = new_model(fixture_vocab, 8, np.random.default_rng(7))
        b = new_model(fixture_vocab, 8, np.random.default_rng(7))
        assert np.array_equal(a.rhythm_net.layers[0].w_yh,
                              b.rhythm_net.layers[0].w_yh)
        assert np.array_equal(a.melody_net.output.w_yo,
                              b.melody_net.output.w_yo)


class TestInputEncoding:
    def test_rhythm_input_layout(self, fixture_vocab):
        d, p = fixture_vocab.num_durations, fixture_vocab.num_pitches
        x = rhythm_input(fixture_vocab, 2, 5)
        assert x.shape == (d + p,)
        assert x.sum() == 2.0 and x[2] == 1.0 and x[d + 5] == 1.0

    def test_melody_input_layout(self, fixture_vocab):
        d, p = fixture_vocab.num_durations, fixture_vocab.num_pitches
        x = melody_input(fixture_vocab, 3, 1)
        assert x.shape == (p + d,)
        assert x.sum() == 2.0 and x[3] == 1.0 and x[p + 1] == 1.0

    def test_out_of_range_index_rejected(self, fixture_vocab):
        with pytest.raises(IndexError):
            rhythm_input(fixture_vocab, fixture_vocab.num_durations, 0)


class TestStepping:
    def test_zero_weights_give_uniform(self, untrained_model):
        model = zeroed(untrained_model)
        state = init_state(model)
        d_dist = next_duration_dist(model, state, 0, 0)
        p_dist = next_pitch_dist(model, state, 0, 0)
        assert np.allclose(d_dist, 1.0 / model.vocab.num_durations)
        assert np.allclose(p_dist, 1.0 / model.vocab.num_pitches)

    def test_state_mutation_and_tracking(self, untrained_model):
        state = init_state(untrained_model)
        h_before = state.rhythm_state.h[0].copy()
        next_duration_dist(untrained_model, state, 1, 2)
        assert not np.array_equal(state.rhythm_state.h[0], h_before)
        assert state.last_duration == 1
        next_pitch_dist(untrained_model, state, 4, 3)
        assert state.last_pitch == 4

    def test_networks_are_independent(self, untrained_model):
        # stepping the rhythm network must not move the melody state
        state = init_state(untrained_model)
        melody_h = [h.copy() for h in state.melody_state.h]
        next_duration_dist(untrained_model, state, 0, 1)
        for before, after in zip(melody_h, state.melody_state.h):
            assert np.array_equal(before, after)

    def test_history_changes_predictions(self, untrained_model):
        s1 = init_state(untrained_model)
        s2 = init_state(untrained_model)
        next_duration_dist(untrained_model, s1, 0, 1)
        next_duration_dist(untrained_model, s2, 3, 2)
        d1 = next_duration_dist(untrained_model, s1, 1, 1)
        d2 = next_duration_dist(untrained_model, s2, 1, 1)
        assert not np.allclose(d1, d2)

    def test_clone_isolates_state(self, untrained_model):
        state = init_state(untrained_model)
        next_duration_dist(untrained_model, state, 0, 0)
        copy = state.clone()
        next_duration_dist(untrained_model, state, 1, 1)
        assert not np.array_equal(copy.rhythm_state.h[0],
                                  state.rhythm_state.h[0])


class TestTrainingArrays:
    def test_shapes_and_targets(self, untrained_model, fixture_encoded):
        song = fixture_encoded[0]
        r_in, r_tg, m_in, m_tg = song_training_arrays(untrained_model, song)
        n = len(song)
        assert len(r_in) == len(r_tg) == len(m_in) == len(m_tg) == n - 1
        assert r_tg == list(song.duration_indices[1:])
        assert m_tg == list(song.pitch_indices[1:])

    def test_melody_input_carries_upcoming_duration(self, untrained_model,
                                                    fixture_encoded):
        song = fixture_encoded[0]
        vocab = untrained_model.vocab
        _, _, m_in, _ = song_training_arrays(untrained_model, song)
        for n, x in enumerate(m_in):
            expected = melody_input(vocab, song.pitch_indices[n],
                                    song.duration_indices[n + 1])
            assert np.array_equal(x, expected)

    def test_too_short_song_rejected(self, untrained_model, fixture_vocab):
        song = EncodedSong((0,), (0,))
        with pytest.raises(ValueError):
            song_training_arrays(untrained_model, song)

    def test_nll_matches_stepwise_evaluation(self, untrained_model,
                                             fixture_encoded):
        song = fixture_encoded[0]
        r_nll, m_nll = teacher_forced_nll(untrained_model, song)
        state = init_state(untrained_model)
        p, d = song.pitch_indices, song.duration_indices
        r_total = m_total = 0.0
        for n in range(len(song) - 1):
            d_dist = next_duration_dist(untrained_model, state, d[n], p[n])
            p_dist = next_pitch_dist(untrained_model, state, p[n], d[n + 1])
            r_total -= np.log(d_dist[d[n + 1]])
            m_total -= np.log(p_dist[p[n + 1]])
        steps = len(song) - 1
        assert r_nll == pytest.approx(r_total / steps, abs=1e-12)
        assert m_nll == pytest.approx(m_total / steps, abs=1e-12)

    def test_zero_model_nll_is_log_vocab(self, untrained_model,
                                         fixture_encoded):
        model = zeroed(untrained_model)
        r_nll, m_nll = teacher_forced_nll(model, fixture_encoded[0])
        assert r_nll == pytest.approx(np.log(model.vocab.num_durations))
        assert m_nll == pytest.approx(np.log(model.vocab.num_pitches))

    def test_gradients_match_nll_values(self, untrained_model,
                                        fixture_encoded):
        song = fixture_encoded[0]
        r_grad, m_grad, r_nll, m_nll = song_gradients(untrained_model, song)
        assert (r_nll, m_nll) == teacher_forced_nll(untrained_model, song)
        assert np.max(np.abs(r_grad.output.b_o)) > 0
        assert np.max(np.abs(m_grad.output.b_o)) > 0


class TestCheckpoint:
    def test_round_trip(self, untrained_model, tmp_path):
        ck = Checkpoint(untrained_model, {"note": "round-trip"})
        path = str(tmp_path / "model.json")
        ck.save(path)
        loaded = Checkpoint.load(path)
        assert loaded.training_meta == {"note": "round-trip"}
        assert loaded.model.vocab == untrained_model.vocab
        for (na, a), (nb, b) in zip(
                _all_params(untrained_model), _all_params(loaded.model)):
            assert na == nb
            assert np.array_equal(a, b), na

    def test_loaded_model_predicts_identically(self, untrained_model,
                                               fixture_encoded, tmp_path):
        path = str(tmp_path / "model.json")
        Checkpoint(untrained_model).save(path)
        loaded = Checkpoint.load(path).model
        assert teacher_forced_nll(untrained_model, fixture_encoded[1]) == \
            teacher_forced_nll(loaded, fixture_encoded[1])

    def test_version_mismatch_rejected(self, untrained_model):
        obj = Checkpoint(untrained_model).to_json()
        obj["version"] = 99
        with pytest.raises(ValueError):
            Checkpoint.from_json(obj)


def _all_params(model):
    from folkgen.gru import iter_params
    for prefix, net in (("rhythm", model.rhythm_net),
                        ("melody", model.melody_net)):
        for name, arr in iter_params(net):
            yield f"{prefix}.{name}", arr
