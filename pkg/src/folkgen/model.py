"""Coupled rhythm + melody model.

Two independent GRU networks share a vocabulary: the rhythm network maps
(current duration, current pitch) to a distribution over next durations;
the melody network maps (current pitch, upcoming duration) to a
distribution over next pitches.  The upcoming duration is the one
sampled from the rhythm network, which factorizes the joint next-note
distribution as P(d, p) = P(d | past) * P(p | d, past).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gru import (GruLayerParams, GruNetworkParams, NetworkState,
                  OutputLayerParams, PARAM_NAMES, backward_sequence,
                  forward_sequence, gru_step, initial_state, init_network,
                  nll_from_outputs)
from .representation import EncodedSong, Vocabulary


@dataclass
class MelodyModel:
    rhythm_net: GruNetworkParams   # input D + P, output D
    melody_net: GruNetworkParams   # input P + D, output P
    vocab: Vocabulary

    def __post_init__(self):
        p = self.vocab.num_pitches
        d = self.vocab.num_durations
        if self.rhythm_net.input_width != d + p:
            raise ValueError("rhythm network input width does not match vocab")
        if self.melody_net.input_width != p + d:
            raise ValueError("melody network input width does not match vocab")
        if self.rhythm_net.output_width != d:
            raise ValueError("rhythm network output width does not match vocab")
        if self.melody_net.output_width != p:
            raise ValueError("melody network output width does not match vocab")


def new_model(vocab: Vocabulary, hidden_size: int = 128,
              rng: Optional[np.random.Generator] = None) -> MelodyModel:
    rng = rng if rng is not None else np.random.default_rng()
    p, d = vocab.num_pitches, vocab.num_durations
    sizes = (hidden_size,) * 3
    rhythm = init_network(d + p, d, sizes, rng)
    melody = init_network(p + d, p, sizes, rng)
    return MelodyModel(rhythm, melody, vocab)


@dataclass
class ModelState:
    rhythm_state: NetworkState
    melody_state: NetworkState
    last_pitch: Optional[int] = None
    last_duration: Optional[int] = None

    def clone(self) -> "ModelState":
        return ModelState(self.rhythm_state.clone(), self.melody_state.clone(),
                          self.last_pitch, self.last_duration)


def init_state(model: MelodyModel) -> ModelState:
    return ModelState(initial_state(model.rhythm_net),
                      initial_state(model.melody_net))


def _onehot(index: int, size: int) -> np.ndarray:
    if not 0 <= index < size:
        raise IndexError(f"index {index} out of range [0, {size})")
    v = np.zeros(size)
    v[index] = 1.0
    return v


def rhythm_input(vocab: Vocabulary, d_n: int, p_n: int) -> np.ndarray:
    return np.concatenate([_onehot(d_n, vocab.num_durations),
                           _onehot(p_n, vocab.num_pitches)])


def melody_input(vocab: Vocabulary, p_n: int, d_next: int) -> np.ndarray:
    return np.concatenate([_onehot(p_n, vocab.num_pitches),
                           _onehot(d_next, vocab.num_durations)])


def next_duration_dist(model: MelodyModel, state: ModelState,
                       d_n: int, p_n: int) -> np.ndarray:
    """Feed the current note; returns P(d[n+1] | past).  Mutates state."""
    x = rhythm_input(model.vocab, d_n, p_n)
    state.rhythm_state, probs, _ = gru_step(model.rhythm_net,
                                            state.rhythm_state, x)
    state.last_duration = d_n
    return probs


def next_pitch_dist(model: MelodyModel, state: ModelState,
                    p_n: int, d_next: int) -> np.ndarray:
    """Feed the current pitch and the already-sampled upcoming duration;
    returns P(p[n+1] | past, d[n+1]).  Mutates state."""
    x = melody_input(model.vocab, p_n, d_next)
    state.melody_state, probs, _ = gru_step(model.melody_net,
                                            state.melody_state, x)
    state.last_pitch = p_n
    return probs


def song_training_arrays(model: MelodyModel, song: EncodedSong
                         ) -> tuple[list[np.ndarray], list[int],
                                    list[np.ndarray], list[int]]:
    """Teacher-forced inputs/targets for both networks over one song.

    The first note is input only; each network predicts tokens 1..N-1.
    """
    if len(song) < 2:
        raise ValueError("song must contain at least two tokens")
    vocab = model.vocab
    p, d = song.pitch_indices, song.duration_indices
    rhythm_in = [rhythm_input(vocab, d[n], p[n]) for n in range(len(song) - 1)]
    rhythm_tg = [d[n + 1] for n in range(len(song) - 1)]
    melody_in = [melody_input(vocab, p[n], d[n + 1])
                 for n in range(len(song) - 1)]
    melody_tg = [p[n + 1] for n in range(len(song) - 1)]
    return rhythm_in, rhythm_tg, melody_in, melody_tg


def teacher_forced_nll(model: MelodyModel,
                       song: EncodedSong) -> tuple[float, float]:
    """Per-network mean NLL over the song's N-1 prediction steps."""
    rhythm_in, rhythm_tg, melody_in, melody_tg = \
        song_training_arrays(model, song)
    r_out, _ = forward_sequence(model.rhythm_net, rhythm_in)
    m_out, _ = forward_sequence(model.melody_net, melody_in)
    return nll_from_outputs(r_out, rhythm_tg), nll_from_outputs(m_out, melody_tg)


def song_gradients(model: MelodyModel, song: EncodedSong
                   ) -> tuple[GruNetworkParams, GruNetworkParams,
                              float, float]:
    """NLL gradients of both networks for one song, plus the NLL values."""
    rhythm_in, rhythm_tg, melody_in, melody_tg = \
        song_training_arrays(model, song)
    r_out, r_tape = forward_sequence(model.rhythm_net, rhythm_in)
    m_out, m_tape = forward_sequence(model.melody_net, melody_in)
    r_grad = backward_sequence(model.rhythm_net, r_tape, rhythm_tg)
    m_grad = backward_sequence(model.melody_net, m_tape, melody_tg)
    return (r_grad, m_grad,
            nll_from_outputs(r_out, rhythm_tg),
            nll_from_outputs(m_out, melody_tg))


# --------------------------------------------------------------------------
# Checkpoint serialization

CHECKPOINT_VERSION = 1


def _matrix_json(a: np.ndarray) -> dict:
    if a.ndim == 1:
        return {"rows": a.shape[0], "cols": 1, "data": a.tolist()}
    return {"rows": a.shape[0], "cols": a.shape[1],
            "data": a.reshape(-1).tolist()}


def _matrix_from_json(obj: dict, vector: bool) -> np.ndarray:
    data = np.asarray(obj["data"], dtype=np.float64)
    if vector:
        return data.reshape(obj["rows"])
    return data.reshape(obj["rows"], obj["cols"])


_VECTOR_NAMES = {"b_z", "b_r", "h0", "b_o"}


def network_to_json(params: GruNetworkParams, seed: int = 0) -> dict:
    matrices = {}
    for i, layer in enumerate(params.layers):
        for name in PARAM_NAMES:
            matrices[f"layer{i}.{name}"] = _matrix_json(getattr(layer, name))
    matrices["output.w_yo"] = _matrix_json(params.output.w_yo)
    matrices["output.b_o"] = _matrix_json(params.output.b_o)
    return {
        "dims": {"x": params.input_width, "h": params.hidden_sizes,
                 "o": params.output_width},
        "matrices": matrices,
        "seed": seed,
        "version": CHECKPOINT_VERSION,
    }


def network_from_json(obj: dict) -> GruNetworkParams:
    dims = obj["dims"]
    matrices = obj["matrices"]
    layers = []
    for i in range(len(dims["h"])):
        kwargs = {}
        for name in PARAM_NAMES:
            raw = matrices[f"layer{i}.{name}"]
            kwargs[name] = _matrix_from_json(raw, name in _VECTOR_NAMES)
        layers.append(GruLayerParams(**kwargs))
    output = OutputLayerParams(
        _matrix_from_json(matrices["output.w_yo"], False),
        _matrix_from_json(matrices["output.b_o"], True))
    return GruNetworkParams(layers, output, dims["x"])


@dataclass
class Checkpoint:
    model: MelodyModel
    training_meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "vocab": self.model.vocab.to_json(),
            "rhythm": network_to_json(self.model.rhythm_net),
            "melody": network_to_json(self.model.melody_net),
            "training_meta": self.training_meta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Checkpoint":
        if obj.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version: "
                             f"{obj.get('version')!r}")
        vocab = Vocabulary.from_json(obj["vocab"])
        model = MelodyModel(network_from_json(obj["rhythm"]),
                            network_from_json(obj["melody"]), vocab)
        return cls(model, obj.get("training_meta", {}))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f)

    @classmethod
    def load(cls, path: str) -> "Checkpoint":
        with open(path, encoding="utf-8") as f:
            return cls.from_json(json.load(f))
