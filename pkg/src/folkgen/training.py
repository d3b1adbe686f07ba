"""Training loop: per-song stochastic gradient descent on the mean NLL
with Adam, an 80/20 corpus split, fixed-size epochs and best-on-test
checkpoint retention."""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gru import GruNetworkParams, NumericError, clone_params, iter_params, \
    zeros_like_params
from .model import Checkpoint, MelodyModel, new_model, song_gradients, \
    teacher_forced_nll
from .representation import (EncodedSong, NormalizedSong, OutOfVocabularyError,
                             Vocabulary, build_vocabulary, encode_song)

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: GruNetworkParams
    v: GruNetworkParams
    t: int = 0
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: GruNetworkParams, alpha: float = 1e-3
                   ) -> "AdamState":
        return cls(zeros_like_params(params), zeros_like_params(params),
                   alpha=alpha)


def adam_update(params: GruNetworkParams, grads: GruNetworkParams,
                adam: AdamState,
                clip_norm: Optional[float] = None) -> None:
    """One bias-corrected Adam step in place; skips non-finite gradients."""
    grad_arrays = dict(iter_params(grads))
    for _, g in grad_arrays.items():
        if not np.all(np.isfinite(g)):
            log.warning("non-finite gradient; skipping update")
            return
    if clip_norm is not None:
        total = np.sqrt(sum(float((g * g).sum())
                            for g in grad_arrays.values()))
        if total > clip_norm:
            scale = clip_norm / total
            for g in grad_arrays.values():
                g *= scale
    adam.t += 1
    bc1 = 1.0 - adam.beta1 ** adam.t
    bc2 = 1.0 - adam.beta2 ** adam.t
    m_arrays = dict(iter_params(adam.m))
    v_arrays = dict(iter_params(adam.v))
    for name, theta in iter_params(params):
        g = grad_arrays[name]
        m = m_arrays[name]
        v = v_arrays[name]
        m *= adam.beta1
        m += (1.0 - adam.beta1) * g
        v *= adam.beta2
        v += (1.0 - adam.beta2) * g * g
        theta -= adam.alpha * (m / bc1) / (np.sqrt(v / bc2) + adam.eps)


@dataclass
class TrainConfig:
    epochs: int = 100
    songs_per_epoch: int = 200
    eval_sample: int = 200
    split: float = 0.8
    rng_seed: int = 0
    hidden_size: int = 128
    clip_norm: Optional[float] = None
    alpha: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.split < 1.0:
            raise ValueError("split must be in (0, 1)")
        if self.songs_per_epoch <= 0 or self.eval_sample <= 0:
            raise ValueError("counts must be positive")


@dataclass
class EpochRecord:
    epoch: int
    train_rhythm_nll: float
    train_melody_nll: float
    test_rhythm_nll: float
    test_melody_nll: float
    secs: float

    def to_json(self) -> dict:
        return {"epoch": self.epoch,
                "train_rhythm_nll": self.train_rhythm_nll,
                "train_melody_nll": self.train_melody_nll,
                "test_rhythm_nll": self.test_rhythm_nll,
                "test_melody_nll": self.test_melody_nll,
                "secs": self.secs}


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_test_nll: float = float("inf")
    skipped_test_songs: int = 0

    def to_json_lines(self) -> str:
        import json
        return "\n".join(json.dumps(e.to_json()) for e in self.epochs)


def split_corpus(songs: Sequence, split: float = 0.8,
                 seed: int = 0) -> tuple[list, list]:
    """Deterministic seeded shuffle then exact partition."""
    if len(songs) < 2:
        raise ValueError("need at least two songs to split")
    order = np.random.default_rng(seed).permutation(len(songs))
    cut = int(len(songs) * split)
    cut = max(1, min(cut, len(songs) - 1))
    train = [songs[i] for i in order[:cut]]
    test = [songs[i] for i in order[cut:]]
    return train, test


def _sample_songs(songs: Sequence[EncodedSong], count: int,
                  rng: np.random.Generator) -> list[EncodedSong]:
    if len(songs) >= count:
        idx = rng.choice(len(songs), size=count, replace=False)
    else:
        idx = rng.choice(len(songs), size=count, replace=True)
    return [songs[i] for i in idx]


def train_epoch(model: MelodyModel, train_songs: Sequence[EncodedSong],
                rhythm_adam: AdamState, melody_adam: AdamState,
                config: TrainConfig, rng: np.random.Generator) -> int:
    """One epoch: one Adam update per network per sampled song.
    Returns the number of songs processed."""
    processed = 0
    for song in _sample_songs(train_songs, config.songs_per_epoch, rng):
        try:
            r_grad, m_grad, _, _ = song_gradients(model, song)
        except NumericError as exc:
            log.warning("skipping song after numeric failure: %s", exc)
            continue
        adam_update(model.rhythm_net, r_grad, rhythm_adam, config.clip_norm)
        adam_update(model.melody_net, m_grad, melody_adam, config.clip_norm)
        processed += 1
    return processed


def evaluate(model: MelodyModel, songs: Sequence[EncodedSong],
             sample_size: int, rng: np.random.Generator
             ) -> tuple[float, float]:
    """Mean teacher-forced NLL over a random sample of songs."""
    if not songs:
        raise ValueError("cannot evaluate on an empty song list")
    if len(songs) > sample_size:
        idx = rng.choice(len(songs), size=sample_size, replace=False)
        sample = [songs[i] for i in idx]
    else:
        sample = list(songs)
    rhythm = 0.0
    melody = 0.0
    for song in sample:
        r, m = teacher_forced_nll(model, song)
        rhythm += r
        melody += m
    return rhythm / len(sample), melody / len(sample)


def corpus_hash(songs: Sequence[EncodedSong]) -> str:
    h = hashlib.sha256()
    for song in songs:
        h.update(repr((song.pitch_indices, song.duration_indices)).encode())
    return h.hexdigest()[:16]


def song_hash(song: EncodedSong) -> str:
    h = hashlib.sha256(
        repr((song.pitch_indices, song.duration_indices)).encode())
    return h.hexdigest()[:16]


def first_note_pairs(songs: Sequence[EncodedSong]) -> list[list[int]]:
    """Empirical first-two-note pool for autonomous generation seeds."""
    pairs = []
    for song in songs:
        if len(song) >= 3:  # two notes plus the terminator
            pairs.append([song.pitch_indices[0], song.duration_indices[0],
                          song.pitch_indices[1], song.duration_indices[1]])
    return pairs


def encode_split(train_norm: Sequence[NormalizedSong],
                 test_norm: Sequence[NormalizedSong],
                 vocab: Vocabulary
                 ) -> tuple[list[EncodedSong], list[EncodedSong], int]:
    """Encode both splits; test songs with unseen tokens are dropped."""
    train = [encode_song(s, vocab) for s in train_norm]
    test = []
    skipped = 0
    for s in test_norm:
        try:
            test.append(encode_song(s, vocab))
        except OutOfVocabularyError:
            skipped += 1
    return train, test, skipped


def train(corpus: Sequence[NormalizedSong], config: TrainConfig
          ) -> tuple[Checkpoint, TrainReport]:
    """Full protocol: split, build vocabulary from the training split,
    run epochs, keep the parameters with the best test NLL."""
    if not corpus:
        raise ValueError("empty corpus")
    if len(corpus) == 1:
        # degenerate single-song corpus: memorization runs
        train_norm = test_norm = list(corpus)
    else:
        train_norm, test_norm = split_corpus(corpus, config.split,
                                             config.rng_seed)
    vocab = build_vocabulary(train_norm)
    train_songs, test_songs, skipped = encode_split(train_norm, test_norm,
                                                    vocab)
    if not test_songs:
        # degenerate corpora: fall back to evaluating on the train split
        test_songs = train_songs
    rng = np.random.default_rng(config.rng_seed)
    model = new_model(vocab, config.hidden_size, rng)
    rhythm_adam = AdamState.for_params(model.rhythm_net, config.alpha)
    melody_adam = AdamState.for_params(model.melody_net, config.alpha)

    report = TrainReport(skipped_test_songs=skipped)
    best_rhythm = clone_params(model.rhythm_net)
    best_melody = clone_params(model.melody_net)
    for epoch in range(config.epochs):
        start = time.monotonic()
        train_epoch(model, train_songs, rhythm_adam, melody_adam, config, rng)
        train_r, train_m = evaluate(model, train_songs, config.eval_sample,
                                    rng)
        test_r, test_m = evaluate(model, test_songs, config.eval_sample, rng)
        record = EpochRecord(epoch, train_r, train_m, test_r, test_m,
                             time.monotonic() - start)
        report.epochs.append(record)
        if test_r + test_m < report.best_test_nll:
            report.best_test_nll = test_r + test_m
            report.best_epoch = epoch
            best_rhythm = clone_params(model.rhythm_net)
            best_melody = clone_params(model.melody_net)
        log.info("epoch %d: train (%.4f, %.4f) test (%.4f, %.4f)",
                 epoch, train_r, train_m, test_r, test_m)

    best_model = MelodyModel(best_rhythm, best_melody, vocab)
    meta = {
        "epochs": config.epochs,
        "best_epoch": report.best_epoch,
        "best_test_nll": report.best_test_nll,
        "corpus_hash": corpus_hash(train_songs),
        "train_song_hashes": sorted(song_hash(s) for s in train_songs),
        "first_note_pairs": first_note_pairs(train_songs),
        "hidden_size": config.hidden_size,
        "rng_seed": config.rng_seed,
        "skipped_test_songs": skipped,
    }
    return Checkpoint(best_model, meta), report
