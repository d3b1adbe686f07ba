"""Sampling-based melody generation: closing the output-input loop.

Each step samples the upcoming duration from the rhythm network, feeds
it to the melody network along with the current pitch, samples the
upcoming pitch, and feeds both back as the next input.  Generation
stops when the song-ending token is sampled or a note budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import Checkpoint, MelodyModel, init_state, \
    next_duration_dist, next_pitch_dist
from .representation import EncodedSong


class GenerationError(Exception):
    pass


@dataclass
class GenerationConfig:
    rng_seed: int = 0
    max_notes: int = 1000
    temperature: float = 1.0
    num_samples: int = 1

    def __post_init__(self):
        if self.max_notes < 1:
            raise ValueError("max_notes must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass
class GeneratedSong:
    encoded: EncodedSong
    terminated: str              # "ended_naturally" | "truncated"
    seed_len: int
    pitch_probs: list[float] = field(default_factory=list)
    duration_probs: list[float] = field(default_factory=list)


def sample_categorical(probs: np.ndarray, temperature: float,
                       rng: np.random.Generator) -> tuple[int, float]:
    """Sample an index after temperature-scaling; returns (index, prob)
    where prob is the model's unscaled probability of the drawn index."""
    scaled = apply_temperature(probs, temperature)
    idx = int(rng.choice(len(scaled), p=scaled))
    return idx, float(probs[idx])


def apply_temperature(probs: np.ndarray, temperature: float) -> np.ndarray:
    logits = np.log(np.maximum(probs, 1e-300)) / temperature
    logits -= logits.max()
    scaled = np.exp(logits)
    return scaled / scaled.sum()


def continue_song(model: MelodyModel, seed: EncodedSong,
                  config: GenerationConfig,
                  rng: Optional[np.random.Generator] = None) -> GeneratedSong:
    """Extend a seed by sampling until the song-ending token appears."""
    if len(seed) < 1:
        raise GenerationError("seed must contain at least one note")
    ending = model.vocab.ending_index
    if ending in seed.pitch_indices:
        raise GenerationError("seed contains the song-ending token")
    rng = rng if rng is not None else np.random.default_rng(config.rng_seed)

    state = init_state(model)
    pitches = list(seed.pitch_indices)
    durations = list(seed.duration_indices)
    pitch_probs: list[float] = [1.0] * len(seed)
    duration_probs: list[float] = [1.0] * len(seed)

    # warm-up: rhythm net sees all seed notes, melody net all but the last
    for n in range(len(seed)):
        dur_dist = next_duration_dist(model, state, durations[n], pitches[n])
    for n in range(len(seed) - 1):
        next_pitch_dist(model, state, pitches[n], durations[n + 1])

    terminated = "truncated"
    while len(pitches) < config.max_notes:
        d_next, d_prob = sample_categorical(dur_dist, config.temperature, rng)
        pitch_dist = next_pitch_dist(model, state, pitches[-1], d_next)
        p_next, p_prob = sample_categorical(pitch_dist, config.temperature,
                                            rng)
        pitches.append(p_next)
        durations.append(d_next)
        pitch_probs.append(p_prob)
        duration_probs.append(d_prob)
        if p_next == ending:
            terminated = "ended_naturally"
            break
        dur_dist = next_duration_dist(model, state, d_next, p_next)
    return GeneratedSong(EncodedSong(tuple(pitches), tuple(durations)),
                         terminated, len(seed), pitch_probs, duration_probs)


def generate_song(model: MelodyModel, first_notes: Sequence[tuple[int, int]],
                  config: GenerationConfig,
                  rng: Optional[np.random.Generator] = None) -> GeneratedSong:
    """Autonomous composition from manually supplied first notes."""
    if not first_notes:
        raise GenerationError("at least one starting note is required")
    pitches = tuple(p for p, _ in first_notes)
    durations = tuple(d for _, d in first_notes)
    for p in pitches:
        if not 0 <= p < model.vocab.num_pitches:
            raise GenerationError(f"invalid pitch index {p}")
    for d in durations:
        if not 0 <= d < model.vocab.num_durations:
            raise GenerationError(f"invalid duration index {d}")
    seed = EncodedSong(pitches, durations)
    return continue_song(model, seed, config, rng)


@dataclass
class BatchStats:
    n: int
    mean_len: float
    std_len: float
    terminated: float            # fraction ended naturally
    novel: float                 # fraction absent from the training set

    def to_json(self) -> dict:
        return {"n": self.n, "mean_len": self.mean_len,
                "std_len": self.std_len, "terminated": self.terminated,
                "novel": self.novel}


def batch_generate(checkpoint: Checkpoint, config: GenerationConfig
                   ) -> tuple[list[GeneratedSong], BatchStats]:
    """Sample songs seeded from the corpus' first-two-note distribution."""
    model = checkpoint.model
    meta = checkpoint.training_meta
    pairs = meta.get("first_note_pairs") or []
    if not pairs and config.num_samples > 0:
        raise GenerationError(
            "checkpoint carries no first-note distribution; "
            "supply starting notes explicitly")
    train_hashes = set(meta.get("train_song_hashes") or [])
    rng = np.random.default_rng(config.rng_seed)
    songs: list[GeneratedSong] = []
    novel = 0
    ended = 0
    for _ in range(config.num_samples):
        p0, d0, p1, d1 = pairs[rng.integers(len(pairs))]
        song = generate_song(model, [(p0, d0), (p1, d1)], config, rng)
        songs.append(song)
        if song.terminated == "ended_naturally":
            ended += 1
        from .training import song_hash
        if song_hash(song.encoded) not in train_hashes:
            novel += 1
    lengths = np.array([len(s.encoded) for s in songs], dtype=np.float64)
    n = len(songs)
    stats = BatchStats(
        n=n,
        mean_len=float(lengths.mean()) if n else 0.0,
        std_len=float(lengths.std()) if n else 0.0,
        terminated=ended / n if n else 0.0,
        novel=novel / n if n else 0.0,
    )
    return songs, stats
