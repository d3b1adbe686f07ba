"""Normalized song representation.

Scores are transposed to C major / A minor, durations are expressed
relative to each song's most common duration, and songs become paired
pitch/duration index sequences over corpus-built vocabularies.  Also
provides first-order transition statistics over the encoded corpus.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Literal, Optional, Sequence, Union

import numpy as np

from .notation import AbcHeader, Key, NoteEvent, Score, parse_key


class RepresentationError(Exception):
    pass


class OutOfVocabularyError(RepresentationError):
    def __init__(self, tokens: Sequence[object]):
        super().__init__(f"tokens not in vocabulary: {sorted(map(str, tokens))}")
        self.tokens = list(tokens)


# --------------------------------------------------------------------------
# Tokens

SILENCE = "silence"
SONG_ENDING = "end"

PitchToken = Union[int, str]       # semitone int, SILENCE, or SONG_ENDING
DurationToken = Fraction           # relative to the song's modal duration


def pitch_token_str(tok: PitchToken) -> str:
    return str(tok)


def pitch_token_from_str(text: str) -> PitchToken:
    if text in (SILENCE, SONG_ENDING):
        return text
    return int(text)


# --------------------------------------------------------------------------
# Transposition

def transposition_shift(key: Key) -> int:
    """Semitone shift mapping the tonic to C (major family) or A (minor)."""
    target = 9 if key.minor_family else 0
    shift = (target - key.tonic_pc) % 12
    if shift > 5:
        shift -= 12
    return shift


def transpose_to_c(score: Score) -> Score:
    shift = transposition_shift(score.header.key)
    events = [ev if ev.is_rest else NoteEvent(ev.pitch + shift, ev.duration)
              for ev in score.events]
    new_key = parse_key("Amin" if score.header.key.minor_family else "C")
    header = replace_header(score.header, key=new_key)
    return Score(header, events)


def replace_header(header: AbcHeader, **kwargs) -> AbcHeader:
    new = AbcHeader(header.reference_number, header.title, header.meter,
                    header.unit_note_length, header.key, header.meter_text)
    for name, value in kwargs.items():
        setattr(new, name, value)
    return new


# --------------------------------------------------------------------------
# Duration normalization

def modal_duration(events: Sequence[NoteEvent]) -> Fraction:
    """Most common event duration; ties resolved to the smallest value."""
    counts = Counter(ev.duration for ev in events)
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return best[0]


def normalize_durations(score: Score) -> tuple[list[DurationToken], Fraction]:
    if not score.events:
        raise RepresentationError("cannot normalize an empty score")
    base = modal_duration(score.events)
    return [ev.duration / base for ev in score.events], base


@dataclass
class NormalizedSong:
    """A transposed score with relative durations, ready for encoding."""
    pitches: list[Optional[int]]        # None marks a rest
    durations: list[DurationToken]
    base: Fraction
    shift: int
    header: AbcHeader


def normalize_score(score: Score) -> NormalizedSong:
    shift = transposition_shift(score.header.key)
    transposed = transpose_to_c(score)
    durations, base = normalize_durations(transposed)
    pitches = [ev.pitch for ev in transposed.events]
    return NormalizedSong(pitches, durations, base, shift, transposed.header)


# --------------------------------------------------------------------------
# Vocabulary

@dataclass(frozen=True)
class Vocabulary:
    pitch_tokens: tuple[PitchToken, ...]
    duration_tokens: tuple[DurationToken, ...]

    def __post_init__(self):
        object.__setattr__(self, "_pitch_index",
                           {t: i for i, t in enumerate(self.pitch_tokens)})
        object.__setattr__(self, "_duration_index",
                           {t: i for i, t in enumerate(self.duration_tokens)})

    @property
    def num_pitches(self) -> int:
        return len(self.pitch_tokens)

    @property
    def num_durations(self) -> int:
        return len(self.duration_tokens)

    def pitch_index(self, tok: PitchToken) -> int:
        return self._pitch_index[tok]

    def duration_index(self, tok: DurationToken) -> int:
        return self._duration_index[tok]

    @property
    def silence_index(self) -> int:
        return self._pitch_index[SILENCE]

    @property
    def ending_index(self) -> int:
        return self._pitch_index[SONG_ENDING]

    @property
    def unit_duration_index(self) -> int:
        return self._duration_index[Fraction(1)]

    def to_json(self) -> dict:
        return {
            "pitches": [pitch_token_str(t) for t in self.pitch_tokens],
            "durations": [str(t) for t in self.duration_tokens],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Vocabulary":
        pitches = tuple(pitch_token_from_str(t) for t in data["pitches"])
        durations = tuple(Fraction(t) for t in data["durations"])
        return cls(pitches, durations)


def build_vocabulary(corpus: Sequence[NormalizedSong]) -> Vocabulary:
    """All distinct pitches and relative durations of the training split."""
    if not corpus:
        raise RepresentationError("cannot build a vocabulary from an empty corpus")
    pitches: set[int] = set()
    durations: set[Fraction] = set()
    for song in corpus:
        pitches.update(p for p in song.pitches if p is not None)
        durations.update(song.durations)
    pitch_tokens = tuple(sorted(pitches)) + (SILENCE, SONG_ENDING)
    duration_tokens = tuple(sorted(durations))
    return Vocabulary(pitch_tokens, duration_tokens)


# --------------------------------------------------------------------------
# Encoding

@dataclass(frozen=True)
class EncodedSong:
    pitch_indices: tuple[int, ...]
    duration_indices: tuple[int, ...]

    def __post_init__(self):
        assert len(self.pitch_indices) == len(self.duration_indices)

    def __len__(self) -> int:
        return len(self.pitch_indices)


def encode_song(song: NormalizedSong, vocab: Vocabulary) -> EncodedSong:
    """Index sequences terminated by the song-ending token."""
    missing = []
    pitch_idx: list[int] = []
    dur_idx: list[int] = []
    for pitch, dur in zip(song.pitches, song.durations):
        ptok: PitchToken = SILENCE if pitch is None else pitch
        try:
            pitch_idx.append(vocab.pitch_index(ptok))
        except KeyError:
            missing.append(ptok)
        try:
            dur_idx.append(vocab.duration_index(dur))
        except KeyError:
            missing.append(dur)
    if missing:
        raise OutOfVocabularyError(missing)
    pitch_idx.append(vocab.ending_index)
    dur_idx.append(vocab.unit_duration_index)
    return EncodedSong(tuple(pitch_idx), tuple(dur_idx))


def decode_song(encoded: EncodedSong, vocab: Vocabulary,
                base: Fraction = Fraction(1, 8), shift: int = 0,
                unit: Fraction = Fraction(1, 8)) -> Score:
    """Inverse of encode_song up to the terminator; yields a playable Score."""
    events: list[NoteEvent] = []
    for p_idx, d_idx in zip(encoded.pitch_indices, encoded.duration_indices):
        if not 0 <= p_idx < vocab.num_pitches:
            raise RepresentationError(f"pitch index {p_idx} out of range")
        if not 0 <= d_idx < vocab.num_durations:
            raise RepresentationError(f"duration index {d_idx} out of range")
        ptok = vocab.pitch_tokens[p_idx]
        if ptok == SONG_ENDING:
            break
        duration = vocab.duration_tokens[d_idx] * base
        pitch = None if ptok == SILENCE else int(ptok) - shift
        events.append(NoteEvent(pitch, duration))
    if not events:
        raise RepresentationError("encoded song has no notes before the terminator")
    header = AbcHeader(key=parse_key("C"), unit_note_length=unit)
    return Score(header, events)


# --------------------------------------------------------------------------
# Transition statistics

@dataclass
class TransitionMatrix:
    labels: list[str]
    probs: np.ndarray               # row-stochastic where observed
    observed: np.ndarray            # bool per row

    def to_json(self) -> dict:
        return {"labels": self.labels, "probs": self.probs.tolist(),
                "observed": self.observed.tolist()}

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.labels)]
        for label, row in zip(self.labels, self.probs):
            lines.append(label + "," + ",".join(f"{p:.10g}" for p in row))
        return "\n".join(lines) + "\n"


def transition_stats(corpus: Sequence[EncodedSong], vocab: Vocabulary,
                     which: Literal["pitch", "duration"]) -> TransitionMatrix:
    """Maximum-likelihood first-order transition probabilities."""
    if which == "pitch":
        size = vocab.num_pitches
        labels = [pitch_token_str(t) for t in vocab.pitch_tokens]
        seqs: Iterable[Sequence[int]] = (s.pitch_indices for s in corpus)
    else:
        size = vocab.num_durations
        labels = [str(t) for t in vocab.duration_tokens]
        seqs = (s.duration_indices for s in corpus)
    counts = np.zeros((size, size), dtype=np.float64)
    for seq in seqs:
        for a, b in zip(seq, seq[1:]):
            counts[a, b] += 1.0
    row_sums = counts.sum(axis=1)
    observed = row_sums > 0
    probs = np.zeros_like(counts)
    probs[observed] = counts[observed] / row_sums[observed, None]
    return TransitionMatrix(labels, probs, observed)


def corpus_stats(songs: Sequence[EncodedSong], vocab: Vocabulary) -> dict:
    """Summary report used by the CLI `stats` subcommand."""
    lengths = np.array([len(s) - 1 for s in songs], dtype=np.float64)
    return {
        "pitch_vocab": [pitch_token_str(t) for t in vocab.pitch_tokens],
        "duration_vocab": [str(t) for t in vocab.duration_tokens],
        "num_songs": len(songs),
        "mean_len": float(lengths.mean()) if len(songs) else 0.0,
        "std_len": float(lengths.std()) if len(songs) else 0.0,
        "transition_matrices": {
            "pitch": transition_stats(songs, vocab, "pitch").to_json(),
            "duration": transition_stats(songs, vocab, "duration").to_json(),
        },
    }
