"""Composer HTTP API.

JSON-over-HTTP endpoints backed by an immutable checkpoint and an
in-memory session store with TTL eviction.  Sessions accumulate an
accepted melody prefix; continuations are sampled on demand with
per-note model probabilities for the UI.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .generation import GeneratedSong, GenerationConfig, continue_song
from .model import Checkpoint
from .notation import AbcError
from .pipeline import encoded_to_abc, parse_single_tune
from .representation import (EncodedSong, OutOfVocabularyError,
                             RepresentationError, normalize_score)

SESSION_TTL_SECS = 3600.0


@dataclass
class SessionRecord:
    session_id: str
    melody: Optional[EncodedSong] = None
    continuations: list[GeneratedSong] = field(default_factory=list)
    created: float = field(default_factory=time.monotonic)
    touched: float = field(default_factory=time.monotonic)


class SessionStore:
    def __init__(self, ttl: float = SESSION_TTL_SECS):
        self._ttl = ttl
        self._lock = threading.Lock()
        self._sessions: dict[str, SessionRecord] = {}

    def create(self) -> SessionRecord:
        record = SessionRecord(uuid.uuid4().hex)
        with self._lock:
            self._evict()
            self._sessions[record.session_id] = record
        return record

    def get(self, session_id: str) -> SessionRecord:
        with self._lock:
            self._evict()
            record = self._sessions.get(session_id)
            if record is None:
                raise HTTPException(404, "unknown session")
            record.touched = time.monotonic()
            return record

    def _evict(self) -> None:
        now = time.monotonic()
        stale = [k for k, v in self._sessions.items()
                 if now - v.touched > self._ttl]
        for k in stale:
            del self._sessions[k]


class SeedBody(BaseModel):
    abc: str


class ContinuationBody(BaseModel):
    n: int = 5
    length: int = 32
    temperature: float = 1.0
    rng_seed: Optional[int] = None


class AcceptBody(BaseModel):
    continuation_id: int
    prefix_len: int


def create_app(checkpoint: Checkpoint) -> FastAPI:
    app = FastAPI(title="folkgen composer API")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    store = SessionStore()
    model = checkpoint.model
    vocab = model.vocab
    server_rng = np.random.default_rng()

    def melody_json(encoded: EncodedSong) -> list[dict]:
        return [{"pitch": str(vocab.pitch_tokens[p]),
                 "duration": str(vocab.duration_tokens[d]),
                 "pitch_index": p, "duration_index": d}
                for p, d in zip(encoded.pitch_indices,
                                encoded.duration_indices)]

    @app.get("/model")
    def get_model():
        return {
            "vocab": vocab.to_json(),
            "dims": {
                "rhythm": {"x": model.rhythm_net.input_width,
                           "h": model.rhythm_net.hidden_sizes,
                           "o": model.rhythm_net.output_width},
                "melody": {"x": model.melody_net.input_width,
                           "h": model.melody_net.hidden_sizes,
                           "o": model.melody_net.output_width},
            },
            "training_meta": {
                k: v for k, v in checkpoint.training_meta.items()
                if k not in ("first_note_pairs", "train_song_hashes")
            },
        }

    @app.post("/session", status_code=201)
    def create_session():
        record = store.create()
        return {"session_id": record.session_id}

    @app.post("/session/{session_id}/seed")
    def set_seed(session_id: str, body: SeedBody):
        record = store.get(session_id)
        try:
            score = parse_single_tune(body.abc)
            normalized = normalize_score(score)
        except (AbcError, RepresentationError) as exc:
            raise HTTPException(400, f"invalid abc: {exc}")
        missing = []
        pitch_idx = []
        dur_idx = []
        for pitch, dur in zip(normalized.pitches, normalized.durations):
            ptok = "silence" if pitch is None else pitch
            try:
                pitch_idx.append(vocab.pitch_index(ptok))
            except KeyError:
                missing.append(str(ptok))
            try:
                dur_idx.append(vocab.duration_index(dur))
            except KeyError:
                missing.append(str(dur))
        if missing:
            raise HTTPException(
                422, {"message": "seed contains out-of-vocabulary tokens",
                      "tokens": sorted(set(missing))})
        record.melody = EncodedSong(tuple(pitch_idx), tuple(dur_idx))
        record.continuations = []
        return {"length": len(record.melody),
                "melody": melody_json(record.melody)}

    @app.post("/session/{session_id}/continuations")
    def request_continuations(session_id: str, body: ContinuationBody):
        record = store.get(session_id)
        if record.melody is None or len(record.melody) == 0:
            raise HTTPException(409, "session has no seed melody")
        if body.n < 1 or body.length < 1 or body.temperature <= 0:
            raise HTTPException(400, "invalid sampling settings")
        config = GenerationConfig(
            temperature=body.temperature,
            max_notes=len(record.melody) + body.length)
        if body.rng_seed is not None:
            rng = np.random.default_rng(body.rng_seed)
        else:
            rng = np.random.default_rng(server_rng.integers(2 ** 63))
        record.continuations = [
            continue_song(model, record.melody, config, rng)
            for _ in range(body.n)
        ]
        out = []
        for i, song in enumerate(record.continuations):
            start = song.seed_len
            notes = []
            for n in range(start, len(song.encoded)):
                p = song.encoded.pitch_indices[n]
                d = song.encoded.duration_indices[n]
                notes.append({
                    "pitch": str(vocab.pitch_tokens[p]),
                    "duration": str(vocab.duration_tokens[d]),
                    "pitch_index": p, "duration_index": d,
                    "pitch_prob": song.pitch_probs[n],
                    "duration_prob": song.duration_probs[n],
                })
            out.append({"id": i, "terminated": song.terminated,
                        "notes": notes})
        return {"continuations": out}

    @app.post("/session/{session_id}/accept")
    def accept(session_id: str, body: AcceptBody):
        record = store.get(session_id)
        if not 0 <= body.continuation_id < len(record.continuations):
            raise HTTPException(400, "unknown continuation id")
        song = record.continuations[body.continuation_id]
        start = song.seed_len
        new_notes = len(song.encoded) - start
        if not 1 <= body.prefix_len <= new_notes:
            raise HTTPException(400, f"prefix_len must be in [1, {new_notes}]")
        end = start + body.prefix_len
        pitches = song.encoded.pitch_indices[:end]
        durations = song.encoded.duration_indices[:end]
        # never keep an interior song-ending token in the working melody
        ending = vocab.ending_index
        if ending in pitches:
            cut = pitches.index(ending)
            pitches, durations = pitches[:cut], durations[:cut]
        if not pitches:
            raise HTTPException(400, "accepted prefix contains no notes")
        record.melody = EncodedSong(tuple(pitches), tuple(durations))
        record.continuations = []
        return {"length": len(record.melody),
                "melody": melody_json(record.melody)}

    @app.get("/session/{session_id}/export")
    def export(session_id: str):
        record = store.get(session_id)
        if record.melody is None or len(record.melody) == 0:
            raise HTTPException(409, "session has no melody to export")
        abc = encoded_to_abc(record.melody, vocab, title="composer session")
        return {"abc": abc}

    return app
