"""End-to-end helpers shared by the CLI, the HTTP service and tests."""

from __future__ import annotations

import os
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .notation import Score, SkipReport, emit_abc, parse_corpus, parse_tune, \
    tokenize_abc
from .representation import (EncodedSong, NormalizedSong, RepresentationError,
                             Vocabulary, decode_song, normalize_score)


def read_corpus_files(paths: Sequence[Path]) -> str:
    chunks = []
    for path in paths:
        chunks.append(Path(path).read_text(encoding="utf-8", errors="replace"))
    return "\n\n".join(chunks)


def corpus_paths(target: Path) -> list[Path]:
    target = Path(target)
    if target.is_file():
        return [target]
    if target.is_dir():
        return sorted(target.glob("**/*.abc"))
    raise FileNotFoundError(str(target))


def load_corpus(target: Path) -> tuple[list[Score], list[SkipReport]]:
    paths = corpus_paths(target)
    if not paths:
        return [], []
    return parse_corpus(read_corpus_files(paths))


def normalize_corpus(scores: Sequence[Score]
                     ) -> tuple[list[NormalizedSong], list[SkipReport]]:
    songs = []
    skips = []
    for score in scores:
        try:
            songs.append(normalize_score(score))
        except RepresentationError as exc:
            skips.append(SkipReport(score.header.reference_number,
                                    score.header.title, str(exc)))
    return songs, skips


def encoded_to_abc(encoded: EncodedSong, vocab: Vocabulary,
                   base: Fraction = Fraction(1, 8),
                   title: str = "generated") -> str:
    score = decode_song(encoded, vocab, base=base, unit=base)
    return emit_abc(score, title=title)


def parse_single_tune(text: str) -> Score:
    return parse_tune(tokenize_abc(text))


def default_port() -> int:
    return int(os.environ.get("FOLKGEN_PORT", "8000"))
