"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .generation import GenerationConfig, batch_generate, continue_song
from .gru import NumericError
from .model import Checkpoint
from .notation import AbcError
from .pipeline import default_port, encoded_to_abc, load_corpus, \
    normalize_corpus, parse_single_tune
from .representation import (OutOfVocabularyError, RepresentationError,
                             build_vocabulary, corpus_stats, encode_song,
                             normalize_score, transition_stats)
from .training import TrainConfig, evaluate, split_corpus, train

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class DataError(Exception):
    pass


def _load_encoded_corpus(path: Path):
    scores, skips = load_corpus(path)
    if not scores:
        raise DataError("no tunes found")
    songs, norm_skips = normalize_corpus(scores)
    return songs, skips + norm_skips


def cmd_parse(args) -> int:
    scores, skips = load_corpus(Path(args.corpus))
    if not scores and not skips:
        raise DataError("no tunes found")
    for skip in skips:
        print(json.dumps(skip.to_json()))
    total = len(scores) + len(skips)
    print(f"parsed {len(scores)}/{total} tunes "
          f"({len(skips)} skipped)", file=sys.stderr)
    return 0


def cmd_stats(args) -> int:
    songs, _ = _load_encoded_corpus(Path(args.corpus))
    vocab = build_vocabulary(songs)
    encoded = [encode_song(s, vocab) for s in songs]
    report = corpus_stats(encoded, vocab)
    if args.csv:
        out_dir = Path(args.csv)
        out_dir.mkdir(parents=True, exist_ok=True)
        for which in ("pitch", "duration"):
            matrix = transition_stats(encoded, vocab, which)
            (out_dir / f"transitions_{which}.csv").write_text(matrix.to_csv())
    print(json.dumps(report))
    return 0


def cmd_train(args) -> int:
    songs, skips = _load_encoded_corpus(Path(args.corpus))
    config = TrainConfig(epochs=args.epochs, hidden_size=args.hidden,
                         rng_seed=args.seed,
                         songs_per_epoch=args.songs_per_epoch)
    checkpoint, report = train(songs, config)
    checkpoint.save(args.out)
    if not args.quiet:
        print(report.to_json_lines())
        print(f"saved checkpoint to {args.out} "
              f"(best epoch {report.best_epoch}, "
              f"test NLL {report.best_test_nll:.4f}; "
              f"{len(skips)} tunes skipped)", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    checkpoint = Checkpoint.load(args.checkpoint)
    songs, _ = _load_encoded_corpus(Path(args.corpus))
    vocab = checkpoint.model.vocab
    encoded = []
    for song in songs:
        try:
            encoded.append(encode_song(song, vocab))
        except OutOfVocabularyError:
            pass
    if not encoded:
        raise DataError("no corpus songs are encodable with this checkpoint")
    import numpy as np
    rng = np.random.default_rng(args.seed)
    rhythm, melody = evaluate(checkpoint.model, encoded, args.sample, rng)
    print(json.dumps({"rhythm_nll": rhythm, "melody_nll": melody,
                      "songs": len(encoded)}))
    return 0


def cmd_generate(args) -> int:
    checkpoint = Checkpoint.load(args.checkpoint)
    config = GenerationConfig(rng_seed=args.seed, temperature=args.temp,
                              num_samples=args.num, max_notes=args.max_notes)
    songs, stats = batch_generate(checkpoint, config)
    for i, song in enumerate(songs):
        print(encoded_to_abc(song.encoded, checkpoint.model.vocab,
                             title=f"generated {i + 1}"))
    print(json.dumps(stats.to_json()), file=sys.stderr)
    return 0


def cmd_continue(args) -> int:
    checkpoint = Checkpoint.load(args.checkpoint)
    vocab = checkpoint.model.vocab
    text = Path(args.seed_abc).read_text(encoding="utf-8")
    score = parse_single_tune(text)
    seed = encode_song(normalize_score(score), vocab)
    # drop the terminator appended by encode_song: the song continues
    from .representation import EncodedSong
    seed = EncodedSong(seed.pitch_indices[:-1], seed.duration_indices[:-1])
    config = GenerationConfig(rng_seed=args.seed, temperature=args.temp,
                              max_notes=args.max_notes)
    import numpy as np
    song = continue_song(checkpoint.model, seed, config,
                         np.random.default_rng(args.seed))
    print(encoded_to_abc(song.encoded, vocab, title="continuation"))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app
    checkpoint = Checkpoint.load(args.checkpoint)
    app = create_app(checkpoint)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="folkgen",
                     description="Train and sample folk-melody models")
    parser.add_argument("--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse an abc corpus, report skips")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("stats", help="corpus statistics and transitions")
    p.add_argument("corpus")
    p.add_argument("--csv", help="directory for transition-matrix CSVs")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a model on an abc corpus")
    p.add_argument("corpus")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--songs-per-epoch", type=int, default=200)
    p.add_argument("--out", default="checkpoint.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p.add_argument("checkpoint")
    p.add_argument("corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample", type=int, default=200)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("generate", help="sample autonomous songs")
    p.add_argument("checkpoint")
    p.add_argument("-n", "--num", type=int, default=1)
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-notes", type=int, default=1000)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("continue", help="continue a seed melody")
    p.add_argument("checkpoint")
    p.add_argument("--seed-abc", required=True)
    p.add_argument("-n", "--max-notes", type=int, default=1000)
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("serve", help="serve the composer HTTP API")
    p.add_argument("checkpoint")
    p.add_argument("--port", type=int, default=default_port())
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (DataError, AbcError, RepresentationError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError, OverflowError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
