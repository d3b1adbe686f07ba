"""abc notation front end: tokenizer, tune parser and text emitter.

Supports the subset of abc (v1.6 - v2.1) found in folk-tune corpora:
headers X/T/M/L/K, notes with accidentals/octave marks/length multipliers,
rests, bar lines, repeats with first/second endings, ties, tuplets,
broken rhythm, chords (reduced to their first pitch) and inline K:/L:
changes.  Decorations, grace notes, quoted chord symbols and lyrics are
consumed silently.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union


class AbcError(Exception):
    """Base class for abc processing failures."""


class LexicalError(AbcError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


class ParseError(AbcError):
    pass


class EmitError(AbcError):
    pass


MODES = {
    "major": 0, "maj": 0, "ionian": 0, "ion": 0, "": 0,
    "mixolydian": -1, "mix": -1,
    "dorian": -2, "dor": -2,
    "minor": -3, "min": -3, "m": -3, "aeolian": -3, "aeo": -3,
    "phrygian": -4, "phr": -4,
    "locrian": -5, "loc": -5,
    "lydian": 1, "lyd": 1,
}

MINOR_FAMILY = {"minor", "dorian", "phrygian", "aeolian", "locrian"}

_MODE_CANONICAL = {
    0: "major", -1: "mixolydian", -2: "dorian", -3: "minor",
    -4: "phrygian", -5: "locrian", 1: "lydian",
}

# letter -> pitch class and position on the circle of fifths
LETTER_PC = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
LETTER_FIFTH = {"F": -1, "C": 0, "G": 1, "D": 2, "A": 3, "E": 4, "B": 5}
SHARP_ORDER = "FCGDAEB"
FLAT_ORDER = "BEADGCF"

PITCH_MIN = 21
PITCH_MAX = 108


@dataclass(frozen=True)
class Key:
    tonic_pc: int          # pitch class of the tonic, 0 = C
    mode: str              # canonical mode name
    fifths: int            # signed count of sharps (+) / flats (-)
    name: str              # as written, e.g. "D", "Amin", "G mixolydian"

    def accidental_map(self) -> dict[str, int]:
        acc: dict[str, int] = {}
        if self.fifths > 0:
            for letter in SHARP_ORDER[: self.fifths]:
                acc[letter] = 1
        elif self.fifths < 0:
            for letter in FLAT_ORDER[: -self.fifths]:
                acc[letter] = -1
        return acc

    @property
    def minor_family(self) -> bool:
        return self.mode in MINOR_FAMILY


def parse_key(text: str) -> Key:
    """Parse the value of a K: field, e.g. "D", "Amin", "G mixolydian"."""
    raw = text.strip()
    m = re.match(r"^([A-Ga-g])([#b]?)\s*([A-Za-z]*)", raw)
    if not m:
        raise ParseError(f"unsupported key signature: {text!r}")
    letter = m.group(1).upper()
    accidental = m.group(2)
    mode_word = m.group(3).lower()
    if mode_word not in MODES:
        mode_word = mode_word[:3]
    if mode_word not in MODES:
        raise ParseError(f"unknown mode in key signature: {text!r}")
    mode_shift = MODES[mode_word]
    tonic_pc = LETTER_PC[letter]
    fifths = LETTER_FIFTH[letter]
    if accidental == "#":
        tonic_pc += 1
        fifths += 7
    elif accidental == "b":
        tonic_pc -= 1
        fifths -= 7
    fifths += mode_shift
    if not -7 <= fifths <= 7:
        raise ParseError(f"key signature out of range: {text!r}")
    return Key(tonic_pc % 12, _MODE_CANONICAL[mode_shift], fifths, raw)


def parse_fraction(text: str, what: str) -> Fraction:
    m = re.match(r"^\s*(\d+)\s*/\s*(\d+)\s*$", text)
    if not m:
        raise ParseError(f"malformed {what}: {text!r}")
    num, den = int(m.group(1)), int(m.group(2))
    if num <= 0 or den <= 0:
        raise ParseError(f"non-positive {what}: {text!r}")
    return Fraction(num, den)


def parse_meter(text: str) -> Optional[Fraction]:
    t = text.strip()
    if t in ("C", "c"):
        return Fraction(4, 4)
    if t in ("C|", "c|"):
        return Fraction(2, 2)
    if t.lower() in ("none", "free", ""):
        return None
    return parse_fraction(t, "meter")


# --------------------------------------------------------------------------
# Tokens

@dataclass(frozen=True)
class FieldTok:
    name: str
    value: str
    inline: bool = False


@dataclass(frozen=True)
class NoteTok:
    letter: str                 # A-G a-g as written
    accidental: Optional[int]   # explicit semitone offset, None if absent
    octave: int                 # octave marks: ' adds, , subtracts
    length: Fraction


@dataclass(frozen=True)
class RestTok:
    length: Fraction
    multimeasure: bool = False


@dataclass(frozen=True)
class BarTok:
    kind: str  # plain | repeat_start | repeat_end | repeat_both | double | final


@dataclass(frozen=True)
class EndingTok:
    number: int


@dataclass(frozen=True)
class TieTok:
    pass


@dataclass(frozen=True)
class BrokenTok:
    direction: str  # ">" or "<"
    count: int


@dataclass(frozen=True)
class TupletTok:
    p: int
    q: Optional[int]
    r: Optional[int]


AbcToken = Union[FieldTok, NoteTok, RestTok, BarTok, EndingTok, TieTok,
                 BrokenTok, TupletTok]


# --------------------------------------------------------------------------
# Domain types

@dataclass(frozen=True)
class NoteEvent:
    pitch: Optional[int]        # MIDI semitone; None for a rest
    duration: Fraction          # in whole notes, lowest terms

    @property
    def kind(self) -> str:
        return "note" if self.pitch is not None else "rest"

    @property
    def is_rest(self) -> bool:
        return self.pitch is None


@dataclass
class AbcHeader:
    reference_number: int = 1
    title: str = ""
    meter: Optional[Fraction] = Fraction(4, 4)
    unit_note_length: Fraction = Fraction(1, 8)
    key: Key = field(default_factory=lambda: parse_key("C"))
    meter_text: str = "4/4"  # as written, for display only


@dataclass
class Score:
    header: AbcHeader
    events: list[NoteEvent]


@dataclass(frozen=True)
class SkipReport:
    tune_ref: int
    title: str
    reason: str

    def to_json(self) -> dict:
        return {"tune_ref": self.tune_ref, "title": self.title,
                "reason": self.reason}


# --------------------------------------------------------------------------
# Tokenizer

_LENGTH_RE = re.compile(r"(\d+)?(/+)(\d+)?|(\d+)")
_NOTE_RE = re.compile(r"(\^{1,2}|_{1,2}|=)?([A-Ga-g])([,']*)")
_INLINE_FIELD_RE = re.compile(r"\[([A-Za-z]):([^\]\n]*)\]")
_TUPLET_RE = re.compile(r"\((\d)(?::(\d)?(?::(\d)?)?)?")
# body characters consumed silently: decorations and spacing
_IGNORED_CHARS = set(".~HIJKLMNOPQRSTUVWhijklmnopqrstuvw*$)\\ \t")


def _scan_length(text: str, i: int) -> tuple[Fraction, int]:
    m = _LENGTH_RE.match(text, i)
    if not m:
        return Fraction(1), i
    if m.group(4) is not None:
        return Fraction(int(m.group(4))), m.end()
    num = int(m.group(1)) if m.group(1) else 1
    slashes = m.group(2)
    if m.group(3) is not None:
        den = int(m.group(3))
    else:
        den = 2 ** len(slashes)
    if den == 0:
        return Fraction(num), m.end()
    return Fraction(num, den), m.end()


def _scan_note(text: str, i: int) -> tuple[Optional[NoteTok], int]:
    m = _NOTE_RE.match(text, i)
    if not m:
        return None, i
    acc_text, letter, octmarks = m.groups()
    if acc_text is None:
        accidental = None
    elif acc_text == "=":
        accidental = 0
    else:
        accidental = len(acc_text) * (1 if acc_text[0] == "^" else -1)
    octave = octmarks.count("'") - octmarks.count(",")
    if letter.islower():
        octave += 1
    length, j = _scan_length(text, m.end())
    return NoteTok(letter, accidental, octave, length), j


def _tokenize_body_line(line: str, lineno: int, out: list[AbcToken]) -> None:
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if ch == "%":
            return
        if ch == '"':
            end = line.find('"', i + 1)
            if end < 0:
                raise LexicalError("unterminated quote", lineno, i + 1)
            i = end + 1
            continue
        if ch == "{":
            end = line.find("}", i + 1)
            if end < 0:
                raise LexicalError("unterminated grace group", lineno, i + 1)
            i = end + 1
            continue
        if ch == "!":
            end = line.find("!", i + 1)
            if end < 0:
                raise LexicalError("unterminated decoration", lineno, i + 1)
            i = end + 1
            continue
        if ch == "[":
            m = _INLINE_FIELD_RE.match(line, i)
            if m:
                out.append(FieldTok(m.group(1).upper(), m.group(2).strip(),
                                    inline=True))
                i = m.end()
                continue
            m = re.match(r"\[(\d)", line, 0) if False else re.match(r"\[(\d)", line[i:])
            if m:
                out.append(EndingTok(int(m.group(1))))
                i += m.end()
                continue
            if line.startswith("[|", i):
                out.append(BarTok("double"))
                i += 2
                continue
            # chord: reduce to the first pitch, keep the chord length
            j = i + 1
            first: Optional[NoteTok] = None
            while j < n and line[j] != "]":
                tok, j2 = _scan_note(line, j)
                if tok is None:
                    j += 1
                    continue
                if first is None:
                    first = tok
                j = j2
            if j >= n:
                raise LexicalError("unterminated chord", lineno, i + 1)
            mult, j = _scan_length(line, j + 1)
            if first is None:
                raise LexicalError("empty chord", lineno, i + 1)
            out.append(NoteTok(first.letter, first.accidental, first.octave,
                               first.length * mult))
            i = j
            continue
        if ch == ":":
            if line.startswith("::", i):
                out.append(BarTok("repeat_both"))
                i += 2
            elif line.startswith(":|", i):
                out.append(BarTok("repeat_end"))
                i += 2
                m = re.match(r"\d", line[i:i + 1])
                if m:
                    out.append(EndingTok(int(line[i])))
                    i += 1
            else:
                i += 1
            continue
        if ch == "|":
            if line.startswith("|:", i):
                out.append(BarTok("repeat_start"))
                i += 2
            elif line.startswith("|]", i):
                out.append(BarTok("final"))
                i += 2
            elif line.startswith("||", i):
                out.append(BarTok("double"))
                i += 2
            else:
                out.append(BarTok("plain"))
                i += 1
                if i < n and line[i].isdigit():
                    out.append(EndingTok(int(line[i])))
                    i += 1
            continue
        if ch == "(":
            m = _TUPLET_RE.match(line, i)
            if m:
                p = int(m.group(1))
                q = int(m.group(2)) if m.group(2) else None
                r = int(m.group(3)) if m.group(3) else None
                out.append(TupletTok(p, q, r))
                i = m.end()
            else:
                i += 1  # slur open
            continue
        if ch in "><":
            count = 1
            while i + count < n and line[i + count] == ch:
                count += 1
            out.append(BrokenTok(ch, count))
            i += count
            continue
        if ch == "-":
            out.append(TieTok())
            i += 1
            continue
        if ch in "zx":
            length, i = _scan_length(line, i + 1)
            out.append(RestTok(length))
            continue
        if ch == "Z":
            length, i = _scan_length(line, i + 1)
            out.append(RestTok(length, multimeasure=True))
            continue
        tok, j = _scan_note(line, i)
        if tok is not None:
            out.append(tok)
            i = j
            continue
        if ch == "&":
            raise ParseError("voice overlay (&) is not supported")
        if ch in _IGNORED_CHARS:
            i += 1
            continue
        # fuzz safety: anything unrecognized is consumed silently
        i += 1


_HEADER_LINE_RE = re.compile(r"^([A-Za-z]):(.*)$")


def tokenize_abc(source: str) -> list[AbcToken]:
    """Tokenize one abc tune into header fields and body tokens."""
    tokens: list[AbcToken] = []
    in_body = False
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.rstrip("\r")
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        m = _HEADER_LINE_RE.match(stripped)
        if m and (not in_body or m.group(1) in "KLMwWV"):
            name = m.group(1)
            if name in ("w", "W"):
                continue
            value = m.group(2).split("%")[0].strip()
            tokens.append(FieldTok(name.upper() if name != "V" else "V", value))
            if name == "K" and not in_body:
                in_body = True
            continue
        if not in_body:
            continue  # free text before the body
        _tokenize_body_line(line, lineno, tokens)
    return tokens


# --------------------------------------------------------------------------
# Repeat expansion

def _expand_repeats(tokens: list[AbcToken]) -> list[AbcToken]:
    """Expand |: ... :| spans and [1/[2 endings into a linear token list."""
    out: list[AbcToken] = []
    section: list[AbcToken] = []
    ending_start: Optional[int] = None
    bar_count = 0

    def close_repeat() -> None:
        nonlocal section, ending_start
        if ending_start is not None:
            base = section[:ending_start]
            out.extend(section)
            out.append(BarTok("plain"))
            section = list(base)
            ending_start = None
        else:
            out.extend(section)
            out.append(BarTok("plain"))
            out.extend(section)
            out.append(BarTok("plain"))
            section = []

    for tok in tokens:
        if isinstance(tok, BarTok):
            bar_count += 1
            if tok.kind == "repeat_start":
                out.extend(section)
                out.append(BarTok("plain"))
                section = []
                ending_start = None
            elif tok.kind == "repeat_end":
                if not any(isinstance(t, (NoteTok, RestTok)) for t in section):
                    raise ParseError(
                        f"empty repeat before bar {bar_count}")
                close_repeat()
            elif tok.kind == "repeat_both":
                if not any(isinstance(t, (NoteTok, RestTok)) for t in section):
                    raise ParseError(
                        f"empty repeat before bar {bar_count}")
                close_repeat()
            else:
                section.append(BarTok("plain"))
        elif isinstance(tok, EndingTok):
            if tok.number == 1:
                ending_start = len(section)
            # [2 and higher: the alternative simply continues the section
        else:
            section.append(tok)
    out.extend(section)
    return out


# --------------------------------------------------------------------------
# Parser

_TUPLET_Q_DEFAULT = {2: 3, 3: 2, 4: 3, 6: 2, 8: 3}


def _tuplet_q(p: int, meter: Optional[Fraction]) -> int:
    if p in _TUPLET_Q_DEFAULT:
        return _TUPLET_Q_DEFAULT[p]
    compound = meter is not None and meter.numerator % 3 == 0
    return 3 if compound else 2


def _default_unit_length(meter: Optional[Fraction]) -> Fraction:
    # fixed project default, independent of the meter
    return Fraction(1, 8)


def _note_pitch(tok: NoteTok, key_acc: dict[str, int],
                measure_acc: dict[tuple[str, int], int]) -> int:
    letter = tok.letter.upper()
    base = 60 + LETTER_PC[letter] + 12 * tok.octave
    if tok.accidental is not None:
        offset = tok.accidental
        measure_acc[(letter, tok.octave)] = offset
    elif (letter, tok.octave) in measure_acc:
        offset = measure_acc[(letter, tok.octave)]
    else:
        offset = key_acc.get(letter, 0)
    pitch = base + offset
    if not PITCH_MIN <= pitch <= PITCH_MAX:
        raise ParseError(f"pitch {pitch} outside supported range "
                         f"[{PITCH_MIN}, {PITCH_MAX}]")
    return pitch


def parse_tune(tokens: list[AbcToken]) -> Score:
    """Build a Score from one tune's token stream.

    Repeats are expanded, ties merged, tuplets and broken rhythms
    resolved, and key/measure accidentals applied to produce absolute
    semitone pitches.
    """
    header = AbcHeader()
    saw_key = False
    saw_ref = False
    explicit_unit = False
    body: list[AbcToken] = []
    voices: set[str] = set()
    it = iter(tokens)
    for tok in it:
        if isinstance(tok, FieldTok) and not tok.inline and not saw_key:
            if tok.name == "X":
                try:
                    header.reference_number = int(tok.value)
                except ValueError:
                    raise ParseError(f"malformed X: field: {tok.value!r}")
                saw_ref = True
            elif tok.name == "T":
                if not header.title:
                    header.title = tok.value
            elif tok.name == "M":
                header.meter = parse_meter(tok.value)
                header.meter_text = tok.value
            elif tok.name == "L":
                header.unit_note_length = parse_fraction(
                    tok.value, "unit note length")
                explicit_unit = True
            elif tok.name == "K":
                header.key = parse_key(tok.value)
                saw_key = True
            elif tok.name == "V":
                voices.add(tok.value.split()[0] if tok.value else "")
        else:
            body.append(tok)
    if not saw_ref:
        raise ParseError("missing X: reference field")
    if not saw_key:
        raise ParseError("missing K: key field")
    if not explicit_unit:
        header.unit_note_length = _default_unit_length(header.meter)

    for tok in body:
        if isinstance(tok, FieldTok) and tok.name == "V":
            voices.add(tok.value.split()[0] if tok.value else "")
    if len(voices) > 1:
        raise ParseError("multi-voice tune")
    body = [t for t in body if not (isinstance(t, FieldTok) and t.name == "V")]

    body = _expand_repeats(body)

    events: list[NoteEvent] = []
    key_acc = header.key.accidental_map()
    measure_acc: dict[tuple[str, int], int] = {}
    unit = header.unit_note_length
    meter = header.meter
    tuplet_factor = Fraction(1)
    tuplet_left = 0
    broken_next = Fraction(1)
    tie_pending = False

    def push(pitch: Optional[int], length: Fraction) -> None:
        nonlocal tuplet_left, tuplet_factor, broken_next, tie_pending
        dur = length * unit
        if tuplet_left > 0:
            dur *= tuplet_factor
            tuplet_left -= 1
        dur *= broken_next
        broken_next = Fraction(1)
        if dur <= 0:
            raise ParseError("non-positive note duration")
        if tie_pending and events and events[-1].pitch == pitch \
                and pitch is not None:
            events[-1] = NoteEvent(pitch, events[-1].duration + dur)
        else:
            events.append(NoteEvent(pitch, dur))
        tie_pending = False

    for tok in body:
        if isinstance(tok, NoteTok):
            push(_note_pitch(tok, key_acc, measure_acc), tok.length)
        elif isinstance(tok, RestTok):
            if tok.multimeasure:
                raise ParseError("multi-measure rest (Z) is not supported")
            push(None, tok.length)
        elif isinstance(tok, BarTok):
            measure_acc.clear()
        elif isinstance(tok, TieTok):
            tie_pending = True
        elif isinstance(tok, BrokenTok):
            if not events:
                raise ParseError("broken rhythm with no preceding note")
            grow = Fraction(2 ** tok.count * 2 - 1, 2 ** tok.count)
            shrink = Fraction(1, 2 ** tok.count)
            prev_factor, next_factor = (grow, shrink) if tok.direction == ">" \
                else (shrink, grow)
            prev = events[-1]
            events[-1] = NoteEvent(prev.pitch, prev.duration * prev_factor)
            broken_next = next_factor
        elif isinstance(tok, TupletTok):
            q = tok.q if tok.q is not None else _tuplet_q(tok.p, meter)
            tuplet_left = tok.r if tok.r is not None else tok.p
            tuplet_factor = Fraction(q, tok.p)
        elif isinstance(tok, FieldTok):
            if tok.name == "K":
                header_key = parse_key(tok.value)
                key_acc = header_key.accidental_map()
                measure_acc.clear()
            elif tok.name == "L":
                unit = parse_fraction(tok.value, "unit note length")
            elif tok.name == "M":
                meter = parse_meter(tok.value)
            # other inline fields are presentation only
    if not events:
        raise ParseError("tune has no notes")
    for ev in events:
        if ev.duration.numerator >= 2 ** 31 or ev.duration.denominator >= 2 ** 31:
            raise ParseError("note duration overflows 32-bit rational")
    return Score(header, events)


_TUNE_SPLIT_RE = re.compile(r"^X\s*:", re.MULTILINE)


def split_tunes(source: str) -> list[str]:
    """Split a corpus file into individual tune texts on X: fields."""
    starts = [m.start() for m in _TUNE_SPLIT_RE.finditer(source)]
    chunks = []
    for i, start in enumerate(starts):
        end = starts[i + 1] if i + 1 < len(starts) else len(source)
        chunks.append(source[start:end])
    return chunks


def parse_corpus(source: str) -> tuple[list[Score], list[SkipReport]]:
    """Parse every tune in a corpus text; failures become skip reports."""
    scores: list[Score] = []
    skips: list[SkipReport] = []
    for chunk in split_tunes(source):
        ref = 0
        m = re.match(r"X\s*:\s*(\d+)", chunk)
        if m:
            ref = int(m.group(1))
        title = ""
        tm = re.search(r"^T\s*:(.*)$", chunk, re.MULTILINE)
        if tm:
            title = tm.group(1).strip()
        try:
            scores.append(parse_tune(tokenize_abc(chunk)))
        except AbcError as exc:
            reason = str(exc)
            if "missing K:" in reason:
                reason = "missing-key"
            elif "multi-voice" in reason:
                reason = "multi-voice"
            skips.append(SkipReport(ref, title, reason))
    return scores, skips


# --------------------------------------------------------------------------
# Emitter

_SHARP_SPELLING = {0: ("C", 0), 1: ("C", 1), 2: ("D", 0), 3: ("D", 1),
                   4: ("E", 0), 5: ("F", 0), 6: ("F", 1), 7: ("G", 0),
                   8: ("G", 1), 9: ("A", 0), 10: ("A", 1), 11: ("B", 0)}
_FLAT_SPELLING = {0: ("C", 0), 1: ("D", -1), 2: ("D", 0), 3: ("E", -1),
                  4: ("E", 0), 5: ("F", 0), 6: ("G", -1), 7: ("G", 0),
                  8: ("A", -1), 9: ("A", 0), 10: ("B", -1), 11: ("B", 0)}
_ACC_GLYPH = {-2: "__", -1: "_", 0: "=", 1: "^", 2: "^^"}


def _length_text(mult: Fraction) -> str:
    if mult == 1:
        return ""
    if mult.denominator == 1:
        return str(mult.numerator)
    if mult == Fraction(1, 2):
        return "/"
    if mult.numerator == 1:
        return f"/{mult.denominator}"
    return f"{mult.numerator}/{mult.denominator}"


def _spell_pitch(pitch: int, key_acc: dict[str, int],
                 measure_acc: dict[tuple[str, int], int],
                 prefer_flats: bool) -> str:
    pc = pitch % 12
    table = _FLAT_SPELLING if prefer_flats else _SHARP_SPELLING
    letter, acc = table[pc]
    # prefer a spelling already implied by the key or measure state
    for cand_letter, cand_acc in (_SHARP_SPELLING[pc], _FLAT_SPELLING[pc]):
        octave = (pitch - cand_acc - 60 - LETTER_PC[cand_letter]) // 12
        effective = measure_acc.get((cand_letter, octave),
                                    key_acc.get(cand_letter, 0))
        if effective == cand_acc:
            letter, acc = cand_letter, cand_acc
            break
    octave = (pitch - acc - 60 - LETTER_PC[letter]) // 12
    effective = measure_acc.get((letter, octave), key_acc.get(letter, 0))
    text = ""
    if effective != acc:
        text += _ACC_GLYPH[acc]
        measure_acc[(letter, octave)] = acc
    if octave >= 1:
        text += letter.lower() + "'" * (octave - 1)
    else:
        text += letter + "," * (-octave)
    return text


def emit_abc(score: Score, title: Optional[str] = None) -> str:
    """Render a Score back to abc text.

    Round-trip guarantee: parsing the emitted text reproduces the exact
    (pitch, duration) event sequence.
    """
    header = score.header
    unit = header.unit_note_length
    lines = [f"X:{header.reference_number}"]
    lines.append(f"T:{title or header.title or 'untitled'}")
    if header.meter is not None:
        lines.append(f"M:{header.meter_text}")
    lines.append(f"L:{unit.numerator}/{unit.denominator}")
    lines.append(f"K:{header.key.name}")

    key_acc = header.key.accidental_map()
    measure_acc: dict[tuple[str, int], int] = {}
    prefer_flats = header.key.fifths < 0
    measure_len = header.meter if header.meter is not None else None

    body: list[str] = []
    acc_time = Fraction(0)
    bars_on_line = 0
    line_buf = ""
    for ev in score.events:
        mult = ev.duration / unit
        if mult.denominator > 64 or mult <= 0:
            raise EmitError(
                f"duration {ev.duration} not representable with unit {unit}")
        if ev.is_rest:
            text = "z" + _length_text(mult)
        else:
            if not PITCH_MIN <= ev.pitch <= PITCH_MAX:
                raise EmitError(f"pitch {ev.pitch} out of range")
            text = _spell_pitch(ev.pitch, key_acc, measure_acc, prefer_flats)
            text += _length_text(mult)
        line_buf += text
        acc_time += ev.duration
        if measure_len is not None and acc_time >= measure_len:
            line_buf += "|"
            acc_time -= measure_len * (acc_time // measure_len)
            measure_acc.clear()
            bars_on_line += 1
            if bars_on_line >= 8:
                body.append(line_buf)
                line_buf = ""
                bars_on_line = 0
        else:
            line_buf += " "
    if line_buf.strip():
        body.append(line_buf.rstrip())
    if body:
        body[-1] = body[-1].rstrip("| ") + "|]"
    lines.extend(body)
    return "\n".join(lines) + "\n"
