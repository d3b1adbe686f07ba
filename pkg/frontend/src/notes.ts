/**
 * Note arithmetic shared by the roll, the seed editor and playback:
 * MIDI numbers to names/frequencies/abc text, and duration fractions.
 */

const LETTERS = ["C", "^C", "D", "^D", "E", "F", "^F", "G", "^G", "A", "^A", "B"];
const NAMES = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

export interface PitchName {
  name: string;
  octave: number;
}

/** MIDI 60 = C4. */
export function midiToName(midi: number): PitchName {
  const pc = ((midi % 12) + 12) % 12;
  return { name: NAMES[pc]!, octave: Math.floor(midi / 12) - 1 };
}

export function midiToFrequency(midi: number): number {
  return 440 * Math.pow(2, (midi - 69) / 12);
}

/** Parse a rational token such as "1", "1/2" or "3/2" to a number. */
export function parseFraction(text: string): number {
  const parts = text.split("/");
  if (parts.length === 1) {
    const v = Number(parts[0]);
    if (!Number.isFinite(v) || v <= 0) throw new Error(`bad fraction: ${text}`);
    return v;
  }
  if (parts.length !== 2) throw new Error(`bad fraction: ${text}`);
  const num = Number(parts[0]);
  const den = Number(parts[1]);
  if (!Number.isFinite(num) || !Number.isFinite(den) || num <= 0 || den <= 0) {
    throw new Error(`bad fraction: ${text}`);
  }
  return num / den;
}

/** One entry on the editing roll; duration is in eighth-note units. */
export interface RollNote {
  midi: number | null; // null = rest
  eighths: number;     // positive integer
}

function abcPitch(midi: number): string {
  const pc = ((midi % 12) + 12) % 12;
  const octave = Math.floor(midi / 12) - 1; // 60 -> C4 -> abc "C"
  const base = LETTERS[pc]!;
  if (octave >= 5) {
    return (
      base.replace(/[A-G]/, (c) => c.toLowerCase()) + "'".repeat(octave - 5)
    );
  }
  return base + ",".repeat(4 - octave);
}

/** Render roll entries as a complete single-tune abc text (L:1/8). */
export function rollToAbc(notes: RollNote[], title = "seed"): string {
  if (notes.length === 0) throw new Error("empty melody");
  const body = notes
    .map((n) => {
      if (!Number.isInteger(n.eighths) || n.eighths < 1) {
        throw new Error(`bad duration: ${n.eighths}`);
      }
      const len = n.eighths === 1 ? "" : String(n.eighths);
      if (n.midi === null) return `z${len}`;
      if (n.midi < 21 || n.midi > 108) {
        throw new Error(`pitch out of range: ${n.midi}`);
      }
      return abcPitch(n.midi) + len;
    })
    .join(" ");
  return `X:1\nT:${title}\nM:4/4\nL:1/8\nK:C\n${body}|\n`;
}

/**
 * Map a model probability to shading opacity: confident notes render
 * solid, unlikely ones fade out but stay legible.
 */
export function probabilityToOpacity(prob: number): number {
  const clamped = Math.min(1, Math.max(0, prob));
  return 0.25 + 0.75 * clamped;
}

/** Seconds per eighth-note unit at the fixed playback tempo (120 bpm). */
export const SECONDS_PER_UNIT = 60 / 120;

export interface ScheduledTone {
  frequency: number | null; // null = rest
  start: number;            // seconds from playback start
  duration: number;         // seconds
}

/**
 * Pure playback schedule for a melody whose durations are fraction
 * tokens in unit-duration multiples; the audio layer just realizes it.
 */
export function schedule(
  notes: { pitch: string; duration: string }[],
): ScheduledTone[] {
  const out: ScheduledTone[] = [];
  let clock = 0;
  for (const note of notes) {
    if (note.pitch === "end") break;
    const secs = parseFraction(note.duration) * SECONDS_PER_UNIT;
    const midi = note.pitch === "silence" ? null : Number(note.pitch);
    out.push({
      frequency: midi === null ? null : midiToFrequency(midi),
      start: clock,
      duration: secs,
    });
    clock += secs;
  }
  return out;
}
