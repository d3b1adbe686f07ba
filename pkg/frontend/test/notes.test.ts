import { describe, expect, it } from "vitest";

import {
  midiToFrequency,
  midiToName,
  parseFraction,
  probabilityToOpacity,
  rollToAbc,
  schedule,
  SECONDS_PER_UNIT,
} from "../src/notes.js";

describe("pitch naming", () => {
  it("names middle C and neighbors", () => {
    expect(midiToName(60)).toEqual({ name: "C", octave: 4 });
    expect(midiToName(61)).toEqual({ name: "C#", octave: 4 });
    expect(midiToName(69)).toEqual({ name: "A", octave: 4 });
    expect(midiToName(59)).toEqual({ name: "B", octave: 3 });
  });

  it("A4 is 440 Hz and octaves double", () => {
    expect(midiToFrequency(69)).toBeCloseTo(440, 9);
    expect(midiToFrequency(81)).toBeCloseTo(880, 9);
    expect(midiToFrequency(57)).toBeCloseTo(220, 9);
  });
});

describe("fractions", () => {
  it("parses integers and ratios", () => {
    expect(parseFraction("1")).toBe(1);
    expect(parseFraction("1/2")).toBe(0.5);
    expect(parseFraction("3/2")).toBe(1.5);
  });

  it("rejects junk", () => {
    for (const bad of ["", "0", "-1", "1/0", "a/b", "1/2/3"]) {
      expect(() => parseFraction(bad)).toThrow();
    }
  });
});

describe("roll to abc", () => {
  it("renders quarter notes around middle C", () => {
    const abc = rollToAbc([
      { midi: 60, eighths: 2 },
      { midi: 62, eighths: 2 },
      { midi: 64, eighths: 2 },
      { midi: 60, eighths: 2 },
    ]);
    expect(abc).toContain("L:1/8");
    expect(abc).toContain("C2 D2 E2 C2|");
  });

  it("marks octaves and accidentals", () => {
    const abc = rollToAbc([
      { midi: 72, eighths: 1 },
      { midi: 73, eighths: 1 },
      { midi: 48, eighths: 1 },
      { midi: null, eighths: 3 },
    ]);
    expect(abc).toContain("c ^c C, z3|");
  });

  it("rejects empty input, bad lengths and out-of-range pitches", () => {
    expect(() => rollToAbc([])).toThrow();
    expect(() => rollToAbc([{ midi: 60, eighths: 0 }])).toThrow();
    expect(() => rollToAbc([{ midi: 60, eighths: 1.5 }])).toThrow();
    expect(() => rollToAbc([{ midi: 500, eighths: 1 }])).toThrow();
  });
});

describe("probability shading", () => {
  it("is monotone and stays legible", () => {
    expect(probabilityToOpacity(1)).toBe(1);
    expect(probabilityToOpacity(0)).toBeCloseTo(0.25);
    const a = probabilityToOpacity(0.2);
    const b = probabilityToOpacity(0.8);
    expect(a).toBeLessThan(b);
    expect(probabilityToOpacity(-5)).toBeCloseTo(0.25);
    expect(probabilityToOpacity(5)).toBe(1);
  });
});

describe("playback schedule", () => {
  it("lays notes end to end at the fixed tempo", () => {
    const tones = schedule([
      { pitch: "60", duration: "1" },
      { pitch: "silence", duration: "1/2" },
      { pitch: "62", duration: "2" },
    ]);
    expect(tones).toHaveLength(3);
    expect(tones[0]!.start).toBe(0);
    expect(tones[0]!.duration).toBeCloseTo(SECONDS_PER_UNIT);
    expect(tones[1]!.frequency).toBeNull();
    expect(tones[1]!.start).toBeCloseTo(SECONDS_PER_UNIT);
    expect(tones[2]!.start).toBeCloseTo(1.5 * SECONDS_PER_UNIT);
    expect(tones[2]!.duration).toBeCloseTo(2 * SECONDS_PER_UNIT);
  });

  it("stops at the song-ending token", () => {
    const tones = schedule([
      { pitch: "60", duration: "1" },
      { pitch: "end", duration: "1" },
      { pitch: "62", duration: "1" },
    ]);
    expect(tones).toHaveLength(1);
  });
});
