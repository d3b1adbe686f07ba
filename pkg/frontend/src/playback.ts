/**
 * WebAudio realization of a playback schedule: one sine oscillator per
 * note with a short envelope so adjacent notes don't click.
 */

import { ScheduledTone } from "./notes.js";

const ATTACK = 0.01;
const RELEASE = 0.05;

export function play(tones: ScheduledTone[], ctx?: AudioContext): void {
  const AudioCtx =
    typeof AudioContext !== "undefined" ? AudioContext : undefined;
  const audio = ctx ?? (AudioCtx ? new AudioCtx() : undefined);
  if (!audio) return; // non-browser environment: playback is a no-op
  const t0 = audio.currentTime + 0.05;
  for (const tone of tones) {
    if (tone.frequency === null) continue;
    const osc = audio.createOscillator();
    const gain = audio.createGain();
    osc.type = "sine";
    osc.frequency.value = tone.frequency;
    const start = t0 + tone.start;
    const stop = start + tone.duration;
    gain.gain.setValueAtTime(0, start);
    gain.gain.linearRampToValueAtTime(0.3, start + ATTACK);
    gain.gain.setValueAtTime(0.3, Math.max(start + ATTACK, stop - RELEASE));
    gain.gain.linearRampToValueAtTime(0, stop);
    osc.connect(gain);
    gain.connect(audio.destination);
    osc.start(start);
    osc.stop(stop + RELEASE);
  }
}
