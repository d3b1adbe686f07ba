/**
 * DOM wiring for the composer page.  All decisions live in the state
 * machine and controller; this file only renders state and forwards
 * clicks, so it carries no logic worth unit-testing on its own.
 */

import { ComposerClient, Continuation, Note } from "./api.js";
import { ComposerController } from "./controller.js";
import {
  midiToName,
  parseFraction,
  probabilityToOpacity,
  rollToAbc,
  RollNote,
  schedule,
} from "./notes.js";
import { play } from "./playback.js";
import { ComposerState, controls } from "./state.js";

const PITCH_TOP = 84; // roll rows span C6..C3
const PITCH_BOTTOM = 48;
const ROW_HEIGHT = 10;
const UNIT_WIDTH = 24;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderRoll(
  container: HTMLElement,
  notes: { pitch: string; duration: string }[],
  probs?: number[],
): void {
  container.innerHTML = "";
  container.classList.add("roll");
  let x = 0;
  notes.forEach((note, i) => {
    const units = parseFraction(note.duration);
    const width = units * UNIT_WIDTH;
    if (note.pitch !== "silence" && note.pitch !== "end") {
      const midi = Number(note.pitch);
      const cell = el("div", "note");
      const { name, octave } = midiToName(midi);
      cell.title = `${name}${octave} × ${note.duration}`;
      cell.style.left = `${x}px`;
      cell.style.width = `${width - 2}px`;
      cell.style.top = `${(PITCH_TOP - midi) * ROW_HEIGHT}px`;
      if (probs && probs[i] !== undefined) {
        cell.style.opacity = String(probabilityToOpacity(probs[i]!));
      }
      container.appendChild(cell);
    }
    x += width;
  });
  container.style.width = `${x}px`;
  container.style.height = `${(PITCH_TOP - PITCH_BOTTOM + 1) * ROW_HEIGHT}px`;
}

function renderContinuations(
  container: HTMLElement,
  seed: Note[],
  continuations: Continuation[],
  onAccept: (id: number, prefixLen: number) => void,
): void {
  container.innerHTML = "";
  for (const cont of continuations) {
    const card = el("div", "continuation");
    card.appendChild(
      el("span", "badge", `#${cont.id + 1} · ${cont.terminated}`),
    );
    const roll = el("div");
    renderRoll(
      roll,
      cont.notes,
      cont.notes.map((n) => n.pitch_prob),
    );
    card.appendChild(roll);

    const playBtn = el("button", "", "play");
    playBtn.onclick = () => play(schedule([...seed, ...cont.notes]));
    card.appendChild(playBtn);

    const playable = cont.notes.filter((n) => n.pitch !== "end").length;
    const prefixInput = el("input") as HTMLInputElement;
    prefixInput.type = "number";
    prefixInput.min = "1";
    prefixInput.max = String(Math.max(1, playable));
    prefixInput.value = String(Math.max(1, playable));
    card.appendChild(prefixInput);

    const acceptBtn = el("button", "", "accept prefix");
    acceptBtn.onclick = () => onAccept(cont.id, Number(prefixInput.value));
    card.appendChild(acceptBtn);
    container.appendChild(card);
  }
}

export function mount(root: HTMLElement, baseUrl: string): ComposerController {
  const controller = new ComposerController(new ComposerClient(baseUrl));

  const errorBox = el("div", "error");
  const melodyRoll = el("div");
  const contBox = el("div", "continuations");
  const abcInput = el("textarea") as HTMLTextAreaElement;
  abcInput.rows = 4;
  abcInput.placeholder = "X:1\nT:seed\nM:4/4\nL:1/8\nK:C\nC2 E2 G2 E2|";

  const seedBtn = el("button", "", "set seed");
  const moreBtn = el("button", "", "request continuations");
  const exportBtn = el("button", "", "export abc");
  const playBtn = el("button", "", "play melody");

  const tempInput = el("input") as HTMLInputElement;
  tempInput.type = "range";
  tempInput.min = "0.1";
  tempInput.max = "2";
  tempInput.step = "0.1";
  tempInput.value = "1";

  const rollNotes: RollNote[] = [];
  const rollStatus = el("span", "roll-status", "(click-entry: empty)");
  const addNote = (midi: number | null) => {
    rollNotes.push({ midi, eighths: 1 });
    rollStatus.textContent = `(click-entry: ${rollNotes.length} notes)`;
    abcInput.value = rollToAbc(rollNotes);
  };
  const keyboard = el("div", "keyboard");
  for (let midi = PITCH_BOTTOM; midi <= PITCH_TOP; midi++) {
    const { name, octave } = midiToName(midi);
    const key = el("button", "key", `${name}${octave}`);
    key.onclick = () => addNote(midi);
    keyboard.appendChild(key);
  }
  const restKey = el("button", "key", "rest");
  restKey.onclick = () => addNote(null);
  keyboard.appendChild(restKey);

  seedBtn.onclick = () => void controller.setSeed(abcInput.value);
  moreBtn.onclick = () =>
    void controller.requestContinuations({
      n: 5,
      length: 32,
      temperature: Number(tempInput.value),
    });
  playBtn.onclick = () => play(schedule(controller.current.melody));
  exportBtn.onclick = () =>
    void controller.exportAbc().then((abc) => {
      if (abc === null) return;
      const blob = new Blob([abc], { type: "text/plain" });
      const link = el("a") as HTMLAnchorElement;
      link.href = URL.createObjectURL(blob);
      link.download = "melody.abc";
      link.click();
    });

  const render = (state: ComposerState) => {
    const live = controls(state);
    seedBtn.disabled = !live.seed;
    moreBtn.disabled = !live.requestContinuations;
    exportBtn.disabled = !live.export;
    playBtn.disabled = state.melody.length === 0;
    errorBox.textContent = state.error ?? "";
    renderRoll(melodyRoll, state.melody);
    renderContinuations(contBox, state.melody, state.continuations, (id, n) =>
      void controller.accept(id, n),
    );
  };
  controller.subscribe(render);

  root.append(
    el("h1", "", "composer"),
    errorBox,
    keyboard,
    rollStatus,
    abcInput,
    seedBtn,
    el("h2", "", "working melody"),
    melodyRoll,
    playBtn,
    el("h2", "", "continuations"),
    tempInput,
    moreBtn,
    contBox,
    exportBtn,
  );

  void controller.startSession();
  return controller;
}
