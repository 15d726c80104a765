/** Playback controls for finished sessions: a scrubber that seeks via
 * replayed state documents, and a play action that runs the paced WS replay.
 * The terminal pane scrolls in lockstep with the cursor. */

import { clear, el } from "../dom.js";
import { applySeek, visibleTerminal, type ViewModel } from "../viewmodel.js";
import type { GatewayClient } from "../api.js";

export interface PlaybackHandlers {
  onViewChanged(): void;
  onPlay(fromSeq: number): void;
}

/** Seek the view model to a cursor position (GET state?at_seq). */
export async function seek(
  client: GatewayClient,
  vm: ViewModel,
  cursor: number,
): Promise<void> {
  const state = await client.state(vm.sessionId, cursor);
  applySeek(vm, state, cursor);
}

export function renderPlayback(
  container: HTMLElement,
  client: GatewayClient,
  vm: ViewModel,
  handlers: PlaybackHandlers,
): void {
  clear(container);
  if (vm.runStatus !== "finished") {
    container.append(el("p", { class: "hint" }, ["Live — playback unlocks when the run ends."]));
    return;
  }
  const scrubber = el("input", {
    type: "range",
    class: "scrubber",
    min: "-1",
    max: String(vm.lastSeq),
    value: String(vm.cursor),
    step: "1",
  });
  const position = el("span", { class: "cursor-label" }, [
    `seq ${vm.cursor} / ${vm.lastSeq}`,
  ]);
  scrubber.addEventListener("change", () => {
    const cursor = Number(scrubber.value);
    void seek(client, vm, cursor).then(() => {
      position.textContent = `seq ${vm.cursor} / ${vm.lastSeq}`;
      handlers.onViewChanged();
    });
  });
  const play = el("button", { type: "button" }, ["Play"]);
  play.addEventListener("click", () => handlers.onPlay(vm.cursor + 1));
  container.append(play, scrubber, position);
}

export function renderTerminal(container: HTMLElement, vm: ViewModel): void {
  clear(container);
  const pane = el("pre", { class: "terminal" });
  for (const line of visibleTerminal(vm)) {
    pane.append(
      el("span", { class: line.marker ? "terminal-marker" : "terminal-line" }, [
        line.text + "\n",
      ]),
    );
  }
  container.append(pane);
  container.scrollTop = container.scrollHeight;
}
