/** In-place config editing: PUT on save, inline 422 validation errors, and
 * a re-run action once a save lands. */

import { GatewayError, type GatewayClient } from "../api.js";
import { clear, el } from "../dom.js";

export interface ConfigEditorHandlers {
  onSaved(file: string, backupName: string): void;
  onRerun(): void;
}

export function renderConfigEditor(
  container: HTMLElement,
  client: GatewayClient,
  projectId: string,
  file: string,
  initialContent: string,
  handlers: ConfigEditorHandlers,
): void {
  clear(container);
  const editor = el("textarea", {
    class: "config-editor",
    name: "content",
    spellcheck: "false",
  });
  editor.value = initialContent;
  const errorBox = el("p", { class: "form-error", hidden: "" });
  const savedBox = el("p", { class: "form-saved", hidden: "" });
  const rerun = el("button", { type: "button", class: "rerun", hidden: "" }, [
    "Re-run workflow",
  ]);
  rerun.addEventListener("click", () => handlers.onRerun());

  const save = el("button", { type: "submit" }, [`Save ${file}`]);
  const form = el("form", { class: "config-form" }, [
    el("h3", {}, [file]),
    editor,
    errorBox,
    savedBox,
    save,
    rerun,
  ]);
  form.addEventListener("submit", (domEvent) => {
    domEvent.preventDefault();
    errorBox.hidden = true;
    savedBox.hidden = true;
    client
      .putConfig(projectId, file, editor.value)
      .then((version) => {
        savedBox.textContent = `Saved; previous version backed up as ${version.backup_name}`;
        savedBox.hidden = false;
        rerun.hidden = false;
        handlers.onSaved(file, version.backup_name);
      })
      .catch((error: unknown) => {
        errorBox.textContent =
          error instanceof GatewayError && error.status === 422
            ? `Rejected: ${error.detail}`
            : String(error);
        errorBox.hidden = false;
      });
  });
  container.append(form);
}
