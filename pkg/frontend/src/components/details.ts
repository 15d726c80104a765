/** The details panel: what the selected node is, what it produced, how it
 * was judged, and the feedback form that feeds the next evaluation. */

import { parseConfigDoc } from "../configdoc.js";
import { clear, el } from "../dom.js";
import type { GatewayClient } from "../api.js";
import type { EvaluationDoc, FeedbackDoc } from "../types.js";
import type { ViewModel } from "../viewmodel.js";

export interface DetailsData {
  agents: Record<string, Record<string, string | string[]>>;
  tasks: Record<string, Record<string, string | string[]>>;
  evaluations: EvaluationDoc[];
  feedback: FeedbackDoc[];
}

export interface DetailsHandlers {
  onFeedbackSubmitted(entry: FeedbackDoc): void;
}

export function detailsDataFromSnapshot(configTexts: Record<string, string>): {
  agents: DetailsData["agents"];
  tasks: DetailsData["tasks"];
} {
  return {
    agents: parseConfigDoc(configTexts["agents.yaml"] ?? ""),
    tasks: parseConfigDoc(configTexts["tasks.yaml"] ?? ""),
  };
}

export function renderDetails(
  container: HTMLElement,
  vm: ViewModel,
  data: DetailsData,
  client: GatewayClient,
  handlers: DetailsHandlers,
): void {
  clear(container);
  const selected = vm.selected;
  if (!selected) {
    container.append(el("p", { class: "hint" }, ["Select a node to inspect it."]));
    return;
  }
  const kind = vm.graph.nodes.find((n) => n.id === selected)?.kind;
  container.append(el("h2", {}, [selected]));
  container.append(el("p", { class: "status-line" }, [
    `status: ${vm.statuses[selected] ?? "pending"}`,
  ]));

  if (kind === "agent") renderAgent(container, selected, data);
  if (kind === "task") renderTask(container, vm, selected, data, client, handlers);
  if (kind === "tool") renderTool(container, vm, selected);
}

function field(container: HTMLElement, label: string, value: string): void {
  container.append(
    el("div", { class: "field" }, [
      el("span", { class: "field-label" }, [label]),
      el("span", { class: "field-value" }, [value]),
    ]),
  );
}

function renderAgent(container: HTMLElement, agentId: string, data: DetailsData): void {
  const spec = data.agents[agentId] ?? {};
  for (const key of ["role", "goal", "backstory"]) {
    const value = spec[key];
    if (typeof value === "string") field(container, key, value);
  }
  const tools = spec["tools"];
  if (Array.isArray(tools) && tools.length) {
    field(container, "tools", tools.join(", "));
  }
}

function renderTask(
  container: HTMLElement,
  vm: ViewModel,
  taskId: string,
  data: DetailsData,
  client: GatewayClient,
  handlers: DetailsHandlers,
): void {
  const spec = data.tasks[taskId] ?? {};
  for (const key of ["description", "expected_output"]) {
    const value = spec[key];
    if (typeof value === "string") field(container, key, value);
  }

  const answer = finalAnswer(vm, taskId);
  if (answer !== null) {
    container.append(el("h3", {}, ["Final answer"]));
    container.append(el("pre", { class: "final-answer" }, [answer]));
  }

  container.append(el("h3", {}, ["Evaluations"]));
  const history = el("ul", { class: "evaluations" });
  for (const evaluation of data.evaluations) {
    const item = el("li", { class: `evaluation label-${evaluation.label}` });
    const expander = el("details", {}, [
      el("summary", {}, [
        `${evaluation.label} (${evaluation.score}) — ${evaluation.created_at}`,
      ]),
      el("p", { class: "rationale" }, [evaluation.rationale]),
    ]);
    item.append(expander);
    history.append(item);
  }
  for (const error of vm.evaluationErrors.filter((e) => e.task_id === taskId)) {
    history.append(el("li", { class: "evaluation unavailable" }, [
      `evaluation unavailable (${error.cause})`,
    ]));
  }
  if (!history.childElementCount) {
    history.append(el("li", { class: "hint" }, ["No evaluations yet."]));
  }
  container.append(history);

  container.append(el("h3", {}, ["Expert feedback"]));
  const feedbackList = el("ul", { class: "feedback-list" });
  for (const entry of data.feedback) {
    feedbackList.append(el("li", {}, [
      `[${entry.created_at}] ${entry.comment}` +
        (entry.metric_name ? ` (${entry.metric_name})` : ""),
    ]));
  }
  container.append(feedbackList);
  container.append(feedbackForm(vm, taskId, client, handlers));
}

export function feedbackForm(
  vm: ViewModel,
  taskId: string,
  client: GatewayClient,
  handlers: DetailsHandlers,
): HTMLFormElement {
  const comment = el("textarea", {
    name: "comment",
    class: "feedback-comment",
    placeholder: "What should improve next run?",
  });
  const metric = el("input", {
    name: "metric_name",
    class: "feedback-metric",
    placeholder: "metric (optional)",
  });
  const errorBox = el("p", { class: "form-error", hidden: "" });
  const form = el("form", { class: "feedback-form" }, [
    comment,
    metric,
    errorBox,
    el("button", { type: "submit" }, ["Submit feedback"]),
  ]);
  form.addEventListener("submit", (domEvent) => {
    domEvent.preventDefault();
    errorBox.hidden = true;
    client
      .submitFeedback(vm.sessionId, taskId, comment.value, metric.value || undefined)
      .then((entry) => {
        comment.value = "";
        metric.value = "";
        handlers.onFeedbackSubmitted(entry);
      })
      .catch((error: Error) => {
        errorBox.textContent = error.message;
        errorBox.hidden = false;
      });
  });
  return form;
}

function renderTool(container: HTMLElement, vm: ViewModel, toolId: string): void {
  container.append(el("h3", {}, ["Recent input/output"]));
  const pairs = el("ul", { class: "tool-io" });
  const lines = vm.terminal.filter((l) => !l.marker);
  // Tool events interleave as input then output; show the raw pane slices.
  for (const line of lines.slice(-12)) {
    pairs.append(el("li", {}, [line.text]));
  }
  if (!pairs.childElementCount) {
    pairs.append(el("li", { class: "hint" }, [`No calls from ${toolId} yet.`]));
  }
  container.append(pairs);
}

function finalAnswer(vm: ViewModel, taskId: string): string | null {
  return vm.finalAnswers[taskId] ?? null;
}
