/** The flowchart view: layered nodes with status styling, score rings on
 * task nodes, and an orphan-events tray that never drops a delta silently. */

import { clear, el, svgEl } from "../dom.js";
import { layeredLayout, NODE_HEIGHT, NODE_WIDTH } from "../layout.js";
import type { ViewModel } from "../viewmodel.js";

const RING_RADIUS = 14;
const RING_CIRCUMFERENCE = 2 * Math.PI * RING_RADIUS;

export interface FlowchartHandlers {
  onSelect(nodeId: string): void;
}

export function renderFlowchart(
  container: HTMLElement,
  vm: ViewModel,
  handlers: FlowchartHandlers,
): void {
  clear(container);
  const layout = layeredLayout(vm.graph);
  const svg = svgEl("svg", {
    class: "flowchart",
    viewBox: `-20 -20 ${layout.width} ${layout.height}`,
    width: String(layout.width),
    height: String(layout.height),
    role: "img",
  });

  for (const edge of layout.edges) {
    svg.append(
      svgEl("line", {
        class: `edge edge-${edge.kind}`,
        x1: String(edge.x1),
        y1: String(edge.y1),
        x2: String(edge.x2),
        y2: String(edge.y2),
      }),
    );
  }

  for (const node of layout.nodes) {
    const status = vm.statuses[node.id] ?? "pending";
    const group = svgEl("g", {
      class: `node node-${node.kind} status-${status}` +
        (vm.selected === node.id ? " selected" : ""),
      transform: `translate(${node.x}, ${node.y})`,
      "data-node-id": node.id,
      "data-status": status,
    });
    group.append(
      svgEl("rect", {
        width: String(NODE_WIDTH),
        height: String(NODE_HEIGHT),
        rx: "8",
      }),
      svgEl("text", {
        class: "node-label",
        x: String(NODE_WIDTH / 2),
        y: String(NODE_HEIGHT / 2 + 4),
        "text-anchor": "middle",
      }, [node.id]),
      svgEl("text", {
        class: "node-kind",
        x: String(NODE_WIDTH / 2),
        y: "12",
        "text-anchor": "middle",
      }, [node.kind]),
    );

    if (node.kind === "task") {
      group.append(renderRing(vm, node.id));
    }

    group.addEventListener("click", () => handlers.onSelect(node.id));
    svg.append(group);
  }

  container.append(svg);
  container.append(renderOrphanTray(vm));
}

function renderRing(vm: ViewModel, taskId: string): SVGGElement {
  const ring = vm.rings[taskId];
  const level = ring?.ring ?? "neutral";
  const mean = ring?.meanScore ?? null;
  const filled = mean === null ? 0 : RING_CIRCUMFERENCE * mean;
  const group = svgEl("g", {
    class: `ring ring-${level}`,
    transform: `translate(${NODE_WIDTH - 4}, 4)`,
    "data-task-id": taskId,
    "data-ring": level,
    "data-mean": mean === null ? "" : String(mean),
  });
  group.append(
    svgEl("circle", { class: "ring-track", r: String(RING_RADIUS) }),
    svgEl("circle", {
      class: "ring-fill",
      r: String(RING_RADIUS),
      "stroke-dasharray": `${filled} ${RING_CIRCUMFERENCE - filled}`,
      transform: "rotate(-90)",
    }),
    svgEl("text", {
      class: "ring-badge",
      "text-anchor": "middle",
      y: "4",
    }, [String(ring?.sampleCount ?? 0)]),
  );
  const label = mean === null ? "no data" : `mean ${mean.toFixed(2)}`;
  group.append(svgEl("title", {}, [
    `${taskId}: ${label} over ${ring?.sampleCount ?? 0} session(s), window ${ring?.window ?? "-"}`,
  ]));
  return group;
}

function renderOrphanTray(vm: ViewModel): HTMLElement {
  const tray = el("div", { class: "orphan-tray" + (vm.orphanTray.length ? "" : " empty") });
  tray.append(el("h3", {}, [`Orphan events (${vm.orphanTray.length})`]));
  const list = el("ul", {});
  for (const delta of vm.orphanTray) {
    list.append(el("li", {}, [
      `seq ${delta.seq}: ${delta.node_id || "(no subject)"}`,
    ]));
  }
  tray.append(list);
  return tray;
}
