/** Deterministic layered layout for the workflow flowchart.
 *
 * Tasks form the top row, ordered left-to-right by a topological sort of
 * their order edges (declaration order breaks ties, so the layout is a pure
 * function of the graph document).  Agents sit below the tasks they are
 * assigned to, tools below the agents that use them, each centered under
 * the mean position of its parents.
 */

import type { GraphDoc, GraphNodeDoc } from "./types.js";

export const COLUMN_WIDTH = 170;
export const ROW_HEIGHT = 130;
export const NODE_WIDTH = 140;
export const NODE_HEIGHT = 54;

export interface PlacedNode extends GraphNodeDoc {
  x: number;
  y: number;
  row: number;
}

export interface EdgeRoute {
  from: string;
  to: string;
  kind: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface Layout {
  nodes: PlacedNode[];
  edges: EdgeRoute[];
  width: number;
  height: number;
}

/** Topological order of task nodes over their order edges (Kahn's algorithm,
 *  declaration order as the tie-break). */
export function taskOrder(graph: GraphDoc): string[] {
  const tasks = graph.nodes.filter((n) => n.kind === "task").map((n) => n.id);
  const position = new Map(tasks.map((id, i) => [id, i]));
  const indegree = new Map(tasks.map((id) => [id, 0]));
  const successors = new Map<string, string[]>(tasks.map((id) => [id, []]));
  for (const edge of graph.edges) {
    if (edge.kind !== "order") continue;
    if (!position.has(edge.from) || !position.has(edge.to)) continue;
    successors.get(edge.from)!.push(edge.to);
    indegree.set(edge.to, (indegree.get(edge.to) ?? 0) + 1);
  }
  const ready = tasks.filter((id) => indegree.get(id) === 0);
  const ordered: string[] = [];
  while (ready.length) {
    ready.sort((a, b) => position.get(a)! - position.get(b)!);
    const id = ready.shift()!;
    ordered.push(id);
    for (const next of successors.get(id) ?? []) {
      const remaining = indegree.get(next)! - 1;
      indegree.set(next, remaining);
      if (remaining === 0) ready.push(next);
    }
  }
  // A cycle cannot come from a validated project; keep stragglers visible.
  for (const id of tasks) if (!ordered.includes(id)) ordered.push(id);
  return ordered;
}

function centerUnder(parents: number[], fallback: number): number {
  if (!parents.length) return fallback;
  return parents.reduce((a, b) => a + b, 0) / parents.length;
}

export function layeredLayout(graph: GraphDoc): Layout {
  const placed = new Map<string, PlacedNode>();
  const byId = new Map(graph.nodes.map((n) => [n.id, n]));

  const tasks = taskOrder(graph);
  tasks.forEach((id, i) => {
    placed.set(id, { ...byId.get(id)!, x: i * COLUMN_WIDTH, y: 0, row: 0 });
  });

  // Agents: centered under their assigned tasks, declaration order.
  const agents = graph.nodes.filter((n) => n.kind === "agent");
  const agentTasks = new Map<string, number[]>(agents.map((a) => [a.id, []]));
  for (const edge of graph.edges) {
    if (edge.kind === "assignment" && agentTasks.has(edge.to)) {
      const task = placed.get(edge.from);
      if (task) agentTasks.get(edge.to)!.push(task.x);
    }
  }
  agents.forEach((agent, i) => {
    placed.set(agent.id, {
      ...agent,
      x: centerUnder(agentTasks.get(agent.id)!, i * COLUMN_WIDTH),
      y: ROW_HEIGHT,
      row: 1,
    });
  });

  // Tools: centered under the agents that use them, declaration order.
  const tools = graph.nodes.filter((n) => n.kind === "tool");
  const toolAgents = new Map<string, number[]>(tools.map((t) => [t.id, []]));
  for (const edge of graph.edges) {
    if (edge.kind === "uses" && toolAgents.has(edge.to)) {
      const agent = placed.get(edge.from);
      if (agent) toolAgents.get(edge.to)!.push(agent.x);
    }
  }
  tools.forEach((tool, i) => {
    placed.set(tool.id, {
      ...tool,
      x: centerUnder(toolAgents.get(tool.id)!, i * COLUMN_WIDTH),
      y: 2 * ROW_HEIGHT,
      row: 2,
    });
  });

  // Resolve horizontal collisions within a row deterministically.
  for (const row of [0, 1, 2]) {
    const inRow = [...placed.values()]
      .filter((n) => n.row === row)
      .sort((a, b) => a.x - b.x || a.id.localeCompare(b.id));
    for (let i = 1; i < inRow.length; i++) {
      const prev = inRow[i - 1]!;
      const node = inRow[i]!;
      if (node.x - prev.x < COLUMN_WIDTH * 0.9) {
        node.x = prev.x + COLUMN_WIDTH * 0.9;
      }
    }
  }

  const edges: EdgeRoute[] = graph.edges.flatMap((edge) => {
    const from = placed.get(edge.from);
    const to = placed.get(edge.to);
    if (!from || !to) return [];
    return [{
      from: edge.from,
      to: edge.to,
      kind: edge.kind,
      x1: from.x + NODE_WIDTH / 2,
      y1: from.y + (to.y > from.y ? NODE_HEIGHT : NODE_HEIGHT / 2),
      x2: to.x + NODE_WIDTH / 2,
      y2: to.y + (to.y > from.y ? 0 : NODE_HEIGHT / 2),
    }];
  });

  const nodes = [...placed.values()];
  const width = Math.max(...nodes.map((n) => n.x + NODE_WIDTH), 0) + 40;
  const height = Math.max(...nodes.map((n) => n.y + NODE_HEIGHT), 0) + 40;
  return { nodes, edges, width, height };
}
