import { describe, expect, it } from "vitest";

import { layeredLayout, taskOrder, NODE_HEIGHT } from "../src/layout.js";
import type { GraphDoc } from "../src/types.js";

const GRAPH: GraphDoc = {
  v: 1,
  nodes: [
    { id: "research_task", kind: "task" },
    { id: "write_task", kind: "task" },
    { id: "researcher", kind: "agent" },
    { id: "writer", kind: "agent" },
    { id: "web_search", kind: "tool" },
    { id: "spell_check", kind: "tool" },
  ],
  edges: [
    { from: "research_task", to: "write_task", kind: "order" },
    { from: "research_task", to: "researcher", kind: "assignment" },
    { from: "write_task", to: "writer", kind: "assignment" },
    { from: "researcher", to: "web_search", kind: "uses" },
    { from: "writer", to: "web_search", kind: "uses" },
    { from: "writer", to: "spell_check", kind: "uses" },
  ],
};

describe("taskOrder", () => {
  it("sorts tasks topologically over order edges", () => {
    expect(taskOrder(GRAPH)).toEqual(["research_task", "write_task"]);
  });

  it("breaks ties by declaration order", () => {
    const graph: GraphDoc = {
      v: 1,
      nodes: [
        { id: "c", kind: "task" },
        { id: "a", kind: "task" },
        { id: "b", kind: "task" },
      ],
      edges: [],
    };
    expect(taskOrder(graph)).toEqual(["c", "a", "b"]);
  });

  it("respects a context that overrides declaration order", () => {
    const graph: GraphDoc = {
      v: 1,
      nodes: [
        { id: "t1", kind: "task" },
        { id: "t2", kind: "task" },
        { id: "t3", kind: "task" },
      ],
      edges: [
        { from: "t1", to: "t3", kind: "order" },
        { from: "t2", to: "t3", kind: "order" },
        { from: "t1", to: "t2", kind: "order" },
      ],
    };
    expect(taskOrder(graph)).toEqual(["t1", "t2", "t3"]);
  });
});

describe("layeredLayout", () => {
  it("is deterministic for a given graph", () => {
    expect(layeredLayout(GRAPH)).toEqual(layeredLayout(GRAPH));
  });

  it("puts tasks on the top row, agents below, tools at the bottom", () => {
    const layout = layeredLayout(GRAPH);
    const rowOf = Object.fromEntries(layout.nodes.map((n) => [n.id, n.row]));
    expect(rowOf["research_task"]).toBe(0);
    expect(rowOf["write_task"]).toBe(0);
    expect(rowOf["researcher"]).toBe(1);
    expect(rowOf["writer"]).toBe(1);
    expect(rowOf["web_search"]).toBe(2);
    expect(rowOf["spell_check"]).toBe(2);
  });

  it("orders tasks left to right by execution order", () => {
    const layout = layeredLayout(GRAPH);
    const xOf = Object.fromEntries(layout.nodes.map((n) => [n.id, n.x]));
    expect(xOf["research_task"]!).toBeLessThan(xOf["write_task"]!);
  });

  it("keeps every node of a row horizontally separated", () => {
    const layout = layeredLayout(GRAPH);
    for (const row of [0, 1, 2]) {
      const xs = layout.nodes
        .filter((n) => n.row === row)
        .map((n) => n.x)
        .sort((a, b) => a - b);
      for (let i = 1; i < xs.length; i++) {
        expect(xs[i]! - xs[i - 1]!).toBeGreaterThan(0);
      }
    }
  });

  it("routes every graph edge between placed nodes", () => {
    const layout = layeredLayout(GRAPH);
    expect(layout.edges).toHaveLength(GRAPH.edges.length);
    const placed = new Map(layout.nodes.map((n) => [n.id, n]));
    for (const edge of layout.edges) {
      const from = placed.get(edge.from)!;
      const to = placed.get(edge.to)!;
      if (to.y > from.y) {
        expect(edge.y1).toBe(from.y + NODE_HEIGHT);
        expect(edge.y2).toBe(to.y);
      }
    }
  });
});
