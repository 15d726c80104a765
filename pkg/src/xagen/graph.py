"""Workflow graph construction from validated agent/task specs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .config import AgentSpec, TaskSpec


class NodeKind(str, Enum):
    TASK = "task"
    AGENT = "agent"
    TOOL = "tool"


class EdgeKind(str, Enum):
    ORDER = "order"        # task -> task
    ASSIGNMENT = "assignment"  # task -> agent
    USES = "uses"          # agent -> tool


@dataclass(frozen=True)
class GraphNode:
    id: str
    kind: NodeKind


@dataclass(frozen=True)
class GraphEdge:
    src: str
    dst: str
    kind: EdgeKind


@dataclass(frozen=True)
class WorkflowGraph:
    """Nodes and edges of one project's workflow, in deterministic order.

    Tasks keep file order (the console lays them out left to right); order
    edges form a DAG; every task has exactly one assignment edge.
    """

    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]

    def kind_of(self, node_id: str) -> NodeKind | None:
        for node in self.nodes:
            if node.id == node_id:
                return node.kind
        return None

    def has_node(self, node_id: str, kind: NodeKind) -> bool:
        return any(node.id == node_id and node.kind is kind for node in self.nodes)

    def ids_of_kind(self, kind: NodeKind) -> tuple[str, ...]:
        return tuple(node.id for node in self.nodes if node.kind is kind)

    @property
    def task_ids(self) -> tuple[str, ...]:
        return self.ids_of_kind(NodeKind.TASK)

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "nodes": [{"id": n.id, "kind": n.kind.value} for n in self.nodes],
            "edges": [{"from": e.src, "to": e.dst, "kind": e.kind.value} for e in self.edges],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "WorkflowGraph":
        nodes = tuple(GraphNode(n["id"], NodeKind(n["kind"])) for n in doc["nodes"])
        edges = tuple(GraphEdge(e["from"], e["to"], EdgeKind(e["kind"])) for e in doc["edges"])
        return cls(nodes=nodes, edges=edges)


def build_graph(agents: list[AgentSpec], tasks: list[TaskSpec]) -> WorkflowGraph:
    """Build the workflow graph from pre-validated specs.

    One node per task, agent, and tool (a tool shared by two agents is a
    single node with one `uses` edge per agent).  Order edges come from each
    context entry; a task with an empty context gets an order edge from its
    file-order predecessor task (the first task gets none).
    """
    nodes: list[GraphNode] = [GraphNode(task.id, NodeKind.TASK) for task in tasks]
    nodes.extend(GraphNode(agent.id, NodeKind.AGENT) for agent in agents)
    seen_tools: list[str] = []
    for agent in agents:
        for tool in agent.tools:
            if tool not in seen_tools:
                seen_tools.append(tool)
    nodes.extend(GraphNode(tool, NodeKind.TOOL) for tool in seen_tools)

    edges: list[GraphEdge] = []
    for index, task in enumerate(tasks):
        if task.context:
            for dep in task.context:
                edge = GraphEdge(dep, task.id, EdgeKind.ORDER)
                if edge not in edges:
                    edges.append(edge)
        elif index > 0:
            edges.append(GraphEdge(tasks[index - 1].id, task.id, EdgeKind.ORDER))
    edges.extend(GraphEdge(task.id, task.agent, EdgeKind.ASSIGNMENT) for task in tasks)
    for agent in agents:
        for tool in dict.fromkeys(agent.tools):
            edges.append(GraphEdge(agent.id, tool, EdgeKind.USES))

    return WorkflowGraph(nodes=tuple(nodes), edges=tuple(edges))
