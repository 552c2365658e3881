"""Wikidata-style subset graph and the constrained surrogate sampler.

Surrogate candidates for a mention are found by matching a leaf node on its
label, walking one membership hop up (P31/P279/P361) and one hop back down to
siblings, then filtering on category-specific attributes with a relaxation
ladder that never empties a non-empty pool.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

from pseudotext.corpus import EntityCategory

MEMBERSHIP_PROPS = ("P31", "P279", "P361")

# Attribute vocabulary per category; the first key is relaxed last.
FILTER_KEYS = {
    EntityCategory.PER: ("gender", "language_of_origin"),
    EntityCategory.ORG: ("industry", "country"),
    EntityCategory.LOC: ("location_type", "country"),
}


class KgLoadError(ValueError):
    pass


class NoSurrogateError(LookupError):
    """Every eligible candidate was excluded (only self-matches remain)."""


@dataclass(frozen=True)
class KgNode:
    id: str
    label: str
    category: EntityCategory
    attrs: tuple[tuple[str, str], ...] = ()

    @property
    def attr_map(self) -> dict[str, str]:
        return dict(self.attrs)


@dataclass(frozen=True)
class KgEdge:
    src: str
    dst: str
    prop: str


@dataclass
class KnowledgeGraph:
    nodes: dict[str, KgNode] = field(default_factory=dict)
    edges: list[KgEdge] = field(default_factory=list)
    # child id -> parent ids, per membership property
    parents_by_prop: dict[str, dict[str, list[str]]] = field(default_factory=dict)
    children_by_prop: dict[str, dict[str, list[str]]] = field(default_factory=dict)
    label_index: dict[str, list[str]] = field(default_factory=dict)

    def parents_of(self, node_id: str) -> set[str]:
        found = set()
        for prop in MEMBERSHIP_PROPS:
            found.update(self.parents_by_prop.get(prop, {}).get(node_id, ()))
        return found

    def children_of(self, node_id: str) -> set[str]:
        found = set()
        for prop in MEMBERSHIP_PROPS:
            found.update(self.children_by_prop.get(prop, {}).get(node_id, ()))
        return found


def _node_from_json(obj: dict, lineno: int) -> KgNode:
    for key in ("id", "label", "category"):
        if key not in obj or not isinstance(obj[key], str) or not obj[key]:
            raise KgLoadError(f"line {lineno}: node.{key}: missing or empty")
    try:
        category = EntityCategory(obj["category"])
    except ValueError:
        raise KgLoadError(f"line {lineno}: node.category: invalid {obj['category']!r}") from None
    attrs = obj.get("attrs", {})
    if not isinstance(attrs, dict):
        raise KgLoadError(f"line {lineno}: node.attrs: expected object")
    allowed = set(FILTER_KEYS[category])
    for key, value in attrs.items():
        if key not in allowed:
            raise KgLoadError(
                f"line {lineno}: node.attrs: unknown key {key!r} for category {category.value}"
            )
        if not isinstance(value, str):
            raise KgLoadError(f"line {lineno}: node.attrs.{key}: expected string")
    return KgNode(obj["id"], obj["label"], category, tuple(sorted(attrs.items())))


def load_kg(source: str | Path | IO[str]) -> KnowledgeGraph:
    """Load the KG JSONL format: one {"node": {...}} or {"edge": {...}} per
    line, any order. Edges are validated after the full pass."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as handle:
            raw = handle.read()
    else:
        raw = source.read()

    graph = KnowledgeGraph()
    pending_edges: list[tuple[int, KgEdge]] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise KgLoadError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict) or len(obj) != 1 or next(iter(obj)) not in ("node", "edge"):
            raise KgLoadError(f"line {lineno}: expected a single 'node' or 'edge' object")
        if "node" in obj:
            node = _node_from_json(obj["node"], lineno)
            if node.id in graph.nodes:
                raise KgLoadError(f"line {lineno}: duplicate node id {node.id!r}")
            graph.nodes[node.id] = node
        else:
            edge_obj = obj["edge"]
            for key in ("src", "dst", "prop"):
                if key not in edge_obj or not isinstance(edge_obj[key], str):
                    raise KgLoadError(f"line {lineno}: edge.{key}: missing or not a string")
            if edge_obj["prop"] not in MEMBERSHIP_PROPS:
                raise KgLoadError(f"line {lineno}: edge.prop: invalid {edge_obj['prop']!r}")
            if edge_obj["src"] == edge_obj["dst"]:
                raise KgLoadError(f"line {lineno}: edge: src equals dst ({edge_obj['src']!r})")
            pending_edges.append((lineno, KgEdge(edge_obj["src"], edge_obj["dst"], edge_obj["prop"])))

    for lineno, edge in pending_edges:
        for endpoint in (edge.src, edge.dst):
            if endpoint not in graph.nodes:
                raise KgLoadError(f"line {lineno}: edge references unknown node {endpoint!r}")
        graph.edges.append(edge)
        graph.parents_by_prop.setdefault(edge.prop, {}).setdefault(edge.src, []).append(edge.dst)
        graph.children_by_prop.setdefault(edge.prop, {}).setdefault(edge.dst, []).append(edge.src)

    for node in graph.nodes.values():
        graph.label_index.setdefault(node.label.casefold(), []).append(node.id)
    for ids in graph.label_index.values():
        ids.sort()
    return graph


def dump_kg(graph: KnowledgeGraph) -> str:
    """Normalized serialization: nodes sorted by id, then edges sorted by
    (src, prop, dst), compact JSON. load(dump(g)) reproduces g."""
    lines = []
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        obj = {"id": node.id, "label": node.label, "category": node.category.value}
        if node.attrs:
            obj["attrs"] = dict(node.attrs)
        lines.append(json.dumps({"node": obj}, ensure_ascii=False, separators=(",", ":")))
    for edge in sorted(graph.edges, key=lambda e: (e.src, e.prop, e.dst)):
        obj = {"src": edge.src, "dst": edge.dst, "prop": edge.prop}
        lines.append(json.dumps({"edge": obj}, ensure_ascii=False, separators=(",", ":")))
    return "".join(line + "\n" for line in lines)


def find_leaf(graph: KnowledgeGraph, surface: str, category: EntityCategory) -> KgNode | None:
    """Node whose case-folded label equals the mention, same category. Among
    several: most membership parents, then smallest id."""
    if not surface:
        raise ValueError("surface must be non-empty")
    matches = [
        graph.nodes[node_id]
        for node_id in graph.label_index.get(surface.casefold(), ())
        if graph.nodes[node_id].category == category
    ]
    if not matches:
        return None
    return min(matches, key=lambda n: (-len(graph.parents_of(n.id)), n.id))


def candidate_set(graph: KnowledgeGraph, leaf: KgNode) -> list[KgNode]:
    """Same-category siblings: one membership hop up from the leaf, one hop
    down, minus the leaf itself. Sorted by id."""
    if leaf.id not in graph.nodes:
        raise ValueError(f"leaf {leaf.id!r} not in graph")
    sibling_ids: set[str] = set()
    for parent_id in graph.parents_of(leaf.id):
        sibling_ids.update(graph.children_of(parent_id))
    sibling_ids.discard(leaf.id)
    return [
        graph.nodes[node_id]
        for node_id in sorted(sibling_ids)
        if graph.nodes[node_id].category == leaf.category
    ]


def filter_candidates(candidates: list[KgNode], leaf: KgNode) -> list[KgNode]:
    """Keep candidates matching the leaf's category-specific attributes.

    Strict equality on both keys first; if empty, drop the second key, then
    all keys. A missing attribute on either side is a mismatch for that key,
    so the ladder is what guarantees a non-empty result.
    """
    keys = FILTER_KEYS[leaf.category]
    leaf_attrs = leaf.attr_map
    for rung in (keys, keys[:1], ()):
        kept = []
        for node in candidates:
            node_attrs = node.attr_map
            if all(
                key in node_attrs and key in leaf_attrs and node_attrs[key] == leaf_attrs[key]
                for key in rung
            ):
                kept.append(node)
        if kept:
            return kept
    return []


def sample_replacement(
    filtered: list[KgNode], original_surface: str, rng: random.Random
) -> str:
    """Uniformly sample a surrogate label, never the original surface itself."""
    folded = original_surface.casefold()
    eligible = [node for node in filtered if node.label.casefold() != folded]
    if not eligible:
        raise NoSurrogateError(
            f"no surrogate for {original_surface!r}: pool only contains self-matches"
        )
    return rng.choice(eligible).label
