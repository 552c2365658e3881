"""Deterministic fixture builders: the bundled knowledge graph, synthetic
document corpora, and the gazetteer lexicon derived from the graph."""

from __future__ import annotations

import io
import itertools
import json
import random
import re

from pseudotext.corpus import Document, EntityCategory, EntitySpan
from pseudotext.kg import KgEdge, KgNode, KnowledgeGraph, dump_kg, load_kg

# --- name pools ------------------------------------------------------------

_FIRST_NAMES = {
    ("female", "English"): ["Alice", "Clara", "Grace", "Lucy", "Nora", "Ruth",
                            "Ivy", "Elsie", "Mabel", "Daisy", "Flora", "Edith"],
    ("male", "English"): ["Oliver", "Henry", "Jack", "Arthur", "Alfred", "Edgar",
                          "Hugh", "Walter", "Cecil", "Frank", "Percy", "Rupert"],
    ("female", "French"): ["Amélie", "Margot", "Céline", "Juliette", "Élodie",
                           "Manon", "Colette", "Sylvie"],
    ("male", "French"): ["Luc", "Pierre", "Antoine", "Étienne", "Marcel",
                         "Gaston", "Olivier", "Thibault"],
}
_SURNAMES = {
    "English": ["Whitaker", "Holloway", "Pemberton", "Ashcroft", "Winslow", "Barnaby",
                "Fairchild", "Merriweather", "Thornbury", "Caldwell", "Redmond", "Hathaway"],
    "French": ["Beaumont", "Lefevre", "Moreau", "Dubois", "Fontaine", "Renaud",
               "Chastain", "Giraud"],
}

_PROFESSIONS = ["engineer", "teacher", "physician", "architect", "musician", "lawyer"]

_ORG_CLASSES = {
    "software company": ("software", ["Software", "Systems", "Computing"]),
    "bank": ("finance", ["Bank", "Trust", "Capital"]),
    "airline": ("aviation", ["Airways", "Aviation", "Airlines"]),
    "university": ("education", ["University", "Institute", "College"]),
    "broadcaster": ("media", ["Broadcasting", "Media Group", "News Network"]),
}
_ORG_PREFIXES = ["Nimbus", "Vertex", "Apex", "Solstice", "Harbor", "Summit",
                 "Crescent", "Aurora", "Pinnacle", "Beacon", "Cobalt", "Meridian"]
_ORG_COUNTRIES = ["United States", "United Kingdom", "France"]

_LOC_CLASSES = {
    "city": ["Brookfield", "Ashton", "Clearwater", "Fairview", "Kingsport", "Westbrook",
             "Milldale", "Ravenswood", "Oakhurst", "Silverton", "Northgate", "Eastvale"],
    "river": [f"{stem} River" for stem in
              ["Silverbrook", "Thornwick", "Marlowe", "Dunmore", "Hollis", "Verrin",
               "Calder", "Brynmoor", "Astwell", "Ferndale", "Lockhart", "Quillan"]],
    "mountain": [f"{stem} Peak" for stem in
                 ["Kestrel", "Bramble", "Hawkridge", "Stonewall", "Grayfell", "Windmere",
                  "Larkspur", "Duskhollow", "Embermont", "Frostpike", "Cloudrest", "Thornpeak"]],
    "island": [f"{stem} Island" for stem in
               ["Gullwing", "Seabright", "Mistral", "Corvid", "Palewater", "Driftwood",
                "Lanternlight", "Moonstone", "Saltmarsh", "Tidewall", "Whalebone", "Windward"]],
}
_LOC_COUNTRIES = ["United States", "United Kingdom", "France", "Germany"]


def build_fixture_kg() -> KnowledgeGraph:
    """The graph shipped with the repo: a few hundred person/org/location
    leaves in attribute cells of three or more members, plus the newsroom
    sentence entities with dedicated singleton sibling pools."""
    nodes: list[KgNode] = []
    edges: list[KgEdge] = []

    def add_node(node_id, label, category, **attrs):
        nodes.append(KgNode(node_id, label, category, tuple(sorted(attrs.items()))))

    # Class hierarchy.
    add_node("Q1", "human", EntityCategory.PER)
    add_node("Q2", "professional", EntityCategory.PER)
    edges.append(KgEdge("Q2", "Q1", "P279"))
    add_node("Q20", "organization", EntityCategory.ORG)
    add_node("Q30", "geographic location", EntityCategory.LOC)
    add_node("Q35", "river basin", EntityCategory.LOC)
    edges.append(KgEdge("Q35", "Q30", "P279"))

    profession_ids = {}
    for i, profession in enumerate(_PROFESSIONS):
        node_id = f"Q{10 + i}"
        profession_ids[profession] = node_id
        add_node(node_id, profession, EntityCategory.PER)
        edges.append(KgEdge(node_id, "Q2", "P279"))

    org_class_ids = {}
    for i, org_class in enumerate(_ORG_CLASSES):
        node_id = f"Q{40 + i}"
        org_class_ids[org_class] = node_id
        add_node(node_id, org_class, EntityCategory.ORG)
        edges.append(KgEdge(node_id, "Q20", "P279"))

    loc_class_ids = {}
    for i, loc_class in enumerate(_LOC_CLASSES):
        node_id = f"Q{50 + i}"
        loc_class_ids[loc_class] = node_id
        add_node(node_id, loc_class, EntityCategory.LOC)
        edges.append(KgEdge(node_id, "Q30", "P279"))

    # Persons: four per (profession, gender, language) cell.
    name_streams = {
        cell: itertools.product(firsts, _SURNAMES[cell[1]])
        for cell, firsts in _FIRST_NAMES.items()
    }
    counter = itertools.count(1000)
    for profession in _PROFESSIONS:
        for cell in _FIRST_NAMES:
            for _ in range(4):
                first, last = next(name_streams[cell])
                node_id = f"Q{next(counter)}"
                add_node(node_id, f"{first} {last}", EntityCategory.PER,
                         gender=cell[0], language_of_origin=cell[1])
                edges.append(KgEdge(node_id, profession_ids[profession], "P31"))

    # Organizations: three per (class, country) cell.
    counter = itertools.count(2000)
    for org_class, (industry, suffixes) in _ORG_CLASSES.items():
        names = itertools.product(_ORG_PREFIXES, suffixes)
        for country in _ORG_COUNTRIES:
            for _ in range(3):
                prefix, suffix = next(names)
                node_id = f"Q{next(counter)}"
                add_node(node_id, f"{prefix} {suffix}", EntityCategory.ORG,
                         industry=industry, country=country)
                edges.append(KgEdge(node_id, org_class_ids[org_class], "P31"))

    # Locations: three per (type, country) cell; some rivers share a basin.
    counter = itertools.count(3000)
    river_ids = []
    for loc_class, names in _LOC_CLASSES.items():
        stream = iter(names)
        for country in _LOC_COUNTRIES:
            for _ in range(3):
                node_id = f"Q{next(counter)}"
                add_node(node_id, next(stream), EntityCategory.LOC,
                         location_type=loc_class, country=country)
                edges.append(KgEdge(node_id, loc_class_ids[loc_class], "P31"))
                if loc_class == "river":
                    river_ids.append(node_id)
    for river_id in river_ids[:6]:
        edges.append(KgEdge(river_id, "Q35", "P361"))

    # The newsroom sentence pairs, each pair alone under a dedicated class.
    pair_classes = [
        ("Q80", "columnist", EntityCategory.PER, "Q2"),
        ("Q81", "news editor", EntityCategory.PER, "Q2"),
        ("Q82", "sports reporter", EntityCategory.PER, "Q2"),
        ("Q83", "national daily newspaper", EntityCategory.ORG, "Q20"),
        ("Q84", "city of the United Kingdom", EntityCategory.LOC, "Q30"),
    ]
    for node_id, label, category, parent in pair_classes:
        add_node(node_id, label, category)
        edges.append(KgEdge(node_id, parent, "P279"))
    newsroom = [
        ("Q9001", "Sarah", EntityCategory.PER, "Q80", {"gender": "female", "language_of_origin": "English"}),
        ("Q9002", "Sophie", EntityCategory.PER, "Q80", {"gender": "female", "language_of_origin": "English"}),
        ("Q9003", "Rachel", EntityCategory.PER, "Q81", {"gender": "female", "language_of_origin": "English"}),
        ("Q9004", "Emma", EntityCategory.PER, "Q81", {"gender": "female", "language_of_origin": "English"}),
        ("Q9005", "David", EntityCategory.PER, "Q82", {"gender": "male", "language_of_origin": "English"}),
        ("Q9006", "Tom", EntityCategory.PER, "Q82", {"gender": "male", "language_of_origin": "English"}),
        ("Q9007", "The Times", EntityCategory.ORG, "Q83", {"industry": "news media", "country": "United Kingdom"}),
        ("Q9008", "Manchester Evening News", EntityCategory.ORG, "Q83", {"industry": "news media", "country": "United Kingdom"}),
        ("Q9009", "London", EntityCategory.LOC, "Q84", {"location_type": "city", "country": "United Kingdom"}),
        ("Q9010", "Manchester", EntityCategory.LOC, "Q84", {"location_type": "city", "country": "United Kingdom"}),
    ]
    for node_id, label, category, parent, attrs in newsroom:
        add_node(node_id, label, category, **attrs)
        edges.append(KgEdge(node_id, parent, "P31"))

    # Round-trip through the loader so the fixture provably satisfies every
    # load-time invariant.
    serialized = []
    for node in nodes:
        obj = {"id": node.id, "label": node.label, "category": node.category.value}
        if node.attrs:
            obj["attrs"] = dict(node.attrs)
        serialized.append({"node": obj})
    for edge in edges:
        serialized.append({"edge": {"src": edge.src, "dst": edge.dst, "prop": edge.prop}})
    raw = "".join(json.dumps(obj, ensure_ascii=False) + "\n" for obj in serialized)
    return load_kg(io.StringIO(raw))


def leaf_labels(graph: KnowledgeGraph) -> dict[EntityCategory, list[str]]:
    """Labels of childless nodes (entity leaves, not classes), per category."""
    result: dict[EntityCategory, list[str]] = {category: [] for category in EntityCategory}
    for node in graph.nodes.values():
        if not graph.children_of(node.id) and graph.parents_of(node.id):
            result[node.category].append(node.label)
    for labels in result.values():
        labels.sort()
    return result


def gazetteer_entries(graph: KnowledgeGraph) -> dict[str, str]:
    """Leaf label -> category value, for a lexicon file derived from the graph."""
    entries: dict[str, str] = {}
    for category, labels in leaf_labels(graph).items():
        for label in labels:
            entries[label] = category.value
    return entries


# --- document builders -------------------------------------------------------


class _DocBuilder:
    def __init__(self) -> None:
        self.parts: list[str] = []
        self.length = 0
        self.spans: list[EntitySpan] = []

    def literal(self, text: str) -> None:
        self.parts.append(text)
        self.length += len(text)

    def entity(self, surface: str, category: EntityCategory) -> None:
        self.spans.append(EntitySpan(self.length, self.length + len(surface), category, surface))
        self.literal(surface)

    def build(self, doc_id: str) -> Document:
        return Document(doc_id, "".join(self.parts), gold_spans=self.spans)


_TEMPLATES = [
    "{PER} flew to {LOC} for a meeting with {ORG}.",
    "{PER} and {PER} toured {LOC} before joining {ORG}.",
    "The merger between {ORG} and {ORG} was announced in {LOC}.",
    "{PER} interviewed {PER} about the future of {ORG}.",
    "Reporters from {ORG} followed {PER} across {LOC} and {LOC}.",
    "{PER} praised the view of {LOC} from the offices of {ORG}.",
    "After leaving {ORG}, {PER} settled near {LOC}.",
    "{ORG} opened a branch in {LOC} led by {PER}.",
]
_SLOT = re.compile(r"\{(PER|LOC|ORG)\}")


def entity_corpus(
    graph: KnowledgeGraph, n_docs: int, seed: int = 0, id_prefix: str = "synth"
) -> list[Document]:
    """Template sentences over surfaces sampled uniformly from the graph's
    leaf labels, so rewriting with that graph always finds a leaf. Some
    documents repeat a mention to exercise consistency."""
    pools = leaf_labels(graph)
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        builder = _DocBuilder()
        template = rng.choice(_TEMPLATES)
        pos = 0
        first_entity: tuple[str, EntityCategory] | None = None
        for match in _SLOT.finditer(template):
            builder.literal(template[pos : match.start()])
            category = EntityCategory(match.group(1))
            surface = rng.choice(pools[category])
            if first_entity is None:
                first_entity = (surface, category)
            builder.entity(surface, category)
            pos = match.end()
        builder.literal(template[pos:])
        if first_entity is not None and rng.random() < 0.3:
            builder.literal(" Later, ")
            builder.entity(*first_entity)
            builder.literal(" declined to comment.")
        docs.append(builder.build(f"{id_prefix}-{i:05d}"))
    return docs


_FILLER = ("the report said that while many observers noted further delays around "
           "several pending reviews during ongoing talks about new measures").split()
_CONSONANTS = "bcdfghjklmnpqrstvwxz"


def _fresh_token(rng: random.Random, used: set[str], forbidden: set[str]) -> str:
    while True:
        body = "".join(rng.choice(_CONSONANTS) for _ in range(rng.randint(4, 7)))
        token = body.capitalize()
        if token not in used and token not in forbidden:
            used.add(token)
            return token


def fuzz_corpus(
    n_docs: int, seed: int = 0, forbidden_surfaces: set[str] | None = None,
    id_prefix: str = "fuzz",
) -> list[Document]:
    """Random documents whose entity surfaces are fresh consonant strings:
    guaranteed absent from any realistic label set, unique per document, and
    occurring only at annotated positions. Roughly a third of documents
    repeat one mention."""
    forbidden = forbidden_surfaces or set()
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        builder = _DocBuilder()
        used: set[str] = set()
        repeat: tuple[str, EntityCategory] | None = None
        for sentence_index in range(rng.randint(1, 3)):
            if sentence_index:
                builder.literal(" ")
            n_words = rng.randint(3, 7)
            entity_slots = sorted(rng.sample(range(n_words), rng.randint(1, 2)))
            for word_index in range(n_words):
                if word_index:
                    builder.literal(" ")
                if word_index in entity_slots:
                    category = rng.choice(list(EntityCategory))
                    n_tokens = rng.randint(1, 2)
                    surface = " ".join(
                        _fresh_token(rng, used, forbidden) for _ in range(n_tokens)
                    )
                    builder.entity(surface, category)
                    if repeat is None:
                        repeat = (surface, category)
                else:
                    builder.literal(rng.choice(_FILLER))
            builder.literal(".")
        if repeat is not None and rng.random() < 0.35:
            builder.literal(" ")
            builder.entity(*repeat)
            builder.literal(" again.")
        docs.append(builder.build(f"{id_prefix}-{i:05d}"))
    return docs


def fixture_kg_jsonl() -> str:
    return dump_kg(build_fixture_kg())
