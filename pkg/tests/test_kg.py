"""Graph file parsing, validation, and closure queries."""

import numpy as np
import pytest

from ckgmed import kg
from ckgmed.errors import CycleError, KindMismatch, ParseError, UnknownNode


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return str(path)


BASIC = [
    "# demo graph",
    "T1.1\tis_a\tT1\tdisease\tdisease",
    "T1\tcauses_onset\tY1\tdisease\tdisease",
    "drgA\tindicated_for\tT1\tdrug\tdisease",
    "drgA\thas_side_effect\tSE1\tdrug\tdisease",
]


def test_load_graph_counts_and_indexes(tmp_path):
    g = kg.load_graph(write_lines(tmp_path / "g.tsv", BASIC))
    assert g.summary.n_edges == 4
    assert g.summary.n_nodes == 5
    assert g.summary.n_duplicates == 0
    assert g.summary.relation_counts["is_a"] == 1
    assert g.out_neighbors(kg.disease("T1"), kg.RelationKind.CAUSES_ONSET) == {kg.disease("Y1")}
    assert g.in_neighbors(kg.disease("T1"), kg.RelationKind.IS_A) == {kg.disease("T1.1")}
    assert g.in_neighbors(kg.disease("T1"), kg.RelationKind.INDICATED_FOR) == {kg.drug("drgA")}


def test_duplicate_triples_dropped_and_counted(tmp_path):
    lines = BASIC + ["T1\tcauses_onset\tY1\tdisease\tdisease"]
    g = kg.load_graph(write_lines(tmp_path / "g.tsv", lines))
    assert g.summary.n_edges == 4
    assert g.summary.n_duplicates == 1


def test_blank_lines_and_comments_skipped(tmp_path):
    lines = ["", "# c"] + BASIC + [""]
    g = kg.load_graph(write_lines(tmp_path / "g.tsv", lines))
    assert g.summary.n_edges == 4


@pytest.mark.parametrize(
    "bad",
    [
        "T1\tcauses_onset\tY1\tdisease",  # four columns
        "T1\tcauses_onset\tY1\tdisease\tdisease\textra",
        "T1\tbecomes\tY1\tdisease\tdisease",  # unknown relation
        "T1\tcauses_onset\tY1\tgene\tdisease",  # unknown kind
    ],
)
def test_malformed_line_raises_parse_error_with_location(tmp_path, bad):
    path = write_lines(tmp_path / "g.tsv", BASIC + [bad])
    with pytest.raises(ParseError) as exc:
        kg.load_graph(path)
    assert exc.value.line_no == len(BASIC) + 1


@pytest.mark.parametrize(
    "bad",
    [
        "drgA\tcauses_onset\tY1\tdrug\tdisease",
        "T1\tindicated_for\tY1\tdisease\tdisease",
        "T1\thas_side_effect\tdrgA\tdisease\tdrug",
    ],
)
def test_relation_endpoint_kinds_enforced(tmp_path, bad):
    with pytest.raises(KindMismatch):
        kg.load_graph(write_lines(tmp_path / "g.tsv", [bad]))


def test_self_loop_rejected(tmp_path):
    with pytest.raises(CycleError):
        kg.load_graph(write_lines(tmp_path / "g.tsv", ["T1\tis_a\tT1\tdisease\tdisease"]))


def test_is_a_cycle_rejected(tmp_path):
    lines = [
        "A\tis_a\tB\tdisease\tdisease",
        "B\tis_a\tC\tdisease\tdisease",
        "C\tis_a\tA\tdisease\tdisease",
    ]
    with pytest.raises(CycleError) as exc:
        kg.load_graph(write_lines(tmp_path / "g.tsv", lines))
    assert "is_a" in str(exc.value)


def test_causal_cycle_through_reversed_indication_rejected(tmp_path):
    # onset A -> B plus indication (drg for B, side effect ignored) is fine;
    # a cycle needs onset edges alone since drugs are causal sinks
    lines = [
        "A\tcauses_onset\tB\tdisease\tdisease",
        "B\tcauses_onset\tA\tdisease\tdisease",
    ]
    with pytest.raises(CycleError) as exc:
        kg.load_graph(write_lines(tmp_path / "g.tsv", lines))
    assert "causal" in str(exc.value)


def test_round_trip_write_then_load(tmp_path):
    g = kg.load_graph(write_lines(tmp_path / "g.tsv", BASIC))
    out = tmp_path / "copy.tsv"
    kg.write_graph(out, g)
    g2 = kg.load_graph(out)
    assert sorted(g.edges) == sorted(g2.edges)
    assert g2.summary.n_duplicates == 0


def test_causal_dag_orientation(tmp_path):
    g = kg.load_graph(write_lines(tmp_path / "g.tsv", BASIC))
    dag = kg.causal_dag(g)
    # onset keeps direction, indication flips: disease points at its drug
    assert dag.has_edge(kg.disease("T1"), kg.disease("Y1"))
    assert dag.has_edge(kg.disease("T1"), kg.drug("drgA"))
    assert not dag.has_edge(kg.drug("drgA"), kg.disease("T1"))
    # drugs never have outgoing causal edges
    for d in g.drugs():
        assert dag.children(d) == set()


def test_causal_dag_returns_a_copy(tmp_path):
    g = kg.load_graph(write_lines(tmp_path / "g.tsv", BASIC))
    dag = kg.causal_dag(g)
    dag.add_edge(kg.disease("Y1"), kg.disease("SE1"))
    assert not kg.causal_dag(g).has_edge(kg.disease("Y1"), kg.disease("SE1"))


def test_ancestors_walk_source_to_target(tmp_path):
    lines = [
        "A\tcauses_onset\tB\tdisease\tdisease",
        "B\tcauses_onset\tC\tdisease\tdisease",
        "X\tis_a\tC\tdisease\tdisease",
    ]
    g = kg.load_graph(write_lines(tmp_path / "g.tsv", lines))
    reach = kg.ancestors(g, kg.disease("A"), kg.RelationKind.CAUSES_ONSET)
    assert reach == {kg.disease("B"), kg.disease("C")}
    # is_a edges run child -> parent, so this is the generalization chain
    assert kg.ancestors(g, kg.disease("X"), kg.RelationKind.IS_A) == {kg.disease("C")}
    with pytest.raises(UnknownNode):
        kg.ancestors(g, kg.disease("missing"), kg.RelationKind.CAUSES_ONSET)


def test_closure_codes_include_self_and_descendants(tmp_path):
    lines = [
        "child\tis_a\troot\tdisease\tdisease",
        "grand\tis_a\tchild\tdisease\tdisease",
        "other\tis_a\troot\tdisease\tdisease",
    ]
    g = kg.load_graph(write_lines(tmp_path / "g.tsv", lines))
    assert kg.closure_codes(g, kg.disease("root")) == {"root", "child", "grand", "other"}
    assert kg.closure_codes(g, kg.disease("child")) == {"child", "grand"}
    assert kg.closure_codes(g, kg.disease("grand")) == {"grand"}


def test_indicated_drugs_and_side_effects(tmp_path):
    g = kg.load_graph(write_lines(tmp_path / "g.tsv", BASIC))
    assert kg.indicated_drugs(g, kg.disease("T1")) == {kg.drug("drgA")}
    assert kg.side_effects_of(g, kg.drug("drgA")) == {kg.disease("SE1")}
    with pytest.raises(KindMismatch):
        kg.indicated_drugs(g, kg.drug("drgA"))
    with pytest.raises(KindMismatch):
        kg.side_effects_of(g, kg.disease("T1"))


def random_isa_forest(rng, n):
    """Edges child -> parent, parents drawn among earlier nodes only."""
    edges = []
    for i in range(1, n):
        if rng.random() < 0.8:
            parent = int(rng.integers(0, i))
            edges.append(kg.Edge(kg.disease(f"d{i}"), kg.RelationKind.IS_A, kg.disease(f"d{parent}")))
    return edges


def brute_descendants(edges, root):
    below = {root}
    changed = True
    while changed:
        changed = False
        for e in edges:
            if e.dst in below and e.src not in below:
                below.add(e.src)
                changed = True
    below.discard(root)
    return below


def test_isa_closure_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(2, 12))
        edges = random_isa_forest(rng, n)
        if not edges:
            continue
        g = kg.CausalKnowledgeGraph(edges)
        for node in list(g.nodes):
            want = brute_descendants(edges, node)
            assert kg.isa_descendants(g, node) == frozenset(want)
            assert kg.closure_codes(g, node) == {node.code} | {d.code for d in want}


def test_random_onset_dags_accepted_and_cycles_rejected():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(3, 8))
        order = rng.permutation(n)
        edges = []
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.4:
                    a, b = kg.disease(f"n{order[i]}"), kg.disease(f"n{order[j]}")
                    edges.append(kg.Edge(a, kg.RelationKind.CAUSES_ONSET, b))
        if not edges:
            continue
        g = kg.CausalKnowledgeGraph(edges)  # respects a topological order: fine
        dag = kg.causal_dag(g)
        assert dag.is_acyclic()
        # adding the reverse of any edge closes a cycle
        e = edges[int(rng.integers(0, len(edges)))]
        back = kg.Edge(e.dst, kg.RelationKind.CAUSES_ONSET, e.src)
        with pytest.raises(CycleError):
            kg.CausalKnowledgeGraph(edges + [back])
