import random
from collections import Counter

import pytest
from oracles import brute_force_matches, random_pattern, random_sentence

from synsearch.corpus import Corpus, extract_mentions, parse_conllu
from synsearch.engine import (
    IndexError_,
    build_index,
    candidate_positions,
    candidates,
    load_index,
    match_pattern,
    sample_matches,
    save_index,
    search,
)
from synsearch.patterns import Pattern, PatternEdge, PatternNode, compile_query
from synsearch.querylang import expand_triggers, parse_query

MARY = (
    "# sent_id = mary\n"
    "1\tMary\tMary\tNNP\t_\t_\t2\tnsubj\t_\tNER=B-PER\n"
    "2\tsleeps\tsleep\tVBZ\t_\t_\t0\troot\t_\t_\n"
)


def one_node_pattern(**kwargs) -> Pattern:
    # engine accepts any tree pattern; tests build degenerate ones directly
    node = PatternNode(capture_name="e1", **kwargs)
    other = PatternNode(capture_name="e2")
    return Pattern(id="tiny", nodes=(node, other),
                   edges=(PatternEdge(0, 1, "dep"),),
                   signature=(frozenset(), frozenset()))


def test_index_single_sentence_postings():
    corpus = Corpus(parse_conllu(MARY))
    index = build_index(corpus)
    assert index.posting_sentences("word", "mary") == {0}
    assert index.posting_sentences("word", "sleeps") == {0}
    assert index.posting_sentences("lemma", "sleep") == {0}
    assert index.posting_sentences("pos", "NNP") == {0}
    assert index.posting_sentences("dep_label", "nsubj") == {0}
    assert index.postings("entity_type", "PER") == [(0, (0,))]
    assert index.posting_sentences("word", "absent") == set()


def test_index_empty_corpus():
    index = build_index(Corpus([]))
    assert index.stats()["sentences"] == 0
    assert index.posting_sentences("word", "x") == set()


def test_postings_match_linear_scan(planted_small, planted_small_index):
    corpus, _, _ = planted_small
    index = planted_small_index
    counts = {kind: Counter() for kind in ("word", "lemma", "pos", "dep_label")}
    entity_counts = Counter()
    for sent in corpus:
        for t in sent.tokens:
            counts["word"][t.word.lower()] += 1
            counts["lemma"][t.lemma.lower()] += 1
            counts["pos"][t.pos] += 1
            counts["dep_label"][t.dep_label] += 1
        for m in extract_mentions(sent):
            entity_counts[m.entity_type] += 1
    for kind, counter in counts.items():
        for value, count in counter.items():
            posted = sum(len(toks) for _, toks in index.postings(kind, value))
            assert posted == count, (kind, value)
    for etype, count in entity_counts.items():
        posted = sum(len(toks) for _, toks in index.postings("entity_type", etype))
        assert posted == count


def test_posting_lists_sorted_unique(planted_small_index):
    index = planted_small_index
    for kind in ("word", "lemma", "pos", "entity_type", "dep_label"):
        for value, entries in index._postings[kind].items():
            positions = [pos for pos, _ in entries]
            assert positions == sorted(set(positions)), (kind, value)


def test_candidates_single_word_constraint(planted_small, planted_small_index):
    corpus, _, _ = planted_small
    index = planted_small_index
    expected = {s.id for s in corpus if "founded" in [t.word.lower() for t in s.tokens]}
    pattern = one_node_pattern(word_set=frozenset({"founded"}))
    got = candidates(pattern, index)
    # superset-safe over the word constraint; dep edge narrows further
    assert set(got) <= expected
    word_only = Pattern(id="w", nodes=(PatternNode(word_set=frozenset({"founded"}),
                                                   capture_name="e1"),
                                       ),
                        edges=(), signature=(frozenset(), frozenset()))
    # single-node pattern without edges: candidates are exactly the word hits
    assert set(candidates(word_only, index)) == expected


def test_candidates_unconstrained_pattern(planted_small, planted_small_index):
    corpus, _, _ = planted_small
    pattern = Pattern(id="any", nodes=(PatternNode(capture_name="e1"),),
                      edges=(), signature=(frozenset(), frozenset()))
    assert candidates(pattern, planted_small_index) == [s.id for s in corpus]


def test_candidates_superset_of_matches(founded_patterns, planted_small,
                                        planted_small_index):
    corpus, _, _ = planted_small
    for pattern in founded_patterns:
        cand = set(candidate_positions(pattern, planted_small_index))
        matching = {pos for pos, sent in enumerate(corpus)
                    if match_pattern(pattern, sent)}
        assert matching <= cand


def test_match_founded_self(fixture_patterns, fixture_parses):
    parse = next(p for p in fixture_parses if p.id == "founded-2")
    matches = match_pattern(fixture_patterns["founded-2"], parse)
    assert len(matches) == 1
    assert matches[0].bindings == {"e1": (2, 2), "e2": (0, 0), "t": (1, 1)}


def test_unconstrained_single_node_matches_every_token(founded_sentence):
    # edgeless one-node pattern: one match per token (matcher-level semantics;
    # compiled patterns always carry both argument captures)
    single = Pattern(id="one", nodes=(PatternNode(capture_name="x"),),
                     edges=(), signature=(frozenset(), frozenset()))
    matches = match_pattern(single, founded_sentence)
    assert len(matches) == len(founded_sentence.tokens)
    assert [m.node_tokens[0] for m in matches] == list(range(7))


def test_two_node_unconstrained_edge():
    sent = parse_conllu(MARY)[0]
    single = Pattern(id="one", nodes=(PatternNode(capture_name="e1"),
                                      PatternNode(capture_name="e2")),
                     edges=(PatternEdge(0, 1, "nsubj"),),
                     signature=(frozenset(), frozenset()))
    assert len(match_pattern(single, sent)) == 1


def test_match_direction_matters():
    sent = parse_conllu(MARY)[0]
    backwards = Pattern(
        id="rev", nodes=(PatternNode(capture_name="e1"), PatternNode(capture_name="e2")),
        edges=(PatternEdge(1, 0, "nsubj"),),  # e1 must be the child now
        signature=(frozenset(), frozenset()))
    forward = Pattern(
        id="fwd", nodes=(PatternNode(capture_name="e1"), PatternNode(capture_name="e2")),
        edges=(PatternEdge(0, 1, "nsubj"),),
        signature=(frozenset(), frozenset()))
    fwd = match_pattern(forward, sent)
    rev = match_pattern(backwards, sent)
    assert len(fwd) == len(rev) == 1
    assert fwd[0].bindings["e1"] != rev[0].bindings["e1"]


def test_entity_constraint_only_mention_heads(founded_sentence):
    # DATE mention is (April, 1975) headed at April; 1975 must not satisfy it
    node = PatternNode(entity_set=frozenset({"DATE"}), capture_name="e1")
    other = PatternNode(capture_name="e2", pos_set=frozenset({"VBD"}))
    pattern = Pattern(id="d", nodes=(node, other),
                      edges=(PatternEdge(1, 0, "obl"),),
                      signature=(frozenset({"DATE"}), frozenset()))
    matches = match_pattern(pattern, founded_sentence)
    assert len(matches) == 1
    assert matches[0].node_tokens[0] == 4  # April, the mention head


def test_expansion_rules(founded_sentence):
    query = parse_query(
        "<>e2:[e=PER]Paul <>t:[w]founded <>e1:[e=ORG]Microsoft in April 1975 .",
        query_id="x")
    pattern = compile_query(query, founded_sentence)
    match = match_pattern(pattern, founded_sentence)[0]
    assert match.bindings["e2"] == (0, 0)  # entity: mention span
    assert match.bindings["t"] == (0, 6)  # non-entity expand: subtree yield


def test_overlapping_e1_e2_discarded(founded_sentence):
    # both captures constrained to the same PER mention head
    node1 = PatternNode(entity_set=frozenset({"PER"}), capture_name="e1")
    node2 = PatternNode(capture_name="e2", word_set=frozenset({"founded"}))
    pattern = Pattern(id="o", nodes=(node1, node2),
                      edges=(PatternEdge(1, 0, "nsubj"),),
                      signature=(frozenset({"PER"}), frozenset()))
    assert match_pattern(pattern, founded_sentence)  # sanity: it matches
    clash = Pattern(id="c", nodes=(
        PatternNode(entity_set=frozenset({"PER"}), capture_name="e1", expand=True),
        PatternNode(capture_name="e2", expand=True)),
        edges=(PatternEdge(1, 0, "nsubj"),),
        signature=(frozenset({"PER"}), frozenset()))
    # e2 expands to the subtree of "founded" = whole sentence, overlapping e1
    assert match_pattern(clash, founded_sentence) == []


def test_match_ordering_deterministic(fixture_patterns, fixture_parses):
    parse = next(p for p in fixture_parses if p.id == "child-3")
    matches = match_pattern(fixture_patterns["child-3"], parse)
    assert len(matches) == 3
    keys = [m.sort_key(fixture_patterns["child-3"].root()) for m in matches]
    assert keys == sorted(keys)


def test_matcher_against_brute_force_oracle():
    rng = random.Random(2024)
    trials = 300
    nonempty = 0
    for trial in range(trials):
        sent = random_sentence(rng, f"r{trial}")
        pattern = random_pattern(rng, f"p{trial}")
        if len(pattern.nodes) > len(sent.tokens):
            continue
        got = sorted((m.node_tokens, tuple(sorted(m.bindings.items())))
                     for m in match_pattern(pattern, sent))
        expected = brute_force_matches(pattern, sent)
        assert got == expected, f"trial {trial}"
        nonempty += bool(expected)
    assert nonempty > 10  # the generator must produce real matches


def test_search_pagination(planted_small, planted_small_index):
    pattern_all = Pattern(id="verb", nodes=(
        PatternNode(capture_name="e1", entity_set=frozenset({"PER"})),
        PatternNode(capture_name="e2", pos_set=frozenset({"VBD", "VBZ", "VBN"}))),
        edges=(PatternEdge(1, 0, "nsubj"),),
        signature=(frozenset({"PER"}), frozenset()))
    full, total = search(pattern_all, planted_small_index)
    assert total == len(full) > 5
    page, total2 = search(pattern_all, planted_small_index, limit=2, offset=2)
    assert total2 == total
    assert page == full[2:4]
    empty, total3 = search(pattern_all, planted_small_index, limit=0)
    assert empty == [] and total3 == total


def test_search_nothing(planted_small_index):
    pattern = one_node_pattern(word_set=frozenset({"zzz-not-here"}))
    matches, total = search(pattern, planted_small_index)
    assert matches == [] and total == 0


def test_search_ascending_store_order(founded_patterns, planted_small,
                                      planted_small_index):
    corpus, _, _ = planted_small
    matches, _ = search(founded_patterns[1], planted_small_index)
    positions = [corpus.position(m.sentence_id) for m in matches]
    assert positions == sorted(positions)


def test_sample_determinism(founded_patterns, planted_small_index):
    pattern = founded_patterns[1]
    a = sample_matches(pattern, planted_small_index, 3, seed=42)
    b = sample_matches(pattern, planted_small_index, 3, seed=42)
    assert a == b
    c = sample_matches(pattern, planted_small_index, 3, seed=43)
    assert len(c) == 3


def test_sample_n_larger_than_total(founded_patterns, planted_small_index):
    pattern = founded_patterns[0]
    _, total = search(pattern, planted_small_index)
    sample = sample_matches(pattern, planted_small_index, total + 5, seed=1)
    assert len(sample) == total


def test_sample_uniformity_chi_square(planted_small, planted_small_index):
    pattern = Pattern(id="verb", nodes=(
        PatternNode(capture_name="e1", entity_set=frozenset({"PER"})),
        PatternNode(capture_name="e2", word_set=frozenset({"founded"}))),
        edges=(PatternEdge(1, 0, "nsubj"),),
        signature=(frozenset({"PER"}), frozenset()))
    matches, total = search(pattern, planted_small_index)
    assert total >= 2
    counter = Counter()
    trials = 1000 * total // 10 * 10  # keep runtime modest, scaled to total
    trials = max(trials, 1000)
    for seed in range(trials):
        (m,) = sample_matches(pattern, planted_small_index, 1, seed=seed)
        counter[(m.sentence_id, m.node_tokens)] += 1
    expected = trials / total
    for key, count in counter.items():
        assert abs(count - expected) < expected * 0.5, (key, count, expected)
    assert len(counter) == total


def test_index_round_trip(tmp_path, planted_small, planted_small_index):
    corpus, _, _ = planted_small
    save_index(planted_small_index, tmp_path / "idx")
    loaded = load_index(tmp_path / "idx", corpus)
    assert loaded._postings == planted_small_index._postings
    assert loaded.corpus_hash == planted_small_index.corpus_hash


def test_index_hash_mismatch(tmp_path, planted_small, planted_small_index):
    save_index(planted_small_index, tmp_path / "idx")
    other = Corpus(parse_conllu(MARY))
    with pytest.raises(IndexError_, match="hash mismatch"):
        load_index(tmp_path / "idx", other)


def test_index_missing_manifest(tmp_path):
    with pytest.raises(IndexError_, match="manifest"):
        load_index(tmp_path)


def test_trigger_expansion_monotone(planted_small, planted_small_index, trigger_map,
                                    fixture_queries, fixture_parses):
    query = next(q for q in fixture_queries if q.id == "founded-2")
    parse = next(p for p in fixture_parses if p.id == "founded-2")
    base = compile_query(query, parse, pattern_id="base")
    expanded = compile_query(expand_triggers(query, trigger_map), parse, pattern_id="exp")

    def match_set(pattern):
        matches, _ = search(pattern, planted_small_index)
        return {(m.sentence_id, m.bindings["e1"], m.bindings["e2"]) for m in matches}

    assert match_set(base) <= match_set(expanded)


def test_search_completeness_no_candidate_loss(founded_patterns):
    # on a small corpus, search must equal brute-force matching over EVERY
    # sentence: the candidate pre-filter may never drop a matching sentence
    from planting import corpus_sentences, plant_corpus
    positives, negatives = plant_corpus(12, 18, seed=8)
    corpus = Corpus(corpus_sentences(positives, negatives))
    assert len(corpus) == 30
    index = build_index(corpus)
    for pattern in founded_patterns:
        full_scan = [m for sent in corpus for m in match_pattern(pattern, sent)]
        via_index, total = search(pattern, index)
        assert total == len(full_scan)
        assert [(m.sentence_id, m.node_tokens) for m in via_index] == \
            [(m.sentence_id, m.node_tokens) for m in full_scan]


def test_search_soundness_reverified(founded_patterns, planted_small,
                                     planted_small_index):
    # independently re-verify every hit: constraints, edge labels, direction
    corpus, _, _ = planted_small
    for pattern in founded_patterns:
        matches, _ = search(pattern, planted_small_index)
        assert matches
        for m in matches:
            sent = corpus.get(m.sentence_id)
            heads = {t.index: (t.head, t.dep_label) for t in sent.tokens}
            mention_heads = {x.head_token: x for x in extract_mentions(sent)}
            for node_idx, tok_idx in enumerate(m.node_tokens):
                nd = pattern.nodes[node_idx]
                tok = sent.tokens[tok_idx]
                if nd.word_set is not None:
                    assert tok.word.lower() in nd.word_set
                if nd.lemma_set is not None:
                    assert tok.lemma.lower() in nd.lemma_set
                if nd.pos_set is not None:
                    assert tok.pos in nd.pos_set
                if nd.entity_set is not None:
                    assert tok_idx in mention_heads
                    assert mention_heads[tok_idx].entity_type in nd.entity_set
            assert len(set(m.node_tokens)) == len(m.node_tokens)  # injective
            for edge in pattern.edges:
                child_tok = m.node_tokens[edge.child]
                head, label = heads[child_tok]
                assert head == m.node_tokens[edge.parent]
                assert label == edge.dep_label


def test_concurrent_searches_equal_serial(founded_patterns, planted_small_index):
    from concurrent.futures import ThreadPoolExecutor
    serial = {p.id: search(p, planted_small_index) for p in founded_patterns}
    with ThreadPoolExecutor(max_workers=6) as pool:
        futures = {p.id: [pool.submit(search, p, planted_small_index)
                          for _ in range(4)]
                   for p in founded_patterns}
        for pid, futs in futures.items():
            for fut in futs:
                assert fut.result() == serial[pid]
