import itertools
import random

import pytest

from iasm.model import (
    ArityMismatch,
    DuplicateQuery,
    EmptyQuery,
    EmptyRound,
    ForeignElement,
    History,
    NotABijection,
    OutOfRange,
    Query,
    Structure,
    SymbolInfo,
    Template,
    UnknownSymbol,
    Update,
    UpdateSet,
    Vocabulary,
    apply_iso,
    instantiate_template,
    mk_history,
    prefix,
)


def q(*tokens):
    return Query.decode(tokens)


def small_structure(extra=("a", "b"), symbols=()):
    vocab = Vocabulary(symbols)
    return Structure(vocab, extra), vocab


class TestVocabulary:
    def test_logic_names_always_present(self):
        vocab = Vocabulary()
        for name, (arity, static, relational) in {
            "true": (0, True, True),
            "false": (0, True, True),
            "undef": (0, True, False),
            "Boole": (1, True, True),
            "Equal": (2, True, True),
            "And": (2, True, True),
            "Or": (2, True, True),
            "Not": (1, True, True),
        }.items():
            info = vocab.get(name, arity)
            assert info is not None
            assert info.static == static
            assert info.relational == relational

    def test_logic_name_cannot_change_markings(self):
        with pytest.raises(Exception):
            Vocabulary([SymbolInfo("undef", 0, static=True, relational=True)])

    def test_same_name_different_arity(self):
        vocab = Vocabulary(
            [SymbolInfo("f", 1, True, False), SymbolInfo("f", 2, True, False)]
        )
        assert vocab.arities("f") == [1, 2]

    def test_conflicting_markings_rejected(self):
        with pytest.raises(Exception):
            Vocabulary(
                [SymbolInfo("f", 1, True, False), SymbolInfo("f", 1, False, False)]
            )


class TestHistory:
    def test_empty_history(self):
        h = mk_history([])
        assert len(h) == 0
        assert h.domain() == set()

    def test_rounds_encode_the_preorder(self):
        h = mk_history([[(q("l:a"), "x")], [(q("l:b"), "y"), (q("l:c"), "y")]])
        assert len(h) == 2
        assert h.leq(q("l:b"), q("l:c")) and h.leq(q("l:c"), q("l:b"))
        assert h.leq(q("l:a"), q("l:b")) and not h.leq(q("l:b"), q("l:a"))

    def test_duplicate_query_rejected(self):
        with pytest.raises(DuplicateQuery):
            mk_history([[(q("l:a"), "x")], [(q("l:a"), "y")]])
        with pytest.raises(DuplicateQuery):
            mk_history([[(q("l:a"), "x"), (q("l:a"), "y")]])

    def test_empty_round_rejected(self):
        with pytest.raises(EmptyRound):
            mk_history([[]])

    def test_prefix(self):
        h = mk_history([[(q("l:a"), "x")], [(q("l:b"), "y")]])
        assert prefix(h, 0) == History()
        assert prefix(h, len(h)) == h
        assert prefix(h, 1) == mk_history([[(q("l:a"), "x")]])
        with pytest.raises(OutOfRange):
            prefix(h, 3)

    def test_prefix_of_prefix(self):
        rng = random.Random(1)
        rounds = [[(q(f"l:a{i}"), "x")] for i in range(5)]
        h = mk_history(rounds)
        for _ in range(20):
            m = rng.randint(0, len(h))
            k = rng.randint(0, m)
            assert prefix(prefix(h, m), k) == prefix(h, k)

    def test_json_round_trip(self):
        h = mk_history([[(q("l:a", "e:x"), "x")], [(q("l:b"), "y"), (q("l:c"), "x")]])
        assert History.from_json(h.to_json()) == h


class TestTemplates:
    def test_instantiate(self):
        assert instantiate_template(Template.of("offer", "#1"), ["e3"]) == q("l:offer", "e:e3")
        assert instantiate_template(Template.of("#1", "x", "#2"), ["a", "b"]) == q(
            "e:a", "l:x", "e:b"
        )
        assert instantiate_template(Template.of("t"), []) == q("l:t")

    def test_arity_mismatch(self):
        with pytest.raises(ArityMismatch):
            instantiate_template(Template.of("#1"), [])

    def test_placeholders_once_each(self):
        with pytest.raises(Exception):
            Template.of("#1", "#1")
        with pytest.raises(Exception):
            Template.of("#2")

    def test_empty_template_yields_no_query(self):
        with pytest.raises(EmptyQuery):
            instantiate_template(Template(()), [])


class TestLookup:
    def test_equality_is_identity(self):
        s, _ = small_structure()
        for a in s.elements:
            for b in s.elements:
                want = "true" if a == b else "false"
                assert s.lookup("Equal", (a, b)) == want

    def test_boole(self):
        s, _ = small_structure()
        assert s.lookup("Boole", ("true",)) == "true"
        assert s.lookup("Boole", ("false",)) == "true"
        assert s.lookup("Boole", ("undef",)) == "false"
        assert s.lookup("Boole", ("a",)) == "false"

    def test_connectives_classical_on_booleans(self):
        s, _ = small_structure()
        tv = {"true": True, "false": False}
        for a, b in itertools.product(tv, tv):
            assert s.lookup("And", (a, b)) == ("true" if tv[a] and tv[b] else "false")
            assert s.lookup("Or", (a, b)) == ("true" if tv[a] or tv[b] else "false")
        for a in tv:
            assert s.lookup("Not", (a,)) == ("false" if tv[a] else "true")

    def test_connectives_false_outside_booleans(self):
        s, _ = small_structure()
        assert s.lookup("And", ("true", "a")) == "false"
        assert s.lookup("Or", ("a", "b")) == "false"
        assert s.lookup("Not", ("undef",)) == "false"

    def test_table_and_defaults(self):
        vocab = Vocabulary(
            [
                SymbolInfo("f", 1, static=False, relational=False),
                SymbolInfo("r", 0, static=False, relational=True),
            ]
        )
        s = Structure(vocab, {"a", "b"}, {("f", 1): {("a",): "b"}})
        assert s.lookup("f", ("a",)) == "b"
        assert s.lookup("f", ("b",)) == "undef"  # non-relational default
        assert s.lookup("r", ()) == "false"  # relational default

    def test_errors(self):
        s, _ = small_structure()
        with pytest.raises(UnknownSymbol):
            s.lookup("nope", ())
        with pytest.raises(ArityMismatch):
            s.lookup("Equal", ("a",))
        with pytest.raises(ForeignElement):
            s.lookup("Equal", ("a", "zz"))

    def test_relational_table_values_checked(self):
        vocab = Vocabulary([SymbolInfo("r", 0, static=False, relational=True)])
        with pytest.raises(Exception):
            Structure(vocab, {"a"}, {("r", 0): {(): "a"}})

    def test_logic_names_not_table_driven(self):
        with pytest.raises(Exception):
            Structure(Vocabulary(), {"a"}, {("Equal", 2): {("a", "a"): "a"}})


class TestApplyIso:
    def test_identity(self):
        s, _ = small_structure()
        ident = {e: e for e in s.elements}
        assert apply_iso(s, ident) == s
        query = q("l:l", "e:a")
        assert apply_iso(query, {"a": "a"}) == query

    def test_swap_on_query(self):
        query = q("l:l", "e:a")
        assert apply_iso(query, {"a": "b", "b": "a"}) == q("l:l", "e:b")

    def test_involution_restores(self):
        vocab = Vocabulary([SymbolInfo("f", 1, static=False, relational=False)])
        s = Structure(vocab, {"a", "b"}, {("f", 1): {("a",): "b"}})
        swap = {"a": "b", "b": "a", "true": "true", "false": "false", "undef": "undef"}
        assert apply_iso(apply_iso(s, swap), swap) == s
        h = mk_history([[(q("l:l", "e:a"), "b")]])
        assert apply_iso(apply_iso(h, swap), swap) == h
        ups = UpdateSet.of(Update("f", ("a",), "b"))
        assert apply_iso(apply_iso(ups, swap), swap) == ups

    def test_not_a_bijection(self):
        with pytest.raises(NotABijection):
            apply_iso(q("e:a", "e:b"), {"a": "c", "b": "c"})
        with pytest.raises(NotABijection):
            apply_iso(q("e:a"), {})

    def test_structure_iso_preserves_tables(self):
        vocab = Vocabulary([SymbolInfo("f", 1, static=False, relational=False)])
        s = Structure(vocab, {"a", "b"}, {("f", 1): {("a",): "b"}})
        mapping = {"a": "b", "b": "a", "true": "true", "false": "false", "undef": "undef"}
        t = apply_iso(s, mapping)
        assert t.lookup("f", ("b",)) == "a"


class TestUpdateSet:
    def test_clash_detection(self):
        no = UpdateSet.of(Update("f", (), "a"), Update("g", (), "b"))
        assert not no.has_clash()
        dup = UpdateSet.of(Update("f", (), "a"), Update("f", (), "a"))
        assert not dup.has_clash()
        clash = UpdateSet.of(Update("f", (), "a"), Update("f", (), "b"))
        assert clash.has_clash()

    def test_json_round_trip(self):
        ups = UpdateSet.of(Update("f", ("a",), "b"))
        assert UpdateSet.from_json(ups.to_json()) == ups


class TestStructureJson:
    def test_round_trip(self):
        vocab = Vocabulary(
            [
                SymbolInfo("f", 2, static=False, relational=False),
                SymbolInfo("r", 1, static=True, relational=True),
            ]
        )
        s = Structure(
            vocab,
            {"a", "b"},
            {("f", 2): {("a", "b"): "a"}, ("r", 1): {("a",): "true"}},
            {("f", 2): "b"},
        )
        again = Structure.from_json(s.to_json())
        assert again == s
        assert again.lookup("f", ("b", "b")) == "b"  # explicit default survives

    def test_elements_always_include_logic_constants(self):
        s = Structure.from_json({"elements": ["x"], "functions": {}})
        assert {"true", "false", "undef"} <= set(s.elements)
