"""Core data model: vocabularies, finite structures, queries, reply histories.

A machine's state is a finite first-order structure with three distinguished
elements interpreting ``true``, ``false``, and ``undef``.  Interaction with the
environment is recorded as a history: an answer function from queries to
elements together with a linear pre-order on the answered queries, represented
here by its sequence of equivalence classes ("rounds").  Everything in this
module is immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence


class AsmError(Exception):
    """Base class for all library errors."""


class DuplicateQuery(AsmError):
    pass


class EmptyRound(AsmError):
    pass


class OutOfRange(AsmError):
    pass


class ArityMismatch(AsmError):
    pass


class UnknownSymbol(AsmError):
    pass


class ForeignElement(AsmError):
    pass


class NotABijection(AsmError):
    pass


class ClashError(AsmError):
    pass


class EmptyQuery(AsmError):
    pass


# The nullary logic constants and their conventional element ids.
TRUE = "true"
FALSE = "false"
UNDEF = "undef"

# name -> (arity, static, relational); always present in every vocabulary.
LOGIC_NAMES: dict[str, tuple[int, bool, bool]] = {
    "true": (0, True, True),
    "false": (0, True, True),
    "undef": (0, True, False),
    "Boole": (1, True, True),
    "Equal": (2, True, True),
    "And": (2, True, True),
    "Or": (2, True, True),
    "Not": (1, True, True),
}


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, compact separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class SymbolInfo:
    name: str
    arity: int
    static: bool
    relational: bool

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, self.arity)


class Vocabulary:
    """State vocabulary: function symbols with static/relational markings.

    The logic names are always present with their mandated markings and cannot
    be redeclared with different ones.  Symbols are identified by (name, arity).
    """

    def __init__(self, symbols: Iterable[SymbolInfo] = ()):
        table: dict[tuple[str, int], SymbolInfo] = {}
        for name, (arity, static, relational) in LOGIC_NAMES.items():
            table[(name, arity)] = SymbolInfo(name, arity, static, relational)
        for sym in symbols:
            if sym.name in LOGIC_NAMES:
                want = LOGIC_NAMES[sym.name]
                if (sym.arity, sym.static, sym.relational) != want:
                    raise AsmError(
                        f"logic name {sym.name} cannot be redeclared as "
                        f"{sym.arity}/static={sym.static}/relational={sym.relational}"
                    )
                continue
            if sym.key in table:
                if table[sym.key] != sym:
                    raise AsmError(f"conflicting declarations for {sym.name}/{sym.arity}")
                continue
            table[sym.key] = sym
        self._table = table

    def __contains__(self, key: tuple[str, int]) -> bool:
        return key in self._table

    def get(self, name: str, arity: int) -> Optional[SymbolInfo]:
        return self._table.get((name, arity))

    def require(self, name: str, arity: int) -> SymbolInfo:
        info = self._table.get((name, arity))
        if info is None:
            if any(n == name for (n, _a) in self._table):
                raise ArityMismatch(f"{name} is not declared with arity {arity}")
            raise UnknownSymbol(f"unknown symbol {name}/{arity}")
        return info

    def has_name(self, name: str) -> bool:
        return any(n == name for (n, _a) in self._table)

    def arities(self, name: str) -> list[int]:
        return sorted(a for (n, a) in self._table if n == name)

    @property
    def symbols(self) -> list[SymbolInfo]:
        return [self._table[k] for k in sorted(self._table)]

    def dynamic_symbols(self) -> list[SymbolInfo]:
        return [s for s in self.symbols if not s.static]

    def merged(self, other: "Vocabulary") -> "Vocabulary":
        mine = {s.key: s for s in self.symbols}
        for s in other.symbols:
            if s.key in mine and mine[s.key] != s:
                raise AsmError(f"conflicting markings for {s.name}/{s.arity}")
            mine[s.key] = s
        return Vocabulary(mine.values())

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._table == other._table

    def __repr__(self) -> str:
        return f"Vocabulary({len(self._table)} symbols)"


@dataclass(frozen=True, order=True)
class Template:
    """Query template: labels interleaved with placeholders #1..#n, each once."""

    items: tuple[tuple[str, object], ...]  # ("l", label) | ("p", index)

    def __post_init__(self):
        indices = [i for kind, i in self.items if kind == "p"]
        if sorted(indices) != list(range(1, len(indices) + 1)):
            raise AsmError(f"placeholders must be exactly #1..#{len(indices)}, once each")
        for kind, payload in self.items:
            if kind not in ("l", "p"):
                raise AsmError(f"bad template item kind {kind!r}")
            if kind == "l" and not isinstance(payload, str):
                raise AsmError("label items carry label names")

    @property
    def arity(self) -> int:
        return sum(1 for kind, _ in self.items if kind == "p")

    def labels(self) -> set[str]:
        return {payload for kind, payload in self.items if kind == "l"}

    def pretty(self) -> str:
        parts = [payload if kind == "l" else f"#{payload}" for kind, payload in self.items]
        return "[" + ", ".join(parts) + "]"

    @staticmethod
    def of(*items: str) -> "Template":
        """Build from strings: '#2' is a placeholder, anything else a label."""
        out = []
        for it in items:
            if it.startswith("#"):
                out.append(("p", int(it[1:])))
            else:
                out.append(("l", it))
        return Template(tuple(out))


class ExternalVocabulary:
    """External function symbols and the template assigned to each.

    External symbols carry no static/dynamic/relational markings.  The template
    of an n-ary symbol must use placeholders #1..#n.
    """

    def __init__(self, entries: Mapping[str, Template] | Iterable[tuple[str, Template]] = ()):
        table: dict[tuple[str, int], Template] = {}
        items = entries.items() if isinstance(entries, Mapping) else entries
        for name, tpl in items:
            key = (name, tpl.arity)
            if key in table:
                raise AsmError(f"duplicate external symbol {name}/{tpl.arity}")
            table[key] = tpl
        self._table = table

    def __contains__(self, key: tuple[str, int]) -> bool:
        return key in self._table

    def get(self, name: str, arity: int) -> Optional[Template]:
        return self._table.get((name, arity))

    def has_name(self, name: str) -> bool:
        return any(n == name for (n, _a) in self._table)

    def arities(self, name: str) -> list[int]:
        return sorted(a for (n, a) in self._table if n == name)

    @property
    def entries(self) -> list[tuple[str, int, Template]]:
        return [(n, a, self._table[(n, a)]) for (n, a) in sorted(self._table)]

    def labels(self) -> set[str]:
        out: set[str] = set()
        for tpl in self._table.values():
            out |= tpl.labels()
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, ExternalVocabulary) and self._table == other._table

    def __len__(self) -> int:
        return len(self._table)

    def __repr__(self) -> str:
        return f"ExternalVocabulary({sorted(self._table)})"


@dataclass(frozen=True, order=True)
class Query:
    """A query: nonempty tuple of element and label tokens."""

    tokens: tuple[tuple[str, str], ...]  # ("e", element) | ("l", label)

    def __post_init__(self):
        if not self.tokens:
            raise EmptyQuery("queries are nonempty token sequences")
        for kind, _ in self.tokens:
            if kind not in ("e", "l"):
                raise AsmError(f"bad query token kind {kind!r}")

    def elements(self) -> set[str]:
        return {text for kind, text in self.tokens if kind == "e"}

    def encode(self) -> list[str]:
        return [f"{kind}:{text}" for kind, text in self.tokens]

    def pretty(self) -> str:
        return " ".join(self.encode())

    @staticmethod
    def decode(tokens: Sequence[str]) -> "Query":
        out = []
        for tok in tokens:
            kind, sep, text = tok.partition(":")
            if not sep or kind not in ("e", "l"):
                raise AsmError(f"bad query token {tok!r}: expected 'e:<elem>' or 'l:<label>'")
            out.append((kind, text))
        return Query(tuple(out))


Round = frozenset  # of (Query, reply element) pairs


class History:
    """Answer function plus linear pre-order, stored as rounds.

    ``rounds`` is a sequence of nonempty sets of (query, reply) pairs; the
    pre-order q <= q' holds iff round(q) <= round(q').  Queries are distinct
    across the whole history.  Length is the number of rounds.
    """

    __slots__ = ("rounds", "_answers", "_round_of", "_hash")

    def __init__(self, rounds: Sequence[Iterable[tuple[Query, str]]] = ()):
        norm: list[Round] = []
        answers: dict[Query, str] = {}
        round_of: dict[Query, int] = {}
        for idx, rnd in enumerate(rounds):
            pairs = frozenset(rnd)
            if not pairs:
                raise EmptyRound(f"round {idx} is empty")
            if len({q for q, _ in pairs}) != len(pairs):
                raise DuplicateQuery(f"round {idx} answers a query twice")
            for q, _reply in pairs:
                if q in answers:
                    raise DuplicateQuery(f"query {q.pretty()} answered twice")
            for q, reply in pairs:
                answers[q] = reply
                round_of[q] = idx
            norm.append(pairs)
        self.rounds: tuple[Round, ...] = tuple(norm)
        self._answers = answers
        self._round_of = round_of
        self._hash = hash(self.rounds)

    def __len__(self) -> int:
        return len(self.rounds)

    def __eq__(self, other) -> bool:
        return isinstance(other, History) and self.rounds == other.rounds

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"History({len(self.rounds)} rounds, {len(self._answers)} answers)"

    @property
    def answers(self) -> Mapping[Query, str]:
        return self._answers

    def reply(self, q: Query) -> Optional[str]:
        return self._answers.get(q)

    def answered(self, q: Query, upto: Optional[int] = None) -> bool:
        """Is q answered within the first ``upto`` rounds (default: all)?"""
        idx = self._round_of.get(q)
        if idx is None:
            return False
        return True if upto is None else idx < upto

    def round_of(self, q: Query) -> Optional[int]:
        return self._round_of.get(q)

    def domain(self) -> set[Query]:
        return set(self._answers)

    def replies(self) -> set[str]:
        return set(self._answers.values())

    def prefix(self, m: int) -> "History":
        if m < 0 or m > len(self.rounds):
            raise OutOfRange(f"prefix length {m} not in 0..{len(self.rounds)}")
        if m == len(self.rounds):
            return self
        return History(self.rounds[:m])

    def extend(self, rnd: Iterable[tuple[Query, str]]) -> "History":
        return History(list(self.rounds) + [list(rnd)])

    def leq(self, q1: Query, q2: Query) -> bool:
        """The pre-order induced by rounds; both queries must be answered."""
        r1, r2 = self._round_of.get(q1), self._round_of.get(q2)
        if r1 is None or r2 is None:
            raise AsmError("pre-order is only defined on answered queries")
        return r1 <= r2

    def to_json(self) -> dict:
        return {
            "rounds": [
                [
                    {"query": q.encode(), "reply": f"e:{reply}"}
                    for q, reply in sorted(rnd, key=lambda p: (p[0], p[1]))
                ]
                for rnd in self.rounds
            ]
        }

    @staticmethod
    def from_json(data: dict) -> "History":
        rounds = []
        for rnd in data.get("rounds", []):
            pairs = []
            for entry in rnd:
                q = Query.decode(entry["query"])
                reply = entry["reply"]
                if not reply.startswith("e:"):
                    raise AsmError(f"reply must be an element token, got {reply!r}")
                pairs.append((q, reply[2:]))
            rounds.append(pairs)
        return History(rounds)


def mk_history(rounds: Sequence[Iterable[tuple[Query, str]]]) -> History:
    """Validate and build a history from its rounds."""
    return History(rounds)


def prefix(h: History, m: int) -> History:
    """The initial segment consisting of the first m rounds."""
    return h.prefix(m)


def instantiate_template(tpl: Template, args: Sequence[str]) -> Query:
    """Fill placeholders #i with args[i-1]; labels keep their positions."""
    if len(args) != tpl.arity:
        raise ArityMismatch(f"template arity {tpl.arity}, got {len(args)} args")
    tokens = []
    for kind, payload in tpl.items:
        if kind == "l":
            tokens.append(("l", payload))
        else:
            tokens.append(("e", args[payload - 1]))
    return Query(tuple(tokens))


@dataclass(frozen=True, order=True)
class Update:
    """One location update: function symbol, argument tuple, new value."""

    func: str
    args: tuple[str, ...]
    value: str

    @property
    def location(self) -> tuple[str, tuple[str, ...]]:
        return (self.func, self.args)


@dataclass(frozen=True)
class UpdateSet:
    updates: frozenset[Update] = frozenset()

    @staticmethod
    def of(*updates: Update) -> "UpdateSet":
        return UpdateSet(frozenset(updates))

    def __iter__(self):
        return iter(sorted(self.updates))

    def __len__(self) -> int:
        return len(self.updates)

    def __or__(self, other: "UpdateSet") -> "UpdateSet":
        return UpdateSet(self.updates | other.updates)

    def issubset(self, other: "UpdateSet") -> bool:
        return self.updates <= other.updates

    def has_clash(self) -> bool:
        seen: dict[tuple[str, tuple[str, ...]], str] = {}
        for u in self.updates:
            prev = seen.get(u.location)
            if prev is not None and prev != u.value:
                return True
            seen[u.location] = u.value
        return False

    def to_json(self) -> list:
        return [[u.func, list(u.args), u.value] for u in sorted(self.updates)]

    @staticmethod
    def from_json(data: Iterable) -> "UpdateSet":
        return UpdateSet(frozenset(Update(f, tuple(args), v) for f, args, v in data))


class Structure:
    """Finite structure: element universe plus interpretation tables.

    Interpretations are partial tables with a per-symbol default (undef for
    ordinary symbols, false for relational ones).  The logic names are computed,
    never table-driven.  The three logic constants are the elements named
    ``true``, ``false``, ``undef``, which are always part of the universe.
    """

    __slots__ = ("vocabulary", "elements", "_tables", "_defaults", "_fingerprint")

    def __init__(
        self,
        vocabulary: Vocabulary,
        elements: Iterable[str],
        tables: Mapping[tuple[str, int], Mapping[tuple[str, ...], str]] | None = None,
        defaults: Mapping[tuple[str, int], str] | None = None,
    ):
        elems = set(elements) | {TRUE, FALSE, UNDEF}
        self.vocabulary = vocabulary
        self.elements: frozenset[str] = frozenset(elems)
        self._tables: dict[tuple[str, int], dict[tuple[str, ...], str]] = {}
        self._defaults: dict[tuple[str, int], str] = dict(defaults or {})
        for key, tab in (tables or {}).items():
            name, arity = key
            info = vocabulary.require(name, arity)
            if name in LOGIC_NAMES:
                raise AsmError(f"logic name {name} is computed, not table-driven")
            clean: dict[tuple[str, ...], str] = {}
            for args, value in tab.items():
                if len(args) != arity:
                    raise ArityMismatch(f"{name}/{arity} applied to {len(args)} args")
                for a in (*args, value):
                    if a not in self.elements:
                        raise ForeignElement(f"{a!r} is not an element")
                if info.relational and value not in (TRUE, FALSE):
                    raise AsmError(f"relational {name} must map into true/false")
                clean[tuple(args)] = value
            self._tables[key] = clean
        for key, dflt in self._defaults.items():
            vocabulary.require(*key)
            if dflt not in self.elements:
                raise ForeignElement(f"default {dflt!r} is not an element")
        self._fingerprint: Optional[tuple] = None

    def default(self, name: str, arity: int) -> str:
        dflt = self._defaults.get((name, arity))
        if dflt is not None:
            return dflt
        info = self.vocabulary.require(name, arity)
        return FALSE if info.relational else UNDEF

    def lookup(self, name: str, args: Sequence[str]) -> str:
        """Value of the symbol at the argument tuple.

        Logic names follow the fixed conventions: equality is literal identity,
        Boole tests membership in {true, false}, and the connectives are
        classical on {true, false} and false whenever an argument is outside.
        """
        args = tuple(args)
        info = self.vocabulary.require(name, len(args))
        for a in args:
            if a not in self.elements:
                raise ForeignElement(f"{a!r} is not an element")
        if name in LOGIC_NAMES:
            return self._logic(name, args)
        tab = self._tables.get((name, len(args)))
        if tab is not None and args in tab:
            return tab[args]
        return self.default(name, len(args))

    def _logic(self, name: str, args: tuple[str, ...]) -> str:
        if name == "true":
            return TRUE
        if name == "false":
            return FALSE
        if name == "undef":
            return UNDEF
        if name == "Equal":
            return TRUE if args[0] == args[1] else FALSE
        if name == "Boole":
            return TRUE if args[0] in (TRUE, FALSE) else FALSE
        if any(a not in (TRUE, FALSE) for a in args):
            return FALSE
        if name == "And":
            return TRUE if args == (TRUE, TRUE) else FALSE
        if name == "Or":
            return FALSE if args == (FALSE, FALSE) else TRUE
        if name == "Not":
            return TRUE if args[0] == FALSE else FALSE
        raise UnknownSymbol(name)

    def with_updates(self, updates: UpdateSet) -> "Structure":
        """Apply a clash-free update set; same universe, statics untouched."""
        if updates.has_clash():
            raise ClashError("update set contains two values for one location")
        tables = {k: dict(v) for k, v in self._tables.items()}
        for u in updates.updates:
            info = self.vocabulary.require(u.func, len(u.args))
            if info.static:
                raise AsmError(f"cannot update static symbol {u.func}")
            for a in (*u.args, u.value):
                if a not in self.elements:
                    raise ForeignElement(f"{a!r} is not an element")
            if info.relational and u.value not in (TRUE, FALSE):
                raise AsmError(f"relational {u.func} must map into true/false")
            tables.setdefault((u.func, len(u.args)), {})[u.args] = u.value
        return Structure(self.vocabulary, self.elements, tables, self._defaults)

    def table_items(self) -> list[tuple[str, int, tuple[str, ...], str]]:
        out = []
        for (name, arity), tab in self._tables.items():
            for args, value in tab.items():
                out.append((name, arity, args, value))
        return sorted(out)

    def fingerprint(self) -> tuple:
        """Canonical content key ignoring entries equal to the default."""
        if self._fingerprint is None:
            rows = tuple(
                (n, a, args, v)
                for (n, a, args, v) in self.table_items()
                if v != self.default(n, a)
            )
            # Explicit defaults equal to the conventional one are not content.
            dflts = tuple(
                sorted(
                    (n, a, v)
                    for (n, a), v in self._defaults.items()
                    if v
                    != ("false" if self.vocabulary.require(n, a).relational else "undef")
                )
            )
            self._fingerprint = (tuple(sorted(self.elements)), rows, dflts)
        return self._fingerprint

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Structure)
            and self.vocabulary == other.vocabulary
            and self.fingerprint() == other.fingerprint()
        )

    def __hash__(self) -> int:
        return hash(self.fingerprint())

    def __repr__(self) -> str:
        return f"Structure({len(self.elements)} elements)"

    def to_json(self) -> dict:
        functions: dict[str, dict] = {}
        for (name, arity), tab in sorted(self._tables.items()):
            entry: dict = {"default": self.default(name, arity)}
            entry["table"] = [[list(args), value] for args, value in sorted(tab.items())]
            functions[f"{name}/{arity}"] = entry
        for (name, arity), dflt in sorted(self._defaults.items()):
            functions.setdefault(f"{name}/{arity}", {"default": dflt, "table": []})
        dynamic = [f"{s.name}/{s.arity}" for s in self.vocabulary.dynamic_symbols()]
        relational = [
            f"{s.name}/{s.arity}"
            for s in self.vocabulary.symbols
            if s.relational and s.name not in LOGIC_NAMES
        ]
        return {
            "elements": sorted(self.elements),
            "functions": functions,
            "dynamic": sorted(dynamic),
            "relational": sorted(relational),
        }

    @staticmethod
    def from_json(data: dict, vocabulary: Optional[Vocabulary] = None) -> "Structure":
        dynamic = set(data.get("dynamic", []))
        relational = set(data.get("relational", []))
        mentioned = set(data.get("functions", {})) | dynamic | relational
        symbols = []
        for ref in mentioned:
            name, sep, arity = ref.partition("/")
            if not sep:
                raise AsmError(f"function refs look like 'f/2', got {ref!r}")
            if name in LOGIC_NAMES:
                continue
            symbols.append(
                SymbolInfo(name, int(arity), static=ref not in dynamic, relational=ref in relational)
            )
        vocab = Vocabulary(symbols)
        if vocabulary is not None:
            vocab = vocab.merged(vocabulary)
        tables: dict[tuple[str, int], dict[tuple[str, ...], str]] = {}
        defaults: dict[tuple[str, int], str] = {}
        for ref, entry in data.get("functions", {}).items():
            name, _, arity_s = ref.partition("/")
            key = (name, int(arity_s))
            if "default" in entry:
                defaults[key] = entry["default"]
            tab = {}
            for args, value in entry.get("table", []):
                tab[tuple(args)] = value
            tables[key] = tab
        return Structure(vocab, data.get("elements", []), tables, defaults)


def _check_bijection(mapping: Mapping[str, str], domain: Iterable[str]) -> None:
    dom = set(domain)
    missing = dom - set(mapping)
    if missing:
        raise NotABijection(f"mapping not total: missing {sorted(missing)[:3]}")
    image = [mapping[e] for e in dom]
    if len(set(image)) != len(image):
        raise NotABijection("mapping is not injective")


def apply_iso(obj, mapping: Mapping[str, str]):
    """Rename elements throughout a Structure, Query, History, or UpdateSet.

    ``mapping`` must be a bijection on the ambient element universe; labels and
    round boundaries are preserved.
    """
    if isinstance(obj, Structure):
        _check_bijection(mapping, obj.elements)
        tables = {
            key: {
                tuple(mapping[a] for a in args): mapping[value]
                for args, value in tab.items()
            }
            for key, tab in obj._tables.items()
        }
        defaults = {key: mapping[v] for key, v in obj._defaults.items()}
        # Renaming must keep the logic constants at their conventional ids.
        for fixed in (TRUE, FALSE, UNDEF):
            if mapping.get(fixed, fixed) != fixed:
                raise NotABijection(f"renaming must fix the logic constant {fixed!r}")
        return Structure(obj.vocabulary, (mapping[e] for e in obj.elements), tables, defaults)
    if isinstance(obj, Query):
        elems = obj.elements()
        _check_bijection(mapping, elems)
        return Query(
            tuple(
                (kind, mapping[text] if kind == "e" else text) for kind, text in obj.tokens
            )
        )
    if isinstance(obj, History):
        elems: set[str] = set()
        for rnd in obj.rounds:
            for q, reply in rnd:
                elems |= q.elements()
                elems.add(reply)
        _check_bijection(mapping, elems)
        return History(
            [
                [(apply_iso(q, mapping), mapping[reply]) for q, reply in rnd]
                for rnd in obj.rounds
            ]
        )
    if isinstance(obj, UpdateSet):
        elems = set()
        for u in obj.updates:
            elems.update(u.args)
            elems.add(u.value)
        _check_bijection(mapping, elems)
        return UpdateSet(
            frozenset(
                Update(u.func, tuple(mapping[a] for a in u.args), mapping[u.value])
                for u in obj.updates
            )
        )
    raise AsmError(f"apply_iso does not handle {type(obj).__name__}")
