"""Free-text query parsing.

Grammar:

    query  := clause (("and" | "or") clause)*
    clause := adjective+ garment-noun

Adjectives concatenate into one (possibly multiword) color label, so
"pale beige trousers" yields the label "pale beige".  Garment nouns map
to the upper/lower region through an editable lexicon; leading verb
phrases and determiners are stripped as stop words.  "and" binds tighter
than "or", both left-associative.

Color labels are open vocabulary: any non-noun, non-connective token is
accepted as (part of) a label, so new colors never require parser changes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

GARMENTS = ("upper", "lower")


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class Leaf:
    garment: str  # "upper" | "lower"
    color_label: str

    def pretty(self) -> str:
        noun = "jacket" if self.garment == "upper" else "trousers"
        return f"{self.color_label} {noun}"


@dataclass(frozen=True)
class And:
    children: tuple

    def pretty(self) -> str:
        return " and ".join(c.pretty() for c in self.children)


@dataclass(frozen=True)
class Or:
    children: tuple

    def pretty(self) -> str:
        return " or ".join(c.pretty() for c in self.children)


QueryAst = Leaf | And | Or


def leaves(ast: QueryAst) -> list[Leaf]:
    if isinstance(ast, Leaf):
        return [ast]
    out = []
    for c in ast.children:
        out.extend(leaves(c))
    return out


def _read_word_file(path) -> list[str]:
    lines = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            lines.append(line.lower())
    return lines


def _default_data(name: str):
    return resources.files("garmentsearch").joinpath("data", name)


class QueryParser:
    """Tokenizer + recursive-descent parser over the clause grammar."""

    def __init__(self, lexicon_file=None, stop_words_file=None):
        lex_path = lexicon_file or _default_data("garment_lexicon.txt")
        stop_path = stop_words_file or _default_data("stop_words.txt")
        self.lexicon: dict[str, str] = {}
        for line in _read_word_file(lex_path):
            parts = line.split()
            if len(parts) != 2 or parts[1] not in GARMENTS:
                raise ValueError(f"bad lexicon line: {line!r}")
            self.lexicon[parts[0]] = parts[1]
        self.stop_words = set(_read_word_file(stop_path))

    def tokenize(self, text: str) -> list[str]:
        raw = re.findall(r"[a-zA-Z]+", text.lower())
        return [t for t in raw if t not in self.stop_words]

    def parse(self, text: str) -> QueryAst:
        tokens = self.tokenize(text)
        if not tokens:
            raise ParseError(f"no parseable tokens in {text!r}")
        self._toks = tokens
        self._pos = 0
        ast = self._or_expr()
        if self._pos != len(self._toks):
            raise ParseError(f"trailing tokens: {self._toks[self._pos:]}")
        return ast

    def _peek(self):
        return self._toks[self._pos] if self._pos < len(self._toks) else None

    def _or_expr(self) -> QueryAst:
        children = [self._and_expr()]
        while self._peek() == "or":
            self._pos += 1
            children.append(self._and_expr())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def _and_expr(self) -> QueryAst:
        children = [self._clause()]
        while self._peek() == "and":
            self._pos += 1
            children.append(self._clause())
        return children[0] if len(children) == 1 else And(tuple(children))

    def _clause(self) -> Leaf:
        adjectives = []
        while True:
            tok = self._peek()
            if tok is None or tok in ("and", "or"):
                bad = adjectives or [tok]
                raise ParseError(f"no garment noun found near {bad}")
            self._pos += 1
            if tok in self.lexicon:
                if not adjectives:
                    raise ParseError(f"garment {tok!r} has no color label")
                return Leaf(garment=self.lexicon[tok], color_label=" ".join(adjectives))
            adjectives.append(tok)


_DEFAULT = None


def parse(text: str) -> QueryAst:
    """Parse with the packaged default lexicon and stop words."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = QueryParser()
    return _DEFAULT.parse(text)
