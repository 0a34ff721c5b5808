"""Reader and writer for clause text.

The accepted syntax is the classic clause notation: `head :- goal, goal.`,
facts `head.`, `[a, b | Tail]` lists, `'quoted atoms'`, and `%` or `#`
line comments. Infix comparison and arithmetic operators are parsed into
ordinary compound terms (`X < 3` becomes `'<'(X, 3)`).

The writer emits a canonical functional form (with list sugar) that this
parser reads back to an equal term, which is what the wire format and
trace files rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ParseError
from .terms import (
    Atom,
    Compound,
    EMPTY_LIST,
    HostValue,
    Number,
    Term,
    Variable,
    fresh_variable,
    list_items,
    make_list,
)

_SYMBOL_OPS = ("=:=", "=\\=", ":-", "=<", ">=", "\\=", "==", "<", ">", "=", "+", "-", "*", "/", "|")
_WORD_OPS = frozenset({"is", "mod"})

_COMPARISONS = frozenset({"<", ">", "=<", ">=", "=:=", "=\\=", "=", "\\=", "==", "is"})
_ADDITIVE = frozenset({"+", "-"})
_MULTIPLICATIVE = frozenset({"*", "/", "mod"})


@dataclass(frozen=True)
class _Token:
    kind: str  # atom | var | int | float | op | punct | end
    text: str
    line: int


def tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n, line = 0, len(text), 1
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c.isspace():
            i += 1
            continue
        if c in "%#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == "'":
            j, buf = i + 1, []
            while j < n:
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                    continue
                if text[j] == "'":
                    break
                if text[j] == "\n":
                    line += 1
                buf.append(text[j])
                j += 1
            else:
                raise ParseError("unterminated quoted atom", line)
            tokens.append(_Token("atom", "".join(buf), line))
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
                if j < n and text[j] in "eE":
                    k = j + 1
                    if k < n and text[k] in "+-":
                        k += 1
                    if k < n and text[k].isdigit():
                        j = k
                        while j < n and text[j].isdigit():
                            j += 1
                tokens.append(_Token("float", text[i:j], line))
            else:
                tokens.append(_Token("int", text[i:j], line))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word in _WORD_OPS:
                tokens.append(_Token("op", word, line))
            elif word[0].isupper() or word[0] == "_":
                tokens.append(_Token("var", word, line))
            else:
                tokens.append(_Token("atom", word, line))
            i = j
            continue
        if c == ".":
            nxt = text[i + 1] if i + 1 < n else " "
            if nxt.isspace() or nxt in "%#" or i + 1 == n:
                tokens.append(_Token("end", ".", line))
                i += 1
                continue
            raise ParseError("unexpected '.'", line)
        if c in "()[],":
            tokens.append(_Token("punct", c, line))
            i += 1
            continue
        for op in _SYMBOL_OPS:
            if text.startswith(op, i):
                tokens.append(_Token("op", op, line))
                i += len(op)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line)
    return tokens


_ATOM_BARE_OK = frozenset("abcdefghijklmnopqrstuvwxyz")


def _is_bare_atom(name: str) -> bool:
    if name == "[]":
        return True
    if not name or name[0] not in _ATOM_BARE_OK:
        return False
    return all(ch.isalnum() or ch == "_" for ch in name)


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.anon: dict[str, Variable] = {}

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str) -> _Token:
        tok = self.next()
        if tok.kind != kind or tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line)
        return tok

    def at(self, kind: str, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == kind and tok.text == text

    # precedence ladder: comparison > additive > multiplicative > unary > primary
    def parse_term(self) -> Term:
        left = self.parse_additive()
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text in _COMPARISONS:
            self.next()
            right = self.parse_additive()
            return Compound(tok.text, (left, right))
        return left

    def parse_additive(self) -> Term:
        left = self.parse_multiplicative()
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "op" or tok.text not in _ADDITIVE:
                return left
            self.next()
            left = Compound(tok.text, (left, self.parse_multiplicative()))

    def parse_multiplicative(self) -> Term:
        left = self.parse_unary()
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "op" or tok.text not in _MULTIPLICATIVE:
                return left
            self.next()
            left = Compound(tok.text, (left, self.parse_unary()))

    def parse_unary(self) -> Term:
        if self.at("op", "-"):
            tok = self.next()
            operand = self.parse_unary()
            if isinstance(operand, Number):
                return Number(-operand.value)
            return Compound("-", (operand,))
        return self.parse_primary()

    def parse_primary(self) -> Term:
        tok = self.next()
        if tok.kind == "int":
            return Number(int(tok.text))
        if tok.kind == "float":
            return Number(float(tok.text))
        if tok.kind == "var":
            if tok.text == "_":
                return fresh_variable("Anon")
            return Variable(tok.text)
        if tok.kind == "atom":
            if self.at("punct", "("):
                self.next()
                args = [self.parse_term()]
                while self.at("punct", ","):
                    self.next()
                    args.append(self.parse_term())
                self.expect("punct", ")")
                return Compound(tok.text, tuple(args))
            return Atom(tok.text)
        if tok.kind == "punct" and tok.text == "(":
            term = self.parse_conjunction()
            self.expect("punct", ")")
            return term
        if tok.kind == "punct" and tok.text == "[":
            return self.parse_list()
        raise ParseError(f"unexpected token {tok.text!r}", tok.line)

    def parse_conjunction(self) -> Term:
        """Comma inside parentheses builds a ','/2 conjunction term."""
        term = self.parse_term()
        if self.at("punct", ","):
            self.next()
            return Compound(",", (term, self.parse_conjunction()))
        return term

    def parse_list(self) -> Term:
        if self.at("punct", "]"):
            self.next()
            return EMPTY_LIST
        items = [self.parse_term()]
        while self.at("punct", ","):
            self.next()
            items.append(self.parse_term())
        tail: Term = EMPTY_LIST
        if self.at("op", "|"):
            self.next()
            tail = self.parse_term()
        self.expect("punct", "]")
        return make_list(items, tail)

    def parse_goals(self) -> list[Term]:
        goals = [self.parse_term()]
        while self.at("punct", ","):
            self.next()
            goals.append(self.parse_term())
        return goals


def parse_term(text: str) -> Term:
    """Parse a single term from text (no trailing clause dot required)."""
    parser = _Parser(tokenize(text))
    term = parser.parse_term()
    tok = parser.peek()
    if tok is not None and tok.kind != "end":
        raise ParseError(f"trailing input {tok.text!r}", tok.line)
    return term


def parse_goal(text: str) -> list[Term]:
    """Parse a comma-separated goal conjunction into a goal list."""
    parser = _Parser(tokenize(text))
    goals = parser.parse_goals()
    tok = parser.peek()
    if tok is not None and tok.kind != "end":
        raise ParseError(f"trailing input {tok.text!r}", tok.line)
    return goals


def parse_program(text: str) -> list[tuple[Term, tuple[Term, ...]]]:
    """Parse clause text into (head, body) pairs, preserving order."""
    parser = _Parser(tokenize(text))
    clauses: list[tuple[Term, tuple[Term, ...]]] = []
    while parser.peek() is not None:
        head = parser.parse_term()
        if isinstance(head, Compound) and head.functor == ":-" and len(head.args) == 2:
            raise ParseError("clause heads may not contain ':-'")
        body: tuple[Term, ...] = ()
        if parser.at("op", ":-"):
            parser.next()
            body = tuple(parser.parse_goals())
        parser.expect("end", ".")
        if isinstance(head, (Variable, Number)):
            raise ParseError(f"clause head must be an atom or compound, got {head}")
        clauses.append((head, body))
    return clauses


def write_term(term: Term) -> str:
    """Render a term in canonical form; parse_term(write_term(t)) == t."""
    if isinstance(term, Variable):
        return term.name
    if isinstance(term, Atom):
        if _is_bare_atom(term.name):
            return term.name
        escaped = term.name.replace("\\", "\\\\").replace("'", "\\'")
        return f"'{escaped}'"
    if isinstance(term, Number):
        return repr(term.value)
    if isinstance(term, HostValue):
        return f"'<host:{term.tag}>'"
    items = list_items(term)
    if items is not None:
        return "[" + ", ".join(write_term(i) for i in items) + "]"
    if term.functor == "." and len(term.args) == 2:
        head, tail = term.args
        parts = [write_term(head)]
        while isinstance(tail, Compound) and tail.functor == "." and len(tail.args) == 2:
            parts.append(write_term(tail.args[0]))
            tail = tail.args[1]
        if tail == EMPTY_LIST:
            return "[" + ", ".join(parts) + "]"
        return "[" + ", ".join(parts) + " | " + write_term(tail) + "]"
    functor = term.functor if _is_bare_atom(term.functor) else write_term(Atom(term.functor))
    return functor + "(" + ", ".join(write_term(a) for a in term.args) + ")"
