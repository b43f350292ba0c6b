"""Tokenizer shared by the statement grammars.

One scanner serves the dependency-query language, the extended SELECT
dialect, and the session statements, so positions and literal rules agree
everywhere. `--` starts a line comment. Double and single quoted strings
carry no escape sequences; numbers without a dot or exponent become int,
everything else Decimal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal

from .errors import ParseError

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+|--[^\n]*)
    | (?P<string>"[^"\n]*"|'[^'\n]*')
    | (?P<number>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<punct>->|<=|>=|!=|<>|[(){}\[\],+\-*=<>;\\])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "string" | "number" | "ident" | "punct" | "end"
    text: str  # raw source text (strings keep their quotes)
    value: object  # decoded payload: str | int | Decimal | None
    pos: int  # 1-based offset of the first character


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", i + 1)
        if m.lastgroup != "ws":
            raw = m.group(0)
            pos = i + 1
            if m.lastgroup == "string":
                tokens.append(Token("string", raw, raw[1:-1], pos))
            elif m.lastgroup == "number":
                if "." in raw or "e" in raw or "E" in raw:
                    tokens.append(Token("number", raw, Decimal(raw), pos))
                else:
                    tokens.append(Token("number", raw, int(raw), pos))
            elif m.lastgroup == "ident":
                tokens.append(Token("ident", raw, raw, pos))
            else:
                text_norm = "!=" if raw == "<>" else raw
                tokens.append(Token("punct", text_norm, None, pos))
        i = m.end()
    tokens.append(Token("end", "", None, len(text) + 1))
    return tokens


def is_kw(tok: Token, word: str) -> bool:
    return tok.kind == "ident" and tok.text.upper() == word


class TokenStream:
    """Cursor over a token list with one-token lookahead helpers."""

    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self, k: int = 0) -> Token:
        j = min(self.i + k, len(self.tokens) - 1)
        return self.tokens[j]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "end":
            self.i += 1
        return tok

    def at_end(self) -> bool:
        return self.peek().kind == "end"

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, tok.pos)

    def accept_punct(self, text: str) -> bool:
        tok = self.peek()
        if tok.kind == "punct" and tok.text == text:
            self.advance()
            return True
        return False

    def expect_punct(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind != "punct" or tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return self.advance()

    def accept_kw(self, word: str) -> bool:
        if is_kw(self.peek(), word):
            self.advance()
            return True
        return False

    def expect_kw(self, word: str) -> Token:
        tok = self.peek()
        if not is_kw(tok, word):
            raise self.error(f"expected {word}, found {tok.text or 'end of input'!r}")
        return self.advance()

    def expect_ident(self, what: str = "identifier") -> str:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.error(f"expected {what}, found {tok.text or 'end of input'!r}")
        self.advance()
        return tok.text

    def expect_string(self, what: str = "quoted name") -> Token:
        tok = self.peek()
        if tok.kind != "string":
            raise self.error(f"expected {what}, found {tok.text or 'end of input'!r}")
        return self.advance()

    def expect_number(self) -> Token:
        tok = self.peek()
        if tok.kind != "number":
            raise self.error(f"expected a number, found {tok.text or 'end of input'!r}")
        return self.advance()

    def expect_end(self) -> None:
        tok = self.peek()
        if tok.kind != "end":
            raise self.error(f"unexpected trailing input {tok.text!r}")
