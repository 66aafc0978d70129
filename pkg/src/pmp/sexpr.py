"""Minimal s-expression reader/writer used by the formula, rule and proof-file grammars.

Atoms are ints, symbols (plain str) and quoted strings (also str; quoting is
only a surface matter). Lists are Python lists. `dumps` is deterministic.
"""

from __future__ import annotations


class SexprError(ValueError):
    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


_DELIMS = "()\"; \t\r\n"


def _tokenize(text):
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
        elif c in " \t\r":
            i += 1
            col += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append((c, line, col))
            i += 1
            col += 1
        elif c == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                buf.append(text[j])
                j += 1
            if j >= n:
                raise SexprError("unterminated string", line, col)
            tokens.append(("atom:" + "".join(buf), line, col))
            col += j + 1 - i
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in _DELIMS:
                j += 1
            tokens.append(("sym:" + text[i:j], line, col))
            col += j - i
            i = j
    return tokens


def _atom(word):
    try:
        return int(word)
    except ValueError:
        return word


def parse_all(text):
    """Parse every toplevel s-expression in `text`."""
    tokens = _tokenize(text)
    out = []
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(tokens):
            raise SexprError("unexpected end of input")
        tok, line, col = tokens[pos]
        pos += 1
        if tok == "(":
            items = []
            while True:
                if pos >= len(tokens):
                    raise SexprError("missing ')'", line, col)
                if tokens[pos][0] == ")":
                    pos += 1
                    return items
                items.append(read())
        if tok == ")":
            raise SexprError("unexpected ')'", line, col)
        if tok.startswith("atom:"):
            return tok[5:]
        return _atom(tok[4:])

    while pos < len(tokens):
        out.append(read())
    return out


def parse_one(text):
    exprs = parse_all(text)
    if len(exprs) != 1:
        raise SexprError(f"expected exactly one expression, got {len(exprs)}")
    return exprs[0]


def _needs_quotes(sym):
    if sym == "":
        return True
    return any(ch in _DELIMS for ch in sym)


def dumps(expr):
    if isinstance(expr, bool):
        raise SexprError(f"cannot serialize {expr!r}")
    if isinstance(expr, int):
        return str(expr)
    if isinstance(expr, str):
        if _needs_quotes(expr):
            return '"' + expr + '"'
        return expr
    if isinstance(expr, (list, tuple)):
        return "(" + " ".join(dumps(e) for e in expr) + ")"
    raise SexprError(f"cannot serialize {expr!r}")
