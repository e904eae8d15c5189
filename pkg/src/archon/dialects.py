"""Lexers and declaration parsers for the two supported source dialects.

``toy`` is the MiniCheck language (``.mck``): ground arithmetic theorems over
the naturals, checked entirely in-repo. ``external`` is a lexical view of Lean
4 (``.lean``) sufficient to find declarations, statements and placeholders;
nothing is elaborated.

Both dialects share the comment syntax (``--`` to end of line, nestable
``/- ... -/`` blocks) and double-quoted string literals. Declarations begin at
column 1, so boundaries are found without a real grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

TOY = "toy"
EXTERNAL = "external"

EXTENSIONS = {".mck": TOY, ".lean": EXTERNAL}

# proof-body tokens that make a declaration a placeholder site
PLACEHOLDER_TOKENS = {TOY: frozenset({"sorry"}), EXTERNAL: frozenset({"sorry", "admit"})}
AXIOM_TOKENS = {TOY: frozenset({"by_axiom"}), EXTERNAL: frozenset({"sorryAx"})}

Span = tuple[int, int, int, int]  # (line, col, end_line, end_col), 1-based, end exclusive


@dataclass(frozen=True)
class Token:
    kind: str  # ident | num | op | str | comment | bad
    text: str
    line: int
    col: int
    end_line: int
    end_col: int

    @property
    def span(self) -> Span:
        return (self.line, self.col, self.end_line, self.end_col)


_TOY_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.']*")
_LEAN_IDENT = re.compile(r"[^\W\d][\w.'!?₀-₉]*|«[^»]*»")
_NUM = re.compile(r"[0-9]+")
_TOY_OPS = (":=", ":", "=", "+", "*", "(", ")")
_LEAN_OPS = (
    ":=", "::", "->", "<-", "=>", "<=", ">=", "!=", "==", "&&", "||", "<|>", "<|", "|>.",
    "|>", "..", "⁻¹", "^", "@[",
)
_OPEN_BRACKETS = {"(", "[", "{", "⟨", "⦃", "@["}
_CLOSE_BRACKETS = {")", "]", "}", "⟩", "⦄"}


def tokenize(text: str, dialect: str, keep_comments: bool = False) -> list[Token]:
    return list(_lex(text, dialect, keep_comments))


def _lex(text: str, dialect: str, keep_comments: bool) -> Iterator[Token]:
    ident_re = _TOY_IDENT if dialect == TOY else _LEAN_IDENT
    ops = _TOY_OPS if dialect == TOY else _LEAN_OPS
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(upto: int) -> tuple[int, int]:
        nonlocal line, col
        chunk = text[i:upto]
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        return line, col

    while i < n:
        c = text[i]
        if c == "\n" or c.isspace():
            advance(i + 1)
            i += 1
            continue
        start_line, start_col = line, col
        if text.startswith("--", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            kind = "comment"
        elif text.startswith("/-", i):
            depth, j = 1, i + 2
            while j < n and depth:
                if text.startswith("/-", j):
                    depth, j = depth + 1, j + 2
                elif text.startswith("-/", j):
                    depth, j = depth - 1, j + 2
                else:
                    j += 1
            kind = "comment" if depth == 0 else "bad"
        elif c == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 2 if text[j] == "\\" else 1
            if j < n and text[j] == '"':
                j += 1
                kind = "str"
            else:
                kind = "bad"
        elif m := _NUM.match(text, i):
            j, kind = m.end(), "num"
        elif m := ident_re.match(text, i):
            j, kind = m.end(), "ident"
        else:
            op = next((o for o in ops if text.startswith(o, i)), None)
            if op is not None:
                j, kind = i + len(op), "op"
            elif dialect == EXTERNAL and not c.isalnum():
                # any other single symbol is an operator in the lexical Lean view
                j, kind = i + 1, "op"
            else:
                j, kind = i + 1, "bad"
        tok_text = text[i:j]
        end_line, end_col = advance(j)
        i = j
        if kind == "comment" and not keep_comments:
            continue
        yield Token(kind, tok_text, start_line, start_col, end_line, end_col)


def code_tokens(text: str, dialect: str) -> list[Token]:
    """Tokens outside comments and string literals."""
    return [t for t in tokenize(text, dialect) if t.kind not in ("str", "comment")]


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class ParsedDecl:
    name: str
    kind: str  # definition | theorem | import-directive
    statement: tuple[str, ...]
    proof_tokens: tuple[Token, ...]
    span: Span
    parsed: bool = True
    error: str = ""
    error_span: Span | None = None
    # toy only: expression trees for the statement sides / def body, and the proof form
    lhs: object = None
    rhs: object = None
    proof: tuple[str, ...] = ()
    name_span: Span | None = None


@dataclass
class ParseResult:
    decls: list[ParsedDecl] = field(default_factory=list)
    imports: list[tuple[str, Span]] = field(default_factory=list)
    errors: list[tuple[Span, str]] = field(default_factory=list)


def parse(text: str, dialect: str) -> ParseResult:
    if dialect == TOY:
        return _parse_toy(text)
    return _parse_lean(text)


def _chunks(tokens: list[Token], is_start) -> Iterator[list[Token]]:
    """Split into declaration chunks; a chunk starts at a column-1 start token."""
    cur: list[Token] = []
    for t in tokens:
        if t.col == 1 and is_start(t) and cur:
            yield cur
            cur = []
        cur.append(t)
    if cur:
        yield cur


def _chunk_span(chunk: list[Token]) -> Span:
    return (chunk[0].line, chunk[0].col, chunk[-1].end_line, chunk[-1].end_col)


# -- toy ---------------------------------------------------------------------

TOY_KEYWORDS = {"import", "def", "theorem"}
TOY_PROOFS = {"refl", "sorry", "unsafe_eval"}
TOY_PROOFS_WITH_ARG = {"by_axiom", "by_lemma"}


class _ToyParseError(Exception):
    def __init__(self, msg: str, tok: Token | None):
        super().__init__(msg)
        self.tok = tok


class _ExprParser:
    """Recursive descent over ``+``/``*``/parens; ``*`` binds tighter."""

    def __init__(self, toks: list[Token], end_tok: Token | None):
        self.toks = toks
        self.pos = 0
        self.end_tok = end_tok

    def peek(self) -> Token | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def fail(self, msg: str):
        raise _ToyParseError(msg, self.peek() or self.end_tok)

    def parse_all(self):
        e = self.sum()
        if self.peek() is not None:
            self.fail(f"unexpected token {self.peek().text!r}")
        return e

    def sum(self):
        e = self.product()
        while (t := self.peek()) is not None and t.text == "+":
            self.pos += 1
            e = ("+", e, self.product())
        return e

    def product(self):
        e = self.atom()
        while (t := self.peek()) is not None and t.text == "*":
            self.pos += 1
            e = ("*", e, self.atom())
        return e

    def atom(self):
        t = self.peek()
        if t is None:
            self.fail("expected expression")
        self.pos += 1
        if t.kind == "num":
            return ("num", int(t.text))
        if t.kind == "ident" and t.text not in TOY_KEYWORDS:
            return ("ref", t.text, t.span)
        if t.text == "(":
            e = self.sum()
            close = self.peek()
            if close is None or close.text != ")":
                self.fail("expected ')'")
            self.pos += 1
            return e
        self.pos -= 1
        self.fail(f"unexpected token {t.text!r}")


def _split_at(toks: list[Token], text: str) -> tuple[list[Token], list[Token]] | None:
    for k, t in enumerate(toks):
        if t.kind == "op" and t.text == text:
            return toks[:k], toks[k + 1:]
    return None


def _parse_toy(text: str) -> ParseResult:
    result = ParseResult()
    toks = tokenize(text, TOY)
    for t in toks:
        if t.kind == "bad":
            result.errors.append((t.span, f"unrecognized input {t.text[:20]!r}"))
    toks = [t for t in toks if t.kind != "bad"]
    for chunk in _chunks(toks, lambda t: t.kind == "ident" and t.text in TOY_KEYWORDS):
        head = chunk[0]
        span = _chunk_span(chunk)
        if head.kind != "ident" or head.text not in TOY_KEYWORDS:
            result.errors.append((head.span, f"expected a declaration, found {head.text!r}"))
            continue
        name_tok = chunk[1] if len(chunk) > 1 else None
        if name_tok is None or name_tok.kind != "ident" or name_tok.text in TOY_KEYWORDS:
            result.errors.append((head.span, f"{head.text} without a name"))
            continue
        if head.text == "import":
            if len(chunk) != 2:
                result.errors.append((chunk[2].span, "unexpected token after import"))
            result.imports.append((name_tok.text, name_tok.span))
            result.decls.append(ParsedDecl(
                name=name_tok.text, kind="import-directive", statement=(name_tok.text,),
                proof_tokens=(), span=span, name_span=name_tok.span))
            continue
        result.decls.append(_parse_toy_decl(head, name_tok, chunk[2:], span))
    return result


def _parse_toy_decl(head: Token, name_tok: Token, rest: list[Token], span: Span) -> ParsedDecl:
    kind = "definition" if head.text == "def" else "theorem"
    split = _split_at(rest, ":=")
    if split is None:
        stmt_toks, proof_toks = rest, []
    else:
        stmt_toks, proof_toks = split
    if kind == "theorem":
        # statement is everything between the leading ':' and ':='
        if stmt_toks and stmt_toks[0].text == ":":
            stmt_toks = stmt_toks[1:]
    else:
        # a def's statement is its body
        stmt_toks, proof_toks = proof_toks, []
    statement = tuple(t.text for t in stmt_toks)
    base = dict(name=name_tok.text, kind=kind, statement=statement,
                proof_tokens=tuple(proof_toks), span=span, name_span=name_tok.span)
    last = rest[-1] if rest else name_tok
    try:
        if split is None:
            raise _ToyParseError("missing ':='", last)
        if kind == "definition":
            if rest and rest[0].text != ":=":
                raise _ToyParseError("expected ':=' after definition name", rest[0])
            body = _ExprParser(list(stmt_toks), last).parse_all()
            return ParsedDecl(**base, lhs=body)
        if not rest or rest[0].text != ":":
            raise _ToyParseError("expected ':' after theorem name", rest[0] if rest else name_tok)
        eq = _split_at(list(stmt_toks), "=")
        if eq is None:
            raise _ToyParseError("statement must be an equation", stmt_toks[-1] if stmt_toks else last)
        lhs = _ExprParser(eq[0], stmt_toks[-1]).parse_all()
        rhs = _ExprParser(eq[1], stmt_toks[-1]).parse_all()
        proof = _parse_toy_proof(proof_toks, last)
        return ParsedDecl(**base, lhs=lhs, rhs=rhs, proof=proof)
    except _ToyParseError as exc:
        tok = exc.tok or name_tok
        return ParsedDecl(**base, parsed=False, error=str(exc), error_span=tok.span)


def _parse_toy_proof(toks: list[Token], last: Token) -> tuple[str, ...]:
    if not toks:
        raise _ToyParseError("missing proof", last)
    head = toks[0]
    if head.text in TOY_PROOFS and len(toks) == 1:
        return (head.text,)
    if head.text in TOY_PROOFS_WITH_ARG:
        if len(toks) == 2 and toks[1].kind == "ident":
            return (head.text, toks[1].text)
        raise _ToyParseError(f"{head.text} takes exactly one name", toks[-1])
    raise _ToyParseError(f"unknown proof {' '.join(t.text for t in toks)!r}", head)


# -- external (Lean, lexical only) -------------------------------------------

LEAN_DECL_KEYWORDS = {
    "theorem": "theorem", "lemma": "theorem",
    "def": "definition", "abbrev": "definition", "instance": "definition",
    "axiom": "definition", "opaque": "definition", "structure": "definition",
    "inductive": "definition", "class": "definition", "example": "theorem",
}
LEAN_MODIFIERS = {"private", "protected", "noncomputable", "unsafe", "partial", "nonrec", "scoped"}
LEAN_BOUNDARY = set(LEAN_DECL_KEYWORDS) | LEAN_MODIFIERS | {
    "import", "namespace", "section", "end", "open", "variable", "universe",
    "set_option", "attribute", "mutual", "noncomputable", "@[",
}


def _lean_is_start(t: Token) -> bool:
    return t.text in LEAN_BOUNDARY or t.text.startswith("#")


def _parse_lean(text: str) -> ParseResult:
    result = ParseResult()
    toks = [t for t in tokenize(text, EXTERNAL) if t.kind != "comment"]
    for t in toks:
        if t.kind == "bad":
            result.errors.append((t.span, f"unterminated {t.text[:2]!r}"))
    toks = [t for t in toks if t.kind != "bad"]
    for chunk in _chunks(toks, _lean_is_start):
        span = _chunk_span(chunk)
        head = chunk[0]
        if head.text == "import":
            for t in chunk[1:]:
                if t.kind == "ident":
                    result.imports.append((t.text, t.span))
                    result.decls.append(ParsedDecl(
                        name=t.text, kind="import-directive", statement=(t.text,),
                        proof_tokens=(), span=span, name_span=t.span))
            continue
        k = 0
        if chunk[k].text == "@[":
            depth = 1
            k += 1
            while k < len(chunk) and depth:
                depth += {"[": 1, "@[": 1, "]": -1}.get(chunk[k].text, 0)
                k += 1
        while k < len(chunk) and chunk[k].text in LEAN_MODIFIERS:
            k += 1
        if k >= len(chunk) or chunk[k].text not in LEAN_DECL_KEYWORDS:
            continue  # namespace, open, variable ... carry no declaration
        kw = chunk[k]
        kind = LEAN_DECL_KEYWORDS[kw.text]
        rest = chunk[k + 1:]
        if kw.text == "example":
            name_tok, rest_toks = kw, rest
            name = f"example@{kw.line}"
        elif rest and rest[0].kind == "ident":
            name_tok, rest_toks = rest[0], rest[1:]
            name = name_tok.text
        else:
            result.errors.append((kw.span, f"{kw.text} without a name"))
            continue
        depth, cut = 0, None
        for idx, t in enumerate(rest_toks):
            if t.text in _OPEN_BRACKETS:
                depth += 1
            elif t.text in _CLOSE_BRACKETS:
                depth -= 1
            elif depth == 0 and (t.text == ":=" or (t.text == "|" and kind == "definition") or t.text == "where"):
                cut = idx
                break
        if cut is None:
            stmt, proof = rest_toks, []
        else:
            stmt, proof = rest_toks[:cut], rest_toks[cut + 1:]
        if stmt and stmt[0].text == ":":
            stmt = stmt[1:]
        parsed = cut is not None or kw.text in ("axiom", "structure", "inductive", "class", "opaque")
        proof_tokens = tuple(proof)
        if kw.text == "axiom":
            # an axiom is its own escape hatch; record the keyword as its "proof"
            proof_tokens = (Token("ident", "sorryAx", kw.line, kw.col, kw.end_line, kw.end_col),)
        statement = tuple(t.text for t in stmt)
        if kind == "definition" and cut is not None and kw.text != "axiom":
            # a definition's body is part of what it states
            statement += tuple(t.text for t in rest_toks[cut:])
        result.decls.append(ParsedDecl(
            name=name, kind=kind, statement=statement,
            proof_tokens=proof_tokens, span=span, parsed=parsed,
            error="" if parsed else "declaration without ':='",
            error_span=None if parsed else kw.span, name_span=name_tok.span))
    return result


def module_path(module: str, dialect: str) -> str:
    """``Foo.Bar`` -> ``src/Foo/Bar.mck`` (workspace-relative)."""
    ext = ".mck" if dialect == TOY else ".lean"
    return "src/" + module.replace(".", "/") + ext


def path_module(path: str) -> str:
    stem = path[len("src/"):] if path.startswith("src/") else path
    return stem.rsplit(".", 1)[0].replace("/", ".")
