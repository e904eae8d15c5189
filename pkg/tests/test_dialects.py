from hypothesis import given, strategies as st

from archon import dialects as D


def texts(tokens):
    return [t.text for t in tokens]


def test_toy_tokens_skip_comments_and_strings():
    src = 'def a := 1 -- sorry here\n/- outer /- inner sorry -/ still -/ theorem t : a = 1 := refl\n'
    code = texts(D.code_tokens(src, D.TOY))
    assert "sorry" not in code
    assert code[:4] == ["def", "a", ":=", "1"]
    assert code[-1] == "refl"


def test_spans_are_one_based_and_end_exclusive():
    tok = D.tokenize("def abc := 12\n", D.TOY)[1]
    assert (tok.text, tok.span) == ("abc", (1, 5, 1, 8))


def test_toy_declarations_and_imports():
    r = D.parse("import Foo.Bar\ndef x := 2 * (3 + 1)\ntheorem t : x = 8 := by_lemma other\n", D.TOY)
    assert r.errors == []
    assert [(d.name, d.kind) for d in r.decls] == [
        ("Foo.Bar", "import-directive"), ("x", "definition"), ("t", "theorem")]
    x, t = r.decls[1], r.decls[2]
    assert x.statement == ("2", "*", "(", "3", "+", "1", ")")
    assert x.lhs == ("*", ("num", 2), ("+", ("num", 3), ("num", 1)))
    assert t.statement == ("x", "=", "8")
    assert t.proof == ("by_lemma", "other")


def test_multiplication_binds_tighter():
    d = D.parse("def y := 1 + 2 * 3\n", D.TOY).decls[0]
    assert d.lhs == ("+", ("num", 1), ("*", ("num", 2), ("num", 3)))


def test_malformed_declaration_is_kept_but_marked():
    r = D.parse("def x := 1 +\ntheorem t : 1 = 1 := refl\n", D.TOY)
    x, t = r.decls
    assert not x.parsed and x.error
    assert t.parsed


def test_theorem_needs_an_equation():
    (d,) = D.parse("theorem t : 1 := refl\n", D.TOY).decls
    assert not d.parsed


def test_lean_declarations_lexically():
    src = (
        "import Mathlib.Data.Nat\n"
        "/- block /- nested -/ -/\n"
        "theorem foo (n : Nat) : n + 0 = n := by\n  simp\n"
        "lemma bar : 1 = 1 := sorry\n"
        "def baz : Nat := 3\n"
        "axiom ax : False\n"
    )
    r = D.parse(src, D.EXTERNAL)
    by_name = {d.name: d for d in r.decls}
    assert by_name["foo"].kind == "theorem"
    assert by_name["foo"].statement[-5:] == ("n", "+", "0", "=", "n")
    assert texts(by_name["bar"].proof_tokens) == ["sorry"]
    assert by_name["baz"].statement == ("Nat", ":=", "3")
    assert texts(by_name["ax"].proof_tokens) == ["sorryAx"]


def test_lean_string_contents_are_not_code():
    src = 'theorem s : "sorry" = "sorry" := rfl\n'
    assert "sorry" not in texts(D.code_tokens(src, D.EXTERNAL))


def test_module_paths_round_trip():
    assert D.module_path("A.B", D.TOY) == "src/A/B.mck"
    assert D.path_module("src/A/B.mck") == "A.B"


@given(st.text(alphabet="abc +*=:()-/\n\"01", max_size=80))
def test_lexer_never_crashes_and_spans_are_ordered(text):
    for dialect in (D.TOY, D.EXTERNAL):
        toks = D.tokenize(text, dialect, keep_comments=True)
        positions = [(t.line, t.col) for t in toks]
        assert positions == sorted(positions)
        D.parse(text, dialect)
