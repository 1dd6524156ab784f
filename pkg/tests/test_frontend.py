import pytest
from hypothesis import given, settings, strategies as st

from veil import ast
from veil.lexer import lex
from veil.parser import parse
from veil.solify import solify
from veil.source import CompileError, Diagnostic, ERROR, SourceFile, Span, render_diagnostic

from conftest import SUITE, load_source


def parse_text(text: str) -> ast.ContractDef:
    return parse(SourceFile("test.zkay", text))


def test_empty_contract():
    c = parse_text("contract C { }")
    assert c.name == "C"
    assert not c.functions and not c.state_vars and c.constructor is None


def test_token_buy_shape():
    c = parse_text("""
    contract Token {
        mapping(address => bool) registered;
        mapping(address!u => uint@u) balance;
        function buy(uint amount) public {
            require(registered[me]);
            balance[me] = balance[me] + amount;
        }
    }""")
    buy = c.function("buy")
    req, assign = buy.body.stmts
    assert isinstance(req, ast.RequireStmt)
    assert isinstance(assign, ast.AssignStmt)
    assert isinstance(assign.rhs, ast.BinOp) and assign.rhs.op == "+"
    assert isinstance(assign.rhs.left, ast.IndexExpr)
    assert isinstance(assign.rhs.left.index, ast.MeExpr)


def test_syntax_error_span():
    src = SourceFile("bad.zkay",
                     "contract C { function f() public { uint@me x = 3 +; } }")
    with pytest.raises(CompileError) as err:
        parse(src)
    d = err.value.diagnostics[0]
    assert d.severity == ERROR
    assert src.text[d.span.start] == ";"


def test_unterminated_comment():
    with pytest.raises(CompileError):
        parse(SourceFile("c.zkay", "contract C { /* unterminated"))


@pytest.mark.parametrize("name", SUITE + ("features", "payable", "publicif",
                                          "shortcircuit"))
def test_roundtrip_corpus(name):
    source = load_source(name)
    tree = parse(source)
    printed = ast.contract_code(tree)
    reparsed = parse(SourceFile("printed.zkay", printed))
    assert ast.structurally_equal(tree, reparsed)


def test_span_nesting():
    source = load_source("features")
    tree = parse(source)
    n = len(source.text)

    def check(node):
        assert 0 <= node.span.start <= node.span.end <= n
        for child in node.children():
            if child.span.length or node.span.length:
                assert node.span.start <= child.span.start
                assert child.span.end <= node.span.end
            check(child)

    check(tree)


def test_sibling_spans_disjoint():
    tree = parse(load_source("token"))
    for node in ast.walk(tree):
        kids = [c for c in node.children() if c.span.length]
        for a, b in zip(kids, kids[1:]):
            assert a.span.end <= b.span.start


# --- solify -------------------------------------------------------------------


@pytest.mark.parametrize("name", SUITE + ("features", "payable", "publicif",
                                          "shortcircuit"))
def test_solify_length_preserved(name):
    source = load_source(name)
    stripped = solify(source)
    assert len(stripped) == len(source.text)


def test_solify_single_annotation():
    src = SourceFile("a.zkay", "contract C { uint@me x; }")
    assert solify(src) == "contract C { uint    x; }"


def test_solify_identity_on_plain_solidity():
    text = ("contract C { uint x; function f(uint v) public { "
            "x = v + 1; } }")
    assert solify(SourceFile("p.zkay", text)) == text


def test_solify_reveal_wrapper():
    src = SourceFile("r.zkay", """contract C {
    uint@me x;
    function f() public returns (uint) { return reveal(x, all); }
}""")
    out = solify(src)
    assert len(out) == len(src.text)
    assert "reveal" not in out
    assert " x, " not in out.replace("return    ", "")  # wrapper gone
    # the inner expression survives at its offset
    offset = src.text.index("reveal(") + len("reveal(")
    assert out[offset] == "x"


def test_solify_token_offsets_preserved():
    """Every non-stripped token keeps its exact character offset."""
    source = load_source("features")
    out = solify(SourceFile(source.path, source.text))
    tokens_before, _ = lex(source)
    tokens_after, _ = lex(SourceFile("stripped", out))
    after_by_offset = {t.span.start: t.text for t in tokens_after}
    for tok in tokens_before:
        if tok.kind == "eof":
            continue
        survived = after_by_offset.get(tok.span.start)
        if survived is not None:
            assert survived == tok.text


@given(st.integers(min_value=8, max_value=256).filter(lambda b: b % 8 == 0),
       st.sampled_from(["me", "all", "owner"]))
@settings(max_examples=25, deadline=None)
def test_solify_annotation_property(bits, label):
    text = (f"contract C {{ final address owner; uint{bits}@{label} x; "
            f"function f() public {{ x = x; }} }}")
    src = SourceFile("gen.zkay", text)
    out = solify(src)
    assert len(out) == len(text)
    assert "@" not in out


# --- diagnostics ---------------------------------------------------------------


def test_render_diagnostic_line_col():
    src = SourceFile("d.zkay", "contract C {\n    uint x;\n  bad line here\n}")
    pos = src.text.index("bad")
    d = Diagnostic(ERROR, "E-test", Span(pos, pos + 3), "something is wrong")
    out = render_diagnostic(d, src)
    assert "d.zkay:3:3: error: something is wrong" in out
    assert "  bad line here" in out
    assert out.splitlines()[-1].startswith("  ^")


def test_render_diagnostic_multiline_span():
    src = SourceFile("m.zkay", "line one\nline two\nline three")
    d = Diagnostic(ERROR, "E", Span(0, len(src.text)), "spans everything")
    out = render_diagnostic(d, src)
    assert "m.zkay:1:1" in out
    assert "line one" in out and "line three" not in out.splitlines()[1]


def test_render_diagnostic_eof():
    src = SourceFile("e.zkay", "contract C { }")
    d = Diagnostic(ERROR, "E", Span(len(src.text), len(src.text)), "at the end")
    line, col = src.line_col(len(src.text))
    assert (line, col) == (1, len(src.text) + 1)
    assert "1:15" in render_diagnostic(d, src)


def test_diagnostic_format_contract():
    src = SourceFile("f.zkay", "contract C { function f() public { y = 1; } }")
    with pytest.raises(CompileError) as err:
        from veil.analysis import analyze
        analyze(src, parse(src))
    rendered = str(err.value)
    assert rendered.startswith("f.zkay:1:36: error:")
