"""Strip privacy features to plain Solidity-compatible text of equal length.

Every character that is not part of a privacy annotation (`@owner`), a
`reveal(..., target)` wrapper, a mapping tag (`!tag`), the `final` keyword or
a comment stays at its original offset; stripped regions become spaces with
newlines preserved.
"""
from __future__ import annotations

from typing import List

from . import ast
from .parser import parse_with_comments
from .source import SourceFile, Span


def strip_spans(contract: ast.ContractDef) -> List[Span]:
    """Spans of all privacy-only syntax in a parsed contract."""
    spans: List[Span] = []
    for node in ast.walk(contract):
        if isinstance(node, ast.AnnotatedTypeName):
            spans.extend(node.annotation_spans)
        elif isinstance(node, ast.MappingTypeName):
            if node.tag_span is not None:
                spans.append(node.tag_span)
        elif isinstance(node, ast.RevealExpr):
            spans.append(node.head_span)
            spans.append(node.tail_span)
        elif isinstance(node, ast.StateVarDecl):
            if node.final_span is not None:
                spans.append(node.final_span)
    return spans


def blank(text: str, spans: List[Span]) -> str:
    chars = list(text)
    for span in spans:
        for i in range(span.start, span.end):
            if chars[i] != "\n":
                chars[i] = " "
    return "".join(chars)


def solify(source: SourceFile) -> str:
    """Return Solidity-compatible text with privacy syntax blanked out.

    The output has the same length as the input and every surviving token
    keeps its original offset.
    """
    contract, comments = parse_with_comments(source)
    return blank(source.text, strip_spans(contract) + comments)
