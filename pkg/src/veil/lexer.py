"""Hand-rolled lexer producing spanned tokens; comments become whitespace at
lex time but their spans are kept for the stripping pass and diagnostics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from .source import Diagnostic, ERROR, SourceFile, Span

KEYWORDS = {
    "contract", "enum", "mapping", "function", "constructor", "returns",
    "return", "if", "else", "while", "do", "for", "require", "reveal",
    "final", "public", "private", "internal", "external", "pure", "view",
    "payable", "true", "false", "me", "all", "bool", "address",
}

# longest-match first
PUNCT = [
    "<<=", ">>=", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "=>",
    "{", "}", "(", ")", "[", "]", ";", ",", ".", "@", "!", "~", "+", "-",
    "*", "/", "%", "&", "^", "|", "<", ">", "=", "?",
]


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'number' | 'keyword' | punctuation text | 'eof'
    text: str
    span: Span

    def __repr__(self):
        return f"Token({self.kind!r}, {self.text!r})"


class LexError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        self.diagnostic = diagnostic
        super().__init__(diagnostic.message)


def lex(source: SourceFile) -> Tuple[List[Token], List[Span]]:
    """Tokenize a source file; returns (tokens, comment_spans)."""
    text = source.text
    n = len(text)
    i = 0
    tokens: List[Token] = []
    comments: List[Span] = []
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if text.startswith("//", i):
            end = text.find("\n", i)
            end = n if end == -1 else end
            comments.append(Span(i, end))
            i = end
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end == -1:
                raise LexError(Diagnostic(ERROR, "E-lex-comment", Span(i, n),
                                          "unterminated block comment"))
            comments.append(Span(i, end + 2))
            i = end + 2
            continue
        if ch.isdigit():
            j = i
            if text.startswith("0x", i) or text.startswith("0X", i):
                j = i + 2
                while j < n and (text[j] in "0123456789abcdefABCDEF"):
                    j += 1
            else:
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(Token("number", text[i:j], Span(i, j)))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "keyword" if (word in KEYWORDS or _is_sized_int(word)) else "ident"
            tokens.append(Token(kind, word, Span(i, j)))
            i = j
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                tokens.append(Token(p, p, Span(i, i + len(p))))
                i += len(p)
                break
        else:
            raise LexError(Diagnostic(ERROR, "E-lex-char", Span(i, i + 1),
                                      f"unexpected character {ch!r}"))
    tokens.append(Token("eof", "", Span(n, n)))
    return tokens, comments


def _is_sized_int(word: str) -> bool:
    for prefix in ("uint", "int"):
        if word.startswith(prefix):
            rest = word[len(prefix):]
            if rest == "":
                return True
            if rest.isdigit() and int(rest) in range(8, 257, 8):
                return True
    return False


def int_bits(word: str) -> Optional[Tuple[int, bool]]:
    """(bits, signed) for a sized-integer keyword, else None."""
    for prefix, signed in (("uint", False), ("int", True)):
        if word.startswith(prefix):
            rest = word[len(prefix):]
            if rest == "":
                return 256, signed
            if rest.isdigit() and int(rest) in range(8, 257, 8):
                return int(rest), signed
    return None
