"""Fixed-width integer semantics used by the transaction simulator and the
mock chain's on-chain evaluator.

Values are stored as unsigned bit patterns in [0, 2^w); signedness only
changes comparisons, right shifts and the reading of patterns as numbers
(two's complement).  256-bit private values live in the field instead and are
handled by the caller.
"""
from __future__ import annotations


def mask(width: int) -> int:
    return (1 << width) - 1


def to_pattern(value: int, width: int) -> int:
    """Reduce an arbitrary integer to its w-bit two's-complement pattern."""
    return value & mask(width)


def from_pattern(pattern: int, width: int, signed: bool) -> int:
    """Read a w-bit pattern as a number."""
    if signed and pattern >= 1 << (width - 1):
        return pattern - (1 << width)
    return pattern


def binop(op: str, a: int, b: int, width: int, signed: bool) -> int:
    """Apply a binary operator to two w-bit patterns, returning a pattern.

    Comparison results are 0/1.  Division and modulo follow Solidity
    (truncation toward zero) and raise ZeroDivisionError on zero divisors.
    """
    if op == "+":
        return (a + b) & mask(width)
    if op == "-":
        return (a - b) & mask(width)
    if op == "*":
        return (a * b) & mask(width)
    if op in ("/", "%"):
        x, y = from_pattern(a, width, signed), from_pattern(b, width, signed)
        if y == 0:
            raise ZeroDivisionError("division or modulo by zero")
        q = abs(x) // abs(y)
        if (x < 0) != (y < 0):
            q = -q
        r = x - q * y
        return to_pattern(q if op == "/" else r, width)
    if op == "&":
        return a & b
    if op == "|":
        return a | b
    if op == "^":
        return a ^ b
    if op == "<<":
        return (a << b) & mask(width) if b < width else 0
    if op == ">>":
        if signed:
            return to_pattern(from_pattern(a, width, True) >> min(b, width), width)
        return a >> b if b < width else 0
    if op in ("<", "<=", ">", ">="):
        x, y = from_pattern(a, width, signed), from_pattern(b, width, signed)
        return int({"<": x < y, "<=": x <= y, ">": x > y, ">=": x >= y}[op])
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "&&":
        return int(bool(a) and bool(b))
    if op == "||":
        return int(bool(a) or bool(b))
    raise ValueError(f"unknown binary operator {op!r}")


def unop(op: str, a: int, width: int, signed: bool) -> int:
    if op == "-":
        return (-a) & mask(width)
    if op == "~":
        return a ^ mask(width)
    if op == "!":
        return int(not a)
    raise ValueError(f"unknown unary operator {op!r}")


def cast(pattern: int, from_width: int, from_signed: bool, to_width: int, to_signed: bool) -> int:
    """Convert between integer representations the way Solidity does:
    truncate when narrowing, sign- or zero-extend when widening."""
    if to_width <= from_width:
        return pattern & mask(to_width)
    value = from_pattern(pattern, from_width, from_signed)
    return to_pattern(value, to_width)
