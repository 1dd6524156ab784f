"""Plaintext reference interpreter of ORIGINAL (untransformed) contracts.

This is the independent oracle for end-to-end semantics: it executes the
parsed AST directly with plaintext state, ignoring every privacy annotation
(reveal is the identity), and implements fixed-width integer behavior with
its own two's-complement arithmetic so it shares no code with the compiler's
emulation layers.

Limitations mirror the original language subset exercised by the test
corpus; cryptocurrency transfers are not modeled here.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from veil import ast
from veil.lexer import int_bits


class RefRevert(Exception):
    pass


class _Return(Exception):
    def __init__(self, value):
        self.value = value


@dataclass(frozen=True)
class Val:
    """A typed plaintext value: bit pattern plus declared width.  Literal
    values carry bits=None and adapt to their context."""

    pattern: int
    bits: Optional[int]
    signed: bool = False

    def as_int(self) -> int:
        if self.bits is None:
            return self.pattern
        if self.signed and self.pattern >= 1 << (self.bits - 1):
            return self.pattern - (1 << self.bits)
        return self.pattern


def _fit(number: int, bits: int, signed: bool) -> Val:
    return Val(number % (1 << bits), bits, signed)


def _common(a: Val, b: Val) -> Tuple[Optional[int], bool]:
    if a.bits is None and b.bits is None:
        return None, False
    if a.bits is None:
        return b.bits, b.signed
    if b.bits is None:
        return a.bits, a.signed
    return max(a.bits, b.bits), a.signed


BASIC_TYPES = {"bool": (1, False), "address": (160, False),
               "address payable": (160, False)}


def type_bits(name: str, enums: Dict[str, List[str]]) -> Tuple[int, bool]:
    if name in BASIC_TYPES:
        return BASIC_TYPES[name]
    ib = int_bits(name)
    if ib is not None:
        return ib
    if name in enums:
        return 8, False
    raise RefRevert(f"unknown type {name}")


@dataclass
class Env:
    sender: int = 0
    value: int = 0
    block_number: int = 0
    timestamp: int = 0


class PlainContract:
    """Direct interpreter state for one deployed contract instance."""

    def __init__(self, contract: ast.ContractDef):
        self.contract = contract
        self.enums = {e.name: list(e.members) for e in contract.enums}
        self.fns = {f.name: f for f in contract.functions}
        self.state: Dict[str, Any] = {}
        self.state_types: Dict[str, ast.AnnotatedTypeName] = {
            sv.name: sv.ann_type for sv in contract.state_vars}

    def deploy(self, env: Env, args: List[int]):
        for sv in self.contract.state_vars:
            if sv.init is not None:
                self.state[sv.name] = self._eval(self._frame(env), sv.init)
        if self.contract.constructor is not None:
            self.invoke(self.contract.constructor, env, args)

    def call(self, name: str, env: Env, args: List[int]):
        """Execute one transaction; state is untouched when it reverts."""
        snapshot = copy.deepcopy(self.state)
        try:
            return self.invoke(self.fns[name], env, args)
        except RefRevert:
            self.state = snapshot
            raise

    # -- execution --

    def _frame(self, env: Env) -> dict:
        return {"env": env, "scopes": [{}]}

    def invoke(self, fn: ast.FunctionDef, env: Env, args: List[Any]):
        frame = self._frame(env)
        if len(args) != len(fn.params):
            raise RefRevert("argument count mismatch")
        for p, a in zip(fn.params, args):
            bits, signed = self._ann_bits(p.ann_type)
            value = a if isinstance(a, Val) else _fit(int(a), bits, signed)
            frame["scopes"][0][p.name] = value
        try:
            self.exec_block(frame, fn.body)
        except _Return as r:
            return r.value
        return None

    def _ann_bits(self, ann: ast.AnnotatedTypeName) -> Tuple[int, bool]:
        assert isinstance(ann.base, ast.TypeName), "mapping values handled separately"
        return type_bits(ann.base.name, self.enums)

    def exec_block(self, frame, blk: ast.Block):
        frame["scopes"].append({})
        try:
            for s in blk.stmts:
                self.exec_stmt(frame, s)
        finally:
            frame["scopes"].pop()

    def exec_stmt(self, frame, s: ast.Stmt):
        if isinstance(s, ast.Block):
            self.exec_block(frame, s)
        elif isinstance(s, ast.VarDeclStmt):
            bits, signed = self._ann_bits(s.ann_type)
            if s.init is None:
                value = Val(0, bits, signed)
            else:
                value = self._adapt(self._eval(frame, s.init), bits, signed)
            frame["scopes"][-1][s.name] = value
        elif isinstance(s, ast.TupleVarDeclStmt):
            value = self._eval(frame, s.init)
            if not isinstance(value, tuple):
                raise RefRevert("tuple initializer expected")
            for name, ann, v in zip(s.names, s.ann_types, value):
                bits, signed = self._ann_bits(ann)
                frame["scopes"][-1][name] = self._adapt(v, bits, signed)
        elif isinstance(s, ast.AssignStmt):
            self._assign(frame, s.lhs, s.op, s.rhs)
        elif isinstance(s, ast.ExprStmt):
            expr = s.expr
            if isinstance(expr, ast.UnOp) and expr.op in ("++", "--"):
                op = "+" if expr.op == "++" else "-"
                one = ast.IntLit(value=1, text="1")
                self._assign(frame, expr.operand, f"{op}=", one)
            else:
                self._eval(frame, expr)
        elif isinstance(s, ast.RequireStmt):
            if not self._truthy(self._eval(frame, s.cond)):
                raise RefRevert(f"require failed: {s.cond.code()}")
        elif isinstance(s, ast.ReturnStmt):
            raise _Return(self._eval(frame, s.value) if s.value else None)
        elif isinstance(s, ast.IfStmt):
            if self._truthy(self._eval(frame, s.cond)):
                self.exec_block(frame, s.then_branch)
            elif s.else_branch is not None:
                self.exec_block(frame, s.else_branch)
        elif isinstance(s, ast.WhileStmt):
            while self._truthy(self._eval(frame, s.cond)):
                self.exec_block(frame, s.body)
        elif isinstance(s, ast.DoWhileStmt):
            while True:
                self.exec_block(frame, s.body)
                if not self._truthy(self._eval(frame, s.cond)):
                    break
        elif isinstance(s, ast.ForStmt):
            frame["scopes"].append({})
            try:
                if s.init is not None:
                    self.exec_stmt(frame, s.init)
                while s.cond is None or self._truthy(self._eval(frame, s.cond)):
                    self.exec_block(frame, s.body)
                    if s.update is not None:
                        self.exec_stmt(frame, s.update)
            finally:
                frame["scopes"].pop()
        else:
            raise RefRevert(f"statement {s.kind} unsupported in the reference")

    def _assign(self, frame, lhs: ast.Expr, op: str, rhs_expr: ast.Expr):
        rhs = self._eval(frame, rhs_expr)
        if isinstance(lhs, ast.TupleExpr):
            if op != "=":
                raise RefRevert("compound tuple assignment")
            parts = rhs if isinstance(rhs, tuple) else (rhs,)
            evaluated = list(parts)
            for item, v in zip(lhs.items, evaluated):
                self._store(frame, item, v)
            return
        if op != "=":
            current = self._eval(frame, lhs)
            rhs = self._binop(op[:-1], current, rhs)
        self._store(frame, lhs, rhs)

    def _store(self, frame, lhs: ast.Expr, value):
        if isinstance(lhs, ast.Ident):
            for scope in reversed(frame["scopes"]):
                if lhs.name in scope:
                    old = scope[lhs.name]
                    scope[lhs.name] = self._adapt(value, old.bits, old.signed)
                    return
            bits, signed = self._state_bits(lhs.name, 0)
            self.state[lhs.name] = self._adapt(value, bits, signed)
            return
        if isinstance(lhs, ast.IndexExpr):
            keys = []
            base = lhs
            while isinstance(base, ast.IndexExpr):
                keys.append(self._eval(frame, base.index).pattern)
                base = base.base
            keys.reverse()
            bits, signed = self._state_bits(base.name, len(keys))
            node = self.state.setdefault(base.name, {})
            for k in keys[:-1]:
                node = node.setdefault(k, {})
            node[keys[-1]] = self._adapt(value, bits, signed)
            return
        raise RefRevert("unsupported assignment target")

    def _state_bits(self, name: str, depth: int) -> Tuple[int, bool]:
        ann = self.state_types.get(name)
        if ann is None:
            raise RefRevert(f"unknown state variable {name}")
        node = ann
        for _ in range(depth):
            assert isinstance(node.base, ast.MappingTypeName)
            node = node.base.value
        return type_bits(node.base.name, self.enums)

    # -- expressions --

    def _truthy(self, v: Val) -> bool:
        return v.pattern != 0

    def _adapt(self, v, bits: int, signed: bool) -> Val:
        if isinstance(v, tuple):
            raise RefRevert("tuple used as scalar")
        if v.bits is None:
            return _fit(v.pattern, bits, signed)
        if v.bits == bits and v.signed == signed:
            return v
        # widening keeps the numeric value; narrowing truncates the pattern
        if bits >= v.bits:
            return _fit(v.as_int(), bits, signed)
        return Val(v.pattern % (1 << bits), bits, signed)

    def _eval(self, frame, e: ast.Expr):
        if isinstance(e, ast.IntLit):
            return Val(e.value, None)
        if isinstance(e, ast.BoolLit):
            return Val(1 if e.value else 0, 1)
        if isinstance(e, ast.MeExpr):
            return Val(frame["env"].sender, 160)
        if isinstance(e, ast.Ident):
            for scope in reversed(frame["scopes"]):
                if e.name in scope:
                    return scope[e.name]
            if e.name in self.state_types:
                return self._state_value(e.name, ())
            raise RefRevert(f"unknown identifier {e.name}")
        if isinstance(e, ast.IndexExpr):
            keys = []
            base = e
            while isinstance(base, ast.IndexExpr):
                keys.append(self._eval(frame, base.index).pattern)
                base = base.base
            keys.reverse()
            return self._state_value(base.name, tuple(keys))
        if isinstance(e, ast.MemberExpr):
            return self._member(frame, e)
        if isinstance(e, ast.RevealExpr):
            return self._eval(frame, e.expr)
        if isinstance(e, ast.ReclassifyExpr):
            return self._eval(frame, e.expr)
        if isinstance(e, ast.BinOp):
            if e.op == "&&":
                left = self._eval(frame, e.left)
                if not self._truthy(left):
                    return Val(0, 1)
                return Val(1 if self._truthy(self._eval(frame, e.right)) else 0, 1)
            if e.op == "||":
                left = self._eval(frame, e.left)
                if self._truthy(left):
                    return Val(1, 1)
                return Val(1 if self._truthy(self._eval(frame, e.right)) else 0, 1)
            return self._binop(e.op, self._eval(frame, e.left),
                               self._eval(frame, e.right))
        if isinstance(e, ast.UnOp):
            return self._unop(frame, e)
        if isinstance(e, ast.CastExpr):
            v = self._eval(frame, e.operand)
            bits, signed = type_bits(e.target.name, self.enums)
            if v.bits is None:
                return _fit(v.pattern, bits, signed)
            if bits <= v.bits:
                return Val(v.pattern % (1 << bits), bits, signed)
            return _fit(v.as_int() if v.signed else v.pattern, bits, signed)
        if isinstance(e, ast.CallExpr):
            if isinstance(e.callee, ast.Ident) and e.callee.name in self.fns:
                args = [self._eval(frame, a) for a in e.args]
                return self.invoke(self.fns[e.callee.name], frame["env"], args)
            raise RefRevert(f"unsupported call {e.code()}")
        if isinstance(e, ast.TupleExpr):
            return tuple(self._eval(frame, i) for i in e.items)
        raise RefRevert(f"unsupported expression {e.kind}")

    def _state_value(self, name: str, keys: Tuple[int, ...]) -> Val:
        bits, signed = self._state_bits(name, len(keys))
        node = self.state.get(name)
        for k in keys:
            node = None if node is None else node.get(k)
        if node is None or isinstance(node, dict):
            return Val(0, bits, signed)
        return node

    def _member(self, frame, e: ast.MemberExpr) -> Val:
        env = frame["env"]
        if isinstance(e.base, ast.Ident):
            pair = (e.base.name, e.member)
            table = {("msg", "sender"): Val(env.sender, 160),
                     ("msg", "value"): Val(env.value, 256),
                     ("block", "number"): Val(env.block_number, 256),
                     ("block", "timestamp"): Val(env.timestamp, 256),
                     ("tx", "origin"): Val(env.sender, 160)}
            if pair in table:
                return table[pair]
            if e.base.name in self.enums:
                return Val(self.enums[e.base.name].index(e.member), 8)
        raise RefRevert(f"unsupported member {e.code()}")

    def _binop(self, op: str, a: Val, b: Val) -> Val:
        bits, signed = _common(a, b)
        if bits is None:
            # pure literal arithmetic
            x, y = a.pattern, b.pattern
            return Val(_literal_op(op, x, y), None)
        x = self._adapt(a, bits, signed).as_int()
        y = self._adapt(b, bits, signed).as_int()
        if op in ("<", "<=", ">", ">=", "==", "!="):
            result = {"<": x < y, "<=": x <= y, ">": x > y, ">=": x >= y,
                      "==": x == y, "!=": x != y}[op]
            return Val(1 if result else 0, 1)
        if op in ("/", "%"):
            if y == 0:
                raise RefRevert("division by zero")
            q = abs(x) // abs(y)
            if (x < 0) != (y < 0):
                q = -q
            return _fit(q if op == "/" else x - q * y, bits, signed)
        if op == "<<":
            amount = b.as_int()
            return _fit(0 if amount >= bits else x << amount, bits, signed) \
                if amount >= 0 else Val(0, bits, signed)
        if op == ">>":
            amount = b.as_int()
            if amount >= bits:
                return _fit(-1 if (signed and x < 0) else 0, bits, signed)
            return _fit(x >> amount, bits, signed)
        if op in ("&", "|", "^"):
            pa = self._adapt(a, bits, signed).pattern
            pb = self._adapt(b, bits, signed).pattern
            result = {"&": pa & pb, "|": pa | pb, "^": pa ^ pb}[op]
            return Val(result, bits, signed)
        result = {"+": x + y, "-": x - y, "*": x * y}[op]
        return _fit(result, bits, signed)

    def _unop(self, frame, e: ast.UnOp) -> Val:
        v = self._eval(frame, e.operand)
        if e.op == "!":
            return Val(0 if self._truthy(v) else 1, 1)
        if e.op == "-":
            if v.bits is None:
                return Val(-v.pattern, None)
            return _fit(-v.as_int(), v.bits, v.signed)
        if e.op == "~":
            if v.bits is None:
                return Val(~v.pattern, None)
            return Val(v.pattern ^ ((1 << v.bits) - 1), v.bits, v.signed)
        raise RefRevert(f"unsupported unary {e.op}")


def _literal_op(op: str, x: int, y: int) -> int:
    if op == "/":
        if y == 0:
            raise RefRevert("division by zero")
        q = abs(x) // abs(y)
        return -q if (x < 0) != (y < 0) else q
    if op == "%":
        q = _literal_op("/", x, y)
        return x - q * y
    table = {"+": x + y, "-": x - y, "*": x * y, "&": x & y, "|": x | y,
             "^": x ^ y, "<<": x << y, ">>": x >> y,
             "<": int(x < y), "<=": int(x <= y), ">": int(x > y),
             ">=": int(x >= y), "==": int(x == y), "!=": int(x != y)}
    return table[op]
