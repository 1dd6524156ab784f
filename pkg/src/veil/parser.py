"""Recursive-descent parser for the annotated contract language.

The accepted grammar is documented in docs/grammar.ebnf.  Parsing stops at
the first syntax error and reports it with the offending span.
"""
from __future__ import annotations

from typing import List, Optional, Tuple, Union

from . import ast
from .lexer import LexError, Token, int_bits, lex
from .source import CompileError, DiagnosticSink, SourceFile, Span

# binding powers, tighter binds higher
BINARY_PRECEDENCE = {
    "*": 100, "/": 100, "%": 100,
    "+": 90, "-": 90,
    "<<": 80, ">>": 80,
    "&": 70,
    "^": 60,
    "|": 50,
    "<": 40, ">": 40, "<=": 40, ">=": 40,
    "==": 30, "!=": 30,
    "&&": 20,
    "||": 10,
}

TYPE_START = ("bool", "address", "mapping")


class ParseFailure(Exception):
    pass


class Parser:
    def __init__(self, source: SourceFile):
        self.source = source
        self.diags = DiagnosticSink()
        self.tokens: List[Token] = []
        self.pos = 0

    # --- token plumbing ---------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, ahead: int = 1) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.cur
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        return self.cur.kind == kind and (text is None or self.cur.text == text)

    def at_keyword(self, word: str) -> bool:
        return self.cur.kind == "keyword" and self.cur.text == word

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        if self.at(kind, text):
            return self.advance()
        return None

    def expect(self, kind: str, what: Optional[str] = None) -> Token:
        if self.at(kind):
            return self.advance()
        expected = what or f"'{kind}'"
        self.fail(f"expected {expected}, found {self._describe(self.cur)}")

    def expect_keyword(self, word: str) -> Token:
        if self.at_keyword(word):
            return self.advance()
        self.fail(f"expected '{word}', found {self._describe(self.cur)}")

    @staticmethod
    def _describe(tok: Token) -> str:
        return "end of input" if tok.kind == "eof" else f"'{tok.text}'"

    def fail(self, message: str, span: Optional[Span] = None):
        self.diags.error("E-parse", span or self.cur.span, message)
        raise ParseFailure()

    # --- entry point ------------------------------------------------------

    def parse(self) -> ast.ContractDef:
        try:
            self.tokens, self.comments = lex(self.source)
        except LexError as e:
            raise CompileError([e.diagnostic], self.source)
        try:
            contract = self.parse_contract()
            if not self.at("eof"):
                self.fail("expected end of input after contract")
            return contract
        except ParseFailure:
            raise CompileError(self.diags.items, self.source)

    def parse_contract(self) -> ast.ContractDef:
        start = self.expect_keyword("contract").span
        name = self.expect("ident", "contract name").text
        self.expect("{")
        contract = ast.ContractDef(name=name)
        while not self.at("}"):
            if self.at_keyword("enum"):
                contract.enums.append(self.parse_enum())
            elif self.at_keyword("constructor"):
                if contract.constructor is not None:
                    self.fail("duplicate constructor")
                contract.constructor = self.parse_function(constructor=True)
            elif self.at_keyword("function"):
                contract.functions.append(self.parse_function())
            else:
                contract.state_vars.append(self.parse_state_var())
        end = self.expect("}").span
        contract.span = start.merge(end)
        return contract

    def parse_enum(self) -> ast.EnumDef:
        start = self.advance().span
        name = self.expect("ident", "enum name").text
        self.expect("{")
        members = [self.expect("ident", "enum member").text]
        while self.accept(","):
            members.append(self.expect("ident", "enum member").text)
        end = self.expect("}").span
        return ast.EnumDef(span=start.merge(end), name=name, members=members)

    def parse_state_var(self) -> ast.StateVarDecl:
        final_tok = self.accept("keyword", "final")
        ann = self.parse_annotated_type()
        name = self.expect("ident", "state variable name").text
        init = None
        if self.accept("="):
            init = self.parse_expr()
        end = self.expect(";").span
        return ast.StateVarDecl(
            span=(final_tok.span if final_tok else ann.span).merge(end),
            name=name, ann_type=ann, is_final=final_tok is not None, init=init,
            final_span=final_tok.span if final_tok else None)

    def parse_function(self, constructor: bool = False) -> ast.FunctionDef:
        start = self.advance().span
        name = "constructor" if constructor else self.expect("ident", "function name").text
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.parse_param())
            while self.accept(","):
                params.append(self.parse_param())
        self.expect(")")
        visibility, mutability = "public", ""
        while True:
            if self.cur.kind == "keyword" and self.cur.text in ("public", "private", "internal", "external"):
                visibility = self.advance().text
            elif self.cur.kind == "keyword" and self.cur.text in ("pure", "view", "payable"):
                mutability = self.advance().text
            else:
                break
        returns: List[ast.AnnotatedTypeName] = []
        if self.at_keyword("returns"):
            self.advance()
            self.expect("(")
            returns.append(self.parse_annotated_type())
            while self.accept(","):
                returns.append(self.parse_annotated_type())
            self.expect(")")
        body = self.parse_block()
        return ast.FunctionDef(span=start.merge(body.span), name=name, params=params,
                               visibility=visibility, mutability=mutability,
                               returns=returns, body=body, is_constructor=constructor)

    def parse_param(self) -> ast.Param:
        ann = self.parse_annotated_type()
        name = self.expect("ident", "parameter name").text
        return ast.Param(span=ann.span, name=name, ann_type=ann)

    # --- types ------------------------------------------------------------

    def at_type_start(self) -> bool:
        if self.cur.kind != "keyword":
            # enum type uses: `Ident Ident` at statement level is handled by
            # the declaration lookahead in parse_statement
            return False
        return self.cur.text in TYPE_START or int_bits(self.cur.text) is not None

    def parse_annotated_type(self) -> ast.AnnotatedTypeName:
        base = self.parse_base_type()
        label = None
        spans: List[Span] = []
        if self.at("@"):
            at_tok = self.advance()
            label = self.parse_label()
            spans.append(at_tok.span.merge(label.span))
        node = ast.AnnotatedTypeName(base=base, label=label, annotation_spans=spans)
        node.span = base.span if label is None else base.span.merge(label.span)
        return node

    def parse_base_type(self) -> Union[ast.TypeName, ast.MappingTypeName]:
        tok = self.cur
        if tok.kind == "keyword" and tok.text == "mapping":
            return self.parse_mapping_type()
        if tok.kind == "keyword":
            if tok.text == "address":
                self.advance()
                if self.at_keyword("payable"):
                    pay = self.advance()
                    return ast.TypeName(span=tok.span.merge(pay.span), name="address payable")
                return ast.TypeName(span=tok.span, name="address")
            if tok.text == "bool" or int_bits(tok.text) is not None:
                self.advance()
                return ast.TypeName(span=tok.span, name=tok.text)
        if tok.kind == "ident":
            self.advance()
            return ast.TypeName(span=tok.span, name=tok.text)
        self.fail(f"expected a type, found {self._describe(tok)}")

    def parse_mapping_type(self) -> ast.MappingTypeName:
        start = self.advance().span
        self.expect("(")
        key = self.parse_base_type()
        if isinstance(key, ast.MappingTypeName):
            self.fail("mapping keys cannot be mappings", key.span)
        tag = None
        tag_span = None
        if self.at("!"):
            bang = self.advance()
            tag_tok = self.expect("ident", "mapping tag name")
            tag = tag_tok.text
            tag_span = bang.span.merge(tag_tok.span)
        self.expect("=>")
        value = self.parse_annotated_type()
        end = self.expect(")").span
        return ast.MappingTypeName(span=start.merge(end), key=key, tag=tag,
                                   value=value, tag_span=tag_span)

    def parse_label(self) -> ast.LabelName:
        tok = self.cur
        if tok.kind == "ident" or (tok.kind == "keyword" and tok.text in ("me", "all")):
            self.advance()
            return ast.LabelName(span=tok.span, name=tok.text)
        self.fail("expected a privacy label ('all', 'me' or an identifier)")

    # --- statements ---------------------------------------------------------

    def parse_block(self) -> ast.Block:
        start = self.expect("{").span
        stmts = []
        while not self.at("}"):
            stmts.append(self.parse_statement())
        end = self.expect("}").span
        return ast.Block(span=start.merge(end), stmts=stmts)

    def parse_statement(self) -> ast.Stmt:
        if self.at("{"):
            return self.parse_block()
        if self.at_keyword("if"):
            return self.parse_if()
        if self.at_keyword("while"):
            return self.parse_while()
        if self.at_keyword("do"):
            return self.parse_do_while()
        if self.at_keyword("for"):
            return self.parse_for()
        if self.at_keyword("require"):
            return self.parse_require()
        if self.at_keyword("return"):
            start = self.advance().span
            value = None if self.at(";") else self.parse_expr()
            end = self.expect(";").span
            return ast.ReturnStmt(span=start.merge(end), value=value)
        decl = self.try_parse_var_decl()
        if decl is not None:
            return decl
        return self.parse_expr_or_assign_statement()

    def parse_if(self) -> ast.IfStmt:
        start = self.advance().span
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then_branch = self.as_block(self.parse_statement())
        else_branch = None
        if self.at_keyword("else"):
            self.advance()
            else_branch = self.as_block(self.parse_statement())
        end = (else_branch or then_branch).span
        return ast.IfStmt(span=start.merge(end), cond=cond,
                          then_branch=then_branch, else_branch=else_branch)

    @staticmethod
    def as_block(stmt: ast.Stmt) -> ast.Block:
        if isinstance(stmt, ast.Block):
            return stmt
        return ast.Block(span=stmt.span, stmts=[stmt])

    def parse_while(self) -> ast.WhileStmt:
        start = self.advance().span
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        body = self.as_block(self.parse_statement())
        return ast.WhileStmt(span=start.merge(body.span), cond=cond, body=body)

    def parse_do_while(self) -> ast.DoWhileStmt:
        start = self.advance().span
        body = self.as_block(self.parse_statement())
        self.expect_keyword("while")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        end = self.expect(";").span
        return ast.DoWhileStmt(span=start.merge(end), body=body, cond=cond)

    def parse_for(self) -> ast.ForStmt:
        start = self.advance().span
        self.expect("(")
        init: Optional[ast.Stmt] = None
        if not self.accept(";"):
            init = self.try_parse_var_decl()
            if init is None:
                init = self.parse_expr_or_assign_statement()
        cond = None if self.at(";") else self.parse_expr()
        self.expect(";")
        update = None
        if not self.at(")"):
            update = self.parse_expr_or_assign_statement(terminated=False)
        self.expect(")")
        body = self.as_block(self.parse_statement())
        return ast.ForStmt(span=start.merge(body.span), init=init, cond=cond,
                           update=update, body=body)

    def parse_require(self) -> ast.RequireStmt:
        start = self.advance().span
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        end = self.expect(";").span
        return ast.RequireStmt(span=start.merge(end), cond=cond)

    def try_parse_var_decl(self) -> Optional[ast.Stmt]:
        """Disambiguate declarations from expression statements by trying a
        type followed by an identifier, rolling back on failure."""
        if self.at("(") and self._looks_like_tuple_decl():
            return self.parse_tuple_decl()
        looks_typed = self.at_type_start() or (
            self.cur.kind == "ident" and self.peek().kind == "ident")
        if not looks_typed:
            return None
        saved_pos, saved_diags = self.pos, len(self.diags.items)
        try:
            ann = self.parse_annotated_type()
            name_tok = self.expect("ident", "variable name")
        except ParseFailure:
            self.pos = saved_pos
            del self.diags.items[saved_diags:]
            return None
        init = None
        if self.accept("="):
            init = self.parse_expr()
        end = self.expect(";").span
        return ast.VarDeclStmt(span=ann.span.merge(end), name=name_tok.text,
                               ann_type=ann, init=init)

    def _looks_like_tuple_decl(self) -> bool:
        nxt = self.peek()
        if nxt.kind != "keyword":
            return False
        return nxt.text in TYPE_START or int_bits(nxt.text) is not None

    def parse_tuple_decl(self) -> ast.TupleVarDeclStmt:
        start = self.expect("(").span
        names, types = [], []
        while True:
            types.append(self.parse_annotated_type())
            names.append(self.expect("ident", "variable name").text)
            if not self.accept(","):
                break
        self.expect(")")
        self.expect("=")
        init = self.parse_expr()
        end = self.expect(";").span
        return ast.TupleVarDeclStmt(span=start.merge(end), names=names,
                                    ann_types=types, init=init)

    ASSIGN_OPS = ("=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=")

    def parse_expr_or_assign_statement(self, terminated: bool = True) -> ast.Stmt:
        expr = self.parse_expr()
        stmt: ast.Stmt
        if self.cur.kind in self.ASSIGN_OPS:
            op = self.advance().text
            rhs = self.parse_expr()
            stmt = ast.AssignStmt(span=expr.span.merge(rhs.span), lhs=expr, op=op, rhs=rhs)
        else:
            stmt = ast.ExprStmt(span=expr.span, expr=expr)
        if terminated:
            end = self.expect(";").span
            stmt.span = stmt.span.merge(end)
        return stmt

    # --- expressions ----------------------------------------------------------

    def parse_expr(self, min_bp: int = 0) -> ast.Expr:
        left = self.parse_unary()
        while True:
            op = self.cur.kind
            bp = BINARY_PRECEDENCE.get(op)
            if bp is None or bp < min_bp:
                return left
            self.advance()
            right = self.parse_expr(bp + 1)
            left = ast.BinOp(span=left.span.merge(right.span), op=op, left=left, right=right)

    def parse_unary(self) -> ast.Expr:
        tok = self.cur
        if tok.kind in ("!", "~", "-", "++", "--"):
            self.advance()
            operand = self.parse_unary()
            return ast.UnOp(span=tok.span.merge(operand.span), op=tok.kind,
                            operand=operand, prefix=True)
        return self.parse_postfix()

    def parse_postfix(self) -> ast.Expr:
        expr = self.parse_primary()
        while True:
            if self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    args.append(self.parse_expr())
                    while self.accept(","):
                        args.append(self.parse_expr())
                end = self.expect(")").span
                expr = ast.CallExpr(span=expr.span.merge(end), callee=expr, args=args)
            elif self.at("["):
                self.advance()
                index = self.parse_expr()
                end = self.expect("]").span
                expr = ast.IndexExpr(span=expr.span.merge(end), base=expr, index=index)
            elif self.at("."):
                self.advance()
                member = self.cur
                if member.kind not in ("ident", "keyword"):
                    self.fail("expected member name after '.'")
                self.advance()
                expr = ast.MemberExpr(span=expr.span.merge(member.span),
                                      base=expr, member=member.text)
            elif self.at("++") or self.at("--"):
                tok2 = self.advance()
                expr = ast.UnOp(span=expr.span.merge(tok2.span), op=tok2.kind,
                                operand=expr, prefix=False)
            else:
                return expr

    def parse_primary(self) -> ast.Expr:
        tok = self.cur
        if tok.kind == "number":
            self.advance()
            return ast.IntLit(span=tok.span, value=int(tok.text, 0), text=tok.text)
        if tok.kind == "keyword":
            if tok.text in ("true", "false"):
                self.advance()
                return ast.BoolLit(span=tok.span, value=tok.text == "true")
            if tok.text == "me":
                self.advance()
                return ast.MeExpr(span=tok.span)
            if tok.text == "reveal":
                return self.parse_reveal()
            if tok.text in ("bool", "address") or int_bits(tok.text) is not None:
                # explicit cast: type '(' expr ')'
                type_node = self.parse_base_type()
                if isinstance(type_node, ast.MappingTypeName):
                    self.fail("cannot cast to a mapping type", type_node.span)
                self.expect("(")
                operand = self.parse_expr()
                end = self.expect(")").span
                return ast.CastExpr(span=type_node.span.merge(end),
                                    target=type_node, operand=operand)
        if tok.kind == "ident":
            self.advance()
            return ast.Ident(span=tok.span, name=tok.text)
        if tok.kind == "(":
            start = self.advance().span
            items = [self.parse_expr()]
            while self.accept(","):
                items.append(self.parse_expr())
            end = self.expect(")").span
            if len(items) == 1:
                inner = items[0]
                inner.span = start.merge(end)
                return inner
            return ast.TupleExpr(span=start.merge(end), items=items)
        self.fail(f"expected an expression, found {self._describe(tok)}")

    def parse_reveal(self) -> ast.RevealExpr:
        start_tok = self.advance()
        open_tok = self.expect("(")
        expr = self.parse_expr()
        comma = self.expect(",")
        label = self.parse_label()
        close = self.expect(")")
        return ast.RevealExpr(
            span=start_tok.span.merge(close.span), expr=expr, target=label,
            head_span=start_tok.span.merge(open_tok.span),
            tail_span=comma.span.merge(close.span))


def parse(source: SourceFile) -> ast.ContractDef:
    """Parse a source file into a contract AST or raise CompileError."""
    return Parser(source).parse()


def parse_with_comments(source: SourceFile) -> Tuple[ast.ContractDef, List[Span]]:
    p = Parser(source)
    contract = p.parse()
    return contract, p.comments
