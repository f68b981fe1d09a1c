"""A hand-written parser for a Java subset.

Covers what method-level authorship corpora need: classes, interfaces,
enums (constants only), fields, methods and constructors with annotations
and generics, the usual statements (including try/catch, switch, labeled
loops) and the full binary-operator precedence ladder. Node types follow
Eclipse JDT names so paths read like ``SimpleName↑MethodDeclaration↓...``.

Accepted snippets: a compilation unit, a sequence of class members
(e.g. a lone method), a sequence of statements, or a single expression.
"""

import re
from dataclasses import dataclass
from typing import List, Tuple

from codeauthor.errors import ParseError
from codeauthor.syntax.tree import AstTree, TreeBuilder

KEYWORDS = {
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally",
    "float", "for", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short",
    "static", "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
    "transient", "try", "void", "volatile", "while", "true", "false", "null", "var",
}
PRIMITIVES = {"boolean", "byte", "char", "double", "float", "int", "long", "short", "void"}
MODIFIERS = {"abstract", "final", "native", "private", "protected", "public", "static",
             "strictfp", "synchronized", "transient", "volatile", "default"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<number>0[xX][0-9a-fA-F_]+[lL]?|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlL]?)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<char>'(?:[^'\\\n]|\\.)+')
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<op>>>>=|<<=|>>=|\.\.\.|->|::|\+\+|--|&&|\|\||[+\-*/%&|^!=<>]=|[{}()\[\];,.@?:~+\-*/%&|^!=<>])
""", re.VERBOSE | re.DOTALL)

ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>="}
BINARY_PRECEDENCE = [
    ("||",), ("&&",), ("|",), ("^",), ("&",), ("==", "!="),
    ("<", ">", "<=", ">=", "instanceof"), ("<<", ">>", ">>>"), ("+", "-"), ("*", "/", "%"),
]


@dataclass(frozen=True)
class Tok:
    kind: str  # ident, keyword, number, string, char, op, eof
    text: str
    start: int
    end: int


def tokenize(source: str) -> List[Tok]:
    toks = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            if source.startswith("/*", pos):
                raise ParseError("unterminated comment", _byte_offset(source, pos))
            raise ParseError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            text = m.group()
            if kind == "ident" and text in KEYWORDS:
                kind = "keyword"
            toks.append(Tok(kind, text, pos, m.end()))
        pos = m.end()
    toks.append(Tok("eof", "", n, n))
    return toks


def _byte_offset(source: str, char_pos: int) -> int:
    return len(source[:char_pos].encode("utf-8"))


@dataclass(frozen=True)
class MethodDecl:
    """A method or constructor found in a compilation unit."""

    name: str
    param_types: Tuple[str, ...]
    owner: str  # dotted path of enclosing type names, "" for top-level snippets
    start: int  # character span of the whole declaration, modifiers included
    end: int
    text: str

    @property
    def signature(self) -> str:
        prefix = f"{self.owner}#" if self.owner else ""
        return f"{prefix}{self.name}({','.join(self.param_types)})"


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, source: str):
        self.source = source
        self.toks = tokenize(source)
        self.i = 0
        self.b = TreeBuilder()
        self.methods: List[MethodDecl] = []
        self.owners: List[str] = []
        self.speculative = 0
        self.tok_log = []  # (index, original token) for tokens split by close_angle
        self.far = (-1, "syntax error")

    # -- token helpers -------------------------------------------------

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k=1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts) -> bool:
        t = self.tok
        return t.kind in ("op", "keyword") and t.text in texts

    def advance(self) -> Tok:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def accept(self, text) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def error(self, message):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        if t.start >= self.far[0]:
            self.far = (t.start, f"{message}, found {found}")
        if self.speculative:
            raise _Backtrack()
        raise ParseError(f"{message}, found {found}", _byte_offset(self.source, t.start))

    def expect(self, text) -> Tok:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def ident(self) -> Tok:
        # contextual keywords usable as names
        if self.tok.kind == "ident" or (self.tok.kind == "keyword" and self.tok.text == "var"):
            return self.advance()
        self.error("expected identifier")

    def name_leaf(self) -> int:
        return self.b.leaf("SimpleName", self.ident().text)

    def attempt(self, fn):
        """Run ``fn`` speculatively; restore position and return None on failure."""
        saved_i, saved_nodes, saved_methods = self.i, len(self.b._types), len(self.methods)
        saved_log, saved_owners = len(self.tok_log), list(self.owners)
        self.speculative += 1
        try:
            return fn()
        except _Backtrack:
            self.i = saved_i
            self.owners = saved_owners
            while len(self.tok_log) > saved_log:
                index, original = self.tok_log.pop()
                self.toks[index] = original
            del self.b._types[saved_nodes:], self.b._tokens[saved_nodes:], self.b._children[saved_nodes:]
            del self.methods[saved_methods:]
            return None
        finally:
            self.speculative -= 1

    # -- entry points --------------------------------------------------

    def parse(self) -> AstTree:
        if self.tok.kind == "eof":
            raise ParseError("empty input: no root construct", 0)
        for fn in (self.compilation_unit, self.statement_snippet, self.expression_snippet):
            root = self.attempt(fn)
            if root is not None:
                return self.b.build(root)
        pos, message = self.far
        raise ParseError(message, _byte_offset(self.source, pos))

    def compilation_unit(self):
        items = []
        if self.at("package"):
            self.advance()
            items.append(self.b.node("PackageDeclaration", [self.qualified_name()]))
            self.expect(";")
        while self.at("import"):
            self.advance()
            self.accept("static")
            parts = [self.qualified_name()]
            if self.at(".") and self.peek().text == "*":
                self.advance()
                self.advance()
                parts.append(self.b.leaf("Wildcard", "*"))
            self.expect(";")
            items.append(self.b.node("ImportDeclaration", parts))
        while self.tok.kind != "eof":
            if self.accept(";"):
                continue
            items.append(self.member())
        if not items:
            self.error("expected declaration")
        if len(items) == 1:
            return items[0]
        return self.b.node("CompilationUnit", items)

    def statement_snippet(self):
        stmts = []
        while self.tok.kind != "eof":
            stmts.append(self.statement())
        if not stmts:
            self.error("expected statement")
        return stmts[0] if len(stmts) == 1 else self.b.node("Block", stmts)

    def expression_snippet(self):
        expr = self.expression()
        if self.tok.kind != "eof":
            self.error("unexpected trailing input")
        return self.b.node("Expression", [expr])

    # -- declarations ----------------------------------------------------

    def qualified_name(self) -> int:
        first = self.ident().text
        name = self.b.leaf("SimpleName", first)
        while self.at(".") and self.peek().kind == "ident":
            self.advance()
            right = self.name_leaf()
            name = self.b.node("QualifiedName", [name, right])
        return name

    def annotation(self) -> int:
        self.expect("@")
        if self.at("interface"):
            self.error("annotation type declarations are not supported")
        name = self.qualified_name()
        if self.at("("):
            self.advance()
            args = []
            while not self.at(")"):
                if self.tok.kind == "ident" and self.peek().text == "=":
                    key = self.name_leaf()
                    self.advance()
                    args.append(self.b.node("MemberValuePair", [key, self.annotation_value()]))
                else:
                    args.append(self.annotation_value())
                if not self.accept(","):
                    break
            self.expect(")")
            return self.b.node("NormalAnnotation", [name] + args)
        return self.b.node("MarkerAnnotation", [name])

    def annotation_value(self) -> int:
        if self.at("@"):
            return self.annotation()
        if self.at("{"):
            self.advance()
            values = []
            while not self.at("}"):
                values.append(self.annotation_value())
                if not self.accept(","):
                    break
            self.expect("}")
            return self.b.node("ArrayInitializer", values, token="{}")
        return self.conditional()

    def modifiers(self) -> List[int]:
        mods = []
        while True:
            if self.at("@") and not (self.peek().kind == "keyword" and self.peek().text == "interface"):
                mods.append(self.annotation())
            elif self.tok.kind == "keyword" and self.tok.text in MODIFIERS \
                    and not (self.tok.text == "default" and self.peek().text == ":"):
                mods.append(self.b.leaf("Modifier", self.advance().text))
            else:
                return mods

    def member(self) -> int:
        start = self.tok.start
        mods = self.modifiers()
        if self.at("class", "interface", "enum"):
            return self.type_declaration(mods)
        if self.at("{"):
            body = self.block()
            return self.b.node("Initializer", mods + [body])
        type_params = self.type_parameters() if self.at("<") else []
        # constructor: Name (
        if self.tok.kind == "ident" and self.peek().text == "(":
            return self.method_rest(start, mods, type_params, None, constructor=True)
        rtype = self.type()
        if self.tok.kind == "ident" and self.peek().text == "(":
            return self.method_rest(start, mods, type_params, rtype, constructor=False)
        if type_params:
            self.error("expected method declaration")
        frags = [self.variable_fragment()]
        while self.accept(","):
            frags.append(self.variable_fragment())
        self.expect(";")
        return self.b.node("FieldDeclaration", mods + [rtype] + frags)

    def type_declaration(self, mods) -> int:
        kind = self.advance().text
        name_tok = self.ident()
        name = self.b.leaf("SimpleName", name_tok.text)
        parts = mods + [name]
        if self.at("<"):
            parts.extend(self.type_parameters())
        if self.accept("extends"):
            parts.append(self.type())
            while self.accept(","):
                parts.append(self.type())
        if self.accept("implements"):
            parts.append(self.type())
            while self.accept(","):
                parts.append(self.type())
        self.owners.append(name_tok.text)
        try:
            self.expect("{")
            if kind == "enum":
                while self.tok.kind == "ident" or self.at("@"):
                    consts = self.modifiers()
                    consts.append(self.name_leaf())
                    if self.at("("):
                        consts.extend(self.arguments())
                    parts.append(self.b.node("EnumConstantDeclaration", consts))
                    if not self.accept(","):
                        break
                self.accept(";")
            while not self.at("}"):
                if self.tok.kind == "eof":
                    self.error("expected '}'")
                if self.accept(";"):
                    continue
                parts.append(self.member())
            self.expect("}")
        finally:
            self.owners.pop()
        label = {"class": "TypeDeclaration", "interface": "TypeDeclaration:interface",
                 "enum": "EnumDeclaration"}[kind]
        return self.b.node(label, parts)

    def type_parameters(self) -> List[int]:
        self.expect("<")
        params = []
        while True:
            parts = [self.name_leaf()]
            if self.accept("extends"):
                parts.append(self.type())
                while self.accept("&"):
                    parts.append(self.type())
            params.append(self.b.node("TypeParameter", parts))
            if not self.accept(","):
                break
        self.close_angle()
        return params

    def method_rest(self, start, mods, type_params, rtype, constructor) -> int:
        name_tok = self.ident()
        name = self.b.leaf("SimpleName", name_tok.text)
        self.expect("(")
        params = []
        ptypes = []
        while not self.at(")"):
            pnode, ptype = self.parameter()
            params.append(pnode)
            ptypes.append(ptype)
            if not self.accept(","):
                break
        self.expect(")")
        while self.at("["):  # legacy array-return syntax
            self.advance()
            self.expect("]")
        throws = []
        if self.accept("throws"):
            throws.append(self.type())
            while self.accept(","):
                throws.append(self.type())
        if self.at("default"):
            self.advance()
            self.annotation_value()
        if self.at("{"):
            body = [self.block()]
        else:
            self.expect(";")
            body = []
        end = self.toks[self.i - 1].end
        parts = mods + type_params + ([rtype] if rtype is not None else []) + [name] + params + throws + body
        label = "MethodDeclaration:constructor" if constructor else "MethodDeclaration"
        node = self.b.node(label, parts)
        self.methods.append(MethodDecl(name_tok.text, tuple(ptypes), ".".join(self.owners),
                                       start, end, self.source[start:end]))
        return node

    def parameter(self):
        mods = self.modifiers()
        t0 = self.i
        ptype = self.type()
        type_text = "".join(t.text for t in self.toks[t0:self.i])
        varargs = self.accept("...")
        if varargs:
            type_text += "..."
        name = self.name_leaf()
        dims = 0
        while self.at("["):
            self.advance()
            self.expect("]")
            dims += 1
        type_text += "[]" * dims
        label = "SingleVariableDeclaration:varargs" if varargs else "SingleVariableDeclaration"
        return self.b.node(label, mods + [ptype, name]), _erase_generics(type_text)

    def variable_fragment(self) -> int:
        parts = [self.name_leaf()]
        while self.at("["):
            self.advance()
            self.expect("]")
        if self.accept("="):
            parts.append(self.array_initializer() if self.at("{") else self.expression())
        return self.b.node("VariableDeclarationFragment", parts)

    def array_initializer(self) -> int:
        self.expect("{")
        items = []
        while not self.at("}"):
            items.append(self.array_initializer() if self.at("{") else self.expression())
            if not self.accept(","):
                break
        self.expect("}")
        return self.b.node("ArrayInitializer", items, token="{}")

    # -- types -----------------------------------------------------------

    def type(self) -> int:
        if self.tok.kind == "keyword" and self.tok.text in PRIMITIVES:
            node = self.b.leaf("PrimitiveType", self.advance().text)
        elif self.tok.kind == "ident" or self.at("var"):
            node = self.class_type()
        else:
            self.error("expected type")
        while self.at("[") and self.peek().text == "]":
            self.advance()
            self.advance()
            node = self.b.node("ArrayType", [node])
        return node

    def class_type(self) -> int:
        node = self.b.node("SimpleType", [self.name_leaf()])
        while True:
            if self.at("<"):
                args = self.type_arguments()
                node = self.b.node("ParameterizedType", [node] + args)
            if self.at(".") and self.peek().kind == "ident":
                self.advance()
                node = self.b.node("QualifiedType", [node, self.name_leaf()])
                continue
            return node

    def type_arguments(self) -> List[int]:
        self.expect("<")
        args = []
        if self.at(">"):  # diamond
            self.advance()
            return args
        while True:
            if self.at("?"):
                self.advance()
                bound = []
                if self.at("extends", "super"):
                    kw = self.advance().text
                    bound = [self.type()]
                    args.append(self.b.node(f"WildcardType:{kw}", bound))
                else:
                    args.append(self.b.leaf("WildcardType", "?"))
            else:
                args.append(self.type())
            if not self.accept(","):
                break
        self.close_angle()
        return args

    def close_angle(self):
        # split '>>' / '>>>' / '>=' tokens when closing nested generics
        t = self.tok
        if t.kind == "op" and t.text.startswith(">"):
            if t.text == ">":
                self.advance()
            else:
                self.tok_log.append((self.i, t))
                self.toks[self.i] = Tok("op", t.text[1:], t.start + 1, t.end)
            return
        self.error("expected '>'")

    # -- statements ------------------------------------------------------

    def block(self) -> int:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("expected '}'")
            stmts.append(self.statement())
        self.expect("}")
        return self.b.node("Block", stmts, token="{}")

    def statement(self) -> int:
        t = self.tok
        if t.kind == "op":
            if t.text == "{":
                return self.block()
            if t.text == ";":
                self.advance()
                return self.b.leaf("EmptyStatement", ";")
        if t.kind == "keyword":
            handler = getattr(self, f"stmt_{t.text}", None)
            if handler is not None:
                return handler()
            if t.text in ("class", "interface", "enum", "final", "abstract", "static"):
                decl = self.attempt(self.local_variable_declaration)
                if decl is not None:
                    return decl
                mods = self.modifiers()
                return self.b.node("TypeDeclarationStatement", [self.type_declaration(mods)])
        if t.kind == "ident" and self.peek().text == ":" :
            label = self.name_leaf()
            self.advance()
            return self.b.node("LabeledStatement", [label, self.statement()])
        if t.text == "@" or t.kind in ("ident", "keyword"):
            decl = self.attempt(self.local_variable_declaration)
            if decl is not None:
                return decl
        expr = self.expression()
        self.expect(";")
        return self.b.node("ExpressionStatement", [expr])

    def local_variable_declaration(self) -> int:
        mods = self.modifiers()
        vtype = self.type()
        if not (self.tok.kind == "ident" or self.at("var")):
            self.error("expected variable name")
        frags = [self.variable_fragment()]
        while self.accept(","):
            frags.append(self.variable_fragment())
        self.expect(";")
        return self.b.node("VariableDeclarationStatement", mods + [vtype] + frags)

    def paren_expression(self) -> int:
        self.expect("(")
        e = self.expression()
        self.expect(")")
        return e

    def stmt_if(self):
        self.advance()
        parts = [self.paren_expression(), self.statement()]
        if self.accept("else"):
            parts.append(self.statement())
        return self.b.node("IfStatement", parts)

    def stmt_while(self):
        self.advance()
        return self.b.node("WhileStatement", [self.paren_expression(), self.statement()])

    def stmt_do(self):
        self.advance()
        body = self.statement()
        self.expect("while")
        cond = self.paren_expression()
        self.expect(";")
        return self.b.node("DoStatement", [body, cond])

    def stmt_for(self):
        self.advance()
        self.expect("(")
        enhanced = self.attempt(self._enhanced_for_header)
        if enhanced is not None:
            var, iterable = enhanced
            return self.b.node("EnhancedForStatement", [var, iterable, self.statement()])
        parts = []
        if not self.at(";"):
            decl = self.attempt(self._for_init_declaration)
            if decl is not None:
                parts.append(decl)
            else:
                parts.append(self.expression())
                while self.accept(","):
                    parts.append(self.expression())
        self.expect(";")
        if not self.at(";"):
            parts.append(self.expression())
        self.expect(";")
        updates = []
        if not self.at(")"):
            updates.append(self.expression())
            while self.accept(","):
                updates.append(self.expression())
        self.expect(")")
        parts.extend(updates)
        parts.append(self.statement())
        return self.b.node("ForStatement", parts)

    def _enhanced_for_header(self):
        mods = self.modifiers()
        vtype = self.type()
        name = self.name_leaf()
        self.expect(":")
        var = self.b.node("SingleVariableDeclaration", mods + [vtype, name])
        iterable = self.expression()
        self.expect(")")
        return var, iterable

    def _for_init_declaration(self):
        mods = self.modifiers()
        vtype = self.type()
        frags = [self.variable_fragment()]
        while self.accept(","):
            frags.append(self.variable_fragment())
        if not self.at(";"):
            self.error("expected ';'")
        return self.b.node("VariableDeclarationExpression", mods + [vtype] + frags)

    def stmt_return(self):
        self.advance()
        parts = [] if self.at(";") else [self.expression()]
        self.expect(";")
        return self.b.node("ReturnStatement", parts, token="return")

    def stmt_break(self):
        self.advance()
        parts = [self.name_leaf()] if self.tok.kind == "ident" else []
        self.expect(";")
        return self.b.node("BreakStatement", parts, token="break")

    def stmt_continue(self):
        self.advance()
        parts = [self.name_leaf()] if self.tok.kind == "ident" else []
        self.expect(";")
        return self.b.node("ContinueStatement", parts, token="continue")

    def stmt_throw(self):
        self.advance()
        e = self.expression()
        self.expect(";")
        return self.b.node("ThrowStatement", [e])

    def stmt_assert(self):
        self.advance()
        parts = [self.expression()]
        if self.accept(":"):
            parts.append(self.expression())
        self.expect(";")
        return self.b.node("AssertStatement", parts)

    def stmt_synchronized(self):
        self.advance()
        return self.b.node("SynchronizedStatement", [self.paren_expression(), self.block()])

    def stmt_try(self):
        self.advance()
        parts = []
        if self.accept("("):
            resources = []
            while not self.at(")"):
                mods = self.modifiers()
                rtype = self.type()
                frag = self.variable_fragment()
                resources.append(self.b.node("VariableDeclarationExpression", mods + [rtype, frag]))
                if not self.accept(";"):
                    break
            self.expect(")")
            parts.extend(resources)
        parts.append(self.block())
        catches = 0
        while self.at("catch"):
            self.advance()
            self.expect("(")
            mods = self.modifiers()
            types = [self.type()]
            while self.accept("|"):
                types.append(self.type())
            ctype = types[0] if len(types) == 1 else self.b.node("UnionType", types)
            name = self.name_leaf()
            self.expect(")")
            var = self.b.node("SingleVariableDeclaration", mods + [ctype, name])
            parts.append(self.b.node("CatchClause", [var, self.block()]))
            catches += 1
        if self.accept("finally"):
            parts.append(self.b.node("Finally", [self.block()]))
        elif catches == 0 and len(parts) == 1:
            self.error("expected 'catch' or 'finally'")
        return self.b.node("TryStatement", parts)

    def stmt_switch(self):
        self.advance()
        parts = [self.paren_expression()]
        self.expect("{")
        while not self.at("}"):
            if self.accept("default"):
                self.expect(":")
                parts.append(self.b.leaf("SwitchCase", "default"))
            elif self.accept("case"):
                label = self.expression()
                self.expect(":")
                parts.append(self.b.node("SwitchCase", [label]))
            else:
                if self.tok.kind == "eof":
                    self.error("expected '}'")
                parts.append(self.statement())
        self.expect("}")
        return self.b.node("SwitchStatement", parts)

    # -- expressions -----------------------------------------------------

    def expression(self) -> int:
        lambda_node = self.attempt(self.lambda_expression)
        if lambda_node is not None:
            return lambda_node
        left = self.conditional()
        if self.tok.kind == "op" and self.tok.text in ASSIGN_OPS:
            op = self.advance().text
            right = self.array_initializer() if self.at("{") else self.expression()
            return self.b.node(f"Assignment:{op}", [left, right])
        return left

    def lambda_expression(self) -> int:
        params = []
        if self.tok.kind == "ident" and self.peek().text == "->":
            params.append(self.b.node("VariableDeclarationFragment", [self.name_leaf()]))
        else:
            self.expect("(")
            while not self.at(")"):
                if self.tok.kind == "ident" and self.peek().text in (",", ")"):
                    params.append(self.b.node("VariableDeclarationFragment", [self.name_leaf()]))
                else:
                    pnode, _ = self.parameter()
                    params.append(pnode)
                if not self.accept(","):
                    break
            self.expect(")")
        self.expect("->")
        body = self.block() if self.at("{") else self.expression()
        return self.b.node("LambdaExpression", params + [body])

    def conditional(self) -> int:
        cond = self.binary(0)
        if self.accept("?"):
            a = self.expression()
            self.expect(":")
            b = self.conditional_or_lambda()
            return self.b.node("ConditionalExpression", [cond, a, b])
        return cond

    def conditional_or_lambda(self) -> int:
        lambda_node = self.attempt(self.lambda_expression)
        return lambda_node if lambda_node is not None else self.conditional()

    def binary(self, level) -> int:
        if level == len(BINARY_PRECEDENCE):
            return self.unary()
        ops = BINARY_PRECEDENCE[level]
        left = self.binary(level + 1)
        while True:
            t = self.tok
            if ops[0] == "<<":
                op = self._shift_operator()
                if op is None:
                    return left
            elif t.kind not in ("op", "keyword") or t.text not in ops:
                return left
            else:
                op = self.advance().text
            if op == "instanceof":
                right = self.type()
                left = self.b.node("InstanceofExpression", [left, right])
            else:
                right = self.binary(level + 1)
                left = self.b.node(f"InfixExpression:{op}", [left, right])

    def _shift_operator(self):
        # the lexer never merges '<<' / '>>' so that nested generics close cleanly
        t = self.tok
        if t.kind != "op" or t.text not in ("<", ">"):
            return None
        n1 = self.peek()
        if n1.text != t.text or n1.start != t.end:
            return None
        n2 = self.peek(2)
        if t.text == ">" and n2.text == ">" and n2.start == n1.end:
            self.i += 3
            return ">>>"
        self.i += 2
        return t.text * 2

    def unary(self) -> int:
        t = self.tok
        if t.kind == "op" and t.text in ("+", "-", "!", "~", "++", "--"):
            self.advance()
            return self.b.node(f"PrefixExpression:{t.text}", [self.unary()])
        if t.kind == "op" and t.text == "(":
            cast = self.attempt(self.cast_expression)
            if cast is not None:
                return cast
        return self.postfix(self.primary())

    def cast_expression(self) -> int:
        self.expect("(")
        primitive = self.tok.kind == "keyword" and self.tok.text in PRIMITIVES
        ctype = self.type()
        self.expect(")")
        nxt = self.tok
        if primitive:
            operand = self.unary()
        elif nxt.kind in ("ident", "number", "string", "char") or \
                (nxt.kind == "keyword" and nxt.text in ("this", "new", "super", "true", "false", "null")) or \
                (nxt.kind == "op" and nxt.text in ("(", "!", "~")):
            operand = self.unary()
        else:
            self.error("not a cast")
        return self.b.node("CastExpression", [ctype, operand])

    def arguments(self) -> List[int]:
        self.expect("(")
        args = []
        while not self.at(")"):
            args.append(self.expression())
            if not self.accept(","):
                break
        self.expect(")")
        return args

    def primary(self) -> int:
        t = self.tok
        if t.kind == "number":
            self.advance()
            return self.b.leaf("NumberLiteral", t.text)
        if t.kind == "string":
            self.advance()
            return self.b.leaf("StringLiteral", t.text)
        if t.kind == "char":
            self.advance()
            return self.b.leaf("CharacterLiteral", t.text)
        if t.kind == "keyword":
            if t.text in ("true", "false"):
                self.advance()
                return self.b.leaf("BooleanLiteral", t.text)
            if t.text == "null":
                self.advance()
                return self.b.leaf("NullLiteral", "null")
            if t.text == "this":
                self.advance()
                if self.at("("):
                    return self.b.node("ConstructorInvocation", self.arguments(), token="this")
                return self.b.leaf("ThisExpression", "this")
            if t.text == "super":
                self.advance()
                if self.at("("):
                    return self.b.node("SuperConstructorInvocation", self.arguments(), token="super")
                self.expect(".")
                name = self.name_leaf()
                if self.at("("):
                    return self.b.node("SuperMethodInvocation", [name] + self.arguments())
                return self.b.node("SuperFieldAccess", [name])
            if t.text == "new":
                return self.creation()
            if t.text in PRIMITIVES:
                # int.class, int[].class
                ptype = self.type()
                self.expect(".")
                self.expect("class")
                return self.b.node("TypeLiteral", [ptype])
        if t.kind == "ident" or (t.kind == "keyword" and t.text == "var"):
            if self.peek().text == "(":
                name = self.name_leaf()
                return self.b.node("MethodInvocation", [name] + self.arguments())
            generic = self.attempt(self._generic_type_primary)
            if generic is not None:
                return generic
            return self.name_leaf()
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expression()
            self.expect(")")
            return self.b.node("ParenthesizedExpression", [e])
        self.error("expected expression")

    def _generic_type_primary(self):
        # Type<Args>::method or Type[]::new / Type[].class
        ctype = self.type()
        if self.at("::"):
            self.advance()
            target = self.b.leaf("SimpleName", self.advance().text)
            return self.b.node("TypeMethodReference", [ctype, target])
        if self.at(".") and self.peek().text == "class":
            self.advance()
            self.advance()
            return self.b.node("TypeLiteral", [ctype])
        self.error("not a type expression")

    def creation(self) -> int:
        self.expect("new")
        if self.tok.kind == "keyword" and self.tok.text in PRIMITIVES:
            etype = self.b.leaf("PrimitiveType", self.advance().text)
        else:
            etype = self.class_type()
        if self.at("["):
            dims = []
            while self.at("["):
                self.advance()
                if self.at("]"):
                    self.advance()
                    dims.append(None)
                else:
                    dims.append(self.expression())
                    self.expect("]")
            parts = [etype] + [d for d in dims if d is not None]
            if self.at("{"):
                parts.append(self.array_initializer())
            return self.b.node("ArrayCreation", parts)
        args = self.arguments()
        parts = [etype] + args
        if self.at("{"):
            self.owners.append("")
            try:
                self.expect("{")
                body = []
                while not self.at("}"):
                    if self.tok.kind == "eof":
                        self.error("expected '}'")
                    if self.accept(";"):
                        continue
                    body.append(self.member())
                self.expect("}")
            finally:
                self.owners.pop()
            parts.append(self.b.node("AnonymousClassDeclaration", body, token="{}"))
        return self.b.node("ClassInstanceCreation", parts)

    def postfix(self, node) -> int:
        while True:
            if self.at("."):
                self.advance()
                if self.at("new"):
                    inner = self.creation()
                    node = self.b.node("ClassInstanceCreation:qualified", [node, inner])
                    continue
                if self.at("<"):
                    self.type_arguments()
                if self.at("this", "class"):
                    kw = self.advance().text
                    node = self.b.node("ThisExpression" if kw == "this" else "TypeLiteral", [node])
                    continue
                name = self.name_leaf()
                if self.at("("):
                    node = self.b.node("MethodInvocation", [node, name] + self.arguments())
                else:
                    node = self.b.node("FieldAccess", [node, name])
            elif self.at("::"):
                self.advance()
                target = self.b.leaf("SimpleName", self.advance().text)
                node = self.b.node("ExpressionMethodReference", [node, target])
            elif self.at("["):
                self.advance()
                index = self.expression()
                self.expect("]")
                node = self.b.node("ArrayAccess", [node, index])
            elif self.at("++", "--"):
                op = self.advance().text
                node = self.b.node(f"PostfixExpression:{op}", [node])
            else:
                return node


def _erase_generics(type_text: str) -> str:
    depth = 0
    out = []
    for ch in type_text:
        if ch == "<":
            depth += 1
        elif ch == ">":
            depth -= 1
        elif depth == 0:
            out.append(ch)
    text = "".join(out)
    return text.rsplit(".", 1)[-1] if "." in text.replace("...", "") else text


def parse(source: str) -> AstTree:
    return Parser(source).parse()


def find_methods(source: str) -> List[MethodDecl]:
    """Methods and constructors declared anywhere in ``source``, in source order."""
    parser = Parser(source)
    parser.parse()
    return sorted(parser.methods, key=lambda m: m.start)
