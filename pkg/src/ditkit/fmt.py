"""Textual netlist format: line-based declarations with prefix expressions.

Grammar (one declaration per line, ';' starts a comment):

    module <id>
      input <id> <width> (control|data)
      output <id> <width> (control|data)
      reg <id> <width> init (<uint>|X)
      wire <id> <width> = <expr>
      next <regid> = <expr>
      drive <outid> = <expr>
      box <id> in ( (<id> <expr> (control|data))* ) out ( (<id> <width> (control|data))* )
      observe <id>
    endmodule

Expr: <id> | (const <w> <v>) | (not e) | (and e e) | (or e e) | (xor e e)
    | (add e e) | (sub e e) | (mul e e) | (eq e e) | (ult e e)
    | (mux e e e) | (shl e <n>) | (shr e <n>) | (slice e <hi> <lo>)
    | (concat e e)
"""

from __future__ import annotations

import re

from .expr import (
    Expr,
    const,
    econcat,
    eslice,
    eshl,
    eshr,
    ref,
)
from .netlist import (
    BoxDecl,
    BoxPortIn,
    BoxPortOut,
    Netlist,
    Port,
    Register,
    validate,
)


class ParseError(ValueError):
    def __init__(self, message, line=None, col=None):
        loc = ""
        if line is not None:
            loc = " at line %d" % line
            if col is not None:
                loc += ", column %d" % col
        super().__init__(message + loc)
        self.line = line
        self.col = col


_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.$\[\]]*")
_INT_RE = re.compile(r"[0-9]+")

_NARY = {
    "not": 1,
    "and": 2,
    "or": 2,
    "xor": 2,
    "add": 2,
    "sub": 2,
    "mul": 2,
    "eq": 2,
    "ult": 2,
    "mux": 3,
    "concat": 2,
}


class _Tokens:
    """Token stream over one line: ids, ints, parens and '='."""

    def __init__(self, text, line_no):
        self.line_no = line_no
        self.toks = []  # (value, col)
        i = 0
        while i < len(text):
            c = text[i]
            if c == ";":
                break
            if c.isspace():
                i += 1
                continue
            if c in "()=":
                self.toks.append((c, i + 1))
                i += 1
                continue
            m = _INT_RE.match(text, i)
            if m and not text[i].isalpha() and text[i] != "_":
                self.toks.append((m.group(), i + 1))
                i = m.end()
                continue
            m = _ID_RE.match(text, i)
            if m:
                self.toks.append((m.group(), i + 1))
                i = m.end()
                continue
            raise ParseError("unexpected character %r" % c, line_no, i + 1)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos][0] if self.pos < len(self.toks) else None

    def next(self, what="token"):
        if self.pos >= len(self.toks):
            raise ParseError("expected %s, found end of line" % what, self.line_no)
        tok, col = self.toks[self.pos]
        self.pos += 1
        self.col = col
        return tok

    def expect(self, lit):
        tok = self.next("%r" % lit)
        if tok != lit:
            raise ParseError("expected %r, found %r" % (lit, tok), self.line_no, self.col)

    def ident(self, what="identifier"):
        tok = self.next(what)
        if not _ID_RE.fullmatch(tok):
            raise ParseError("expected %s, found %r" % (what, tok), self.line_no, self.col)
        return tok

    def integer(self, what="integer"):
        tok = self.next(what)
        if not _INT_RE.fullmatch(tok):
            raise ParseError("expected %s, found %r" % (what, tok), self.line_no, self.col)
        return int(tok)

    def role(self):
        tok = self.next("role")
        if tok not in ("control", "data"):
            raise ParseError("expected 'control' or 'data', found %r" % tok, self.line_no, self.col)
        return tok

    def done(self):
        if self.pos < len(self.toks):
            tok, col = self.toks[self.pos]
            raise ParseError("trailing %r" % tok, self.line_no, col)


def _parse_expr(t: _Tokens) -> Expr:
    tok = t.next("expression")
    if tok != "(":
        if _INT_RE.fullmatch(tok):
            raise ParseError("bare integer %r; constants are (const <w> <v>)" % tok, t.line_no, t.col)
        if not _ID_RE.fullmatch(tok):
            raise ParseError("expected expression, found %r" % tok, t.line_no, t.col)
        return ref(tok)
    op = t.next("operator")
    if op == "const":
        w = t.integer("width")
        v = t.integer("value")
        t.expect(")")
        try:
            return const(w, v)
        except ValueError as e:
            raise ParseError(str(e), t.line_no, t.col) from None
    if op in ("shl", "shr"):
        a = _parse_expr(t)
        amt = t.integer("shift amount")
        t.expect(")")
        return (eshl if op == "shl" else eshr)(a, amt)
    if op == "slice":
        a = _parse_expr(t)
        hi = t.integer("slice hi")
        lo = t.integer("slice lo")
        t.expect(")")
        return eslice(a, hi, lo)
    if op in _NARY:
        args = tuple(_parse_expr(t) for _ in range(_NARY[op]))
        t.expect(")")
        return Expr(op, args=args)
    raise ParseError("unknown operator %r" % op, t.line_no, t.col)


def parse_expr_text(text: str, line_no: int = 1) -> Expr:
    """Parse a standalone expression (used for sidecar constraints)."""
    t = _Tokens(text, line_no)
    e = _parse_expr(t)
    t.done()
    return e


def parse_netlist(text: str) -> Netlist:
    """Parse and validate a netlist from source text.

    Raises ParseError with line/column on syntax errors; a validation
    failure raises ParseError naming the first diagnostic.
    """
    n = None
    ended = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        t = _Tokens(raw, line_no)
        head = t.peek()
        if head is None:
            continue
        t.next()
        if head == "module":
            if n is not None:
                raise ParseError("nested module", line_no)
            n = Netlist(name=t.ident("module name"))
            t.done()
            continue
        if n is None or ended:
            raise ParseError("declaration outside module", line_no)
        if head == "endmodule":
            t.done()
            ended = True
            continue
        if head == "input" or head == "output":
            name = t.ident()
            width = t.integer("width")
            role = t.role()
            t.done()
            (n.inputs if head == "input" else n.outputs).append(Port(name, width, role))
        elif head == "reg":
            name = t.ident()
            width = t.integer("width")
            t.expect("init")
            tok = t.next("init value or X")
            if tok == "X":
                init = None
            elif _INT_RE.fullmatch(tok):
                init = int(tok)
            else:
                raise ParseError("expected init value or X, found %r" % tok, line_no, t.col)
            t.done()
            n.regs.append(Register(name, width, init))
        elif head == "wire":
            name = t.ident()
            width = t.integer("width")
            t.expect("=")
            e = _parse_expr(t)
            t.done()
            n.wires.append((name, width, e))
        elif head == "next":
            name = t.ident()
            t.expect("=")
            e = _parse_expr(t)
            t.done()
            if name in n.next_fns:
                raise ParseError("second next function for register %r" % name, line_no)
            n.next_fns[name] = e
        elif head == "drive":
            name = t.ident()
            t.expect("=")
            e = _parse_expr(t)
            t.done()
            if name in n.drive_fns:
                raise ParseError("second drive function for output %r" % name, line_no)
            n.drive_fns[name] = e
        elif head == "box":
            name = t.ident()
            t.expect("in")
            t.expect("(")
            ins = []
            while t.peek() == "(":
                t.expect("(")
                bname = t.ident()
                bexpr = _parse_expr(t)
                brole = t.role()
                t.expect(")")
                ins.append(BoxPortIn(bname, bexpr, brole))
            t.expect(")")
            t.expect("out")
            t.expect("(")
            outs = []
            while t.peek() == "(":
                t.expect("(")
                oname = t.ident()
                owidth = t.integer("width")
                orole = t.role()
                t.expect(")")
                outs.append(BoxPortOut(oname, owidth, orole))
            t.expect(")")
            t.done()
            n.boxes.append(BoxDecl(name, tuple(ins), tuple(outs)))
        elif head == "observe":
            name = t.ident()
            t.done()
            n.observations.append(name)
        else:
            raise ParseError("unknown declaration %r" % head, line_no)
    if n is None:
        raise ParseError("no module found", 1)
    if not ended:
        raise ParseError("missing endmodule", len(text.splitlines()) or 1)

    diags = validate(n)
    if diags:
        d = diags[0]
        raise ParseError("%s (%d further diagnostics)" % (d, len(diags) - 1) if len(diags) > 1 else str(d))
    return n


def pretty_print(n: Netlist) -> str:
    """Canonical text form; parse(pretty_print(n)) is structurally identical."""
    lines = ["module %s" % n.name]
    for p in n.inputs:
        lines.append("  input %s %d %s" % (p.name, p.width, p.role))
    for p in n.outputs:
        lines.append("  output %s %d %s" % (p.name, p.width, p.role))
    for r in n.regs:
        init = "X" if r.init is None else str(r.init)
        lines.append("  reg %s %d init %s" % (r.name, r.width, init))
    for b in n.boxes:
        ins = " ".join("(%s %s %s)" % (i.name, i.expr, i.role) for i in b.inputs)
        outs = " ".join("(%s %d %s)" % (o.name, o.width, o.role) for o in b.outputs)
        lines.append("  box %s in ( %s ) out ( %s )" % (b.name, ins, outs))
    for name, w, e in n.wires:
        lines.append("  wire %s %d = %s" % (name, w, e))
    for r in n.regs:
        if r.name in n.next_fns:
            lines.append("  next %s = %s" % (r.name, n.next_fns[r.name]))
    for p in n.outputs:
        if p.name in n.drive_fns:
            lines.append("  drive %s = %s" % (p.name, n.drive_fns[p.name]))
    for s in n.observations:
        lines.append("  observe %s" % s)
    lines.append("endmodule")
    return "\n".join(lines) + "\n"
