"""Reading and writing AMR graphs in Penman notation."""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .graph import AmrGraph, GraphError

# roles that end in -of but are not inversions
NON_INVERTIBLE = frozenset({"consist-of", "prep-out-of", "prep-on-behalf-of"})

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
    |(?P<lparen>\()
    |(?P<rparen>\))
    |(?P<string>"(?:[^"\\]|\\.)*")
    |(?P<role>:[^\s()"]*)
    |(?P<slash>/)
    |(?P<symbol>[^\s()"/]+)
    """,
    re.VERBOSE,
)
_VARIABLE_SHAPE = re.compile(r"^(?:[a-z]{1,2}\d*|[a-z]+\d+)$")
_NUMBER = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")
_META = re.compile(r"(?:^|\s)::(\S+)")


class PenmanError(ValueError):
    """Malformed Penman input, located by 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line_offset: int = 0) -> list[_Tok]:
    toks = []
    pos = 0
    line, line_start = 1 + line_offset, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # pragma: no cover - the symbol branch matches anything else
            raise PenmanError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "string" or kind == "ws":
            chunk = m.group()
            if kind != "ws":
                toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = pos + chunk.rindex("\n") + 1
        else:
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    return toks


def _strip_metadata(text: str) -> tuple[dict[str, str], str, int]:
    """Split leading comment lines from the graph body."""
    metadata: dict[str, str] = {}
    lines = text.split("\n")
    body_start = 0
    for i, raw in enumerate(lines):
        stripped = raw.strip()
        if stripped.startswith("#"):
            keys = list(_META.finditer(stripped))
            for j, m in enumerate(keys):
                end = keys[j + 1].start() if j + 1 < len(keys) else len(stripped)
                metadata[m.group(1)] = stripped[m.end():end].strip()
            body_start = i + 1
        elif stripped:
            break
        else:
            body_start = i + 1
    return metadata, "\n".join(lines[body_start:]), body_start


def _unquote(s: str) -> str:
    if len(s) >= 2 and s[0] == '"' and s[-1] == '"':
        return re.sub(r"\\(.)", r"\1", s[1:-1])
    return s


def parse_penman(text: str) -> AmrGraph:
    """Parse one Penman graph, optionally preceded by ``# ::`` comment lines.

    Re-entrant variables resolve to a single node and inverted roles
    (``:ARG0-of``) are stored as forward edges.
    """
    metadata, body, offset = _strip_metadata(text)
    toks = _tokenize(body, offset)
    if not toks:
        raise PenmanError("no graph found", offset + 1, 1)
    parser = _Parser(toks)
    root = parser.parse()
    return parser.build(root, metadata)


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0
        self.nodes: dict[str, str] = {}
        self.node_tok: dict[str, _Tok] = {}
        # (source, role, raw target token, is_quoted, inverted)
        self.pending: list[tuple[str, str, _Tok, bool, bool]] = []
        self.edges: list[tuple[str, str, str]] = []

    def _peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def _next(self, expected: str | None = None) -> _Tok:
        tok = self._peek()
        if tok is None:
            last = self.toks[-1]
            raise PenmanError("unbalanced parentheses: unexpected end of input", last.line, last.col)
        if expected and tok.kind != expected:
            raise PenmanError(f"expected {expected}, found {tok.text!r}", tok.line, tok.col)
        self.i += 1
        return tok

    def parse(self) -> str:
        root = self._node()
        extra = self._peek()
        if extra is not None:
            if extra.kind == "rparen":
                raise PenmanError("unbalanced parentheses: extra ')'", extra.line, extra.col)
            raise PenmanError(f"trailing content {extra.text!r}", extra.line, extra.col)
        return root

    def _node(self) -> str:
        self._next("lparen")
        var_tok = self._next()
        if var_tok.kind != "symbol":
            raise PenmanError(f"expected a variable, found {var_tok.text!r}", var_tok.line, var_tok.col)
        var = var_tok.text
        if var in self.nodes:
            raise PenmanError(f"duplicate variable definition {var!r}", var_tok.line, var_tok.col)
        tok = self._peek()
        if tok is None or tok.kind != "slash":
            where = tok or var_tok
            raise PenmanError(f"empty concept for variable {var!r}", where.line, where.col)
        self._next()
        concept_tok = self._peek()
        if concept_tok is None or concept_tok.kind not in ("symbol", "string"):
            where = concept_tok or tok
            raise PenmanError(f"empty concept for variable {var!r}", where.line, where.col)
        self._next()
        concept = _unquote(concept_tok.text)
        if not concept:
            raise PenmanError(f"empty concept for variable {var!r}", concept_tok.line, concept_tok.col)
        self.nodes[var] = concept
        self.node_tok[var] = var_tok
        while True:
            tok = self._peek()
            if tok is None:
                raise PenmanError("unbalanced parentheses: missing ')'", var_tok.line, var_tok.col)
            if tok.kind == "rparen":
                self._next()
                return var
            role_tok = self._next("role")
            role = role_tok.text[1:]
            if not role:
                raise PenmanError("empty role", role_tok.line, role_tok.col)
            inverted = role.endswith("-of") and role not in NON_INVERTIBLE and len(role) > 3
            target = self._peek()
            if target is None:
                raise PenmanError("unbalanced parentheses: missing role target", role_tok.line, role_tok.col)
            if target.kind == "lparen":
                child = self._node()
                self._add_edge(var, role, child, inverted)
            elif target.kind in ("symbol", "string"):
                self._next()
                self.pending.append((var, role, target, target.kind == "string", inverted))
            else:
                raise PenmanError(f"missing target for role :{role}", target.line, target.col)

    def _add_edge(self, src: str, role: str, tgt: str, inverted: bool) -> None:
        if inverted:
            self.edges.append((tgt, role[:-3], src))
        else:
            self.edges.append((src, role, tgt))

    def build(self, root: str, metadata: dict[str, str]) -> AmrGraph:
        attributes = []
        for src, role, tok, quoted, inverted in self.pending:
            if not quoted and tok.text in self.nodes:
                self._add_edge(src, role, tok.text, inverted)
            elif not quoted and _VARIABLE_SHAPE.match(tok.text):
                raise PenmanError(f"dangling re-entrancy {tok.text!r}", tok.line, tok.col)
            else:
                # an inverted role cannot point at a constant; keep it verbatim
                attributes.append((src, role, _unquote(tok.text) if quoted else tok.text))
        try:
            return AmrGraph(
                root=root,
                nodes=self.nodes,
                edges=tuple(self.edges),
                attributes=tuple(attributes),
                metadata=metadata,
            )
        except GraphError as exc:
            tok = self.node_tok[root]
            raise PenmanError(str(exc), tok.line, tok.col) from exc


def _format_constant(value: str) -> str:
    if value in ("-", "+") or _NUMBER.match(value):
        return value
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _format_concept(value: str) -> str:
    if re.fullmatch(r'[^\s()"/:]+', value):
        return value
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _spanning_edges(g: AmrGraph) -> dict[str, int]:
    """Pick, per non-root node, the edge index under which it is expanded.

    Forward edges are preferred; an inverted edge is used only for nodes not
    reachable from the root along edge direction.
    """
    out: dict[str, list[int]] = {v: [] for v in g.nodes}
    for idx, (src, _, _) in enumerate(g.edges):
        out[src].append(idx)
    home: dict[str, int] = {}
    assigned = {g.root}

    def closure(start: str) -> None:
        queue = deque([start])
        while queue:
            for idx in out[queue.popleft()]:
                tgt = g.edges[idx][2]
                if tgt not in assigned:
                    assigned.add(tgt)
                    home[tgt] = idx
                    queue.append(tgt)

    closure(g.root)
    while len(assigned) < len(g.nodes):
        for idx, (src, _, tgt) in enumerate(g.edges):
            if src not in assigned and tgt in assigned:
                assigned.add(src)
                home[src] = idx
                closure(src)
                break
    return home


def serialize_penman(g: AmrGraph, indent: int = 4, metadata: bool = False) -> str:
    """Render ``g`` as Penman text.

    Nodes are expanded at their first mention in a depth-first walk from the
    root; later mentions are bare variables. Edges walked against their
    direction are written with an ``-of`` role.
    """
    incident: dict[str, list[tuple[int, str, str, bool]]] = {v: [] for v in g.nodes}
    for idx, (src, role, tgt) in enumerate(g.edges):
        incident[src].append((idx, role, tgt, False))
        if tgt != src:
            incident[tgt].append((idx, role, src, True))
    for v in incident:
        # outgoing edges first, then inverted ones, each in input order
        incident[v].sort(key=lambda e: (e[3], e[0]))
    attrs: dict[str, list[tuple[str, str]]] = {v: [] for v in g.nodes}
    for src, role, const in g.attributes:
        attrs[src].append((role, const))

    home = _spanning_edges(g)
    placed: set[str] = set()
    done: set[int] = set()

    def emit(var: str, depth: int) -> str:
        placed.add(var)
        parts = [f"({var} / {_format_concept(g.nodes[var])}"]
        pad = "\n" + " " * (indent * (depth + 1))
        for idx, role, other, inverse in incident[var]:
            if idx in done:
                continue
            if inverse and other not in placed and home.get(other) != idx:
                # written later as a forward edge once `other` is expanded
                continue
            done.add(idx)
            label = f":{role}-of" if inverse else f":{role}"
            if other in placed or home.get(other) != idx:
                parts.append(f"{pad}{label} {other}")
            else:
                parts.append(f"{pad}{label} {emit(other, depth + 1)}")
        for role, const in attrs[var]:
            parts.append(f"{pad}:{role} {_format_constant(const)}")
        return "".join(parts) + ")"

    body = emit(g.root, 0)
    if metadata and g.metadata:
        header = "".join(f"# ::{k} {v}\n" for k, v in g.metadata.items())
        return header + body
    return body


def split_blocks(text: str) -> Iterator[tuple[int, str]]:
    """Yield ``(first_line_number, block_text)`` for blank-line separated blocks."""
    block: list[str] = []
    start = 0
    for n, line in enumerate(text.split("\n")):
        if line.strip():
            if not block:
                start = n
            block.append(line)
        elif block:
            yield start, "\n".join(block)
            block = []
    if block:
        yield start, "\n".join(block)


def parse_corpus(text: str) -> list[AmrGraph]:
    """Parse every graph in a corpus string. Comment-only blocks are skipped."""
    graphs = []
    for start, block in split_blocks(text):
        if all(line.lstrip().startswith("#") for line in block.split("\n")):
            continue
        try:
            graphs.append(parse_penman(block))
        except PenmanError as exc:
            raise PenmanError(str(exc).rsplit(" (line", 1)[0], exc.line + start, exc.column) from exc
    return graphs


def read_corpus(path: str | Path) -> list[AmrGraph]:
    return parse_corpus(Path(path).read_text(encoding="utf-8"))


def write_corpus(graphs: Iterable[AmrGraph], path: str | Path) -> None:
    text = "\n\n".join(serialize_penman(g, metadata=True) for g in graphs)
    Path(path).write_text(text + "\n", encoding="utf-8")
