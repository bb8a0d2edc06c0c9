"""Flat ``key = value`` experiment files with ``[section]`` headers.

Values are Python-like literals parsed with :mod:`ast`: numbers (with
arithmetic), lists, tuples, quoted strings, bare words, and the distribution
constructors ``beta(s1, s2)``, ``exp(rate)``, ``pareto(scale, shape)``,
``uniform(lo, hi)`` and ``atoms([(x, w), ...])``.  ``#`` starts a comment.
The full grammar is in docs/format.md.
"""
from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass, field

from .distributions import (
    AtomMixture,
    Beta,
    DomainError,
    Exponential,
    Pareto,
    ProductMeasure,
    UniformInterval,
    planar_atoms,
    smooth_atoms,
)


class ConfigError(ValueError):
    """Malformed configuration; carries the 1-based line and column."""

    def __init__(self, message, line=None, col=None, source="<config>"):
        where = f"{source}:{line}:{col}: " if line is not None else f"{source}: "
        super().__init__(where + message)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow,
}
_CONSTRUCTORS = {"beta", "exp", "exponential", "pareto", "uniform", "atoms"}
_WORDS = {"true": True, "false": False, "none": None, "inf": math.inf}


def _literal(node, line, col0, source):
    def fail(msg, n=node):
        raise ConfigError(msg, line, col0 + getattr(n, "col_offset", 0) + 1, source)

    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float, str)) and not isinstance(node.value, bool):
            return node.value
        fail(f"unsupported constant {node.value!r}")
    if isinstance(node, ast.Name):
        return _WORDS.get(node.id.lower(), node.id)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _literal(node.operand, line, col0, source)
        if not isinstance(v, (int, float)):
            fail("sign applied to a non-number")
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        a = _literal(node.left, line, col0, source)
        b = _literal(node.right, line, col0, source)
        if not (isinstance(a, (int, float)) and isinstance(b, (int, float))):
            fail("arithmetic needs numbers on both sides")
        try:
            return _BINOPS[type(node.op)](a, b)
        except ZeroDivisionError:
            fail("division by zero")
    if isinstance(node, (ast.List, ast.Tuple)):
        items = [_literal(e, line, col0, source) for e in node.elts]
        return items if isinstance(node, ast.List) else tuple(items)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id.lower()
        if name not in _CONSTRUCTORS:
            fail(f"unknown constructor {node.func.id!r}")
        if node.keywords:
            fail("keyword arguments are not supported")
        return Call(name, tuple(_literal(a, line, col0, source) for a in node.args))
    fail(f"unsupported syntax {type(node).__name__}")


_BARE = re.compile(r"^[A-Za-z_][\w.-]*$")


def parse_value(text, line=1, col0=0, source="<config>"):
    word = text.strip()
    # bare words may collide with Python keywords (``lambda``), so bypass ast
    if _BARE.match(word):
        return _WORDS.get(word.lower(), word)
    lead = len(text) - len(text.lstrip())
    try:
        tree = ast.parse(word, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse value {word!r}: {exc.msg}", line, col0 + lead + (exc.offset or 1), source) from None
    return _literal(tree.body, line, col0 + lead, source)


_SECTION = re.compile(r"^\s*\[\s*([A-Za-z_][\w.-]*)\s*\]\s*$")
_KEY = re.compile(r"^\s*([A-Za-z_][\w.-]*)\s*=")


@dataclass
class Config:
    sections: dict = field(default_factory=dict)
    positions: dict = field(default_factory=dict)  # (section, key) -> (line, col)
    source: str = "<config>"

    def section(self, name):
        return self.sections.get(name, {})

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def error(self, section, key, message):
        line, col = self.positions.get((section, key), (None, None))
        return ConfigError(message, line, col, self.source)


def _strip_comment(raw):
    out, quote = [], None
    for ch in raw:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
    return "".join(out)


def parse_config(text: str, source="<config>") -> Config:
    cfg = Config(source=source)
    current = "population"
    cfg.sections[current] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = _strip_comment(raw)
        if not body.strip():
            continue
        m = _SECTION.match(body)
        if m:
            current = m.group(1).lower()
            cfg.sections.setdefault(current, {})
            continue
        m = _KEY.match(body)
        if not m:
            col = len(body) - len(body.lstrip()) + 1
            raise ConfigError("expected 'key = value' or '[section]'", lineno, col, source)
        key = m.group(1).lower()
        if key in cfg.sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", lineno, m.start(1) + 1, source)
        value_text = body[m.end():]
        if not value_text.strip():
            raise ConfigError(f"missing value for {key!r}", lineno, m.end() + 1, source)
        cfg.sections[current][key] = parse_value(value_text, lineno, m.end(), source)
        cfg.positions[(current, key)] = (lineno, m.start(1) + 1)
    return cfg


def load_config(path) -> Config:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from None
    return parse_config(text, source=str(path))


def _number(v, what):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DomainError(f"{what} must be a number, got {v!r}")
    return float(v)


def build_marginal(v):
    if not isinstance(v, Call):
        raise DomainError(f"expected a distribution such as beta(2, 3), got {v!r}")
    args = v.args
    arity = {"beta": 2, "exp": 1, "exponential": 1, "pareto": 2, "uniform": 2, "atoms": 1}[v.name]
    if len(args) != arity:
        raise DomainError(f"{v.name} takes {arity} argument(s), got {len(args)}")
    if v.name == "beta":
        return Beta(_number(args[0], "beta s1"), _number(args[1], "beta s2"))
    if v.name in ("exp", "exponential"):
        return Exponential(_number(args[0], "exponential rate"))
    if v.name == "pareto":
        return Pareto(_number(args[0], "pareto scale"), _number(args[1], "pareto shape"))
    if v.name == "uniform":
        return UniformInterval(_number(args[0], "uniform lo"), _number(args[1], "uniform hi"))
    pairs = args[0]
    if not isinstance(pairs, (list, tuple)) or not all(isinstance(p, (list, tuple)) and len(p) == 2 for p in pairs):
        raise DomainError("atoms(...) expects a list of (location, weight) pairs")
    return AtomMixture(tuple((_number(x, "atom"), _number(w, "weight")) for x, w in pairs))


def build_population(cfg: Config, section="population"):
    """Population measure from ``mu_p``/``mu_psi`` or ``atoms``, plus ``r``.

    ``smooth = radius`` replaces planar atoms by uniform squares.
    """
    sec = cfg.section(section)

    def at(key, build):
        try:
            return build(sec[key])
        except DomainError as exc:
            raise cfg.error(section, key, str(exc)) from None

    if "r" not in sec:
        raise ConfigError(f"missing incidence 'r' in [{section}]", source=cfg.source)
    r = at("r", lambda v: _number(v, "r"))
    if "atoms" in sec:
        if "mu_p" in sec or "mu_psi" in sec:
            raise cfg.error(section, "atoms", "give either 'atoms' or 'mu_p'/'mu_psi', not both")

        def atoms(pts):
            if not isinstance(pts, (list, tuple)) or not all(isinstance(p, (list, tuple)) and len(p) == 3 for p in pts):
                raise DomainError("atoms must be a list of (p, psi, weight) triples")
            return planar_atoms([tuple(_number(x, "atom coordinate") for x in p) for p in pts], r)

        pm = at("atoms", atoms)
        if "smooth" in sec:
            pm = at("smooth", lambda v: smooth_atoms(pm, _number(v, "smooth")))
        return pm
    for key in ("mu_p", "mu_psi"):
        if key not in sec:
            raise ConfigError(f"missing '{key}' in [{section}]", source=cfg.source)
    mu_p = at("mu_p", build_marginal)
    mu_psi = at("mu_psi", build_marginal)
    return at("r", lambda _: ProductMeasure(mu_p, mu_psi, r))
