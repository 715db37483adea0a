"""Polynomial test functions in the multi-index coefficient format.

A polynomial is ``{"terms": [{"exps": [e_1, ..., e_n], "coef": r}, ...]}``.
On the command line it is written ``poly:<spec>`` where ``<spec>`` is a
bare number (a constant), the JSON document above, ``@path`` to a file
holding it, or the compact form ``coef*e1,e2+coef*e1,e2`` (for example
``poly:1*1,0+2*0,2`` is ``y_1 + 2 y_2^2``).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class Polynomial:
    terms: tuple  # ((exps tuple, coef), ...)
    dim: int

    @classmethod
    def from_terms(cls, terms, dim=None):
        merged = {}
        for exps, coef in terms:
            exps = tuple(int(e) for e in exps)
            if any(e < 0 for e in exps):
                raise ValueError("exponents must be nonnegative")
            merged[exps] = merged.get(exps, 0) + coef
        if dim is None:
            dims = {len(e) for e in merged}
            if len(dims) != 1:
                raise ValueError("cannot infer the dimension of the polynomial")
            dim = dims.pop()
        if any(len(e) != dim for e in merged):
            raise ValueError("all exponent vectors must have length dim")
        return cls(tuple(sorted((e, c) for e, c in merged.items() if c != 0)), dim)

    @classmethod
    def constant(cls, c, dim):
        return cls.from_terms([((0,) * dim, c)], dim)

    @classmethod
    def monomial(cls, exps, coef=1):
        return cls.from_terms([(tuple(exps), coef)])

    @classmethod
    def from_dict(cls, doc, dim=None):
        return cls.from_terms([(t["exps"], _number(t["coef"])) for t in doc["terms"]], dim)

    def to_dict(self):
        return {"terms": [{"exps": list(e), "coef": float(c)} for e, c in self.terms]}

    def __call__(self, y):
        """Vectorized evaluation on an ``(M, n)`` array; exact on rational tuples."""
        if isinstance(y, tuple) and all(isinstance(v, (int, Fraction)) for v in y):
            return self.exact(y)
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y.reshape(-1, self.dim) if self.dim == 1 else y[None, :]
        out = np.zeros(y.shape[0])
        for exps, c in self.terms:
            term = np.full(y.shape[0], float(c))
            for j, e in enumerate(exps):
                if e:
                    term = term * y[:, j] ** e
            out = out + term
        return out

    def exact(self, point):
        total = Fraction(0)
        for exps, c in self.terms:
            term = Fraction(c)
            for v, e in zip(point, exps):
                term *= Fraction(v) ** e
            total += term
        return total

    def derivative(self, j, times=1):
        terms = []
        for exps, c in self.terms:
            e = exps[j]
            if e < times:
                continue
            factor = 1
            for r in range(times):
                factor *= e - r
            new = list(exps)
            new[j] = e - times
            terms.append((tuple(new), c * factor))
        if not terms:
            return Polynomial.constant(0, self.dim)
        return Polynomial.from_terms(terms, self.dim)

    @property
    def degree(self):
        return max((sum(e) for e, _ in self.terms), default=0)


def _number(v):
    if isinstance(v, (int, Fraction)):
        return v
    if isinstance(v, str):
        return Fraction(v)
    f = float(v)
    return int(f) if f.is_integer() else f


# one compact term: optional sign, coefficient (integer, decimal or a/b), '*', exponents
_TERM = re.compile(r"\s*([+-]?)\s*(\d+/\d+|[0-9.]+(?:[eE][+-]?\d+)?)\s*\*\s*(\d+(?:\s*,\s*\d+)*)")


def parse_poly(spec: str, dim: int) -> Polynomial:
    """Parse a ``poly:`` spec string (the prefix is optional)."""
    s = spec.strip()
    if s.startswith("poly:"):
        s = s[5:].strip()
    if s.startswith("@"):
        with open(s[1:]) as fh:
            return Polynomial.from_dict(json.load(fh), dim)
    if s.startswith("{"):
        return Polynomial.from_dict(json.loads(s), dim)
    try:
        return Polynomial.constant(_number(s if "/" in s else _literal(s)), dim)
    except ValueError:
        pass
    terms = []
    pos = 0
    for m in _TERM.finditer(s):
        if s[pos:m.start()].strip():
            break
        sign, coef, exps = m.groups()
        c = _number(coef if "/" in coef else _literal(coef))
        terms.append((tuple(int(e) for e in exps.split(",")), -c if sign == "-" else c))
        pos = m.end()
    if s[pos:].strip():
        raise ValueError(f"cannot parse polynomial spec {spec!r}")
    if not terms:
        raise ValueError(f"empty polynomial spec {spec!r}")
    return Polynomial.from_terms(terms, dim)


def _literal(s):
    s = s.strip()
    try:
        return int(s)
    except ValueError:
        return float(s)
