"""Monomial feature dictionaries and design-matrix evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np


@dataclass(frozen=True)
class PolyDictionary:
    """Ordered monomial basis over ``num_vars`` variables up to ``max_degree``.

    Terms are exponent tuples in graded-lexicographic order: total degree
    ascending, then lexicographic in variable index. For three variables and
    degree two that is ``1, x1, x2, x3, x1^2, x1x2, x1x3, x2^2, x2x3, x3^2``.
    """

    num_vars: int
    max_degree: int
    terms: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def index(self, exponents) -> int:
        return self.terms.index(tuple(int(e) for e in exponents))

    def labels(self, names=None) -> list[str]:
        """Human readable term names, e.g. ``['1', 'S', 'I', 'S^2', 'SI']``."""
        if names is None:
            names = [f"x{i + 1}" for i in range(self.num_vars)]
        out = []
        for term in self.terms:
            parts = []
            for name, e in zip(names, term):
                if e == 1:
                    parts.append(name)
                elif e > 1:
                    parts.append(f"{name}^{e}")
            out.append("".join(parts) if parts else "1")
        return out

    def to_json(self) -> dict:
        return {
            "num_vars": self.num_vars,
            "max_degree": self.max_degree,
            "terms": [list(t) for t in self.terms],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PolyDictionary":
        built = build_dictionary(int(data["num_vars"]), int(data["max_degree"]))
        terms = tuple(tuple(int(e) for e in t) for t in data.get("terms", built.terms))
        if terms != built.terms:
            raise ValueError("dictionary terms are not in canonical graded-lex order")
        return built


def _exponents_of_degree(num_vars: int, degree: int):
    # lexicographic descending in the leading exponent gives x1^2, x1x2, ...
    if num_vars == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in _exponents_of_degree(num_vars - 1, degree - first):
            yield (first,) + rest


def build_dictionary(num_vars: int, max_degree: int) -> PolyDictionary:
    """Build the graded-lex monomial dictionary with ``C(M+d, d)`` terms."""
    if num_vars < 1:
        raise ValueError(f"num_vars must be >= 1, got {num_vars}")
    if max_degree < 0:
        raise ValueError(f"max_degree must be >= 0, got {max_degree}")
    terms = []
    for degree in range(max_degree + 1):
        terms.extend(_exponents_of_degree(num_vars, degree))
    assert len(terms) == comb(num_vars + max_degree, max_degree)
    return PolyDictionary(num_vars, max_degree, tuple(terms))


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    dictionary: PolyDictionary

    @property
    def shape(self):
        return self.values.shape


def eval_design(dictionary: PolyDictionary, states) -> DesignMatrix:
    """Evaluate every dictionary monomial at every sampled state.

    ``states`` is an ``N x M`` array (a single length-M state is accepted and
    treated as one row). Entry ``(k, j)`` is ``prod_i states[k, i] ** terms[j][i]``.
    """
    x = np.atleast_2d(np.asarray(states, dtype=float))
    if x.shape[1] != dictionary.num_vars:
        raise ValueError(
            f"states have {x.shape[1]} columns, dictionary expects {dictionary.num_vars}"
        )
    if x.shape[0] < 1:
        raise ValueError("need at least one state")
    exps = np.array(dictionary.terms, dtype=int).reshape(len(dictionary), dictionary.num_vars)
    values = np.ones((x.shape[0], len(dictionary)))
    # repeated multiplication keeps 0**0 == 1 and avoids pow rounding
    for j, term in enumerate(exps):
        for i, e in enumerate(term):
            for _ in range(e):
                values[:, j] *= x[:, i]
    values.setflags(write=False)
    return DesignMatrix(values, dictionary)
