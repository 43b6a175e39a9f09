"""Exact arithmetic in the integer Heisenberg group H^{2n+1}.

Elements are kept in polycyclic normal form ``a^x b^y c^z`` where ``x`` and
``y`` are exponent vectors over ``a_1..a_n`` and ``b_1..b_n`` and ``z`` is the
exponent of the central generator ``c``.  The defining relations are
``[a_i, b_i] = c`` (with ``[g, h] = g^-1 h^-1 g h``) and every other pair of
generators commutes, which gives ``b_i a_i = a_i b_i c^-1`` and the product

    (x, y, z) * (x', y', z') = (x + x', y + y', z + z' - y . x')

All exponents are Python ints checked against the signed 64-bit range.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import BadIndex, BadRange, GroupOverflowError, MismatchedParams

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

# A letter is (generator index, sign).  Index 0..n-1 is a_{i+1}, n..2n-1 is
# b_{i-n+1}, and 2n is c.
Letter = tuple[int, int]
Word = tuple[Letter, ...]


def _check(value: int) -> int:
    if value < INT64_MIN or value > INT64_MAX:
        raise GroupOverflowError(f"exponent {value} exceeds the signed 64-bit range")
    return value


@dataclass(frozen=True)
class GroupParams:
    """Rank ``n`` of H^{2n+1}; the presentation has ``2n + 1`` generators."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def generator_count(self) -> int:
        return 2 * self.n + 1


@dataclass(frozen=True, slots=True)
class Element:
    x: tuple[int, ...]
    y: tuple[int, ...]
    z: int

    def __post_init__(self):
        if len(self.x) != len(self.y) or not self.x:
            raise ValueError("x and y must be non-empty and of equal length")
        for v in self.x:
            _check(v)
        for v in self.y:
            _check(v)
        _check(self.z)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def params(self) -> GroupParams:
        return GroupParams(len(self.x))

    def exponents(self) -> tuple[int, ...]:
        """Normal-form exponent vector in generator order a.., b.., c."""
        return self.x + self.y + (self.z,)

    def __str__(self) -> str:
        return format_element(self)


def format_element(g: Element) -> str:
    """Canonical text form ``[x_1,..,x_n | y_1,..,y_n | z]``."""
    xs = ",".join(str(v) for v in g.x)
    ys = ",".join(str(v) for v in g.y)
    return f"[{xs} | {ys} | {g.z}]"


def parse_element(text: str) -> Element:
    """Inverse of :func:`format_element`."""
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ValueError(f"not an element: {text!r}")
    parts = body[1:-1].split("|")
    if len(parts) != 3:
        raise ValueError(f"not an element: {text!r}")
    x = tuple(int(v) for v in parts[0].split(","))
    y = tuple(int(v) for v in parts[1].split(","))
    return Element(x, y, int(parts[2]))


def _same_rank(g: Element, h: Element) -> None:
    if len(g.x) != len(h.x):
        raise MismatchedParams(f"elements of H^{2 * len(g.x) + 1} and H^{2 * len(h.x) + 1}")


def identity(params: GroupParams) -> Element:
    zeros = (0,) * params.n
    return Element(zeros, zeros, 0)


def generator(params: GroupParams, index: int) -> Element:
    """The generator with the given letter index (a_1..a_n, b_1..b_n, c)."""
    n = params.n
    if not 0 <= index <= 2 * n:
        raise BadIndex(f"generator index {index} out of range for n={n}")
    x = [0] * n
    y = [0] * n
    z = 0
    if index < n:
        x[index] = 1
    elif index < 2 * n:
        y[index - n] = 1
    else:
        z = 1
    return Element(tuple(x), tuple(y), z)


def _dot(u: Sequence[int], v: Sequence[int]) -> int:
    return sum(p * q for p, q in zip(u, v))


def multiply(g: Element, h: Element) -> Element:
    _same_rank(g, h)
    x = tuple(_check(p + q) for p, q in zip(g.x, h.x))
    y = tuple(_check(p + q) for p, q in zip(g.y, h.y))
    z = _check(g.z + h.z - _dot(g.y, h.x))
    return Element(x, y, z)


def inverse(g: Element) -> Element:
    return Element(
        tuple(-v for v in g.x),
        tuple(-v for v in g.y),
        _check(-g.z - _dot(g.x, g.y)),
    )


def conjugate(g: Element, h: Element) -> Element:
    """``g^h = h^-1 g h``."""
    _same_rank(g, h)
    return multiply(multiply(inverse(h), g), h)


def commutator(g: Element, h: Element) -> Element:
    """``[g, h] = g^-1 h^-1 g h``."""
    _same_rank(g, h)
    return multiply(multiply(inverse(g), inverse(h)), multiply(g, h))


def power(g: Element, sign: int) -> Element:
    """``g`` for sign +1, ``g^-1`` for sign -1."""
    if sign == 1:
        return g
    if sign == -1:
        return inverse(g)
    raise ValueError(f"sign must be +1 or -1, got {sign!r}")


def product(elements: Iterable[Element], params: GroupParams) -> Element:
    acc = identity(params)
    for g in elements:
        acc = multiply(acc, g)
    return acc


def evaluate_word(params: GroupParams, w: Sequence[Letter]) -> Element:
    """Left-to-right product of the letters of ``w``."""
    n = params.n
    x = [0] * n
    y = [0] * n
    z = 0
    for index, sign in w:
        if sign not in (1, -1):
            raise ValueError(f"letter sign must be +1 or -1, got {sign!r}")
        if not 0 <= index <= 2 * n:
            raise BadIndex(f"generator index {index} out of range for n={n}")
        if index < n:
            # right-multiplying by a_i^s moves it past every b_i already present
            z = _check(z - y[index] * sign)
            x[index] = _check(x[index] + sign)
        elif index < 2 * n:
            y[index - n] = _check(y[index - n] + sign)
        else:
            z = _check(z + sign)
    return Element(tuple(x), tuple(y), z)


def word_inverse(w: Sequence[Letter]) -> Word:
    return tuple((i, -s) for i, s in reversed(w))


def length(g: Element) -> int:
    """Sum of absolute normal-form exponents."""
    return sum(abs(v) for v in g.x) + sum(abs(v) for v in g.y) + abs(g.z)


def tuple_length(t: Sequence[Element]) -> int:
    if t:
        n = len(t[0].x)
        for g in t:
            if len(g.x) != n:
                raise MismatchedParams("tuple mixes elements of different rank")
    return sum(length(g) for g in t)


def to_matrix(g: Element) -> np.ndarray:
    """Upper unitriangular ``(n+2) x (n+2)`` integer matrix of ``g``.

    Row 0 carries ``x`` in columns ``1..n`` and ``z + x.y`` in the corner;
    column ``n+1`` carries ``y`` in rows ``1..n``.  With this layout ``a_1``
    is ``E + e_{12}``, ``b_1`` is ``E + e_{2,n+2}`` and ``c`` is ``E + e_{1,n+2}``.
    """
    n = g.n
    m = np.eye(n + 2, dtype=np.int64)
    m[0, 1 : n + 1] = g.x
    m[1 : n + 1, n + 1] = g.y
    m[0, n + 1] = _check(g.z + _dot(g.x, g.y))
    return m


def from_matrix(m: np.ndarray) -> Element:
    """Inverse of :func:`to_matrix` for matrices in its image."""
    n = m.shape[0] - 2
    x = tuple(int(v) for v in m[0, 1 : n + 1])
    y = tuple(int(v) for v in m[1 : n + 1, n + 1])
    return Element(x, y, _check(int(m[0, n + 1]) - _dot(x, y)))


def random_word(params: GroupParams, len_range: Sequence[int], rng: np.random.Generator) -> Word:
    """Random word with length uniform on ``[L1, L2]`` and no adjacent cancellation.

    Letters are uniform over all ``2n + 1`` generators with uniform sign; a
    letter that would cancel its predecessor is redrawn.
    """
    lo, hi = len_range
    if lo < 1 or hi < lo:
        raise BadRange(f"invalid length range [{lo}, {hi}]")
    count = 2 * params.n + 1
    size = int(rng.integers(lo, hi + 1))
    letters: list[Letter] = []
    while len(letters) < size:
        index = int(rng.integers(count))
        sign = 1 if rng.integers(2) else -1
        if letters and letters[-1] == (index, -sign):
            continue
        letters.append((index, sign))
    return tuple(letters)


def hirsch_length(params: GroupParams) -> int:
    return 2 * params.n + 1
