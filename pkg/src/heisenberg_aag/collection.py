"""Generic consistent polycyclic presentations and collection to normal form.

This module shares no arithmetic with :mod:`heisenberg_aag.group`; it rewrites
words with the presentation's relators only, so it can act as an oracle for
the closed-form Heisenberg multiplication.

Generators are indexed from 0.  A conjugation relator for ``i < j`` stores the
words for ``g_j^{g_i}`` and ``g_j^{g_i^-1}``; a power relator for a generator
``k`` of finite relative order ``r_k`` stores the word for ``g_k^{r_k}``.
Missing conjugation relators default to ``g_j`` (the generators commute) and
missing power relators default to the empty word.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import BadIndex, NonTerminating

Letter = tuple[int, int]
RelWord = tuple[Letter, ...]

MAX_STEPS = 10**7


def _inverse_word(w: Sequence[Letter]) -> RelWord:
    return tuple((g, -s) for g, s in reversed(w))


@dataclass(frozen=True)
class PcPresentation:
    gen_count: int
    # None marks an infinite relative order.
    relative_orders: tuple[Optional[int], ...]
    conj_relators: Mapping[tuple[int, int], tuple[RelWord, RelWord]] = field(default_factory=dict)
    power_relators: Mapping[int, RelWord] = field(default_factory=dict)

    def __post_init__(self):
        if self.gen_count < 1 or len(self.relative_orders) != self.gen_count:
            raise ValueError("relative_orders must list one entry per generator")
        for r in self.relative_orders:
            if r is not None and r < 2:
                raise ValueError(f"finite relative order must be >= 2, got {r}")
        for (i, j), words in self.conj_relators.items():
            if not 0 <= i < j < self.gen_count:
                raise ValueError(f"conjugation relator key ({i}, {j}) must satisfy i < j")
            for w in words:
                if any(g <= i for g, _ in w):
                    raise ValueError(f"relator for ({i}, {j}) uses a generator <= {i}")
        for k, w in self.power_relators.items():
            if self.relative_orders[k] is None:
                raise ValueError(f"power relator given for infinite generator {k}")
            if any(g <= k for g, _ in w):
                raise ValueError(f"power relator for {k} uses a generator <= {k}")

    @property
    def finite_indices(self) -> frozenset[int]:
        return frozenset(k for k, r in enumerate(self.relative_orders) if r is not None)

    def conj_word(self, i: int, j: int, sign: int) -> RelWord:
        """Word for ``g_j^{g_i^sign}``."""
        words = self.conj_relators.get((i, j))
        if words is None:
            return ((j, 1),)
        return words[0] if sign == 1 else words[1]

    def power_word(self, k: int) -> RelWord:
        return self.power_relators.get(k, ())


@dataclass(frozen=True)
class GenericElement:
    exponents: tuple[int, ...]

    def as_word(self) -> RelWord:
        """The normal-form word ``g_1^{e_1} ... g_m^{e_m}`` spelled letter by letter."""
        letters: list[Letter] = []
        for g, e in enumerate(self.exponents):
            s = 1 if e > 0 else -1
            letters.extend([(g, s)] * abs(e))
        return tuple(letters)


def heisenberg_presentation(n: int) -> PcPresentation:
    """Presentation of H^{2n+1} on a_1..a_n, b_1..b_n, c (indices 0..2n).

    From ``[a_i, b_i] = c`` one gets ``b_i^{a_i} = b_i c^-1`` and
    ``b_i^{a_i^-1} = b_i c``; all other pairs commute.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    c = 2 * n
    conj = {}
    for i in range(n):
        conj[(i, n + i)] = (((n + i, 1), (c, -1)), ((n + i, 1), (c, 1)))
    return PcPresentation(2 * n + 1, (None,) * (2 * n + 1), conj, {})


def collect(p: PcPresentation, w: Sequence[Letter], max_steps: int = MAX_STEPS) -> GenericElement:
    """Collect ``w`` to normal form, from the left, with an explicit stack."""
    m = p.gen_count
    for g, s in w:
        if not 0 <= g < m:
            raise BadIndex(f"generator index {g} out of range for {m} generators")
        if s not in (1, -1):
            raise ValueError(f"letter sign must be +1 or -1, got {s!r}")
    e = [0] * m
    # stack of (generator, exponent); top of stack is processed next
    stack: list[tuple[int, int]] = [(g, s) for g, s in reversed(w)]
    orders = p.relative_orders
    steps = 0
    while stack:
        steps += 1
        if steps > max_steps:
            raise NonTerminating(f"collection exceeded {max_steps} steps")
        k, ex = stack.pop()
        if ex == 0:
            continue
        tail = [(j, e[j]) for j in range(k + 1, m) if e[j]]
        if not tail:
            e[k] += ex
            r = orders[k]
            if r is not None and not 0 <= e[k] < r:
                q, e[k] = divmod(e[k], r)
                u = p.power_word(k) if q > 0 else _inverse_word(p.power_word(k))
                for _ in range(abs(q)):
                    stack.extend(reversed(u))
            continue

        # w g_k^s = (prefix) g_k^s (tail)^{g_k^s}; the rest of g_k^ex waits below
        s = 1 if ex > 0 else -1
        if ex != s:
            stack.append((k, ex - s))
        pending: list[Letter] = []
        for j, ej in tail:
            e[j] = 0
            cw = p.conj_word(k, j, s)
            if ej < 0:
                cw = _inverse_word(cw)
            for _ in range(abs(ej)):
                pending.extend(cw)
        stack.extend(reversed(pending))
        e[k] += s
        r = orders[k]
        if r is not None and not 0 <= e[k] < r:
            q, e[k] = divmod(e[k], r)
            u = p.power_word(k) if q > 0 else _inverse_word(p.power_word(k))
            stack.extend(reversed(u))
    return GenericElement(tuple(e))


@dataclass
class ConsistencyReport:
    consistent: bool
    trials: int
    counterexample: Optional[tuple[RelWord, RelWord]] = None
    detail: str = ""


def _random_letters(p: PcPresentation, rng: np.random.Generator, max_len: int) -> RelWord:
    size = int(rng.integers(0, max_len + 1))
    return tuple(
        (int(rng.integers(p.gen_count)), 1 if rng.integers(2) else -1) for _ in range(size)
    )


def check_consistency(
    p: PcPresentation,
    trials: int,
    rng: np.random.Generator,
    max_len: int = 8,
) -> ConsistencyReport:
    """Check ``collect(uv) == collect(nf(u) nf(v))`` on random word pairs.

    The two sides take different rewriting paths, so a presentation whose
    relators disagree with each other shows up as a mismatch.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    for t in range(trials):
        if t == 0:
            u, v = (), ()
        else:
            u = _random_letters(p, rng, max_len)
            v = _random_letters(p, rng, max_len)
        direct = collect(p, u + v)
        staged = collect(p, collect(p, u).as_word() + collect(p, v).as_word())
        if direct != staged:
            return ConsistencyReport(
                False, t + 1, (u, v), f"{direct.exponents} != {staged.exponents}"
            )
    return ConsistencyReport(True, trials)


# --- text serialization -----------------------------------------------------
#
#   gens 3
#   orders inf inf inf
#   g2^g1 = g2*g3^-1
#   g2^g1^-1 = g2*g3
#   g3^5 = g4          (power relator)
#
# Generators are written 1-based; the empty word is written as 1.


def _word_to_text(w: Sequence[Letter]) -> str:
    if not w:
        return "1"
    out: list[str] = []
    for g, s in w:
        # merge runs of the same letter into one power
        if out and out[-1][0] == g and (out[-1][1] > 0) == (s > 0):
            out[-1] = (g, out[-1][1] + s)
        else:
            out.append((g, s))
    return "*".join(f"g{g + 1}" if e == 1 else f"g{g + 1}^{e}" for g, e in out)


_LETTER_RE = re.compile(r"g(\d+)(?:\^(-?\d+))?$")


def _word_from_text(text: str) -> RelWord:
    text = text.strip()
    if text == "1":
        return ()
    letters: list[Letter] = []
    for part in text.split("*"):
        match = _LETTER_RE.match(part.strip())
        if not match:
            raise ValueError(f"bad word factor {part!r}")
        g = int(match.group(1)) - 1
        e = int(match.group(2) or 1)
        s = 1 if e > 0 else -1
        letters.extend([(g, s)] * abs(e))
    return tuple(letters)


def presentation_to_text(p: PcPresentation) -> str:
    lines = [f"gens {p.gen_count}"]
    lines.append("orders " + " ".join("inf" if r is None else str(r) for r in p.relative_orders))
    for (i, j) in sorted(p.conj_relators):
        w, v = p.conj_relators[(i, j)]
        lines.append(f"g{j + 1}^g{i + 1} = {_word_to_text(w)}")
        lines.append(f"g{j + 1}^g{i + 1}^-1 = {_word_to_text(v)}")
    for k in sorted(p.power_relators):
        lines.append(f"g{k + 1}^{p.relative_orders[k]} = {_word_to_text(p.power_relators[k])}")
    return "\n".join(lines) + "\n"


_CONJ_RE = re.compile(r"g(\d+)\^g(\d+)(\^-1)?$")
_POW_RE = re.compile(r"g(\d+)\^(\d+)$")


def presentation_from_text(text: str) -> PcPresentation:
    gen_count = None
    orders: Optional[tuple[Optional[int], ...]] = None
    conj: dict[tuple[int, int], list[Optional[RelWord]]] = {}
    powers: dict[int, RelWord] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("gens "):
            gen_count = int(line.split()[1])
        elif line.startswith("orders "):
            orders = tuple(None if tok == "inf" else int(tok) for tok in line.split()[1:])
        else:
            lhs, _, rhs = line.partition("=")
            lhs = lhs.strip()
            word = _word_from_text(rhs)
            if m := _CONJ_RE.match(lhs):
                j, i = int(m.group(1)) - 1, int(m.group(2)) - 1
                slot = conj.setdefault((i, j), [None, None])
                slot[1 if m.group(3) else 0] = word
            elif m := _POW_RE.match(lhs):
                powers[int(m.group(1)) - 1] = word
            else:
                raise ValueError(f"cannot parse relator line {raw!r}")
    if gen_count is None:
        raise ValueError("missing 'gens' line")
    if orders is None:
        orders = (None,) * gen_count
    relators = {}
    for key, (w, v) in conj.items():
        if w is None or v is None:
            raise ValueError(f"relator pair for g{key[1] + 1}^g{key[0] + 1} is incomplete")
        relators[key] = (w, v)
    return PcPresentation(gen_count, orders, relators, powers)
