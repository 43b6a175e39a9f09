"""Length-based attack with memory on the AAG captured package.

The beam holds at most ``memory`` conjugated tuples.  Each iteration conjugates
every beam tuple by every attacker generator and its inverse, stops as soon as
one of them equals Bob's public tuple, and otherwise keeps the ``memory``
shortest candidates (stable sort, so ties go to the earlier candidate).

In H^{2n+1} conjugation fixes the ``x`` and ``y`` exponents and shifts ``z`` by
an amount that depends only on the element and the conjugator.  Every tuple in
the beam therefore shares the captured tuple's ``x``/``y`` parts, and the
beam is stored as an ``(entries, N2)`` int64 array of center exponents.  The
per-generator shifts are computed once with the checked scalar arithmetic of
:mod:`heisenberg_aag.group`.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import group as G
from .errors import BadParams, GroupOverflowError
from .group import Element, Word
from .protocol import PublicSet, Session, conjugate_tuple, product_of_factors

_SAFE = 2**62


@dataclass(frozen=True)
class Budget:
    """Stop after ``iterations`` while-loop passes or ``seconds`` of wall clock."""

    iterations: Optional[int] = None
    seconds: Optional[float] = None

    def __post_init__(self):
        if (self.iterations is None) == (self.seconds is None):
            raise BadParams("budget needs exactly one of iterations or seconds")
        if self.iterations is not None and self.iterations < 0:
            raise BadParams("iteration budget must be >= 0")
        if self.seconds is not None and self.seconds < 0:
            raise BadParams("time budget must be >= 0")

    @property
    def deterministic(self) -> bool:
        return self.iterations is not None


@dataclass(frozen=True)
class AttackConfig:
    memory: int = 1000
    budget: Budget = Budget(iterations=1000)
    dedup: bool = True
    # fraction of beam entries re-derived from scratch each iteration (debug)
    audit_rate: float = 0.0
    audit_seed: int = 0

    def __post_init__(self):
        if self.memory < 1:
            raise BadParams("memory must be >= 1")
        if not 0.0 <= self.audit_rate <= 1.0:
            raise BadParams("audit_rate must lie in [0, 1]")


@dataclass(frozen=True)
class CapturedInstance:
    attacker_generators: PublicSet
    target_tuple: tuple[Element, ...]
    captured_tuple: tuple[Element, ...]

    def __post_init__(self):
        if len(self.target_tuple) != len(self.captured_tuple):
            raise BadParams("target and captured tuples differ in size")

    @classmethod
    def from_session(cls, session: Session, role: str = "alice") -> "CapturedInstance":
        """Instance for recovering ``role``'s private key from the wire."""
        if role == "alice":
            return cls(session.alice_public, session.bob_public.elements, session.transmitted_b_prime)
        if role == "bob":
            return cls(session.bob_public, session.alice_public.elements, session.transmitted_a_prime)
        raise BadParams(f"role must be 'alice' or 'bob', got {role!r}")


@dataclass(frozen=True)
class BeamEntry:
    total_length: int
    tuple: tuple[Element, ...]
    conjugator: Word


@dataclass
class AttackStats:
    iterations: int = 0
    expanded: int = 0
    peak_candidates: int = 0
    peak_beam: int = 0
    elapsed: float = 0.0
    audited: int = 0


@dataclass
class AttackResult:
    success: bool
    recovered_conjugator: Optional[Word] = None
    recovered_element: Optional[Element] = None
    stats: AttackStats = field(default_factory=AttackStats)


def _generator_letters(gens: PublicSet) -> list[tuple[int, int]]:
    return [(i, s) for i in range(len(gens)) for s in (1, -1)]


def expand(entry: BeamEntry, gens: PublicSet) -> list[BeamEntry]:
    """All ``2 * N1`` one-step conjugations of ``entry``, in (index, +1/-1) order."""
    out = []
    for i, s in _generator_letters(gens):
        t = conjugate_tuple(entry.tuple, G.power(gens[i], s))
        out.append(BeamEntry(G.tuple_length(t), t, entry.conjugator + ((i, s),)))
    return out


def _z_shifts(captured: Sequence[Element], gens: PublicSet) -> np.ndarray:
    """Row ``k`` holds the z-shift of each captured element under letter ``k``."""
    letters = _generator_letters(gens)
    shifts = np.empty((len(letters), len(captured)), dtype=np.int64)
    for k, (i, s) in enumerate(letters):
        h = G.power(gens[i], s)
        for j, g in enumerate(captured):
            moved = G.conjugate(g, h)
            if moved.x != g.x or moved.y != g.y:
                raise AssertionError("conjugation changed the abelian part")
            delta = moved.z - g.z
            if abs(delta) >= _SAFE:
                raise GroupOverflowError(f"conjugation shift {delta} too large")
            shifts[k, j] = delta
    return shifts


def _first_unique(cand: np.ndarray) -> np.ndarray:
    """Sorted indices of the first occurrence of each distinct row."""
    rows = np.ascontiguousarray(cand)
    keyed = rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).ravel()
    _, first = np.unique(keyed, return_index=True)
    first.sort()
    return first


class _History:
    """Back-pointers for every beam generation, to rebuild conjugator words."""

    def __init__(self, letters: list[tuple[int, int]]):
        self.letters = letters
        self.parents: list[np.ndarray] = []
        self.codes: list[np.ndarray] = []

    def push(self, parents: np.ndarray, codes: np.ndarray) -> None:
        self.parents.append(parents)
        self.codes.append(codes)

    def word(self, depth: int, index: int) -> Word:
        out = []
        for t in range(depth - 1, -1, -1):
            out.append(self.letters[int(self.codes[t][index])])
            index = int(self.parents[t][index])
        return tuple(reversed(out))


def attack(
    instance: CapturedInstance,
    config: AttackConfig,
    progress: Optional[Callable[[dict], None]] = None,
) -> AttackResult:
    start = time.perf_counter()
    stats = AttackStats()
    gens = instance.attacker_generators
    captured = tuple(instance.captured_tuple)
    target = tuple(instance.target_tuple)

    def finish(word: Optional[Word]) -> AttackResult:
        stats.elapsed = time.perf_counter() - start
        if word is None:
            return AttackResult(False, stats=stats)
        recovered = G.word_inverse(word)
        return AttackResult(True, recovered, product_of_factors(gens.elements, recovered), stats)

    if captured == target:
        return finish(())

    letters = _generator_letters(gens)
    K = len(letters)
    shifts = _z_shifts(captured, gens)
    same_abelian = all(c.x == t.x and c.y == t.y for c, t in zip(captured, target))
    target_z = np.array([t.z for t in target], dtype=np.int64)
    base_length = sum(G.length(G.Element(c.x, c.y, 0)) for c in captured)

    beam = np.array([[c.z for c in captured]], dtype=np.int64)
    history = _History(letters)
    audit_rng = np.random.default_rng(config.audit_seed)
    budget = config.budget

    while True:
        if budget.iterations is not None:
            if stats.iterations >= budget.iterations:
                break
        elif time.perf_counter() - start >= budget.seconds:
            break
        stats.iterations += 1
        stats.peak_beam = max(stats.peak_beam, beam.shape[0])
        if beam.size and int(np.abs(beam).max()) >= _SAFE:
            raise GroupOverflowError("beam center exponents left the safe range")

        cand = (beam[:, None, :] + shifts[None, :, :]).reshape(-1, len(captured))
        stats.peak_candidates = max(stats.peak_candidates, cand.shape[0])

        if same_abelian:
            hits = np.flatnonzero((cand == target_z).all(axis=1))
            if hits.size:
                hit = int(hits[0])
                stats.expanded += hit // K + 1
                parent, code = divmod(hit, K)
                word = history.word(stats.iterations - 1, parent) + (letters[code],)
                return finish(word)
        stats.expanded += beam.shape[0]

        lengths = base_length + np.abs(cand).sum(axis=1)
        keep = _first_unique(cand) if config.dedup else np.arange(cand.shape[0])
        keep = keep[np.argsort(lengths[keep], kind="stable")][: config.memory]
        beam = cand[keep]
        history.push(keep // K, keep % K)

        if config.audit_rate > 0:
            picked = np.flatnonzero(audit_rng.random(beam.shape[0]) < config.audit_rate)
            for b in picked:
                _audit(instance, history, stats.iterations, int(b), beam[b], int(lengths[keep[b]]))
            stats.audited += picked.size

        if progress is not None:
            kept = lengths[keep]
            progress({
                "iteration": stats.iterations,
                "beam_size": int(beam.shape[0]),
                "candidates": int(cand.shape[0]),
                "best_length": int(kept[0]),
                "beam_min_length": int(kept.min()),
                "beam_max_length": int(kept.max()),
            })

    return finish(None)


def _audit(
    instance: CapturedInstance,
    history: _History,
    depth: int,
    index: int,
    z_row: np.ndarray,
    cached_length: int,
) -> None:
    word = history.word(depth, index)
    conj = product_of_factors(instance.attacker_generators.elements, word)
    expected = conjugate_tuple(instance.captured_tuple, conj)
    stored = tuple(G.Element(c.x, c.y, int(z)) for c, z in zip(instance.captured_tuple, z_row))
    if stored != expected:
        raise AssertionError(f"beam entry {index} at depth {depth} disagrees with its conjugator path")
    if G.tuple_length(stored) != cached_length:
        raise AssertionError(f"beam entry {index} at depth {depth} has a stale length")


def verify_result(instance: CapturedInstance, result: AttackResult) -> bool:
    """Check that the recovered word lies in the attacker's subgroup and replays the capture."""
    if not result.success or result.recovered_conjugator is None:
        return False
    gens = instance.attacker_generators
    word = result.recovered_conjugator
    if any(not 0 <= i < len(gens) or s not in (1, -1) for i, s in word):
        return False
    element = product_of_factors(gens.elements, word)
    return conjugate_tuple(instance.target_tuple, element) == tuple(instance.captured_tuple)
