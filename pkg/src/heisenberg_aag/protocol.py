"""Anshel-Anshel-Goldfeld key exchange over H^{2n+1}."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import group as G
from .errors import BadIndex, BadParams, MismatchedParams, ProtocolMismatch
from .group import Element, GroupParams

Factor = tuple[int, int]


@dataclass(frozen=True)
class PublicSet:
    elements: tuple[Element, ...]

    def __post_init__(self):
        if not self.elements:
            raise BadParams("a public set needs at least one element")
        n = self.elements[0].n
        if any(g.n != n for g in self.elements):
            raise MismatchedParams("public set mixes elements of different rank")

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, i: int) -> Element:
        return self.elements[i]

    @property
    def params(self) -> GroupParams:
        return self.elements[0].params


@dataclass(frozen=True)
class PrivateKey:
    """Factors ``(s_i, eps_i)`` of the product ``a_{s_1}^{eps_1} ... a_{s_L}^{eps_L}``."""

    factors: tuple[Factor, ...]

    def __post_init__(self):
        if not self.factors:
            raise BadParams("a private key needs at least one factor")
        for (i, s), (j, t) in zip(self.factors, self.factors[1:]):
            if i == j and s == -t:
                raise BadParams(f"factors ({i},{s}) ({j},{t}) cancel")

    def __len__(self) -> int:
        return len(self.factors)


@dataclass(frozen=True)
class Session:
    params: GroupParams
    alice_public: PublicSet
    bob_public: PublicSet
    alice_key: PrivateKey
    bob_key: PrivateKey
    a_element: Element
    b_element: Element
    transmitted_b_prime: tuple[Element, ...]
    transmitted_a_prime: tuple[Element, ...]
    shared_key_alice: Element
    shared_key_bob: Element

    def to_dict(self) -> dict:
        fmt = G.format_element
        return {
            "n": self.params.n,
            "alice_public": [fmt(g) for g in self.alice_public.elements],
            "bob_public": [fmt(g) for g in self.bob_public.elements],
            "alice_key": [list(f) for f in self.alice_key.factors],
            "bob_key": [list(f) for f in self.bob_key.factors],
            "a_element": fmt(self.a_element),
            "b_element": fmt(self.b_element),
            "transmitted_b_prime": [fmt(g) for g in self.transmitted_b_prime],
            "transmitted_a_prime": [fmt(g) for g in self.transmitted_a_prime],
            "shared_key_alice": fmt(self.shared_key_alice),
            "shared_key_bob": fmt(self.shared_key_bob),
        }


def generate_public_set(
    params: GroupParams, N: int, len_range: Sequence[int], rng: np.random.Generator
) -> PublicSet:
    """``N`` elements evaluated from random words; identity draws are redrawn."""
    if N < 1:
        raise BadParams(f"public set size must be >= 1, got {N}")
    one = G.identity(params)
    elements = []
    while len(elements) < N:
        g = G.evaluate_word(params, G.random_word(params, len_range, rng))
        if g != one:
            elements.append(g)
    return PublicSet(tuple(elements))


def generate_private_key(N: int, L: int, rng: np.random.Generator) -> PrivateKey:
    """``L`` uniform factors over ``N`` public elements with no adjacent cancellation."""
    if N < 1 or L < 1:
        raise BadParams(f"need N >= 1 and L >= 1, got N={N}, L={L}")
    factors: list[Factor] = []
    while len(factors) < L:
        index = int(rng.integers(N))
        sign = 1 if rng.integers(2) else -1
        if factors and factors[-1] == (index, -sign):
            continue
        factors.append((index, sign))
    return PrivateKey(tuple(factors))


def product_of_factors(elements: Sequence[Element], factors: Sequence[Factor]) -> Element:
    if not elements:
        raise BadParams("no elements to multiply")
    acc = G.identity(elements[0].params)
    for index, sign in factors:
        if not 0 <= index < len(elements):
            raise BadIndex(f"factor index {index} out of range for {len(elements)} elements")
        acc = G.multiply(acc, G.power(elements[index], sign))
    return acc


def key_element(owner_public: PublicSet | Sequence[Element], key: PrivateKey | Sequence[Factor]) -> Element:
    elements = owner_public.elements if isinstance(owner_public, PublicSet) else tuple(owner_public)
    factors = key.factors if isinstance(key, PrivateKey) else tuple(key)
    return product_of_factors(elements, factors)


def conjugate_tuple(t: Sequence[Element], by: Element) -> tuple[Element, ...]:
    # h^-1 is shared across the tuple
    inv = G.inverse(by)
    return tuple(G.multiply(G.multiply(inv, g), by) for g in t)


def _derive(own_key: PrivateKey, own_element: Element, received: Sequence[Element]) -> Element:
    return G.multiply(G.inverse(own_element), product_of_factors(received, own_key.factors))


def derive_shared_key_alice(a_key: PrivateKey, a_element: Element, a_prime: Sequence[Element]) -> Element:
    """``K_A = A^-1 prod a'_{s_i}^{eps_i} = A^-1 B^-1 A B``."""
    return _derive(a_key, a_element, a_prime)


def derive_shared_key_bob(b_key: PrivateKey, b_element: Element, b_prime: Sequence[Element]) -> Element:
    """``K_B = B^-1 A^-1 B A``, the inverse of Alice's key."""
    return _derive(b_key, b_element, b_prime)


def run_session(
    params: GroupParams,
    N1: int,
    N2: int,
    L: int,
    len_range: Sequence[int],
    rng: np.random.Generator,
    L_bob: Optional[int] = None,
) -> Session:
    alice_public = generate_public_set(params, N1, len_range, rng)
    bob_public = generate_public_set(params, N2, len_range, rng)
    alice_key = generate_private_key(N1, L, rng)
    bob_key = generate_private_key(N2, L if L_bob is None else L_bob, rng)
    A = key_element(alice_public, alice_key)
    B = key_element(bob_public, bob_key)
    b_prime = conjugate_tuple(bob_public.elements, A)
    a_prime = conjugate_tuple(alice_public.elements, B)
    k_alice = derive_shared_key_alice(alice_key, A, a_prime)
    k_bob = derive_shared_key_bob(bob_key, B, b_prime)
    if k_alice != G.inverse(k_bob):
        raise ProtocolMismatch(f"K_A={k_alice} but K_B^-1={G.inverse(k_bob)}")
    return Session(
        params, alice_public, bob_public, alice_key, bob_key, A, B,
        b_prime, a_prime, k_alice, k_bob,
    )
