"""Multiplicative-group ElGamal building blocks with layered keys.

An "encryption of 1" is a pair (g^r, g^(r*sk)). Without any private
key it can be re-randomized, given an extra key layer, or filled with a
message; layers are removed one private key at a time, and products of
ciphertexts under the same key encrypt the product of their messages.
Small plaintext exponents are recovered with a windowed discrete
logarithm: baby-step giant-step by default, Pollard's kangaroo as a
low-memory option.

The group is the order-q subgroup of Z_p* for a safe prime p = 2q + 1.
This is a research artifact: arithmetic is not constant time and no
side-channel hardening is attempted. Exponent randomness comes from
caller-supplied ``random.Random`` streams (seedable, arbitrary
precision), not from a CSPRNG.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

__all__ = [
    "GroupParams",
    "KeyPair",
    "Ciphertext",
    "DlogWindowError",
    "group_setup",
    "keygen",
    "enc_one",
    "reencrypt",
    "add_layer",
    "fill",
    "partial_decrypt",
    "combine",
    "decrypt_element",
    "bounded_dlog",
    "element_to_hex",
    "ciphertext_to_hex",
    "is_probable_prime",
    "TEST_GROUP_23",
]

SETUP_BITS = (32, 64, 256, 2048)

# Deterministic Miller-Rabin base set, sufficient below 3.3 * 10^24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_MR_DETERMINISTIC_LIMIT = 3_317_044_064_679_887_385_961_981
_SMALL_PRIMES = (
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67,
    71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149,
    151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229,
)


def _miller_rabin(n: int, bases: Sequence[int]) -> bool:
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in bases:
        a %= n
        if a in (0, 1, n - 1):
            continue
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin: deterministic below ~3.3e24, 40 derived bases above."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    if n < _MR_DETERMINISTIC_LIMIT:
        return _miller_rabin(n, _MR_BASES)
    base_rng = random.Random(n)
    bases = [base_rng.randrange(2, n - 1) for _ in range(40)]
    return _miller_rabin(n, bases)


@dataclass(frozen=True)
class GroupParams:
    """Prime-order subgroup of Z_p*: modulus p, subgroup order q, generator g."""

    p: int
    q: int
    g: int

    def __post_init__(self) -> None:
        if not is_probable_prime(self.p):
            raise ValueError("p must be prime")
        if not is_probable_prime(self.q):
            raise ValueError("q must be prime")
        if (self.p - 1) % self.q != 0:
            raise ValueError("q must divide p - 1")
        if not 1 < self.g < self.p:
            raise ValueError("generator out of range")
        if pow(self.g, self.q, self.p) != 1:
            raise ValueError("generator is not in the order-q subgroup")

    def in_subgroup(self, x: int) -> bool:
        return 0 < x < self.p and pow(x, self.q, self.p) == 1

    def element(self, exponent: int) -> int:
        """g raised to an (arbitrary-sign) exponent, reduced mod q."""
        return pow(self.g, exponent % self.q, self.p)


# Hand-checkable toy group: 4 = 2^2 is a quadratic residue mod 23 of order 11.
TEST_GROUP_23 = GroupParams(p=23, q=11, g=4)


@dataclass(frozen=True)
class KeyPair:
    """Private exponent sk in [1, q-1] and public element g^sk."""

    sk: int
    pk: int


@dataclass(frozen=True)
class Ciphertext:
    """Two-component ciphertext (a, b); both lie in the order-q subgroup."""

    a: int
    b: int


def group_setup(
    bits: int,
    rng: random.Random,
    max_attempts: int = 2_000_000,
) -> GroupParams:
    """Safe-prime group: p = 2q + 1 with q prime, g a random square.

    ``bits`` is the size of p and must be one of 32, 64 (test groups),
    256 or 2048. The search is deterministic given the stream. Pure
    Python primality makes the 2048-bit search slow (minutes); use the
    smaller sizes unless the setting demands otherwise.

    Raises:
      RuntimeError: if no safe prime is found within ``max_attempts``.
    """
    if bits not in SETUP_BITS:
        raise ValueError(f"bits must be one of {SETUP_BITS}, got {bits}")
    for _ in range(max_attempts):
        q = rng.getrandbits(bits - 1) | (1 << (bits - 2)) | 1
        p = 2 * q + 1
        if p.bit_length() != bits:
            continue
        if not is_probable_prime(q):
            continue
        if not is_probable_prime(p):
            continue
        while True:
            h = rng.randrange(2, p - 1)
            g = h * h % p
            if g != 1:
                break
        return GroupParams(p=p, q=q, g=g)
    raise RuntimeError(f"no {bits}-bit safe prime found in {max_attempts} attempts")


def keygen(group: GroupParams, rng: random.Random) -> KeyPair:
    sk = rng.randrange(1, group.q)
    return KeyPair(sk=sk, pk=pow(group.g, sk, group.p))


def enc_one(group: GroupParams, sk: int, rng: random.Random) -> Ciphertext:
    """Encryption of the identity: (g^r, g^(r*sk)) for uniform r in [1, q-1]."""
    r = rng.randrange(1, group.q)
    a = pow(group.g, r, group.p)
    return Ciphertext(a=a, b=pow(a, sk, group.p))


def reencrypt(group: GroupParams, ct: Ciphertext, rng: random.Random) -> Ciphertext:
    """Re-randomize by raising both components to a fresh r' in [1, q-1].

    Preserves the key relation b = a^sk of an encryption of 1; applied
    before filling, never after (exponentiation would scramble a filled
    message).
    """
    r = rng.randrange(1, group.q)
    return Ciphertext(a=pow(ct.a, r, group.p), b=pow(ct.b, r, group.p))


def add_layer(group: GroupParams, ct: Ciphertext, sk_new: int, rng: random.Random) -> Ciphertext:
    """Add a key layer: (a, b) encrypting 1 under sk becomes one under sk + sk_new."""
    r = rng.randrange(1, group.q)
    a = pow(ct.a, r, group.p)
    b = pow(ct.b, r, group.p) * pow(ct.a, r * sk_new % group.q, group.p) % group.p
    return Ciphertext(a=a, b=b)


def fill(group: GroupParams, ct: Ciphertext, message: int) -> Ciphertext:
    """Multiply the message component by a group element: (a, b*C)."""
    if not group.in_subgroup(message):
        raise ValueError("message must be an element of the order-q subgroup")
    return Ciphertext(a=ct.a, b=ct.b * message % group.p)


def partial_decrypt(group: GroupParams, ct: Ciphertext, sk_layer: int) -> Ciphertext:
    """Remove one key layer: (a, b / a^sk_layer)."""
    inv = pow(ct.a, (group.q - sk_layer % group.q) % group.q, group.p)
    return Ciphertext(a=ct.a, b=ct.b * inv % group.p)


def combine(group: GroupParams, cts: Sequence[Ciphertext]) -> Ciphertext:
    """Component-wise product; encrypts the product of the messages.

    An empty sequence yields the identity ciphertext (1, 1).
    """
    a, b = 1, 1
    for ct in cts:
        a = a * ct.a % group.p
        b = b * ct.b % group.p
    return Ciphertext(a=a, b=b)


def decrypt_element(group: GroupParams, ct: Ciphertext, sk: int) -> int:
    """The encrypted group element b / a^sk."""
    return partial_decrypt(group, ct, sk).b


class DlogWindowError(ValueError):
    """Discrete log not found inside the configured window."""

    def __init__(self, message: str, window: tuple[int, int]):
        super().__init__(message)
        self.window = window


def bounded_dlog(
    group: GroupParams,
    h: int,
    lo: int,
    hi: int,
    method: str = "bsgs",
    rng: Optional[random.Random] = None,
    max_window: int = 2**48,
) -> Optional[int]:
    """Exponent x in [lo, hi] with g^x = h, or None if no such x.

    Negative exponents are understood mod q (g^-3 means g^(q-3)); the
    answer is unique whenever the window is narrower than q, and
    windows of at least q are rejected as ambiguous.

    method "bsgs" (default) is deterministic with O(sqrt(width)) time
    and memory; "kangaroo" trades memory for randomized walks driven by
    ``rng``.
    """
    if hi < lo:
        raise ValueError("empty window")
    width = hi - lo + 1
    if width > max_window:
        raise ValueError(f"window width {width} exceeds the guard {max_window}")
    if width >= group.q:
        raise ValueError("window at least as wide as the group order is ambiguous")
    if not group.in_subgroup(h):
        raise ValueError("h must be an element of the order-q subgroup")
    # Shift so the search space is [0, width).
    target = h * group.element(-lo) % group.p
    if method == "bsgs":
        offset = _bsgs(group, target, width)
    elif method == "kangaroo":
        if rng is None:
            rng = random.Random(0)
        offset = _kangaroo(group, target, width - 1, rng)
    else:
        raise ValueError(f"unknown method {method!r}")
    return None if offset is None else lo + offset


def _bsgs(group: GroupParams, target: int, width: int) -> Optional[int]:
    p, g = group.p, group.g
    m = math.isqrt(width - 1) + 1
    baby: dict[int, int] = {}
    cur = 1
    for j in range(m):
        baby.setdefault(cur, j)
        cur = cur * g % p
    giant_step = group.element(-m)
    gamma = target
    for i in range((width + m - 1) // m):
        j = baby.get(gamma)
        if j is not None:
            e = i * m + j
            if e < width:
                return e
        gamma = gamma * giant_step % p
    return None


def _kangaroo(
    group: GroupParams,
    target: int,
    width: int,
    rng: random.Random,
    max_rounds: int = 64,
) -> Optional[int]:
    """Pollard's kangaroo on [0, width]; retries with fresh walks."""
    p, g = group.p, group.g
    if width == 0:
        return 0 if target == 1 else None
    # Power-of-two jump set with mean around sqrt(width)/2.
    k = max(1, int(math.log2(math.isqrt(width) + 1)) + 1)
    jumps = [1 << i for i in range(k)]
    jump_elems = [pow(g, j, p) for j in jumps]
    tame_steps = 4 * math.isqrt(width) + 16

    for _ in range(max_rounds):
        salt = rng.getrandbits(64)

        def bucket(y: int) -> int:
            return ((y ^ salt) * 0x9E3779B97F4A7C15 >> 17) % k

        # Tame kangaroo from the top of the window.
        y_t = group.element(width)
        d_t = 0
        for _ in range(tame_steps):
            idx = bucket(y_t)
            d_t += jumps[idx]
            y_t = y_t * jump_elems[idx] % p
        # Wild kangaroo from the target.
        y_w = target
        d_w = 0
        while d_w <= width + d_t:
            if y_w == y_t:
                e = width + d_t - d_w
                if 0 <= e <= width and group.element(e) == target:
                    return e
                break
            idx = bucket(y_w)
            d_w += jumps[idx]
            y_w = y_w * jump_elems[idx] % p
    return None


def element_to_hex(group: GroupParams, x: int) -> str:
    """Big-endian fixed-width hex of a group element (width set by p)."""
    if not 0 <= x < group.p:
        raise ValueError("element out of range")
    nibbles = 2 * ((group.p.bit_length() + 7) // 8)
    return format(x, f"0{nibbles}x")


def ciphertext_to_hex(group: GroupParams, ct: Ciphertext) -> str:
    """Both components as big-endian hex, colon separated."""
    return f"{element_to_hex(group, ct.a)}:{element_to_hex(group, ct.b)}"
