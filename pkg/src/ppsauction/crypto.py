"""Paillier encryption with g = n + 1 and the affine masks built on top of it.

Plaintexts live in Z_n.  Values at or above n/2 decode as negatives, which
lets differences of weights travel through the protocol unchanged.  Every
function that needs randomness takes an optional ``rng`` (anything with
``getrandbits`` / ``randrange``); the default is the system CSPRNG.
"""
from __future__ import annotations

import json
import math
import random
import secrets
from dataclasses import dataclass

import gmpy2

MIN_MODULUS_BITS = 256
DEFAULT_MODULUS_BITS = 1024
DEFAULT_GAMMA_MULT = 64

_system_rng = secrets.SystemRandom()


class KeyMismatchError(ValueError):
    pass


class MaskOverflowError(ValueError):
    """A masked value could wrap around the modulus."""


@dataclass(frozen=True)
class PublicKey:
    n: int
    g: int

    @property
    def n_sq(self) -> int:
        return self.n * self.n

    @property
    def bits(self) -> int:
        return self.n.bit_length()

    @property
    def ciphertext_bytes(self) -> int:
        return 2 * ((self.bits + 7) // 8)

    @property
    def half(self) -> int:
        return self.n // 2


@dataclass(frozen=True)
class SecretKey:
    public: PublicKey
    lam: int
    mu: int


@dataclass(frozen=True)
class KeyPair:
    public_key: PublicKey
    secret_key: SecretKey
    modulus_bits: int


@dataclass(frozen=True)
class Ciphertext:
    value: int
    modulus: int  # the n it was produced under; guards against key mixups

    def to_bytes(self) -> bytes:
        size = 2 * ((self.modulus.bit_length() + 7) // 8)
        return int(self.value).to_bytes(size, "big")

    @staticmethod
    def from_bytes(pk: PublicKey, data: bytes) -> "Ciphertext":
        if len(data) != pk.ciphertext_bytes:
            raise ValueError(f"ciphertext must be {pk.ciphertext_bytes} bytes, got {len(data)}")
        value = int.from_bytes(data, "big")
        if not 0 < value < pk.n_sq:
            raise ValueError("ciphertext out of range")
        return Ciphertext(value, pk.n)


def _random_prime(bits: int, rng) -> int:
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        p = int(gmpy2.next_prime(cand))
        if p.bit_length() == bits:
            return p


def keygen(modulus_bits: int = DEFAULT_MODULUS_BITS, rng=None) -> KeyPair:
    if modulus_bits < MIN_MODULUS_BITS:
        raise ValueError(f"modulus_bits must be >= {MIN_MODULUS_BITS}, got {modulus_bits}")
    if modulus_bits % 2:
        raise ValueError("modulus_bits must be even")
    rng = rng or _system_rng
    half = modulus_bits // 2
    while True:
        p, q = _random_prime(half, rng), _random_prime(half, rng)
        n = p * q
        if p != q and n.bit_length() == modulus_bits and math.gcd(n, (p - 1) * (q - 1)) == 1:
            break
    lam = (p - 1) * (q - 1) // math.gcd(p - 1, q - 1)
    mu = int(gmpy2.invert(lam, n))  # L(g^lam) = lam mod n when g = n + 1
    pk = PublicKey(n, n + 1)
    return KeyPair(pk, SecretKey(pk, lam, mu), modulus_bits)


def _check(pk: PublicKey, *cts: Ciphertext):
    for c in cts:
        if c.modulus != pk.n:
            raise KeyMismatchError("ciphertext was produced under a different key")


def encrypt(pk: PublicKey, m: int, rng=None) -> Ciphertext:
    if not 0 <= m < pk.n:
        raise ValueError("plaintext out of range [0, n)")
    rng = rng or _system_rng
    n, n_sq = pk.n, pk.n_sq
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            break
    c = (1 + m * n) * gmpy2.powmod(r, n, n_sq) % n_sq
    return Ciphertext(int(c), n)


def encrypt_signed(pk: PublicKey, m: int, rng=None) -> Ciphertext:
    if not -pk.half <= m < pk.n - pk.half:
        raise ValueError("signed plaintext out of range")
    return encrypt(pk, m % pk.n, rng)


def trivial_encrypt(pk: PublicKey, m: int) -> Ciphertext:
    """Deterministic encoding (1 + m*n); only for combining with real ciphertexts."""
    return Ciphertext((1 + (m % pk.n) * pk.n) % pk.n_sq, pk.n)


def decrypt(sk: SecretKey, ct: Ciphertext) -> int:
    pk = sk.public
    _check(pk, ct)
    if not 0 < ct.value < pk.n_sq or math.gcd(ct.value, pk.n) != 1:
        raise ValueError("malformed ciphertext")
    u = gmpy2.powmod(ct.value, sk.lam, pk.n_sq)
    return int((u - 1) // pk.n * sk.mu % pk.n)


def decrypt_signed(sk: SecretKey, ct: Ciphertext) -> int:
    m = decrypt(sk, ct)
    return m if m < sk.public.n - sk.public.half else m - sk.public.n


def hom_add(pk: PublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    _check(pk, c1, c2)
    return Ciphertext(c1.value * c2.value % pk.n_sq, pk.n)


def hom_add_plain(pk: PublicKey, c: Ciphertext, m: int) -> Ciphertext:
    _check(pk, c)
    return Ciphertext(c.value * (1 + (m % pk.n) * pk.n) % pk.n_sq, pk.n)


def hom_scale(pk: PublicKey, c: Ciphertext, s: int) -> Ciphertext:
    _check(pk, c)
    if not 0 <= s < pk.n:
        raise ValueError("scalar out of range [0, n)")
    return Ciphertext(int(gmpy2.powmod(c.value, s, pk.n_sq)), pk.n)


def hom_neg(pk: PublicKey, c: Ciphertext) -> Ciphertext:
    _check(pk, c)
    return Ciphertext(int(gmpy2.invert(c.value, pk.n_sq)), pk.n)


def hom_sub(pk: PublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    _check(pk, c1, c2)
    if math.gcd(c2.value, pk.n) != 1:
        raise ValueError("subtrahend is not invertible")
    return hom_add(pk, c1, hom_neg(pk, c2))


def hom_linear(pk: PublicKey, terms, const: int = 0) -> Ciphertext:
    """E(sum c_j * m_j + const) from (ciphertext, signed coefficient) pairs."""
    acc = trivial_encrypt(pk, const)
    for ct, coef in terms:
        if coef:
            acc = hom_add(pk, acc, hom_scale(pk, ct, coef % pk.n))
    return acc


# -- masking ---------------------------------------------------------------


@dataclass(frozen=True)
class MaskConfig:
    gamma_mult: int = DEFAULT_GAMMA_MULT
    gamma_add: int = 768

    @staticmethod
    def for_bits(modulus_bits: int) -> "MaskConfig":
        return MaskConfig(DEFAULT_GAMMA_MULT, modulus_bits * 3 // 4)

    def draw(self, rng=None) -> "MaskPair":
        rng = rng or _system_rng
        mult = 0
        while mult == 0:
            mult = rng.getrandbits(self.gamma_mult)
        return MaskPair(mult, rng.getrandbits(self.gamma_add))


@dataclass(frozen=True)
class MaskPair:
    delta_mult: int
    delta_add: int

    def __post_init__(self):
        if self.delta_mult < 1 or self.delta_add < 0:
            raise ValueError("need delta_mult >= 1 and delta_add >= 0")

    def apply(self, m: int, scale: int = 1) -> int:
        return self.delta_mult * m + self.delta_add * scale

    def unmask(self, masked: int, scale: int = 1) -> int:
        num = masked - self.delta_add * scale
        q, rem = divmod(num, self.delta_mult)
        if rem:
            raise ValueError("value was not masked with this pair")
        return q


def check_overflow(pk: PublicKey, mask: MaskPair, w_max: int, add_scale: int = 1) -> None:
    """Masked values of |m| <= w_max must stay inside the signed range."""
    if mask.delta_add * add_scale + mask.delta_mult * w_max >= pk.half:
        raise MaskOverflowError(
            f"delta_add*{add_scale} + delta_mult*{w_max} reaches n/2 for a {pk.bits}-bit modulus"
        )


def mask_affine(
    pk: PublicKey, c: Ciphertext, mask: MaskPair, w_max: int | None = None, add_scale: int = 1
) -> Ciphertext:
    """E(delta_mult * m + delta_add * add_scale).

    ``add_scale`` > 1 gives the per-unit form delta_mult*b + delta_add*N whose
    quotient by N is order preserving.
    """
    if w_max is not None:
        check_overflow(pk, mask, w_max, add_scale)
    return hom_add_plain(pk, hom_scale(pk, c, mask.delta_mult), mask.delta_add * add_scale)


# -- serialization ---------------------------------------------------------


def key_to_json(key: PublicKey | SecretKey) -> str:
    if isinstance(key, SecretKey):
        pk = key.public
        body = {"modulus": hex(pk.n), "generator": hex(pk.g),
                "secret": {"lambda": hex(key.lam), "mu": hex(key.mu)}}
    else:
        body = {"modulus": hex(key.n), "generator": hex(key.g)}
    return json.dumps(body, sort_keys=True)


def key_from_json(text: str) -> PublicKey | SecretKey:
    body = json.loads(text)
    pk = PublicKey(int(body["modulus"], 16), int(body["generator"], 16))
    if pk.g != pk.n + 1:
        raise ValueError("only g = n + 1 keys are supported")
    secret = body.get("secret")
    if secret is None:
        return pk
    return SecretKey(pk, int(secret["lambda"], 16), int(secret["mu"], 16))


def seeded_rng(seed) -> random.Random:
    """Deterministic randomness for reproducible runs and tests (not secure)."""
    return random.Random(seed)
