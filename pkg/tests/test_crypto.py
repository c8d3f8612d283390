import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppsauction.crypto import (
    Ciphertext,
    KeyMismatchError,
    MaskConfig,
    MaskOverflowError,
    MaskPair,
    check_overflow,
    decrypt,
    decrypt_signed,
    encrypt,
    encrypt_signed,
    hom_add,
    hom_add_plain,
    hom_linear,
    hom_neg,
    hom_scale,
    hom_sub,
    key_from_json,
    key_to_json,
    keygen,
    mask_affine,
)

small = st.integers(min_value=-(2**64), max_value=2**64)


def test_known_tiny_key_roundtrip():
    # textbook-sized primes are below the key floor, so build one by hand
    from ppsauction.crypto import PublicKey, SecretKey

    p, q = 17, 19
    n = p * q
    lam = 144  # lcm(16, 18)
    pk = PublicKey(n, n + 1)
    sk = SecretKey(pk, lam, pow(lam, -1, n))
    for m in (0, 1, 42, n - 1):
        assert decrypt(sk, encrypt(pk, m, random.Random(m))) == m


def test_keygen_rejects_small_and_odd_sizes():
    with pytest.raises(ValueError):
        keygen(128)
    with pytest.raises(ValueError):
        keygen(513)


def test_keygen_modulus_size(keys512):
    assert keys512.public_key.n.bit_length() == 512
    assert keys512.public_key.ciphertext_bytes == 128


@given(st.integers(min_value=0))
def test_roundtrip(keys512, m):
    pk, sk = keys512.public_key, keys512.secret_key
    m %= pk.n
    assert decrypt(sk, encrypt(pk, m)) == m


@given(small)
def test_signed_roundtrip(keys512, m):
    pk, sk = keys512.public_key, keys512.secret_key
    assert decrypt_signed(sk, encrypt_signed(pk, m)) == m


@given(small, small, st.integers(min_value=0, max_value=2**32))
def test_homomorphic_identities(keys512, a, b, s):
    pk, sk = keys512.public_key, keys512.secret_key
    ca, cb = encrypt_signed(pk, a), encrypt_signed(pk, b)
    assert decrypt_signed(sk, hom_add(pk, ca, cb)) == a + b
    assert decrypt_signed(sk, hom_sub(pk, ca, cb)) == a - b
    assert decrypt_signed(sk, hom_neg(pk, ca)) == -a
    assert decrypt_signed(sk, hom_scale(pk, ca, s)) == s * a
    assert decrypt_signed(sk, hom_add_plain(pk, ca, b)) == a + b
    assert decrypt_signed(sk, hom_linear(pk, [(ca, 3), (cb, -2)], 7)) == 3 * a - 2 * b + 7


def test_encryption_is_randomized(keys512):
    pk = keys512.public_key
    assert encrypt(pk, 5).value != encrypt(pk, 5).value


@given(st.lists(st.integers(min_value=0, max_value=10_000), min_size=2, max_size=12), st.integers())
def test_affine_mask_preserves_order(keys512, values, seed):
    pk, sk = keys512.public_key, keys512.secret_key
    mask = MaskConfig.for_bits(512).draw(random.Random(seed))
    masked = [decrypt_signed(sk, mask_affine(pk, encrypt(pk, v), mask, 10_000)) for v in values]
    for (v1, m1) in zip(values, masked):
        for (v2, m2) in zip(values, masked):
            assert (v1 < v2) == (m1 < m2)
            assert (v1 == v2) == (m1 == m2)
    assert [mask.unmask(m) for m in masked] == values


@given(st.lists(st.tuples(st.integers(0, 500), st.integers(1, 4)), min_size=2, max_size=10), st.integers())
def test_per_unit_mask_preserves_ratio_order(keys512, bids, seed):
    pk, sk = keys512.public_key, keys512.secret_key
    mask = MaskConfig.for_bits(512).draw(random.Random(seed))
    q = [Fraction(decrypt_signed(sk, mask_affine(pk, encrypt(pk, b), mask, 500, d)), d) for b, d in bids]
    for (b1, d1), q1 in zip(bids, q):
        for (b2, d2), q2 in zip(bids, q):
            if b1 * d2 != b2 * d1:
                assert (b1 * d2 < b2 * d1) == (q1 < q2)


def test_overflow_guard(keys512):
    pk = keys512.public_key
    check_overflow(pk, MaskPair(2**64, 2**300), 100)
    with pytest.raises(MaskOverflowError):
        check_overflow(pk, MaskPair(1, pk.half), 0)
    with pytest.raises(MaskOverflowError):
        mask_affine(pk, encrypt(pk, 1), MaskPair(2**300, 2**400), w_max=2**300)


def test_mask_pair_validation():
    with pytest.raises(ValueError):
        MaskPair(0, 1)
    with pytest.raises(ValueError):
        MaskPair(3, 4).unmask(3 * 5 + 4 + 1)


def test_ciphertext_bytes_roundtrip(keys512):
    pk = keys512.public_key
    c = encrypt(pk, 123)
    data = c.to_bytes()
    assert len(data) == pk.ciphertext_bytes
    assert Ciphertext.from_bytes(pk, data) == c


def test_key_json_roundtrip(keys512):
    sk = keys512.secret_key
    assert key_from_json(key_to_json(sk)) == sk
    assert key_from_json(key_to_json(sk.public)) == sk.public


def test_key_mismatch(keys512):
    other = keygen(512, random.Random("other"))
    with pytest.raises(KeyMismatchError):
        hom_add(keys512.public_key, encrypt(keys512.public_key, 1), encrypt(other.public_key, 1))
    with pytest.raises(KeyMismatchError):
        decrypt(keys512.secret_key, encrypt(other.public_key, 1))


def test_plaintext_range_checked(keys512):
    pk = keys512.public_key
    with pytest.raises(ValueError):
        encrypt(pk, -1)
    with pytest.raises(ValueError):
        encrypt(pk, pk.n)
    with pytest.raises(ValueError):
        hom_scale(pk, encrypt(pk, 1), -2)
