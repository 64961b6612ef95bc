import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from ssiaas.crypto import (
    Algorithm,
    BinaryField,
    GF256,
    Share,
    Signature,
    aggregate_signatures,
    digest,
    encode_challenge,
    generate_keypair,
    new_nonce,
    reconstruct_secret,
    respond_challenge,
    sign,
    split_secret,
    verify,
    verify_signature_set,
)
from ssiaas.errors import (
    DecryptionFailure,
    InconsistentShares,
    InsufficientShares,
    InvalidPartial,
    InvalidThreshold,
    MalformedKey,
    MalformedSignature,
    ThresholdNotMet,
    UnsupportedAlgorithm,
)


@pytest.fixture(scope="module")
def kp():
    return generate_keypair()


# -- keys and signatures ------------------------------------------------------
@pytest.mark.parametrize("algorithm", list(Algorithm))
def test_sign_verify_round_trip(algorithm):
    pair = generate_keypair(algorithm)
    sig = sign(pair.secret_key, b"claims")
    assert verify(pair.public_key, b"claims", sig)
    assert not verify(pair.public_key, b"claims-tampered", sig)
    assert not verify(generate_keypair(algorithm).public_key, b"claims", sig)


def test_unknown_algorithm():
    with pytest.raises(UnsupportedAlgorithm):
        generate_keypair("rsa-512")


def test_keypairs_do_not_collide():
    publics = {generate_keypair().public_key for _ in range(10_000)}
    assert len(publics) == 10_000


def test_secret_key_hidden_from_repr(kp):
    assert kp.secret_key.hex() not in repr(kp)


def test_malformed_inputs(kp):
    with pytest.raises(MalformedKey):
        verify(b"\x01" + b"\x00" * 33, b"m", b"\x00" * 64)
    with pytest.raises(MalformedKey):
        sign(b"\x09" * 33, b"m")
    with pytest.raises(MalformedSignature):
        verify(kp.public_key, b"m", b"short")


def test_rfc6979_p256_sha256_vector():
    # RFC 6979 appendix A.2.5, message "sample"
    x = int("C9AFA9D845BA75166B5C215767B1D6934E50C3DB36E89B127B8A622B120F6721", 16)
    secret = b"\x01" + x.to_bytes(32, "big")
    sig = sign(secret, b"sample")
    assert sig.data[:32].hex() == "efd48b2aacb6a8fd1140dd9cd45e81d69d2c877b56aaf991c34d0ea84eaf3716"
    assert sig.data[32:].hex() == "f7cb1c942d657c41d436c7a1b6e29f65f3e900dbb9aff4064dc4ab2f843acda8"


def test_seeded_keys_are_reproducible():
    assert generate_keypair(seed=b"a") == generate_keypair(seed=b"a")
    assert generate_keypair(seed=b"a") != generate_keypair(seed=b"b")


@settings(max_examples=60, deadline=None)
@given(st.binary(max_size=256), st.binary(max_size=256))
def test_signature_binds_message(m, other):
    pair = generate_keypair(seed=b"hypothesis")
    sig = sign(pair.secret_key, m)
    assert verify(pair.public_key, m, sig)
    assert verify(pair.public_key, m, sig) == verify(pair.public_key, m, sig)
    if other != m:
        assert not verify(pair.public_key, other, sig)


def test_signature_json_round_trip(kp):
    sig = sign(kp.secret_key, b"x")
    assert Signature.from_json(sig.to_json()) == sig
    with pytest.raises(MalformedSignature):
        Signature.from_json({"value": "***"})


# -- hashing ------------------------------------------------------------------
def test_hash_empty_reference_vector():
    assert digest(b"").hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def test_hash_deterministic_and_bit_sensitive():
    corpus = random.Random(7).randbytes(1024)
    base = digest(corpus)
    assert digest(corpus) == base and len(base) == 32
    seen = {base}
    for bit in range(len(corpus) * 8):
        flipped = bytearray(corpus)
        flipped[bit // 8] ^= 1 << (bit % 8)
        d = digest(bytes(flipped))
        assert d != base
        seen.add(d)
    assert len(seen) == 1024 * 8 + 1


# -- challenge encoding -------------------------------------------------------
@pytest.mark.parametrize("algorithm", list(Algorithm))
def test_challenge_round_trip(algorithm):
    pair = generate_keypair(algorithm)
    nonce = new_nonce()
    assert respond_challenge(pair.secret_key, encode_challenge(nonce, pair.public_key)) == nonce


def test_challenge_wrong_key(kp):
    encoded = encode_challenge(new_nonce(), kp.public_key)
    with pytest.raises(DecryptionFailure):
        respond_challenge(generate_keypair().secret_key, encoded)
    with pytest.raises(DecryptionFailure):
        respond_challenge(generate_keypair(Algorithm.ECDSA_SECP256K1).secret_key, encoded)


def test_challenge_requires_long_nonce(kp):
    with pytest.raises(ValueError):
        encode_challenge(b"short", kp.public_key)


# -- Shamir -------------------------------------------------------------------
def _gf_mul(a, b, modulus=0x11B, bits=8):
    # independent carry-less multiply for the oracle
    r = 0
    for i in range(bits):
        if (b >> i) & 1:
            r ^= a << i
    for i in range(2 * bits - 2, bits - 1, -1):
        if (r >> i) & 1:
            r ^= modulus << (i - bits)
    return r


def _gf_inv(a):
    return next(x for x in range(1, 256) if _gf_mul(a, x) == 1)


def _lagrange_oracle(points):
    total = 0
    for j, (xj, yj) in enumerate(points):
        num, den = 1, 1
        for m, (xm, _) in enumerate(points):
            if m != j:
                num = _gf_mul(num, xm)
                den = _gf_mul(den, xj ^ xm)
        total ^= _gf_mul(yj, _gf_mul(num, _gf_inv(den)))
    return total


def test_field_matches_oracle_multiplication():
    for a in range(256):
        for b in range(0, 256, 7):
            assert GF256.mul(a, b) == _gf_mul(a, b)


def test_shamir_3_of_5_against_lagrange_oracle():
    secret = bytes(range(40))
    shares = split_secret(secret, 3, 5)
    chosen = [shares[0], shares[2], shares[4]]
    oracle = bytes(
        _lagrange_oracle([(s.index, s.value[pos]) for s in chosen]) for pos in range(len(secret))
    )
    assert oracle == secret
    assert reconstruct_secret(chosen) == secret


def test_shamir_t1_each_share_alone():
    shares = split_secret(b"k", 1, 3)
    for s in shares:
        assert reconstruct_secret([s]) == b"k"


def test_shamir_errors():
    s = b"secret"
    shares = split_secret(s, 3, 5)
    assert reconstruct_secret(shares) == s
    with pytest.raises(InsufficientShares):
        reconstruct_secret(shares[:2])
    other = split_secret(s, 3, 5)
    with pytest.raises(InconsistentShares):
        reconstruct_secret([shares[0], shares[1], other[2]])
    for t, n in [(0, 3), (4, 3), (2, 256)]:
        with pytest.raises(InvalidThreshold):
            split_secret(s, t, n)
    with pytest.raises(InvalidThreshold):
        split_secret(b"", 1, 1)


def test_share_metadata_and_json():
    shares = split_secret(b"abc", 2, 4)
    assert {(s.threshold, s.total) for s in shares} == {(2, 4)}
    assert [s.index for s in shares] == [1, 2, 3, 4]
    assert Share.from_json(shares[1].to_json()) == shares[1]


def test_shares_are_polynomial_evaluations():
    rng = random.Random(3)
    shares = split_secret(b"\x42", 3, 6, randbelow=rng.randrange)
    # any three points determine the degree-2 polynomial; the rest must lie on it
    base = [(s.index, s.value[0]) for s in shares[:3]]
    for s in shares[3:]:
        assert GF256.interpolate_at(base, s.index) == s.value[0]


@pytest.mark.parametrize("n", range(2, 9))
def test_shamir_correctness_exhaustive_subsets(n):
    rng = random.Random(n)
    for t in range(1, n + 1):
        secret = bytes([rng.randrange(256)])
        shares = split_secret(secret, t, n)
        for subset in itertools.combinations(shares, t):
            assert reconstruct_secret(subset) == secret
        if t > 1:
            for subset in itertools.combinations(shares, t - 1):
                with pytest.raises(InsufficientShares):
                    reconstruct_secret(subset)


GF8 = BinaryField(3, 0b1011)


def test_small_field_uninformative_brute_force():
    # every (t-1)-subset of evaluation points sees the same distribution of
    # share values whatever the secret is
    q = GF8.size
    for n in range(2, 6):
        for t in range(2, n + 1):
            for xs in itertools.combinations(range(1, n + 1), t - 1):
                reference = None
                for secret in range(q):
                    counts = {}
                    for tail in itertools.product(range(q), repeat=t - 1):
                        view = tuple(GF8.eval_poly((secret,) + tail, x) for x in xs)
                        counts[view] = counts.get(view, 0) + 1
                    assert len(counts) == q ** (t - 1)
                    assert set(counts.values()) == {1}
                    if reference is None:
                        reference = counts
                    assert counts == reference


def test_small_field_split_reconstruct():
    rng = random.Random(11)
    for secret in range(GF8.size):
        shares = split_secret(bytes([secret]), 3, 5, field=GF8, randbelow=rng.randrange)
        for subset in itertools.combinations(shares, 3):
            assert reconstruct_secret(subset, field=GF8) == bytes([secret])


# -- multisignature aggregation ----------------------------------------------
@pytest.fixture(scope="module")
def entities():
    return [generate_keypair(seed=bytes([i])) for i in range(5)]


def _partials(entities, message, idx):
    return [(entities[i].public_key, sign(entities[i].secret_key, message)) for i in idx]


def test_aggregate_threshold(entities):
    msg = b"vc-digest"
    agg = aggregate_signatures(msg, _partials(entities, msg, [0, 2, 4]), threshold=2)
    keys = [e.public_key for e in entities]
    assert verify_signature_set(agg, msg, keys, threshold=2)
    assert not verify_signature_set(agg, b"other", keys, threshold=2)
    assert not verify_signature_set(agg, msg, keys[:3], threshold=2)
    assert not verify_signature_set(agg, msg, keys, threshold=3)
    with pytest.raises(ThresholdNotMet):
        aggregate_signatures(msg, _partials(entities, msg, [0, 1]), threshold=2)


def test_aggregate_names_forger(entities):
    msg = b"vc-digest"
    partials = _partials(entities, msg, [0, 1])
    forged = (entities[3].public_key, sign(generate_keypair().secret_key, msg))
    with pytest.raises(InvalidPartial) as info:
        aggregate_signatures(msg, partials + [forged], threshold=2)
    assert info.value.details["signer"] == entities[3].fingerprint


def test_aggregate_rejects_duplicates(entities):
    msg = b"m"
    p = _partials(entities, msg, [0])
    with pytest.raises(InvalidPartial):
        aggregate_signatures(msg, p + p + _partials(entities, msg, [1]), threshold=1)


def test_aggregate_monotone(entities):
    msg = b"m"
    for size in range(3, 6):
        for idx in itertools.combinations(range(5), size):
            agg = aggregate_signatures(msg, _partials(entities, msg, idx), threshold=2)
            assert verify_signature_set(agg, msg, [e.public_key for e in entities], threshold=2)
