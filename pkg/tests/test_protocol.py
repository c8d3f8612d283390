import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppsauction import checks
from ppsauction.alloc_mua import mua_allocate
from ppsauction.crypto import MaskConfig, MaskOverflowError, encrypt_signed
from ppsauction.model import ScenarioConfig, generate_scenario
from ppsauction.protocol import (
    FAULTS,
    PublicInfo,
    SessionConfig,
    audit_privacy,
    comm_stats,
    replay,
    run_scenario,
)
from ppsauction.protocol.auctioneer import dense_ranks, first_max
from ppsauction.protocol.transcript import PartyRole, Transcript, read_frames
from ppsauction.protocol.wire import (
    BidEntry,
    Codec,
    FinalAllocation,
    FinalEntry,
    IdSpace,
    MaskedBidBatch,
    MaskedWeightBatch,
    MessageKind,
    OrderReply,
    PaymentComponentBatch,
    PaymentEntry,
    PaymentOp,
    PaymentReply,
    Purpose,
    SubcellPick,
    TypePick,
    WinnerSetReply,
)

u32 = st.integers(0, 2**32 - 1)


def test_dense_ranks_and_first_max():
    assert dense_ranks([5, 9, 5, 1]) == [1, 0, 1, 2]
    assert first_max([3, 7, 7, 1]) == 1


@given(u32, st.lists(u32, max_size=5), st.lists(st.integers(-(2**100), 2**100), max_size=4), st.data())
def test_codec_roundtrip(keys512, batch, ints, signed, data):
    pk = keys512.public_key
    codec = Codec(pk)
    ct = encrypt_signed(pk, data.draw(st.integers(-1000, 1000)), random.Random(batch))
    msgs = [
        MaskedWeightBatch(batch, [ct, ct], Purpose.PREFIX, 3, 1, ints),
        OrderReply(batch, ints),
        MaskedBidBatch(batch, [BidEntry(i, 2, ct) for i in ints], False, IdSpace.RAW),
        WinnerSetReply(batch, ints, IdSpace.PERMUTED),
        SubcellPick(batch, 2),
        TypePick(batch, 3),
        PaymentComponentBatch(batch, PaymentOp.DIVIDE, 7, IdSpace.PERMUTED, [PaymentEntry(1, 4, ct)], 1),
        PaymentReply(batch, PaymentOp.REVEAL, signed, [ct]),
        FinalAllocation([FinalEntry(i, s, ints) for i, s in zip(ints, signed)]),
    ]
    for seq, msg in enumerate(msgs):
        frame = codec.frame(seq, msg)
        assert int.from_bytes(frame[:4], "big") == len(frame) - 4
        assert frame[4] == msg.kind
        assert codec.unframe(frame) == (seq, msg)


def test_codec_rejects_bad_frames(keys512):
    codec = Codec(keys512.public_key)
    frame = codec.frame(1, OrderReply(2, [0, 1]))
    with pytest.raises(ValueError):
        codec.unframe(frame[:-1])
    with pytest.raises(ValueError):
        codec.unframe(frame[:5])
    bad = (len(frame) - 3).to_bytes(4, "big") + frame[4:] + b"\x00"
    with pytest.raises(ValueError):
        codec.unframe(bad)


def test_ciphertexts_have_fixed_width(keys512):
    codec = Codec(keys512.public_key)
    ct = encrypt_signed(keys512.public_key, 1)
    one = codec.encode(MaskedWeightBatch(0, [ct]))
    two = codec.encode(MaskedWeightBatch(0, [ct, ct]))
    assert len(two) - len(one) == 2 * 512 // 8


def test_transcript_seq_must_increase(keys512):
    t = Transcript("PPS-SUA", 512)
    msg = OrderReply(0, [])
    t.record(1, PartyRole.AGENT, msg, b"x" * 9)
    with pytest.raises(ValueError):
        t.record(1, PartyRole.AUCTIONEER, msg, b"x" * 9)


def contention(mech, seed=0):
    """A fuzz scenario with non-zero payments; multi-unit ones overflow a subcell."""
    for s in range(seed, seed + 200):
        sc, k = checks.fuzz_scenario(mech, s)
        if mech != "sua" and all(sol.critical_index is None for sol in mua_allocate(sc).subgrids.values()):
            continue
        if len(checks.payments(sc, mech, k)) >= 2 and any(checks.payments(sc, mech, k).values()):
            return sc, k
    raise AssertionError("no contention scenario found")


@pytest.mark.parametrize("mech", ["sua", "mua", "emua"])
def test_protocol_matches_plaintext(keys512, mech):
    for seed in range(8):
        sc, k = checks.fuzz_scenario(mech, 100 + seed)
        out = run_scenario(sc, mech, keys512, k=k, config=SessionConfig(seed=seed))
        alloc = checks.allocate(sc, mech, k)
        assert out.allocation.winners == alloc.winners
        assert out.allocation.channel_assignment == alloc.channel_assignment
        assert out.allocation.weight is None
        assert out.payments == checks.payments(sc, mech, k)
        final = out.transcript.final_allocation()
        assert {e.bidder: e.payment for e in final.entries} == out.payments
        assert out.auctioneer.final == final


@pytest.mark.parametrize("mech", ["sua", "mua", "emua"])
def test_stream_transport_gives_identical_frames(keys512, mech):
    sc, k = contention(mech)
    mem = run_scenario(sc, mech, keys512, k=k, config=SessionConfig(seed=3))
    stream = run_scenario(sc, mech, keys512, k=k, config=SessionConfig(seed=3, transport="stream"))
    assert mem.transcript.frames() == stream.transcript.frames()


@pytest.mark.parametrize("mech", ["sua", "mua", "emua"])
def test_replay_and_determinism(keys512, mech, tmp_path):
    sc, k = contention(mech)
    a = run_scenario(sc, mech, keys512, k=k, config=SessionConfig(seed=5))
    b = run_scenario(sc, mech, keys512, k=k, config=SessionConfig(seed=5))
    assert a.transcript.frames() == b.transcript.frames()
    assert replay(a.transcript, keys512, seed=5)
    # a transcript with one agent frame swapped for a later one no longer replays
    sent = [e for e in b.transcript.entries if e.sender == PartyRole.AGENT]
    sent[0].frame = sent[1].frame
    try:
        assert not replay(b.transcript, keys512, seed=5)
    except (KeyError, ValueError):
        pass  # or the auctioneer rejects the out-of-order request outright

    path = tmp_path / "t.bin"
    a.transcript.write_frames(path)
    assert read_frames(path) == a.transcript.frames()
    log = tmp_path / "t.jsonl"
    a.transcript.write_jsonl(log)
    lines = log.read_text().splitlines()
    assert len(lines) == len(a.transcript.entries)
    assert '"payload_digest"' in lines[0] and '"seq"' in lines[0]


@pytest.mark.parametrize("mech", ["sua", "mua", "emua"])
def test_audit_clean_and_faults(keys512, mech):
    sc, k = contention(mech)
    clean = run_scenario(sc, mech, keys512, k=k, config=SessionConfig(seed=1))
    other = run_scenario(sc, mech, keys512, k=k, config=SessionConfig(seed=2))
    report = audit_privacy(clean.transcript, other.transcript)
    assert report.ok, report.violations
    assert report.counts and all(c.unknowns > c.relations for c in report.counts if c.attributable)
    expected = {"unmasked_bid": "unmasked", "mask_reuse": "mask_reuse", "raw_id": "raw_id"}
    for fault in FAULTS:
        out = run_scenario(sc, mech, keys512, k=k, config=SessionConfig(seed=1, fault=fault))
        flagged = audit_privacy(out.transcript).by_check()
        if fault == "raw_id" and mech == "sua":
            assert not flagged  # no id-bearing message exists in PPS-SUA
        else:
            assert flagged[expected[fault]] > 0, (fault, flagged)


def test_audit_flags_outcome_dependence(keys512):
    sc, k = contention("mua")
    a = run_scenario(sc, "mua", keys512, config=SessionConfig(seed=1))
    sc2 = sc.with_bid(sorted(a.payments)[0], 0)
    b = run_scenario(sc2, "mua", keys512, config=SessionConfig(seed=2))
    if a.transcript.final_allocation() != b.transcript.final_allocation():
        assert audit_privacy(a.transcript, b.transcript).by_check()["mask_dependence"] == 1


def test_zero_unit_offset_still_sorts(keys512):
    for seed in range(5):
        sc, _ = checks.fuzz_scenario("mua", 300 + seed)
        out = run_scenario(sc, "mua", keys512, config=SessionConfig(seed=seed, zero_unit_offset=True))
        assert out.allocation.winners == checks.allocate(sc, "mua").winners


def test_overflow_guard_aborts_run(keys512):
    sc, _ = contention("mua")
    with pytest.raises(MaskOverflowError):
        run_scenario(sc, "mua", keys512, config=SessionConfig(mask_config=MaskConfig(64, 512 + 16)))


def test_unknown_mechanism(keys512):
    sc, _ = contention("sua")
    with pytest.raises(ValueError):
        run_scenario(sc, "vcg", keys512)


def test_public_info_hides_bids():
    sc = generate_scenario(ScenarioConfig(n=6, seed=2))
    pub = PublicInfo.from_scenario(sc).scenario()
    assert all(b.bid == 0 for b in pub.bidders)
    assert [(b.id, b.x, b.y, b.demand) for b in pub.bidders] == [(b.id, b.x, b.y, b.demand) for b in sc.bidders]


def test_comm_stats(keys512):
    sc, k = contention("emua")
    stats = comm_stats(run_scenario(sc, "emua", keys512).transcript)
    assert stats["total_bytes"] == sum(stats["bytes_by_kind"].values()) > 0
    assert stats["per_party_decryptions"]["auctioneer"] > 0
    assert comm_stats(None)["total_bytes"] == 0


def _slope(xs, ys):
    lx, ly = [math.log(x) for x in xs], [math.log(y) for y in ys]
    mx, my = sum(lx) / len(lx), sum(ly) / len(ly)
    return sum((a - mx) * (b - my) for a, b in zip(lx, ly)) / sum((a - mx) ** 2 for a in lx)


@pytest.mark.parametrize("mech", ["mua", "emua"])
def test_multi_unit_message_growth_is_at_most_quadratic(keys512, mech):
    ns = [6, 12, 24, 48]
    counts = []
    for n in ns:
        total = 0
        for seed in range(3):
            sc = generate_scenario(ScenarioConfig(n=n, area=(6, 6), seed=seed))
            total += len(run_scenario(sc, mech, keys512, config=SessionConfig(seed=seed)).transcript.entries)
        counts.append(total)
    assert _slope(ns, counts) <= 2.2
