from __future__ import annotations

import random
from dataclasses import dataclass

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vanetauth import errors
from vanetauth.primitives import Ciphertext, OpCounter, h, keypair_generate, ts_bytes, u64, xor_bytes
from vanetauth.proposed import (
    AuthRequest,
    Notification,
    OnBoardUnit,
    PeerStatus,
    RegistrationRecord,
    RoadSideUnit,
    RsuAuthResponse,
    TaAuthResponse,
    TrafficMessage,
    TrustedAuthority,
    envelope,
    message_digest,
    open_envelope,
)


@dataclass
class World:
    ta: TrustedAuthority
    rsu: RoadSideUnit
    obu: OnBoardUnit
    card: object
    id: bytes
    master: bytes


def make_world(seed: int = 0, id: bytes = b"VIN-0001", pw: bytes = b"pw") -> World:
    r = random.Random(seed)
    master = r.randbytes(32)
    ta = TrustedAuthority(master, rng=r)
    rsu = RoadSideUnit(b"rsu0", keypair_generate(r))
    card, prov = ta.register(id, pw)
    obu = OnBoardUnit.provision(prov, {rsu.rsu_id: rsu.public_key})
    obu.login(card, pw)
    return World(ta, rsu, obu, card, id, master)


def authenticate(w: World, now: int):
    req = w.obu.auth_request(now)
    resp = w.ta.handle_auth(req, now)
    out = w.rsu.handle_ta_response(resp, now)
    return req, resp, out, w.obu.complete_auth(out)


# -- registration ---------------------------------------------------------------

def test_register_record_recomputed_independently():
    w = make_world()
    rec = w.ta.lookup(w.id)
    k_r = h(w.id, w.master)
    assert rec.counter == 1
    assert rec.expected_aid == h(k_r, (1).to_bytes(8, "big"))
    assert xor_bytes(w.obu.z_r, k_r) == h(b"pw")


def test_register_duplicate_and_revoked():
    w = make_world()
    with pytest.raises(errors.DuplicateIdentity):
        w.ta.register(w.id, b"x")
    w.ta.revoke(w.id)
    with pytest.raises(errors.RevokedIdentity):
        w.ta.register(w.id, b"x")
    with pytest.raises(errors.NotRegistered):
        w.ta.revoke(b"nobody")


def test_master_secret_must_be_32_bytes():
    with pytest.raises(ValueError):
        TrustedAuthority(b"short")


# -- login and password change --------------------------------------------------

def test_login_paths():
    w = make_world()
    assert w.obu.logged_in
    with pytest.raises(errors.PasswordMismatch):
        w.obu.login(w.card, b"wrong")
    assert not w.obu.logged_in
    other = make_world(id=b"VIN-0002")
    with pytest.raises(errors.IdentityMismatch):
        w.obu.login(other.card, b"pw")


def test_not_logged_in_cannot_request():
    w = make_world()
    w.obu.logged_in = False
    with pytest.raises(errors.NotLoggedIn):
        w.obu.auth_request(10)


def test_password_change():
    w = make_world()
    k_r_before, counter_before = w.obu.k_r, w.obu.counter
    w.obu.change_password(w.card, w.id, b"pw", b"pw2")
    assert w.card.pw == b"pw2"
    w.obu.login(w.card, b"pw2")
    with pytest.raises(errors.PasswordMismatch):
        w.obu.login(w.card, b"pw")
    assert (w.obu.k_r, w.obu.counter) == (k_r_before, counter_before)


def test_password_change_same_and_wrong_old():
    w = make_world()
    z = w.obu.z_r
    w.obu.change_password(w.card, w.id, b"pw", b"pw")
    assert w.obu.z_r == z
    with pytest.raises(errors.PasswordMismatch):
        w.obu.change_password(w.card, w.id, b"nope", b"new")
    assert w.obu.z_r == z
    with pytest.raises(errors.IdentityMismatch):
        w.obu.change_password(w.card, b"other", b"pw", b"new")


@given(st.lists(st.binary(min_size=1, max_size=12), min_size=1, max_size=5))
def test_password_change_sequences(pws):
    w = make_world()
    current = b"pw"
    for new in pws:
        w.obu.change_password(w.card, w.id, current, new)
        if new != current:
            with pytest.raises(errors.PasswordMismatch):
                w.obu.login(w.card, current)
        current = new
        assert w.obu.login(w.card, current)


# -- authentication ---------------------------------------------------------------

def test_first_request_matches_ta_expected_aid():
    w = make_world()
    req = w.obu.auth_request(100)
    assert req.aid == w.ta.lookup(w.id).expected_aid
    k_r = h(w.id, w.master)
    assert req.uac == h(k_r, req.aid, ts_bytes(100))


def test_request_is_deterministic():
    a, b = make_world(), make_world()
    assert a.obu.auth_request(5) == b.obu.auth_request(5)


def test_key_agreement_and_projection():
    w = make_world()
    _, resp, out, k_obu = authenticate(w, 100)
    assert k_obu == resp.k_s == w.rsu.l_auth[-1].k_s
    assert out == RsuAuthResponse(resp.aid, resp.k_s_enc, resp.a_i)
    assert not hasattr(out, "k_s") and not hasattr(out, "id")
    assert len(w.rsu.l_auth) == 1


def test_chain_consistency_over_many_sessions():
    w = make_world()
    n = 25
    for i in range(n):
        authenticate(w, 100 + i)
    rec = w.ta.lookup(w.id)
    k_r = h(w.id, w.master)
    assert rec.counter == n + 1 == w.obu.counter
    assert rec.expected_aid == h(k_r, u64(n + 1))


def test_role_operation_counts():
    w = make_world()
    for role in (w.obu, w.rsu, w.ta):
        role.ops.reset()
    w.obu.auth_request(100)
    assert w.obu.ops == OpCounter(hash_ops=2)
    w.obu.ops.reset()
    w.obu.pending = None
    authenticate(w, 101)
    assert w.obu.ops == OpCounter(hash_ops=3, enc_ops=1)
    assert w.ta.ops == OpCounter(hash_ops=4, enc_ops=1)
    assert w.rsu.ops == OpCounter()


def test_stale_unknown_revoked_bad_uac():
    w = make_world()
    req = w.obu.auth_request(0)
    with pytest.raises(errors.StaleTimestamp):
        w.ta.handle_auth(req, 60_001)
    with pytest.raises(errors.UnknownPseudonym):
        w.ta.handle_auth(AuthRequest(b"\x00" * 32, 0, req.uac), 0)
    with pytest.raises(errors.BadAuthenticator):
        w.ta.handle_auth(AuthRequest(req.aid, 0, b"\x00" * 32), 0)
    w.ta.revoke(w.id)
    with pytest.raises(errors.Revoked):
        w.ta.handle_auth(req, 0)


def test_replay_within_window_rejected():
    w = make_world()
    req, *_ = authenticate(w, 100)
    with pytest.raises(errors.BadAuthenticator):
        w.ta.handle_auth(req, 150)
    # after the chain advances twice the old pseudonym is gone entirely
    authenticate(w, 200)
    with pytest.raises(errors.UnknownPseudonym):
        w.ta.handle_auth(req, 210)


def test_lost_response_recovery():
    w = make_world()
    req = w.obu.auth_request(100)
    w.ta.handle_auth(req, 100)  # response lost in transit
    retry = w.obu.auth_request(200)
    assert retry.aid == req.aid
    resp = w.ta.handle_auth(retry, 200)
    w.obu.complete_auth(w.rsu.handle_ta_response(resp, 200))
    assert w.obu.counter == w.ta.lookup(w.id).counter == 2
    authenticate(w, 300)
    assert w.obu.counter == w.ta.lookup(w.id).counter == 3


def test_complete_auth_errors():
    w = make_world()
    req = w.obu.auth_request(100)
    resp = w.ta.handle_auth(req, 100)
    out = resp.for_obu()
    ct = bytearray(out.k_s_enc.to_bytes())
    ct[-1] ^= 1
    bad = RsuAuthResponse(out.aid, Ciphertext.from_bytes(bytes(ct)), out.a_i)
    with pytest.raises(errors.BadResponseTag):
        w.obu.complete_auth(bad)
    w.obu.complete_auth(out)
    with pytest.raises(errors.NoPendingRequest):
        w.obu.complete_auth(out)


# -- data authentication ----------------------------------------------------------

def test_message_verify_trace_and_duplicates():
    w = make_world()
    authenticate(w, 100)
    tm = w.obu.sign_message(b"ice on bridge", 150)
    assert w.rsu.verify_message(tm, 160) == w.id
    assert len(w.rsu.l_m) == 1
    assert w.rsu.report_malicious(150, b"ice on bridge") == w.id
    with pytest.raises(errors.DuplicateMessage):
        w.rsu.verify_message(tm, 170)
    with pytest.raises(errors.NotFound):
        w.rsu.report_malicious(151, b"ice on bridge")


def test_message_errors():
    w = make_world()
    with pytest.raises(errors.NoSession):
        w.obu.sign_message(b"m", 1)
    authenticate(w, 100)
    assert w.obu.sign_message(b"m", 1).sigma != w.obu.sign_message(b"m", 2).sigma
    forged = TrafficMessage(150, b"m", h(ts_bytes(150), b"m", b"\x01" * 32))
    with pytest.raises(errors.NoMatchingSession):
        w.rsu.verify_message(forged, 150)
    with pytest.raises(errors.StaleTimestamp):
        w.rsu.verify_message(w.obu.sign_message(b"m", 0), 100_000)


def test_two_senders_traced_separately():
    r = random.Random(4)
    ta = TrustedAuthority(r.randbytes(32), rng=r)
    rsu = RoadSideUnit(b"rsu0", keypair_generate(r))
    obus = []
    for vid in (b"VIN-A", b"VIN-B"):
        card, prov = ta.register(vid, b"p")
        o = OnBoardUnit.provision(prov)
        o.login(card, b"p")
        o.complete_auth(rsu.handle_ta_response(ta.handle_auth(o.auth_request(10), 10), 10))
        obus.append(o)
    for t2, o in zip((20, 21), obus):
        rsu.verify_message(o.sign_message(b"same text", t2), t2)
    assert rsu.report_malicious(20, b"same text") == b"VIN-A"
    assert rsu.report_malicious(21, b"same text") == b"VIN-B"


def test_auth_list_expiry():
    w = make_world()
    w.rsu.auth_ttl = 50
    authenticate(w, 100)
    tm = w.obu.sign_message(b"late", 200)
    with pytest.raises(errors.NoMatchingSession):
        w.rsu.verify_message(tm, 200)


# -- notifications -----------------------------------------------------------------

def test_notification_round_trip_and_peer_check():
    w = make_world()
    authenticate(w, 100)
    msgs = [w.obu.sign_message(f"m{i}".encode(), 110 + i) for i in range(3)]
    for tm in msgs:
        w.rsu.verify_message(tm, 120)
    note = w.rsu.emit_notification(130)
    assert w.rsu.pending_notification_count == 0
    note = Notification.from_bytes(note.to_bytes())
    for tm in msgs:
        assert note.filter.contains(message_digest(tm.t2, tm.m))
        assert w.obu.verify_peer_message(tm, note) is PeerStatus.VALID


def test_empty_notification():
    w = make_world()
    note = w.rsu.emit_notification(5)
    assert note.filter.m == 64 and note.filter.hash_count == 1
    assert w.obu.verify_peer_message(TrafficMessage(1, b"x", b"\x00" * 32), note) is PeerStatus.UNKNOWN


def test_notification_signature_checks():
    w = make_world()
    note = w.rsu.emit_notification(5)
    tm = TrafficMessage(1, b"x", b"\x00" * 32)
    bad_sig = bytes([note.signature[0] ^ 1]) + note.signature[1:]
    with pytest.raises(errors.BadNotificationSignature):
        w.obu.verify_peer_message(tm, Notification(note.rsu_id, note.issued_at, note.filter, bad_sig))
    with pytest.raises(errors.BadNotificationSignature):
        w.obu.verify_peer_message(tm, Notification(note.rsu_id, note.issued_at + 1, note.filter, note.signature))
    stranger = RoadSideUnit(b"rsu9", keypair_generate(random.Random(8)))
    with pytest.raises(errors.UnknownRsu):
        w.obu.verify_peer_message(tm, stranger.emit_notification(5))


def test_unseen_peer_messages_mostly_unknown():
    w = make_world()
    authenticate(w, 100)
    for i in range(200):
        w.rsu.verify_message(w.obu.sign_message(b"seen%d" % i, 100), 100)
    note = w.rsu.emit_notification(101)
    r = random.Random(11)
    trials = 10_000
    valid = sum(note.filter.contains(message_digest(r.randrange(10**9), r.randbytes(8)))
                for _ in range(trials))
    assert valid / trials <= 0.01 * 2


# -- serialization --------------------------------------------------------------------

digests = st.binary(min_size=32, max_size=32)


@given(digests, st.integers(0, 2**63), digests)
def test_auth_request_round_trip(aid, t, uac):
    req = AuthRequest(aid, t, uac)
    assert AuthRequest.from_bytes(req.to_bytes()) == req


@given(st.integers(0, 2**63), st.binary(max_size=200), digests)
def test_traffic_message_round_trip(t2, m, sigma):
    tm = TrafficMessage(t2, m, sigma)
    assert TrafficMessage.from_bytes(tm.to_bytes()) == tm


def test_ta_response_envelope_round_trip():
    w = make_world()
    resp = w.ta.handle_auth(w.obu.auth_request(10), 10)
    rsu_id, inner = open_envelope(envelope(b"rsu0", resp.to_bytes()))
    assert rsu_id == b"rsu0" and TaAuthResponse.from_bytes(inner) == resp
    out = resp.for_obu()
    assert RsuAuthResponse.from_bytes(out.to_bytes()) == out


@given(st.binary(max_size=80))
def test_decoders_never_crash_unexpectedly(raw):
    for cls in (AuthRequest, RsuAuthResponse, TrafficMessage, Notification, TaAuthResponse):
        try:
            cls.from_bytes(raw)
        except errors.MalformedMessage:
            pass


def test_trailing_bytes_rejected():
    raw = AuthRequest(b"a" * 32, 1, b"u" * 32).to_bytes()
    with pytest.raises(errors.MalformedMessage):
        AuthRequest.from_bytes(raw + b"\x00")
    with pytest.raises(errors.MalformedMessage):
        TrafficMessage.from_bytes(raw)


def test_registration_record_json_round_trip():
    w = make_world()
    authenticate(w, 10)
    rec = w.ta.lookup(w.id)
    d = rec.to_json()
    assert set(d) >= {"id", "expected_aid", "prev_aid", "counter", "revoked"}
    assert RegistrationRecord.from_json(d) == rec


def test_persisted_state_reload_continues_chain():
    w = make_world()
    authenticate(w, 10)
    ta2 = TrustedAuthority(w.master)
    ta2.load_records(w.ta.dump_records())
    w.ta = ta2
    authenticate(w, 20)
    assert ta2.lookup(w.id).counter == 3


def test_rsu_lists_reload():
    w = make_world()
    authenticate(w, 10)
    w.rsu.verify_message(w.obu.sign_message(b"m", 11), 11)
    rsu2 = RoadSideUnit(b"rsu0", w.rsu.keypair)
    rsu2.load_lists(w.rsu.dump_auth_list(), w.rsu.dump_message_log())
    assert rsu2.report_malicious(11, b"m") == w.id
    assert rsu2.verify_message(w.obu.sign_message(b"n", 12), 12) == w.id
