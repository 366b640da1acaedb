import numpy as np
import pytest

from ntcfk.ntcf import gen, key_to_text, trapdoor_to_text
from ntcfk.presets import get_preset
from ntcfk.prover import (
    CheatCommitProver,
    CheatRandomProver,
    HonestProver,
    RedFailed,
)
from ntcfk.protocol import (
    FrameError,
    MsgChallenge,
    MsgEquationResp,
    MsgImage,
    MsgKey,
    MsgPreimageResp,
    MsgRedFailure,
    MsgRoundResult,
    ProtocolError,
    SessionAbort,
    Transcript,
    VerifierRound,
    frame_decode,
    frame_encode,
    run_protocol,
    run_protocol_tcp,
)
from ntcfk.zq import BitString, ZqVector


TINY = get_preset("tiny-exact")
DESK = get_preset("desk-k3")


def vec(entries, params):
    return ZqVector(np.array(entries, dtype=np.int64), params.modulus)


class TestFrames:
    def test_key_round_trip(self, rng):
        k, _t = gen(TINY, rng)
        out = frame_decode(frame_encode(MsgKey(k)))
        assert out.key == k

    def test_image_round_trip(self):
        msg = MsgImage(vec([3, 5], TINY))
        out = frame_decode(frame_encode(msg), TINY)
        assert out.y == msg.y

    @pytest.mark.parametrize("kind", ["G", "T"])
    def test_challenge_round_trip(self, kind):
        out = frame_decode(frame_encode(MsgChallenge(kind)), TINY)
        assert out.kind == kind

    def test_preimage_round_trip(self):
        msg = MsgPreimageResp(2, vec([4], TINY))
        out = frame_decode(frame_encode(msg), TINY)
        assert (out.b, out.x) == (2, msg.x)

    def test_equation_round_trip(self):
        msg = MsgEquationResp(1, 1, BitString((1, 0, 1)))
        out = frame_decode(frame_encode(msg), TINY)
        assert (out.b_prime, out.c, out.d) == (1, 1, BitString((1, 0, 1)))

    def test_red_failure_round_trip(self):
        out = frame_decode(frame_encode(MsgRedFailure("measured b' = 0")), TINY)
        assert out.reason == "measured b' = 0"

    @pytest.mark.parametrize(
        "accept,reason",
        [(True, "preimage check passed"), (False, "retry:all-zero d")],
    )
    def test_result_round_trip(self, accept, reason):
        out = frame_decode(frame_encode(MsgRoundResult(accept, reason)), TINY)
        assert (out.accept, out.reason) == (accept, reason)
        assert out.is_retry == (not accept and reason.startswith("retry:"))


class TestFrameErrors:
    def test_truncated_header(self):
        with pytest.raises(FrameError):
            frame_decode(b"\x00\x00", TINY)

    def test_length_mismatch(self):
        frame = frame_encode(MsgChallenge("G"))
        with pytest.raises(FrameError):
            frame_decode(frame + b"extra", TINY)

    def test_unknown_tag(self):
        frame = frame_encode(MsgChallenge("G"))
        bad = frame[:4] + bytes([0x7F]) + frame[5:]
        with pytest.raises(FrameError):
            frame_decode(bad, TINY)

    def test_non_key_needs_params(self):
        frame = frame_encode(MsgChallenge("G"))
        with pytest.raises(FrameError):
            frame_decode(frame)

    def test_bad_challenge_rejected_on_encode(self):
        with pytest.raises(FrameError):
            frame_encode(MsgChallenge("X"))

    def test_image_length_checked(self):
        frame = frame_encode(MsgImage(vec([1, 2, 3], TINY)))
        with pytest.raises(FrameError):
            frame_decode(frame, TINY)  # m=2 for tiny-exact

    def test_d_length_checked(self):
        frame = frame_encode(MsgEquationResp(1, 0, BitString((1, 0))))
        with pytest.raises(FrameError):
            frame_decode(frame, TINY)  # d_len=3 for tiny-exact

    def test_malformed_payload(self):
        import struct

        payload = b"nonsense here"
        frame = struct.pack(">I", len(payload)) + bytes([0x02]) + payload
        with pytest.raises(FrameError):
            frame_decode(frame, TINY)


class TestVerifierOrdering:
    def test_challenge_before_image(self, rng):
        vr = VerifierRound(TINY, rng)
        vr.key_message()
        with pytest.raises(ProtocolError):
            vr.challenge(rng)

    def test_image_before_key_sent(self, rng):
        vr = VerifierRound(TINY, rng)
        with pytest.raises(ProtocolError):
            vr.receive_image(vec([0, 0], TINY))

    def test_wrong_image_length(self, rng):
        vr = VerifierRound(TINY, rng)
        vr.key_message()
        with pytest.raises(ProtocolError):
            vr.receive_image(vec([0, 0, 0], TINY))

    def test_answer_kind_must_match_challenge(self, rng):
        pr = HonestProver(np.random.default_rng(0), mode="exact-enumeration")
        for _ in range(10):
            vr = VerifierRound(TINY, rng)
            y = pr.receive_key(frame_decode(frame_encode(vr.key_message())).key)
            assert vr.receive_image(y) is None
            kind = vr.challenge(rng).kind
            if kind == "G":
                with pytest.raises(ProtocolError):
                    vr.check_equation(1, 0, BitString((1, 0, 1)))
            else:
                with pytest.raises(ProtocolError):
                    vr.check_generation(0, vec([0], TINY))

    def test_double_verdict(self, rng):
        pr = HonestProver(np.random.default_rng(1), mode="exact-enumeration")
        vr = VerifierRound(TINY, rng)
        y = pr.receive_key(vr.key_message().key)
        vr.receive_image(y)
        vr.challenge(rng)
        with pytest.raises(ProtocolError):
            vr.key_message()


class TestHonestCompleteness:
    def test_tiny_exact_all_accept(self):
        pr = HonestProver(np.random.default_rng(2), mode="exact-enumeration")
        stats = run_protocol(TINY, pr, 60, np.random.default_rng(3))
        assert stats.all_accepted
        assert stats.rounds_completed == 60
        assert stats.gen_rounds + stats.test_rounds == 60

    def test_desk_idealized_all_accept(self):
        pr = HonestProver(np.random.default_rng(4), mode="idealized-claw")
        stats = run_protocol(DESK, pr, 50, np.random.default_rng(5))
        assert stats.all_accepted
        # RED fails 1/3 of the time at kappa=3; retries stay moderate
        assert stats.retries <= 50

    def test_retry_reasons_are_marked(self):
        pr = HonestProver(np.random.default_rng(6), mode="idealized-claw")
        stats = run_protocol(DESK, pr, 80, np.random.default_rng(7))
        retry_ts = [t for t in stats.transcripts if t.verdict == "retry"]
        assert retry_ts  # kappa=3 RED failure is a 1/3 event per T round
        assert all(t.reason.startswith("retry:") for t in retry_ts)


class TestCheaters:
    def test_commit_prover_rejected_sometimes(self):
        pr = CheatCommitProver(np.random.default_rng(8))
        stats = run_protocol(DESK, pr, 120, np.random.default_rng(9))
        assert stats.gen_passes == stats.gen_rounds  # commit wins G rounds
        assert stats.rejects > 0
        assert stats.test_passes < stats.test_rounds

    def test_random_prover_mostly_rejected(self):
        pr = CheatRandomProver(np.random.default_rng(10))
        stats = run_protocol(DESK, pr, 40, np.random.default_rng(11))
        assert stats.accept_rate < 0.5


class TestDeterminismAndTranscripts:
    def run_seeded(self, seed_p, seed_v, n=25):
        pr = HonestProver(np.random.default_rng(seed_p), mode="exact-enumeration")
        return run_protocol(TINY, pr, n, np.random.default_rng(seed_v))

    def test_seeded_transcripts_identical(self):
        a = self.run_seeded(12, 13)
        b = self.run_seeded(12, 13)
        assert len(a.transcripts) == len(b.transcripts)
        for ta, tb in zip(a.transcripts, b.transcripts):
            assert ta.frames == tb.frames
            assert (ta.verdict, ta.reason) == (tb.verdict, tb.reason)

    def test_transcript_text_round_trip(self):
        stats = self.run_seeded(14, 15, n=5)
        for t in stats.transcripts:
            back = Transcript.from_text(t.to_text())
            assert back.frames == t.frames
            assert (back.verdict, back.reason) == (t.verdict, t.reason)

    def test_inproc_and_tcp_frames_match(self):
        a = self.run_seeded(16, 17, n=20)
        pr = HonestProver(np.random.default_rng(16), mode="exact-enumeration")
        b = run_protocol_tcp(TINY, pr, 20, np.random.default_rng(17))
        fa = [f for t in a.transcripts for f in t.frames]
        fb = [f for t in b.transcripts for f in t.frames]
        assert fa == fb

    def test_tcp_with_secret_hint(self):
        pr = HonestProver(np.random.default_rng(18), mode="idealized-claw")
        stats = run_protocol_tcp(DESK, pr, 15, np.random.default_rng(19))
        assert stats.all_accepted


class TestPrivacy:
    def test_secret_material_never_framed(self, rng):
        # the serialized s and e lines from the secret file must not
        # appear in any wire frame; the key frame is the public file
        pr = HonestProver(np.random.default_rng(20), mode="idealized-claw")
        for _ in range(10):
            vr = VerifierRound(DESK, rng)
            sk_text = trapdoor_to_text(vr.key, vr._trapdoor)
            secret_lines = [
                ln for ln in sk_text.splitlines()
                if ln.split("=")[0] in ("s", "e", "R")
            ]
            assert secret_lines
            pr.set_secret_hint(vr.secret_s())
            frames = [frame_encode(vr.key_message())]
            y = pr.receive_key(vr.key)
            frames.append(frame_encode(MsgImage(y)))
            assert vr.receive_image(y) is None
            ch = vr.challenge(rng)
            frames.append(frame_encode(ch))
            key_payload = frames[0][5:].decode()
            assert key_payload == key_to_text(vr.key)
            for f in frames:
                text = f[5:].decode()
                assert "ntcf-sk" not in text
                for ln in secret_lines:
                    assert f"\n{ln}\n" not in f"\n{text}\n"


class TestSessionLimits:
    def test_zero_rounds_rejected(self):
        pr = HonestProver(np.random.default_rng(21))
        with pytest.raises(ValueError):
            run_protocol(TINY, pr, 0, np.random.default_rng(22))
        with pytest.raises(ValueError):
            run_protocol_tcp(TINY, pr, 0, np.random.default_rng(22))

    def test_retry_cap_aborts(self):
        class AlwaysRedFails(HonestProver):
            def respond_test(self):
                raise RedFailed("induced failure")

        pr = AlwaysRedFails(np.random.default_rng(23), mode="exact-enumeration")
        with pytest.raises(SessionAbort):
            run_protocol(TINY, pr, 50, np.random.default_rng(24), retry_cap=0)
