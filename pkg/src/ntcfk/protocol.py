"""The 2-round quantumness protocol: verifier state machine, wire
format, round driver, and accept/reject statistics.

Each round: the verifier generates a fresh key and sends it; the prover
replies with an image y; the verifier inverts y into the claw, flips a
challenge coin (G = generation/preimage check, T = test/equation check);
the prover answers; the verifier rules. RED failures and all-zero d
outcomes consume a retry with a fresh key instead of a rejection.

Wire format: a frame is a 4-byte big-endian payload length, a 1-byte
message tag, then the payload in canonical text. The in-process and TCP
transports both move real frames, so transcripts are byte-comparable
across transports.
"""
from __future__ import annotations

import queue
import socket
import struct
import threading
from dataclasses import dataclass, field

import numpy as np

from .ntcf import NtcfKey, NtcfParams, chk, gen, inv, key_from_text, key_to_text
from .prover import EquationResponse, RedFailed, red_valid_range
from .serialize import HEADER_TRANSCRIPT, FormatError, LineReader, LineWriter
from .trapdoor import DecodeFailure
from .zq import BitString, ZqVector, bit_dot_xor, j_encode


class ProtocolError(RuntimeError):
    """Out-of-order or malformed protocol interaction."""


class SessionAbort(RuntimeError):
    """Retry cap exceeded or transport failure."""


# messages ------------------------------------------------------------------

@dataclass(frozen=True)
class MsgKey:
    key: NtcfKey


@dataclass(frozen=True)
class MsgImage:
    y: ZqVector


@dataclass(frozen=True)
class MsgChallenge:
    kind: str  # "G" | "T"


@dataclass(frozen=True)
class MsgPreimageResp:
    b: int
    x: ZqVector


@dataclass(frozen=True)
class MsgEquationResp:
    b_prime: int
    c: int
    d: BitString


@dataclass(frozen=True)
class MsgRedFailure:
    reason: str


@dataclass(frozen=True)
class MsgRoundResult:
    accept: bool
    reason: str

    @property
    def is_retry(self) -> bool:
        return not self.accept and self.reason.startswith("retry:")


TAG_KEY = 0x01
TAG_IMAGE = 0x02
TAG_CHALLENGE = 0x03
TAG_PREIMAGE_RESP = 0x04
TAG_EQUATION_RESP = 0x05
TAG_RED_FAILURE = 0x06
TAG_ROUND_RESULT = 0x07


class FrameError(ValueError):
    """Bad tag, length mismatch, or malformed payload."""


def _payload(msg) -> tuple[int, str]:
    if isinstance(msg, MsgKey):
        return TAG_KEY, key_to_text(msg.key)
    w = LineWriter()
    if isinstance(msg, MsgImage):
        w.vector("y", msg.y)
        return TAG_IMAGE, w.text()
    if isinstance(msg, MsgChallenge):
        if msg.kind not in ("G", "T"):
            raise FrameError(f"bad challenge kind {msg.kind!r}")
        w.field("challenge", msg.kind)
        return TAG_CHALLENGE, w.text()
    if isinstance(msg, MsgPreimageResp):
        w.field("b", msg.b)
        w.vector("x", msg.x)
        return TAG_PREIMAGE_RESP, w.text()
    if isinstance(msg, MsgEquationResp):
        w.field("bprime", msg.b_prime)
        w.field("c", msg.c)
        w.bits("d", msg.d)
        return TAG_EQUATION_RESP, w.text()
    if isinstance(msg, MsgRedFailure):
        w.field("reason", msg.reason)
        return TAG_RED_FAILURE, w.text()
    if isinstance(msg, MsgRoundResult):
        w.field("verdict", "accept" if msg.accept else "reject")
        w.field("reason", msg.reason)
        return TAG_ROUND_RESULT, w.text()
    raise FrameError(f"unknown message type {type(msg).__name__}")


def frame_encode(msg) -> bytes:
    tag, text = _payload(msg)
    payload = text.encode()
    return struct.pack(">I", len(payload)) + bytes([tag]) + payload


def frame_decode(data: bytes, params: NtcfParams | None = None):
    """Decode one complete frame. Non-key payloads need the session
    params to size their vectors."""
    if len(data) < 5:
        raise FrameError("frame shorter than header")
    (plen,) = struct.unpack(">I", data[:4])
    tag = data[4]
    if len(data) != 5 + plen:
        raise FrameError(f"length mismatch: header says {plen}, got {len(data) - 5}")
    text = data[5:].decode()
    try:
        return _decode_payload(tag, text, params)
    except FormatError as exc:
        raise FrameError(f"malformed payload for tag {tag:#04x}: {exc}") from exc


def _decode_payload(tag: int, text: str, params: NtcfParams | None):
    if tag == TAG_KEY:
        return MsgKey(key_from_text(text))
    if params is None:
        raise FrameError("params required to decode non-key messages")
    r = LineReader(text)
    if tag == TAG_IMAGE:
        y = r.vector("y", params.modulus)
        r.done()
        if len(y) != params.m:
            raise FrameError(f"image length {len(y)} != m={params.m}")
        return MsgImage(y)
    if tag == TAG_CHALLENGE:
        kind = r.field("challenge")
        r.done()
        if kind not in ("G", "T"):
            raise FrameError(f"bad challenge kind {kind!r}")
        return MsgChallenge(kind)
    if tag == TAG_PREIMAGE_RESP:
        b = r.int_field("b")
        x = r.vector("x", params.modulus)
        r.done()
        if len(x) != params.n:
            raise FrameError(f"preimage length {len(x)} != n={params.n}")
        return MsgPreimageResp(b, x)
    if tag == TAG_EQUATION_RESP:
        bp = r.int_field("bprime")
        c = r.int_field("c")
        d = r.bits("d")
        r.done()
        if c not in (0, 1):
            raise FrameError(f"bad c={c}")
        if len(d) != params.d_len:
            raise FrameError(f"d length {len(d)} != {params.d_len}")
        return MsgEquationResp(bp, c, d)
    if tag == TAG_RED_FAILURE:
        reason = r.field("reason")
        r.done()
        return MsgRedFailure(reason)
    if tag == TAG_ROUND_RESULT:
        verdict = r.field("verdict")
        reason = r.field("reason")
        r.done()
        if verdict not in ("accept", "reject"):
            raise FrameError(f"bad verdict {verdict!r}")
        return MsgRoundResult(verdict == "accept", reason)
    raise FrameError(f"unknown tag {tag:#04x}")


# verifier state machine ----------------------------------------------------

class VerifierRound:
    """One round of the verifier. Methods must be called in protocol
    order; anything else raises ProtocolError."""

    def __init__(self, params: NtcfParams, rng: np.random.Generator):
        self.params = params
        self.key, self._trapdoor = gen(params, rng)
        self._state = "key-ready"
        self._y: ZqVector | None = None
        self._claw: list[ZqVector] | None = None
        self._challenge: str | None = None

    def _expect(self, state: str):
        if self._state != state:
            raise ProtocolError(
                f"out-of-order message: verifier in state {self._state!r}"
            )

    def key_message(self) -> MsgKey:
        self._expect("key-ready")
        self._state = "await-image"
        return MsgKey(self.key)

    def secret_s(self) -> ZqVector:
        """Simulation hook for the idealized honest prover; never leaves
        the driver process through a protocol message."""
        return self._trapdoor.s

    def receive_image(self, y: ZqVector):
        """Invert the image into the cached claw. Returns None on
        success or a rejecting MsgRoundResult on decode failure."""
        self._expect("await-image")
        if len(y) != self.params.m:
            raise ProtocolError(f"image length {len(y)} != m={self.params.m}")
        self._y = y
        try:
            x0 = inv(self.key, self._trapdoor, 0, y)
        except DecodeFailure as exc:
            self._state = "done"
            return MsgRoundResult(False, f"image decode failure: {exc}")
        s = self._trapdoor.s
        self._claw = [x0 - s.scale(b) for b in range(self.params.kappa)]
        self._state = "image-held"
        return None

    def challenge(self, rng: np.random.Generator) -> MsgChallenge:
        self._expect("image-held")
        self._challenge = "G" if rng.integers(0, 2) == 0 else "T"
        self._state = "challenged"
        return MsgChallenge(self._challenge)

    def check_generation(self, b: int, x: ZqVector) -> MsgRoundResult:
        self._expect("challenged")
        if self._challenge != "G":
            raise ProtocolError("preimage response to a test challenge")
        self._state = "done"
        if not 0 <= b < self.params.kappa:
            return MsgRoundResult(False, f"branch b={b} out of range")
        if chk(self.key, b, x, self._y):
            return MsgRoundResult(True, "preimage check passed")
        return MsgRoundResult(False, "preimage check failed")

    def check_equation(self, b_prime: int, c: int, d: BitString) -> MsgRoundResult:
        self._expect("challenged")
        if self._challenge != "T":
            raise ProtocolError("equation response to a generation challenge")
        self._state = "done"
        kappa = self.params.kappa
        if kappa == 2 and b_prime == 0:
            x_bar0, x_bar1 = self._claw[0], self._claw[1]
        elif b_prime in red_valid_range(kappa):
            shift = (kappa - 1) // 2
            x_bar0 = self._claw[shift - b_prime]
            x_bar1 = self._claw[shift + b_prime]
        else:
            return MsgRoundResult(False, f"b'={b_prime} out of range")
        if d.is_zero():
            return MsgRoundResult(False, "retry:all-zero d")
        if c == bit_dot_xor(d, j_encode(x_bar0), j_encode(x_bar1)):
            return MsgRoundResult(True, "equation check passed")
        return MsgRoundResult(False, "equation check failed")

    def red_failure(self, reason: str) -> MsgRoundResult:
        self._expect("challenged")
        if self._challenge != "T":
            raise ProtocolError("RED failure reported on a generation challenge")
        self._state = "done"
        return MsgRoundResult(False, f"retry:red-failure: {reason}")


# transcripts and stats -----------------------------------------------------

@dataclass
class Transcript:
    frames: list[bytes] = field(default_factory=list)
    verdict: str = ""  # "accept" | "reject" | "retry"
    reason: str = ""
    challenge_kind: str = ""  # "G" | "T" | "" (rejected before challenge)

    def to_text(self) -> str:
        w = LineWriter(HEADER_TRANSCRIPT)
        w.field("frames", len(self.frames))
        for f in self.frames:
            w.field("frame", f.hex())
        w.field("verdict", self.verdict)
        w.field("reason", self.reason)
        return w.text()

    @classmethod
    def from_text(cls, text: str) -> "Transcript":
        r = LineReader(text, HEADER_TRANSCRIPT)
        count = r.int_field("frames")
        frames = [bytes.fromhex(r.field("frame")) for _ in range(count)]
        verdict = r.field("verdict")
        reason = r.field("reason")
        r.done()
        return cls(frames, verdict, reason)


@dataclass
class SessionStats:
    rounds_requested: int = 0
    rounds_completed: int = 0
    accepts: int = 0
    rejects: int = 0
    retries: int = 0
    gen_rounds: int = 0
    gen_passes: int = 0
    test_rounds: int = 0
    test_passes: int = 0
    transcripts: list[Transcript] = field(default_factory=list)

    @property
    def accept_rate(self) -> float:
        return self.accepts / max(self.rounds_completed, 1)

    @property
    def all_accepted(self) -> bool:
        return self.rounds_completed > 0 and self.accepts == self.rounds_completed


# round driver --------------------------------------------------------------

def _record(transcript: Transcript, msg, params) -> bytes:
    """Encode, decode back (wire fidelity), and log a message."""
    frame = frame_encode(msg)
    frame_decode(frame, params)
    transcript.frames.append(frame)
    return frame


def _prover_answer(prover, challenge_kind: str):
    if challenge_kind == "G":
        b, x = prover.respond_generation()
        return MsgPreimageResp(b, x)
    try:
        b_prime, eq = prover.respond_test()
    except RedFailed as exc:
        return MsgRedFailure(exc.reason)
    return MsgEquationResp(b_prime, eq.c, eq.d)


def _drive_attempt_inproc(params, prover, rng) -> Transcript:
    """One key/image/challenge/response/verdict exchange, in process.

    Every message passes through the frame codec so in-process
    transcripts are byte-identical to transport transcripts.
    """
    t = Transcript()
    vr = VerifierRound(params, rng)
    if getattr(prover, "wants_secret_hint", False):
        prover.set_secret_hint(vr.secret_s())
    key_msg = frame_decode(_record(t, vr.key_message(), params))
    y = prover.receive_key(key_msg.key)
    img = frame_decode(_record(t, MsgImage(y), params), params)
    early = vr.receive_image(img.y)
    if early is not None:
        _record(t, early, params)
        t.verdict, t.reason = "reject", early.reason
        return t
    ch = frame_decode(_record(t, vr.challenge(rng), params), params)
    answer = frame_decode(_record(t, _prover_answer(prover, ch.kind), params), params)
    if isinstance(answer, MsgRedFailure):
        result = vr.red_failure(answer.reason)
    elif isinstance(answer, MsgPreimageResp):
        result = vr.check_generation(answer.b, answer.x)
    else:
        result = vr.check_equation(answer.b_prime, answer.c, answer.d)
    _record(t, result, params)
    t.verdict = "accept" if result.accept else ("retry" if result.is_retry else "reject")
    t.reason = result.reason
    t.challenge_kind = ch.kind
    return t


def run_protocol(
    params: NtcfParams,
    prover,
    n_rounds: int,
    rng: np.random.Generator,
    retry_cap: int | None = None,
    keep_transcripts: bool = True,
) -> SessionStats:
    """Drive n_rounds completed rounds against the given prover.

    Retries (RED failure, all-zero d) get a fresh key and do not count
    toward the round total; exceeding the retry cap aborts the session.
    """
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    if retry_cap is None:
        retry_cap = 10 + 2 * n_rounds
    stats = SessionStats(rounds_requested=n_rounds)
    while stats.rounds_completed < n_rounds:
        t = _drive_attempt_inproc(params, prover, rng)
        if keep_transcripts:
            stats.transcripts.append(t)
        if t.verdict == "retry":
            stats.retries += 1
            if stats.retries > retry_cap:
                raise SessionAbort(
                    f"retry cap {retry_cap} exceeded after "
                    f"{stats.rounds_completed} completed rounds (last: {t.reason})"
                )
            continue
        stats.rounds_completed += 1
        kind = getattr(t, "challenge_kind", None)
        if kind == "G":
            stats.gen_rounds += 1
        elif kind == "T":
            stats.test_rounds += 1
        if t.verdict == "accept":
            stats.accepts += 1
            if kind == "G":
                stats.gen_passes += 1
            elif kind == "T":
                stats.test_passes += 1
        else:
            stats.rejects += 1
    return stats


# TCP transport -------------------------------------------------------------

def _read_frame(stream) -> bytes | None:
    head = stream.read(4)
    if not head:
        return None
    if len(head) < 4:
        raise FrameError("truncated frame header")
    (plen,) = struct.unpack(">I", head)
    rest = stream.read(1 + plen)
    if len(rest) != 1 + plen:
        raise FrameError("truncated frame body")
    return head + rest


def _verifier_serve(conn, params, n_rounds, rng, retry_cap, stats, hint_q, errs):
    """Server side of the TCP session: drives rounds over the socket."""
    try:
        rfile = conn.makefile("rb")
        wfile = conn.makefile("wb")

        def send(msg, transcript):
            frame = frame_encode(msg)
            transcript.frames.append(frame)
            wfile.write(frame)
            wfile.flush()

        def recv(transcript):
            frame = _read_frame(rfile)
            if frame is None:
                raise SessionAbort("peer closed connection mid-round")
            transcript.frames.append(frame)
            return frame_decode(frame, params)

        while stats.rounds_completed < n_rounds:
            t = Transcript()
            vr = VerifierRound(params, rng)
            if hint_q is not None:
                hint_q.put(vr.secret_s())
            send(vr.key_message(), t)
            img = recv(t)
            if not isinstance(img, MsgImage):
                raise ProtocolError(f"expected Image, got {type(img).__name__}")
            early = vr.receive_image(img.y)
            if early is not None:
                send(early, t)
                t.verdict, t.reason = "reject", early.reason
                stats.transcripts.append(t)
                stats.rounds_completed += 1
                stats.rejects += 1
                continue
            ch = vr.challenge(rng)
            send(ch, t)
            answer = recv(t)
            if isinstance(answer, MsgRedFailure):
                result = vr.red_failure(answer.reason)
            elif isinstance(answer, MsgPreimageResp):
                result = vr.check_generation(answer.b, answer.x)
            elif isinstance(answer, MsgEquationResp):
                result = vr.check_equation(answer.b_prime, answer.c, answer.d)
            else:
                raise ProtocolError(f"unexpected {type(answer).__name__}")
            send(result, t)
            t.verdict = (
                "accept" if result.accept else ("retry" if result.is_retry else "reject")
            )
            t.reason = result.reason
            t.challenge_kind = ch.kind
            stats.transcripts.append(t)
            if t.verdict == "retry":
                stats.retries += 1
                if stats.retries > retry_cap:
                    raise SessionAbort(f"retry cap {retry_cap} exceeded")
                continue
            stats.rounds_completed += 1
            if ch.kind == "G":
                stats.gen_rounds += 1
            else:
                stats.test_rounds += 1
            if result.accept:
                stats.accepts += 1
                if ch.kind == "G":
                    stats.gen_passes += 1
                else:
                    stats.test_passes += 1
            else:
                stats.rejects += 1
        wfile.close()
    except Exception as exc:  # surfaced to the driver thread
        errs.append(exc)
    finally:
        conn.close()


def run_protocol_tcp(
    params: NtcfParams,
    prover,
    n_rounds: int,
    rng: np.random.Generator,
    retry_cap: int | None = None,
    host: str = "127.0.0.1",
    port: int = 0,
) -> SessionStats:
    """Same contract as run_protocol, but verifier and prover exchange
    frames over a localhost TCP connection (verifier = server thread)."""
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    if retry_cap is None:
        retry_cap = 10 + 2 * n_rounds
    stats = SessionStats(rounds_requested=n_rounds)
    hint_q = queue.Queue() if getattr(prover, "wants_secret_hint", False) else None
    errs: list[Exception] = []

    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.bind((host, port))
    server.listen(1)
    addr = server.getsockname()

    client = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    client.connect(addr)
    conn, _peer = server.accept()
    server.close()

    thread = threading.Thread(
        target=_verifier_serve,
        args=(conn, params, n_rounds, rng, retry_cap, stats, hint_q, errs),
    )
    thread.start()
    try:
        rfile = client.makefile("rb")
        wfile = client.makefile("wb")
        while True:
            frame = _read_frame(rfile)
            if frame is None:
                break
            msg = frame_decode(frame, params)
            if isinstance(msg, MsgKey):
                if hint_q is not None:
                    prover.set_secret_hint(hint_q.get(timeout=30))
                y = prover.receive_key(msg.key)
                wfile.write(frame_encode(MsgImage(y)))
                wfile.flush()
            elif isinstance(msg, MsgChallenge):
                wfile.write(frame_encode(_prover_answer(prover, msg.kind)))
                wfile.flush()
            elif isinstance(msg, MsgRoundResult):
                pass  # verdicts are the verifier's business
            else:
                raise ProtocolError(f"client got unexpected {type(msg).__name__}")
    finally:
        client.close()
        thread.join(timeout=60)
    if errs:
        raise errs[0]
    return stats
