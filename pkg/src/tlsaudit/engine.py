"""Single-exchange TLS probing engine.

Each operation opens exactly one TCP connection, drives the handshake far
enough to collect the evidence it needs (ServerHello, ServerKeyExchange,
ticket), and tears down. Handshakes are aborted early where full key
derivation is unnecessary; resumption and GET probes run the message flow
to completion. Record protection is not implemented: the engine reads
configuration evidence off the plaintext flight, which is sufficient for
the bundled endpoints and keeps remote load minimal.
"""
from __future__ import annotations

import hashlib
import logging
import os
import socket
import struct
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from cryptography import x509
from cryptography.hazmat.primitives.asymmetric import ec as _ec
from cryptography.hazmat.primitives.asymmetric import rsa as _rsa

from . import wire
from .registry import CipherDb, Kex, Version
from .wire import (
    AlertDescription, ClientHello, Compression, ContentType, EXTENSION_CODES,
    EXTENSION_NAMES, ExtType, HsType, NewSessionTicket, ServerHello,
    ServerKeyExchange, WireError,
)

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 5.0
HEARTBLEED_OVERREAD_CAP = 16 * 1024


class ProbeStatus(Enum):
    NEGOTIATED = "NEGOTIATED"
    TLS_ALERT = "TLS_ALERT"
    TCP_FAILURE = "TCP_FAILURE"
    TIMEOUT = "TIMEOUT"
    PROTOCOL_ERROR = "PROTOCOL_ERROR"


class OfferError(ValueError):
    """Invalid HandshakeOffer."""


@dataclass
class HandshakeOffer:
    max_version: Version
    min_version: Version
    suites: list[int]
    extensions: set[str] = field(default_factory=set)
    compression_methods: list[int] = field(default_factory=lambda: [Compression.NULL])
    sni_name: str = ""
    resumption_session_id: bytes = b""
    resumption_ticket: Optional[bytes] = None
    supported_versions: Optional[list[Version]] = None
    # drive through Finished instead of aborting after the server flight
    complete: bool = False
    http_get: bool = False

    def validate(self) -> None:
        if not self.suites:
            raise OfferError("offer must list at least one cipher suite")
        if self.max_version < self.min_version:
            raise OfferError("max_version below min_version")
        comp = list(self.compression_methods)
        if Compression.NULL not in comp:
            raise OfferError("compression list must include null")
        unknown = self.extensions - set(EXTENSION_CODES)
        if unknown:
            raise OfferError(f"unknown extensions {sorted(unknown)}")


@dataclass
class ServerKexInfo:
    group_kind: str
    dh_prime_bits: Optional[int] = None
    dh_prime_bytes: Optional[bytes] = None
    named_curve: Optional[int] = None


@dataclass
class SessionArtifacts:
    session_id: bytes = b""
    ticket: Optional[bytes] = None
    ticket_lifetime_hint_s: Optional[int] = None


@dataclass
class HttpResult:
    status_code: int
    server_header: Optional[str]
    body_hash: str


@dataclass
class HandshakeOutcome:
    status: ProbeStatus
    selected_version: Optional[Version] = None
    selected_suite: Optional[int] = None
    selected_compression: Optional[int] = None
    acknowledged_extensions: set[str] = field(default_factory=set)
    certificate_sig_alg: Optional[str] = None  # RSA / ECDSA / OTHER
    server_key_exchange: Optional[ServerKexInfo] = None
    session_artifacts: Optional[SessionArtifacts] = None
    resumed: bool = False
    alert_code: Optional[int] = None
    error: Optional[str] = None
    http: Optional[HttpResult] = None
    elapsed_s: float = 0.0
    retried: bool = False


@dataclass
class HeartbleedResult:
    heartbeat_acknowledged: bool
    vulnerable: bool
    evidence_len: int = 0
    error: Optional[str] = None

    def __post_init__(self):
        if self.vulnerable and not (self.heartbeat_acknowledged and self.evidence_len > 0):
            raise ValueError("vulnerable result requires heartbeat ack and leaked bytes")


def _split_target(target: str) -> tuple[str, int]:
    host, _, port = target.rpartition(":")
    if not host:
        return target, 443
    return host, int(port)


def _connect(target: str, timeout: float) -> socket.socket:
    host, port = _split_target(target)
    return socket.create_connection((host, port), timeout=timeout)


def _sig_alg_of(der: bytes) -> str:
    try:
        cert = x509.load_der_x509_certificate(der)
        key = cert.public_key()
    except Exception:
        return "OTHER"
    if isinstance(key, _rsa.RSAPublicKey):
        return "RSA"
    if isinstance(key, _ec.EllipticCurvePublicKey):
        return "ECDSA"
    return "OTHER"


class HandshakeEngine:
    """Stateless per call; safe to use from many workers concurrently."""

    def __init__(self, db: CipherDb, timeout: float = DEFAULT_TIMEOUT):
        self.db = db
        self.timeout = timeout

    # -- offer construction ------------------------------------------------

    def _client_hello(self, offer: HandshakeOffer) -> ClientHello:
        extensions: dict[int, bytes] = {}
        if offer.sni_name:
            name = offer.sni_name.encode("idna")
            entry = b"\x00" + wire.vec16(name)
            extensions[ExtType.SERVER_NAME] = wire.vec16(entry)
        for ext in sorted(offer.extensions):
            code = EXTENSION_CODES[ext]
            if code in extensions:
                continue
            if code == ExtType.HEARTBEAT:
                extensions[code] = b"\x01"  # peer_allowed_to_send
            elif code == ExtType.SESSION_TICKET:
                extensions[code] = offer.resumption_ticket or b""
            elif code == ExtType.ALPN:
                proto = wire.vec8(b"http/1.1")
                extensions[code] = wire.vec16(proto)
            elif code == ExtType.STATUS_REQUEST:
                extensions[code] = b"\x01\x00\x00\x00\x00"
            else:
                extensions[code] = b""
        if offer.supported_versions:
            body = b"".join(struct.pack(">H", v.value) for v in offer.supported_versions)
            extensions[ExtType.SUPPORTED_VERSIONS] = wire.vec8(body)
        return ClientHello(
            version=offer.max_version if offer.max_version != Version.TLS1_3 else Version.TLS1_2,
            random=os.urandom(32),
            session_id=offer.resumption_session_id,
            suites=list(offer.suites),
            compression=list(offer.compression_methods),
            extensions=extensions,
        )

    # -- core exchange -----------------------------------------------------

    def handshake(self, target: str, offer: HandshakeOffer,
                  timeout: Optional[float] = None) -> HandshakeOutcome:
        offer.validate()
        timeout = timeout if timeout is not None else self.timeout
        start = time.monotonic()
        try:
            sock = _connect(target, timeout)
        except socket.timeout:
            return HandshakeOutcome(ProbeStatus.TIMEOUT, error="connect timeout",
                                    elapsed_s=time.monotonic() - start)
        except OSError as exc:
            return HandshakeOutcome(ProbeStatus.TCP_FAILURE, error=str(exc),
                                    elapsed_s=time.monotonic() - start)
        try:
            outcome = self._run(sock, offer)
        except socket.timeout:
            outcome = HandshakeOutcome(ProbeStatus.TIMEOUT, error="read timeout")
        except WireError as exc:
            outcome = HandshakeOutcome(ProbeStatus.PROTOCOL_ERROR, error=str(exc))
        except OSError as exc:
            outcome = HandshakeOutcome(ProbeStatus.TCP_FAILURE, error=str(exc))
        finally:
            try:
                sock.close()
            except OSError:
                pass
        outcome.elapsed_s = time.monotonic() - start
        return outcome

    def _run(self, sock: socket.socket, offer: HandshakeOffer) -> HandshakeOutcome:
        hello = self._client_hello(offer)
        record_version = Version.SSLv3 if offer.max_version == Version.SSLv3 else Version.TLS1_0
        sock.sendall(wire.record(ContentType.HANDSHAKE, record_version, hello.encode()))

        server_hello: Optional[ServerHello] = None
        cert_alg: Optional[str] = None
        kex_info: Optional[ServerKexInfo] = None
        artifacts = SessionArtifacts()
        resumed = False
        hello_done = False
        server_finished = False

        while True:
            ctype, _ver, payload = wire.read_record(sock)
            if ctype == ContentType.ALERT:
                if len(payload) >= 2 and payload[1] == AlertDescription.CLOSE_NOTIFY:
                    break
                return HandshakeOutcome(
                    ProbeStatus.TLS_ALERT,
                    alert_code=payload[1] if len(payload) >= 2 else None,
                )
            if ctype == ContentType.CHANGE_CIPHER_SPEC:
                if server_hello is None:
                    raise WireError("change_cipher_spec before server hello")
                if not hello_done:
                    # abbreviated handshake: server skipped straight to its
                    # finished flight
                    resumed = True
                continue
            if ctype != ContentType.HANDSHAKE:
                raise WireError(f"unexpected record type {ctype} in handshake")
            for hs_type, body in wire.iter_handshake_messages(payload):
                if hs_type == HsType.SERVER_HELLO:
                    server_hello = ServerHello.parse(body)
                elif hs_type == HsType.CERTIFICATE:
                    chain = wire.parse_certificate(body)
                    if chain:
                        cert_alg = _sig_alg_of(chain[0])
                elif hs_type == HsType.SERVER_KEY_EXCHANGE:
                    if server_hello is None:
                        raise WireError("key exchange before server hello")
                    info = self.db.get(server_hello.suite)
                    is_ffdhe = info is not None and info.kex == Kex.DHE
                    ske = ServerKeyExchange.parse_for_suite(body, is_ffdhe)
                    if ske.group_kind == "FFDHE":
                        prime = ske.dh_prime.lstrip(b"\x00")
                        kex_info = ServerKexInfo(
                            "FFDHE",
                            dh_prime_bits=int.from_bytes(prime, "big").bit_length(),
                            dh_prime_bytes=prime,
                        )
                    else:
                        kex_info = ServerKexInfo("ECDHE", named_curve=ske.named_curve)
                elif hs_type == HsType.NEW_SESSION_TICKET:
                    nst = NewSessionTicket.parse(body)
                    artifacts.ticket = nst.ticket
                    artifacts.ticket_lifetime_hint_s = nst.lifetime_hint_s
                elif hs_type == HsType.SERVER_HELLO_DONE:
                    hello_done = True
                elif hs_type == HsType.FINISHED:
                    server_finished = True
            if hello_done or server_finished:
                break
            if (server_hello is not None
                    and server_hello.selected_version == Version.TLS1_3):
                # the rest of the 1.3 flight is encrypted; the selection is
                # all the evidence this probe needs
                break
        if server_hello is None:
            raise WireError("no server hello received")

        selected_version = server_hello.selected_version
        if server_hello.suite not in offer.suites:
            raise WireError(
                f"server selected unoffered suite 0x{server_hello.suite:04X}"
            )
        if not resumed and selected_version != Version.TLS1_3 and not (
                offer.min_version <= selected_version <= offer.max_version):
            raise WireError(f"server selected out-of-range version {selected_version.label}")

        acked = {
            EXTENSION_NAMES[code]
            for code in server_hello.extensions
            if code in EXTENSION_NAMES
        }
        if server_hello.session_id:
            artifacts.session_id = server_hello.session_id

        http_result = None
        needs_completion = offer.complete or offer.http_get or resumed
        if needs_completion and selected_version != Version.TLS1_3:
            http_result, artifacts, server_finished = self._finish(
                sock, selected_version, resumed, server_finished, artifacts, offer
            )
        else:
            # evidence collected; abort without Finished
            try:
                sock.sendall(wire.alert(AlertDescription.CLOSE_NOTIFY,
                                        selected_version
                                        if selected_version != Version.TLS1_3
                                        else Version.TLS1_2,
                                        fatal=False))
            except OSError:
                pass

        resumed_final = resumed and (
            (offer.resumption_session_id
             and server_hello.session_id == offer.resumption_session_id)
            or offer.resumption_ticket is not None
        )
        return HandshakeOutcome(
            status=ProbeStatus.NEGOTIATED,
            selected_version=selected_version,
            selected_suite=server_hello.suite,
            selected_compression=server_hello.compression,
            acknowledged_extensions=acked,
            certificate_sig_alg=cert_alg,
            server_key_exchange=kex_info,
            session_artifacts=artifacts,
            resumed=bool(resumed_final),
            http=http_result,
        )

    def _finish(self, sock, version: Version, resumed: bool,
                server_finished: bool, artifacts: SessionArtifacts,
                offer: HandshakeOffer):
        """Complete the message flow (no record protection is applied)."""
        flight = b""
        if not resumed:
            cke = wire.handshake_message(HsType.CLIENT_KEY_EXCHANGE,
                                         wire.vec16(os.urandom(48)))
            flight += wire.record(ContentType.HANDSHAKE, version, cke)
        flight += wire.record(ContentType.CHANGE_CIPHER_SPEC, version, b"\x01")
        fin = wire.handshake_message(HsType.FINISHED, os.urandom(12))
        flight += wire.record(ContentType.HANDSHAKE, version, fin)
        sock.sendall(flight)

        # read the server's finished flight (full handshake) incl. any ticket
        while not server_finished and not resumed:
            ctype, _ver, payload = wire.read_record(sock)
            if ctype == ContentType.CHANGE_CIPHER_SPEC:
                continue
            if ctype == ContentType.ALERT:
                raise WireError(f"alert during finish: {payload!r}")
            if ctype != ContentType.HANDSHAKE:
                raise WireError(f"unexpected record {ctype} during finish")
            for hs_type, body in wire.iter_handshake_messages(payload):
                if hs_type == HsType.NEW_SESSION_TICKET:
                    nst = NewSessionTicket.parse(body)
                    artifacts.ticket = nst.ticket
                    artifacts.ticket_lifetime_hint_s = nst.lifetime_hint_s
                elif hs_type == HsType.FINISHED:
                    server_finished = True

        http_result = None
        if offer.http_get:
            host = offer.sni_name or _split_target_host(sock)
            request = (f"GET / HTTP/1.1\r\nHost: {host}\r\n"
                       "Connection: close\r\n\r\n").encode()
            sock.sendall(wire.record(ContentType.APPLICATION_DATA, version, request))
            http_result = self._read_http(sock)
        return http_result, artifacts, server_finished

    def _read_http(self, sock) -> HttpResult:
        raw = b""
        while True:
            try:
                ctype, _ver, payload = wire.read_record(sock)
            except WireError:
                break
            if ctype == ContentType.APPLICATION_DATA:
                raw += payload
            elif ctype == ContentType.ALERT:
                break
        if not raw.startswith(b"HTTP/"):
            raise WireError("no HTTP response over TLS")
        head, _, body = raw.partition(b"\r\n\r\n")
        lines = head.decode("latin-1").split("\r\n")
        try:
            status_code = int(lines[0].split()[1])
        except (IndexError, ValueError):
            raise WireError(f"bad HTTP status line {lines[0]!r}") from None
        server_header = None
        for line in lines[1:]:
            name, _, value = line.partition(":")
            if name.strip().lower() == "server":
                server_header = value.strip()
                break
        return HttpResult(
            status_code=status_code,
            server_header=server_header,
            body_hash=hashlib.sha256(body).hexdigest(),
        )

    # -- retry wrapper (the caller-visible API) ----------------------------

    def probe(self, target: str, offer: HandshakeOffer,
              timeout: Optional[float] = None) -> HandshakeOutcome:
        """handshake() with exactly one retry on non-TLS transport errors.

        A TLS alert is signal, not noise, and is never retried.
        """
        outcome = self.handshake(target, offer, timeout)
        if outcome.status in (ProbeStatus.TCP_FAILURE, ProbeStatus.TIMEOUT):
            retry = self.handshake(target, offer, timeout)
            retry.retried = True
            return retry
        return outcome

    # -- special probes ----------------------------------------------------

    def sslv2_probe(self, target: str,
                    timeout: Optional[float] = None) -> tuple[bool, Optional[str]]:
        """(supported, error annotation). Errors are absence of proof only."""
        timeout = timeout if timeout is not None else self.timeout
        try:
            sock = _connect(target, timeout)
        except socket.timeout:
            return False, "TIMEOUT"
        except OSError as exc:
            return False, f"TCP_FAILURE: {exc}"
        try:
            sock.sendall(wire.encode_sslv2_client_hello())
            data = sock.recv(4096)
            return wire.parse_sslv2_server_hello(data), None
        except socket.timeout:
            return False, "TIMEOUT"
        except OSError as exc:
            return False, f"TCP_FAILURE: {exc}"
        finally:
            sock.close()

    def tls13_probe(self, target: str, suites: list[int],
                    timeout: Optional[float] = None) -> bool:
        offer = HandshakeOffer(
            max_version=Version.TLS1_2,
            min_version=Version.TLS1_2,
            suites=[0x1301, 0x1302, 0x1303] + list(suites),
            supported_versions=[Version.TLS1_3, Version.TLS1_2],
        )
        outcome = self.handshake(target, offer, timeout)
        return (outcome.status == ProbeStatus.NEGOTIATED
                and outcome.selected_version == Version.TLS1_3)

    def heartbleed_probe(self, target: str, suites: list[int],
                         timeout: Optional[float] = None) -> HeartbleedResult:
        """Active over-read check, capped at 16 KB; leaked bytes are measured
        and discarded, never persisted."""
        timeout = timeout if timeout is not None else self.timeout
        offer = HandshakeOffer(
            max_version=Version.TLS1_2, min_version=Version.SSLv3,
            suites=list(suites), extensions={"heartbeat"},
        )
        try:
            sock = _connect(target, timeout)
        except OSError as exc:
            return HeartbleedResult(False, False, error=str(exc))
        try:
            hello = self._client_hello(offer)
            sock.sendall(wire.record(ContentType.HANDSHAKE, Version.TLS1_0,
                                     hello.encode()))
            acked = False
            version = Version.TLS1_2
            while True:
                ctype, _ver, payload = wire.read_record(sock)
                if ctype == ContentType.ALERT:
                    return HeartbleedResult(False, False, error="alert")
                if ctype != ContentType.HANDSHAKE:
                    continue
                done = False
                for hs_type, body in wire.iter_handshake_messages(payload):
                    if hs_type == HsType.SERVER_HELLO:
                        sh = ServerHello.parse(body)
                        version = sh.selected_version
                        acked = ExtType.HEARTBEAT in sh.extensions
                    elif hs_type == HsType.SERVER_HELLO_DONE:
                        done = True
                if done:
                    break
            if not acked:
                return HeartbleedResult(False, False)
            payload_sent = os.urandom(16)
            claimed = len(payload_sent) + HEARTBLEED_OVERREAD_CAP
            hb = wire.encode_heartbeat(wire.HEARTBEAT_REQUEST, claimed, payload_sent)
            sock.sendall(wire.record(ContentType.HEARTBEAT, version, hb))
            while True:
                ctype, _ver, data = wire.read_record(sock)
                if ctype == ContentType.HEARTBEAT:
                    break
                if ctype == ContentType.ALERT:
                    return HeartbleedResult(True, False, error="alert")
            _mtype, _claimed, rest = wire.parse_heartbeat(data)
            returned = len(rest)
            leaked = max(0, returned - len(payload_sent) - 16)  # minus padding
            del data, rest
            return HeartbleedResult(True, leaked > 0, evidence_len=leaked)
        except (socket.timeout, WireError, OSError) as exc:
            return HeartbleedResult(True, False, error=f"no echo: {exc}")
        finally:
            sock.close()

    def resume(self, target: str, artifacts: SessionArtifacts, method: str,
               suites: list[int], timeout: Optional[float] = None) -> HandshakeOutcome:
        if method not in ("SESSION_ID", "TICKET"):
            raise ValueError(f"unknown resumption method {method}")
        offer = HandshakeOffer(
            max_version=Version.TLS1_2, min_version=Version.SSLv3,
            suites=list(suites), complete=True,
        )
        if method == "SESSION_ID":
            offer.resumption_session_id = artifacts.session_id or os.urandom(32)
        else:
            offer.extensions.add("session_ticket")
            offer.resumption_ticket = artifacts.ticket or os.urandom(48)
        return self.probe(target, offer, timeout)

    def http_get_over_tls(self, target: str, sni_name: str, suites: list[int],
                          timeout: Optional[float] = None) -> HandshakeOutcome:
        offer = HandshakeOffer(
            max_version=Version.TLS1_2, min_version=Version.SSLv3,
            suites=list(suites), sni_name=sni_name,
            extensions={"renegotiation_info"}, http_get=True, complete=True,
        )
        return self.probe(target, offer, timeout)


def _split_target_host(sock) -> str:
    try:
        return sock.getpeername()[0]
    except OSError:
        return "localhost"
