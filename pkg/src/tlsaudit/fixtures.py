"""Configurable local TLS endpoints used as ground truth in tests.

A FixtureSpec fully prescribes an endpoint's observable behavior;
``projection`` computes the Configuration a correct scanner must recover
from it. Legacy behaviors no modern stack will speak (SSLv2, TLS
compression, heartbeat over-read) are emulated at the record layer: only
the bytes the scanner inspects are produced.
"""
from __future__ import annotations

import csv
import datetime
import json
import logging
import os
import random
import socket
import socketserver
import threading
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Union

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, rsa
from cryptography.x509.oid import NameOID

from . import wire
from .configuration import Configuration
from .registry import (
    Auth, CipherDb, CipherFamily, CipherMode, Kex, Mac, Version,
    cert_compatible, sort_offer,
)
from .wire import (
    AlertDescription, ClientHello, Compression, ContentType, ExtType, HsType,
    NewSessionTicket, ServerHello, WireError,
)

logger = logging.getLogger(__name__)

HEARTBEAT_OFF = "off"
HEARTBEAT_PATCHED = "patched"
HEARTBEAT_VULNERABLE = "vulnerable-emulation"

_FIXTURE_BODY = b"<html><body>fixture endpoint</body></html>"


class FixtureError(ValueError):
    pass


from .dhprimes import (  # noqa: E402
    ALL_PRIME_NAMES, COMMON_PRIME_NAMES, named_prime, prime_is_common,
)


@dataclass
class FixtureSpec:
    versions: frozenset[Version]
    suites: tuple[int, ...]  # server preference order
    server_preference: bool = False
    session_id_cache: bool = False
    tickets: Optional[int] = None  # lifetime hint seconds
    compression: bool = False
    ffdhe_prime: Union[str, bytes, None] = None
    heartbeat: str = HEARTBEAT_OFF
    server_header: str = "fixture"
    cert_kind: str = "RSA"  # RSA | ECDSA
    sslv2_emulation: bool = False

    def __post_init__(self):
        self.versions = frozenset(self.versions)
        self.suites = tuple(self.suites)
        if not self.suites:
            raise FixtureError("spec needs at least one suite")
        if self.cert_kind not in ("RSA", "ECDSA"):
            raise FixtureError(f"unknown cert kind {self.cert_kind!r}")
        if self.heartbeat not in (HEARTBEAT_OFF, HEARTBEAT_PATCHED,
                                  HEARTBEAT_VULNERABLE):
            raise FixtureError(f"unknown heartbeat mode {self.heartbeat!r}")
        if self.sslv2_emulation and Version.SSLv2 not in self.versions:
            raise FixtureError("sslv2_emulation requires SSLv2 in versions")
        if Version.SSLv2 in self.versions and not self.sslv2_emulation:
            raise FixtureError("SSLv2 in versions requires sslv2_emulation")

    def resolved_prime(self) -> Optional[bytes]:
        if isinstance(self.ffdhe_prime, str):
            return named_prime(self.ffdhe_prime)
        return self.ffdhe_prime

    def to_json(self) -> dict:
        prime = self.ffdhe_prime
        if isinstance(prime, bytes):
            prime = prime.hex()
        return {
            "versions": sorted(v.label for v in self.versions),
            "suites": [f"0x{s:04X}" for s in self.suites],
            "server_preference": self.server_preference,
            "session_id_cache": self.session_id_cache,
            "tickets": self.tickets,
            "compression": self.compression,
            "ffdhe_prime": prime,
            "heartbeat": self.heartbeat,
            "server_header": self.server_header,
            "cert_kind": self.cert_kind,
            "sslv2_emulation": self.sslv2_emulation,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FixtureSpec":
        prime = obj.get("ffdhe_prime")
        if prime is not None and prime not in ALL_PRIME_NAMES:
            prime = bytes.fromhex(prime)
        return cls(
            versions=frozenset(Version.from_label(v) for v in obj["versions"]),
            suites=tuple(int(s, 16) for s in obj["suites"]),
            server_preference=obj.get("server_preference", False),
            session_id_cache=obj.get("session_id_cache", False),
            tickets=obj.get("tickets"),
            compression=obj.get("compression", False),
            ffdhe_prime=prime,
            heartbeat=obj.get("heartbeat", HEARTBEAT_OFF),
            server_header=obj.get("server_header", "fixture"),
            cert_kind=obj.get("cert_kind", "RSA"),
            sslv2_emulation=obj.get("sslv2_emulation", False),
        )


# -- self-signed certificates (one per key kind per process) ----------------

_CERT_CACHE: dict[str, bytes] = {}
_CERT_LOCK = threading.Lock()


def fixture_certificate(kind: str) -> bytes:
    with _CERT_LOCK:
        if kind not in _CERT_CACHE:
            if kind == "RSA":
                key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
            elif kind == "ECDSA":
                key = ec.generate_private_key(ec.SECP256R1())
            else:
                raise FixtureError(f"unknown cert kind {kind!r}")
            name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, "fixture.test")])
            now = datetime.datetime.now(datetime.timezone.utc)
            cert = (
                x509.CertificateBuilder()
                .subject_name(name).issuer_name(name)
                .public_key(key.public_key())
                .serial_number(x509.random_serial_number())
                .not_valid_before(now - datetime.timedelta(days=1))
                .not_valid_after(now + datetime.timedelta(days=365))
                .sign(key, hashes.SHA256())
            )
            _CERT_CACHE[kind] = cert.public_bytes(serialization.Encoding.DER)
        return _CERT_CACHE[kind]


# -- the endpoint ------------------------------------------------------------

def _spec_allows(db: CipherDb, spec: FixtureSpec, suite_id: int,
                 at_version: Version) -> bool:
    info = db.get(suite_id)
    if info is None:
        return False
    return info.min_version <= at_version


class FixtureEndpoint:
    """Live endpoint handle; also records a capture log for assertions."""

    def __init__(self, spec: FixtureSpec, db: CipherDb):
        self.spec = spec
        self.db = db
        self.capture: list[dict] = []
        self.connection_count = 0
        self._lock = threading.Lock()
        self._session_cache: set[bytes] = set()
        self._tickets: set[bytes] = set()
        self.cert_der = fixture_certificate(spec.cert_kind)

        for suite_id in spec.suites:
            info = db.get(suite_id)
            if info is None:
                raise FixtureError(f"spec suite 0x{suite_id:04X} not in registry")
            if info.min_version == Version.TLS1_3:
                continue  # 1.3 selection is emulated from the versions set
            expected = Auth.RSA if spec.cert_kind == "RSA" else Auth.ECDSA
            if info.auth != expected:
                raise FixtureError(
                    f"suite {info.name} incompatible with {spec.cert_kind} certificate")

        handler = self._make_handler()
        self._server = socketserver.ThreadingTCPServer(("127.0.0.1", 0), handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()

    @property
    def host(self) -> str:
        return self._server.server_address[0]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def target(self) -> str:
        return f"{self.host}:{self.port}"

    def stop(self) -> None:
        # idempotent: shutting an already-stopped server down is a no-op
        try:
            self._server.shutdown()
            self._server.server_close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()

    def _log(self, entry: dict) -> None:
        with self._lock:
            self.capture.append(entry)

    # -- connection handling ------------------------------------------------

    def _make_handler(endpoint):
        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                with endpoint._lock:
                    endpoint.connection_count += 1
                try:
                    endpoint._serve(self.request)
                except (WireError, OSError, socket.timeout) as exc:
                    endpoint._log({"event": "connection_error", "error": str(exc)})
        return Handler

    def _serve(self, sock: socket.socket) -> None:
        sock.settimeout(5.0)
        first = sock.recv(5, socket.MSG_PEEK)
        if not first:
            return
        if wire.looks_like_sslv2(first):
            self._serve_sslv2(sock)
            return
        ctype, _ver, payload = wire.read_record(sock)
        if ctype != ContentType.HANDSHAKE:
            sock.sendall(wire.alert(AlertDescription.UNEXPECTED_MESSAGE))
            return
        messages = list(wire.iter_handshake_messages(payload))
        if not messages or messages[0][0] != HsType.CLIENT_HELLO:
            sock.sendall(wire.alert(AlertDescription.UNEXPECTED_MESSAGE))
            return
        hello = ClientHello.parse(messages[0][1])
        self._log({
            "event": "client_hello",
            "version": hello.version.label,
            "suites": [f"0x{s:04X}" for s in hello.suites],
            "extensions": sorted(hello.extensions),
            "compression": list(hello.compression),
            "session_id": hello.session_id.hex(),
        })
        self._negotiate(sock, hello)

    def _serve_sslv2(self, sock: socket.socket) -> None:
        sock.recv(4096)
        if self.spec.sslv2_emulation:
            self._log({"event": "sslv2_hello", "answered": True})
            sock.sendall(wire.encode_sslv2_server_hello(self.cert_der))
        else:
            self._log({"event": "sslv2_hello", "answered": False})

    def _client_supported_versions(self, hello: ClientHello) -> list[Version]:
        raw = hello.extensions.get(ExtType.SUPPORTED_VERSIONS)
        if raw is None or not raw:
            return []
        body, out = raw[1:1 + raw[0]], []
        for i in range(0, len(body) - 1, 2):
            word = (body[i] << 8) | body[i + 1]
            try:
                out.append(Version(word))
            except ValueError:
                continue
        return out

    def _negotiate(self, sock: socket.socket, hello: ClientHello) -> None:
        spec, db = self.spec, self.db

        client_sv = self._client_supported_versions(hello)
        if Version.TLS1_3 in client_sv and Version.TLS1_3 in spec.versions:
            self._send_tls13_hello(sock, hello)
            return

        tls_versions = [v for v in spec.versions
                        if v not in (Version.SSLv2, Version.TLS1_3)
                        and v <= hello.version]
        if not tls_versions:
            sock.sendall(wire.alert(AlertDescription.PROTOCOL_VERSION))
            return
        version = max(tls_versions, key=lambda v: v.value)

        usable = [s for s in spec.suites
                  if s in hello.suites and _spec_allows(db, spec, s, version)]
        if not usable:
            sock.sendall(wire.alert(AlertDescription.HANDSHAKE_FAILURE))
            return
        if spec.server_preference:
            suite = usable[0]
        else:
            suite = next(s for s in hello.suites if s in usable)

        selected_compression = Compression.NULL
        if spec.compression:
            for method in (Compression.DEFLATE, Compression.LZS):
                if method in hello.compression:
                    selected_compression = method
                    break

        acked: dict[int, bytes] = {}
        if ExtType.SERVER_NAME in hello.extensions:
            acked[ExtType.SERVER_NAME] = b""
        if ExtType.RENEGOTIATION_INFO in hello.extensions:
            acked[ExtType.RENEGOTIATION_INFO] = b"\x00"
        client_ticket = hello.extensions.get(ExtType.SESSION_TICKET)
        if client_ticket is not None and spec.tickets is not None:
            acked[ExtType.SESSION_TICKET] = b""
        if ExtType.HEARTBEAT in hello.extensions and spec.heartbeat != HEARTBEAT_OFF:
            acked[ExtType.HEARTBEAT] = b"\x01"

        # abbreviated flows
        if (spec.session_id_cache and hello.session_id
                and hello.session_id in self._session_cache):
            self._send_abbreviated(sock, version, suite, selected_compression,
                                   hello.session_id, acked)
            return
        if (client_ticket and spec.tickets is not None
                and client_ticket in self._tickets):
            self._send_abbreviated(sock, version, suite, selected_compression,
                                   b"", acked)
            return

        session_id = os.urandom(32) if spec.session_id_cache else b""
        if session_id:
            self._session_cache.add(session_id)

        flight = ServerHello(version=version, random=os.urandom(32),
                             session_id=session_id, suite=suite,
                             compression=selected_compression,
                             extensions=acked).encode()
        flight += wire.encode_certificate([self.cert_der])
        info = db[suite]
        if info.kex == Kex.DHE:
            prime = spec.resolved_prime() or named_prime("modp2048")
            flight += wire.encode_dhe_ske(prime)
        elif info.kex == Kex.ECDHE:
            flight += wire.encode_ecdhe_ske()
        flight += wire.handshake_message(HsType.SERVER_HELLO_DONE, b"")
        sock.sendall(wire.record(ContentType.HANDSHAKE, version, flight))

        self._serve_post_hello(sock, version, hello, ticket_wanted=(
            ExtType.SESSION_TICKET in acked))

    def _send_tls13_hello(self, sock: socket.socket, hello: ClientHello) -> None:
        suite = next((s for s in (0x1301, 0x1302, 0x1303) if s in hello.suites),
                     0x1301)
        sh = ServerHello(
            version=Version.TLS1_2, random=os.urandom(32),
            session_id=hello.session_id, suite=suite,
            compression=Compression.NULL,
            extensions={ExtType.SUPPORTED_VERSIONS: b"\x03\x04"},
        )
        sock.sendall(wire.record(ContentType.HANDSHAKE, Version.TLS1_2,
                                 sh.encode()))

    def _send_abbreviated(self, sock, version, suite, compression,
                          session_id, acked) -> None:
        self._log({"event": "abbreviated", "suite": f"0x{suite:04X}"})
        flight = ServerHello(version=version, random=os.urandom(32),
                             session_id=session_id, suite=suite,
                             compression=compression, extensions=acked).encode()
        sock.sendall(wire.record(ContentType.HANDSHAKE, version, flight))
        sock.sendall(wire.record(ContentType.CHANGE_CIPHER_SPEC, version, b"\x01"))
        sock.sendall(wire.record(
            ContentType.HANDSHAKE, version,
            wire.handshake_message(HsType.FINISHED, os.urandom(12))))
        self._drain_client(sock, version)

    def _serve_post_hello(self, sock, version: Version, hello: ClientHello,
                          ticket_wanted: bool) -> None:
        """Everything after the server's first flight: the client may abort,
        finish the handshake, poke heartbeat, or send a GET."""
        client_finished = False
        while True:
            try:
                ctype, _ver, payload = wire.read_record(sock)
            except (WireError, socket.timeout, OSError):
                return
            if ctype == ContentType.ALERT:
                return
            if ctype == ContentType.CHANGE_CIPHER_SPEC:
                continue
            if ctype == ContentType.HEARTBEAT:
                if not self._answer_heartbeat(sock, version, payload):
                    return
                continue
            if ctype == ContentType.HANDSHAKE:
                for hs_type, _body in wire.iter_handshake_messages(payload):
                    if hs_type == HsType.FINISHED:
                        client_finished = True
                if client_finished:
                    break
                continue
            return
        # server's finished flight, with a ticket first when negotiated
        if ticket_wanted and self.spec.tickets is not None:
            token = os.urandom(48)
            self._tickets.add(token)
            sock.sendall(wire.record(
                ContentType.HANDSHAKE, version,
                NewSessionTicket(self.spec.tickets, token).encode()))
        sock.sendall(wire.record(ContentType.CHANGE_CIPHER_SPEC, version, b"\x01"))
        sock.sendall(wire.record(
            ContentType.HANDSHAKE, version,
            wire.handshake_message(HsType.FINISHED, os.urandom(12))))
        self._drain_client(sock, version)

    def _drain_client(self, sock, version: Version) -> None:
        """Post-handshake: HTTP requests and heartbeats until close."""
        while True:
            try:
                ctype, _ver, payload = wire.read_record(sock)
            except (WireError, socket.timeout, OSError):
                return
            if ctype == ContentType.ALERT:
                return
            if ctype == ContentType.HEARTBEAT:
                if not self._answer_heartbeat(sock, version, payload):
                    return
                continue
            if ctype == ContentType.APPLICATION_DATA:
                if payload.startswith(b"GET") or payload.startswith(b"HEAD"):
                    self._log({"event": "http_request"})
                    self._send_http_response(sock, version)
                    return
                continue
            return

    def _send_http_response(self, sock, version: Version) -> None:
        head = (f"HTTP/1.1 200 OK\r\nServer: {self.spec.server_header}\r\n"
                f"Content-Length: {len(_FIXTURE_BODY)}\r\n"
                "Connection: close\r\n\r\n").encode()
        sock.sendall(wire.record(ContentType.APPLICATION_DATA, version,
                                 head + _FIXTURE_BODY))

    def _answer_heartbeat(self, sock, version: Version, payload: bytes) -> bool:
        if self.spec.heartbeat == HEARTBEAT_OFF:
            sock.sendall(wire.alert(AlertDescription.UNEXPECTED_MESSAGE))
            return False
        try:
            msg_type, claimed, rest = wire.parse_heartbeat(payload)
        except WireError:
            return False
        if msg_type != wire.HEARTBEAT_REQUEST:
            return True
        actual = rest[:max(0, len(rest) - 16)]  # strip sender padding
        if self.spec.heartbeat == HEARTBEAT_VULNERABLE:
            # the defining bug: trust the claimed length
            echo = actual + os.urandom(max(0, claimed - len(actual)))
        else:
            echo = actual[:claimed] if claimed < len(actual) else actual
        self._log({"event": "heartbeat", "claimed": claimed,
                   "echoed": len(echo)})
        sock.sendall(wire.record(
            ContentType.HEARTBEAT, version,
            wire.encode_heartbeat(wire.HEARTBEAT_RESPONSE, len(echo), echo)))
        return True


def spawn(spec: FixtureSpec, db: CipherDb) -> FixtureEndpoint:
    return FixtureEndpoint(spec, db)


# -- projection: the round-trip oracle ---------------------------------------

def enumerable_suites(spec: FixtureSpec, db: CipherDb) -> list[int]:
    """The suites a scanner enumerating at TLS 1.2-and-below can observe,
    in the engine's canonical offer order."""
    tls_versions = [v for v in spec.versions
                    if v not in (Version.SSLv2, Version.TLS1_3)]
    if not tls_versions:
        return []
    at = max(tls_versions, key=lambda v: v.value)
    auth = Auth.RSA if spec.cert_kind == "RSA" else Auth.ECDSA
    offerable = set(cert_compatible(db, auth, at_version=Version.TLS1_2))
    return sort_offer(db, [s for s in spec.suites
                           if s in offerable and db[s].min_version <= at])


def projection(spec: FixtureSpec, db: CipherDb) -> Configuration:
    supported = enumerable_suites(spec, db)
    if not supported:
        raise FixtureError("spec exposes no enumerable suites; not probeable")
    if spec.server_preference:
        preferred = next(s for s in spec.suites if s in supported)
    else:
        preferred = supported[0]
    detected_preference = spec.server_preference and len(supported) >= 2

    has_dhe = any(db[s].kex == Kex.DHE for s in supported)
    dh_bits: Optional[int] = None
    dh_common: Optional[bool] = None
    if has_dhe:
        prime = spec.resolved_prime() or named_prime("modp2048")
        stripped = prime.lstrip(b"\x00")
        dh_bits = int.from_bytes(stripped, "big").bit_length()
        dh_common = prime_is_common(stripped)

    extensions = {"server_name", "renegotiation_info"}
    if spec.tickets is not None:
        extensions.add("session_ticket")
    if spec.heartbeat != HEARTBEAT_OFF:
        extensions.add("heartbeat")

    return Configuration.assemble(
        db, frozenset(supported), preferred,
        versions=spec.versions,
        server_preference=detected_preference,
        extensions=frozenset(extensions),
        tls_compression=spec.compression,
        session_id_resumption=spec.session_id_cache,
        session_tickets=spec.tickets is not None,
        ticket_lifetime_hint_s=spec.tickets,
        dh_prime_bits=dh_bits,
        dh_group_common=dh_common,
        heartbleed_vulnerable=spec.heartbeat == HEARTBEAT_VULNERABLE,
        cert_sig_alg=spec.cert_kind,
    )


# -- bundled corpus -----------------------------------------------------------

_KEX_RANK = {Kex.ECDHE: 0, Kex.DHE: 1, Kex.RSA: 2, Kex.OTHER: 3}

_FAMILY_COLUMNS = {
    "rc4": CipherFamily.RC4, "des": CipherFamily.DES,
    "3des": CipherFamily.TRIPLE_DES, "aria": CipherFamily.ARIA,
    "camellia": CipherFamily.CAMELLIA, "idea": CipherFamily.IDEA,
    "seed": CipherFamily.SEED, "chacha": CipherFamily.CHACHA,
}

_VERSION_COLUMNS = (
    (Version.TLS1_3, "tls13"), (Version.TLS1_2, "tls12"),
    (Version.TLS1_1, "tls11"), (Version.TLS1_0, "tls10"),
    (Version.SSLv3, "sslv3"), (Version.SSLv2, "sslv2"),
)


def representative_suites(db: CipherDb, row: dict) -> list[int]:
    """Pick a concrete suite set realizing a published flag row. Unlisted
    aspects default to the most secure choice available (AEAD + PFS first)."""
    truthy = lambda k: row.get(k, "0") == "1"
    allowed_kex = {k for k, col in ((Kex.ECDHE, "ke_ecdhe"), (Kex.DHE, "ke_dhe"),
                                    (Kex.RSA, "ke_rsa")) if truthy(col)}
    banned = {fam for col, fam in _FAMILY_COLUMNS.items() if not truthy(col)}
    candidates = sorted(
        (i for i in db.suites.values()
         if i.kex in allowed_kex and i.cipher_family not in banned
         and i.cipher_family != CipherFamily.NULL
         and i.auth == Auth.RSA and not i.unsupported_by_engine
         and i.min_version != Version.TLS1_3
         and not (i.is_export and not truthy("export"))
         and not (i.mac == Mac.MD5 and not truthy("md5"))
         and not (i.is_aead and not truthy("aead"))
         and not (i.cipher_family == CipherFamily.AES
                  and i.cipher_mode == CipherMode.GCM and not truthy("aes_gcm"))),
        key=lambda i: (not i.is_aead, _KEX_RANK[i.kex], i.id))
    suites: list[int] = []

    def need(pred, what):
        for info in candidates:
            if pred(info):
                if info.id not in suites:
                    suites.append(info.id)
                return
        raise FixtureError(f"no registry suite can realize {what} for row {row}")

    need(lambda i: (i.cipher_family == CipherFamily.AES
                    and i.cipher_mode == CipherMode.CBC), "aes-cbc")
    for col, fam in _FAMILY_COLUMNS.items():
        if truthy(col):
            need(lambda i, f=fam: i.cipher_family == f, col)
    if truthy("export"):
        need(lambda i: i.is_export, "export")
    if truthy("md5"):
        need(lambda i: i.mac == Mac.MD5, "md5")
    if truthy("aes_gcm"):
        need(lambda i: (i.cipher_family == CipherFamily.AES
                        and i.cipher_mode == CipherMode.GCM), "aes_gcm")
    if truthy("aead"):
        need(lambda i: i.is_aead, "aead")
    for kex in allowed_kex:
        need(lambda i, k=kex: i.kex == k, kex.value)
    return sorted(suites, key=lambda s: (not db[s].is_aead,
                                         _KEX_RANK[db[s].kex], s))


def row_configuration(db: CipherDb, row: dict) -> Configuration:
    """Configuration for a published table row; unlisted fields default to
    secure values."""
    truthy = lambda k: row.get(k, "0") == "1"
    suites = representative_suites(db, row)
    versions = frozenset(v for v, col in _VERSION_COLUMNS if truthy(col))
    dh_raw = row.get("dh_group", "-")
    bits = int(dh_raw) if dh_raw not in ("-", "") else None
    tickets = truthy("session_ticket")
    return Configuration.assemble(
        db, frozenset(suites), suites[0],
        versions=versions,
        server_preference=truthy("server_pref"),
        session_id_resumption=truthy("session_id"),
        session_tickets=tickets,
        ticket_lifetime_hint_s=300 if tickets else None,
        dh_prime_bits=bits if truthy("ke_dhe") else None,
        dh_group_common=(bits in (1024, 2048)) if (bits and truthy("ke_dhe")) else None,
        tls_compression=False,
        heartbleed_vulnerable=truthy("heartbleed"),
        cert_sig_alg="RSA",
    )


def _read_bundled_csv(name: str) -> list[dict]:
    text = resources.files("tlsaudit.data").joinpath(name).read_text()
    return list(csv.DictReader(text.splitlines()))


def ubuntu_default_rows() -> list[dict]:
    return _read_bundled_csv("ubuntu_defaults.csv")


def top_as_rows() -> list[dict]:
    return _read_bundled_csv("top_as_configs.csv")


def ubuntu_default_configurations(db: CipherDb) -> list[tuple[str, Configuration, str]]:
    """(label, Configuration, library profile name) per bundled default."""
    out = []
    for row in ubuntu_default_rows():
        label = f"{row['server']}-{row['ubuntu']}-{row['openssl']}"
        profile = f"openssl-{row['openssl'].rstrip('/')}"
        out.append((label, row_configuration(db, row), profile))
    return out


def row_fixture_spec(db: CipherDb, row: dict) -> FixtureSpec:
    """A servable FixtureSpec realizing a published table row (SSLv2 rows
    keep their flag via record-layer emulation)."""
    truthy = lambda k: row.get(k, "0") == "1"
    suites = representative_suites(db, row)
    versions = frozenset(v for v, col in _VERSION_COLUMNS if truthy(col))
    dh_raw = row.get("dh_group", "-")
    prime = None
    if dh_raw not in ("-", "") and truthy("ke_dhe"):
        prime = {768: "modp768", 1024: "modp1024",
                 1536: "modp1536", 2048: "modp2048"}[int(dh_raw)]
    return FixtureSpec(
        versions=versions,
        suites=tuple(suites),
        server_preference=truthy("server_pref"),
        session_id_cache=truthy("session_id"),
        tickets=300 if truthy("session_ticket") else None,
        ffdhe_prime=prime,
        heartbeat=(HEARTBEAT_VULNERABLE if truthy("heartbleed")
                   else HEARTBEAT_OFF),
        server_header=f"{row.get('server', 'fixture')}",
        cert_kind="RSA",
        sslv2_emulation=truthy("sslv2"),
    )


def random_spec(rng: random.Random, db: CipherDb) -> FixtureSpec:
    """Seeded random spec; always probeable (≥2 suites, TLS 1.2 present,
    every version covered by at least one usable suite)."""
    cert_kind = rng.choice(["RSA", "ECDSA"])
    auth = Auth.RSA if cert_kind == "RSA" else Auth.ECDSA
    pool = cert_compatible(db, auth, at_version=Version.TLS1_2)
    legacy = [s for s in pool if db[s].min_version <= Version.SSLv3]
    count = rng.randint(2, min(12, len(pool)))
    chosen = {rng.choice(legacy)}  # guarantee a suite usable at old versions
    while len(chosen) < count:
        chosen.add(rng.choice(pool))
    suites = list(chosen)
    rng.shuffle(suites)

    versions = {Version.TLS1_2}
    for v in (Version.TLS1_1, Version.TLS1_0):
        if rng.random() < 0.6:
            versions.add(v)
    if Version.TLS1_0 in versions and rng.random() < 0.25:
        versions.add(Version.SSLv3)
    if rng.random() < 0.2:
        versions.add(Version.TLS1_3)
    sslv2 = rng.random() < 0.1
    if sslv2:
        versions.add(Version.SSLv2)

    has_dhe = any(db[s].kex == Kex.DHE for s in suites)
    prime = rng.choice(list(COMMON_PRIME_NAMES) + ["local1024"]) if has_dhe else None
    tickets = rng.choice([None, 300, 86400, 1209600])
    return FixtureSpec(
        versions=frozenset(versions),
        suites=tuple(suites),
        server_preference=rng.random() < 0.5,
        session_id_cache=rng.random() < 0.5,
        tickets=tickets,
        compression=rng.random() < 0.2,
        ffdhe_prime=prime,
        heartbeat=rng.choice([HEARTBEAT_OFF, HEARTBEAT_OFF, HEARTBEAT_PATCHED,
                              HEARTBEAT_VULNERABLE]),
        server_header=f"fixture/{rng.randint(0, 999)}",
        cert_kind=cert_kind,
        sslv2_emulation=sslv2,
    )


def bundled_corpus(db: CipherDb, seed: int = 0, random_count: int = 20) -> list[FixtureSpec]:
    """10 Ubuntu-default rows + 10 top-AS rows spanning all grades + seeded
    random specs."""
    specs = [row_fixture_spec(db, row) for row in ubuntu_default_rows()]
    rows = top_as_rows()
    picked: list[dict] = []
    seen_grades: set[str] = set()
    for row in rows:  # one row per distinct grade first
        if row["grade"] not in seen_grades:
            picked.append(row)
            seen_grades.add(row["grade"])
    for row in rows:  # then fill to 10 in table order
        if len(picked) >= 10:
            break
        if row not in picked:
            picked.append(row)
    specs += [row_fixture_spec(db, row) for row in picked]
    rng = random.Random(seed)
    specs += [random_spec(rng, db) for _ in range(random_count)]
    return specs
