"""Per-site measurement: baseline browser emulation, version walk, cipher
elimination, extension/compression/resumption probes, assembled into a
Configuration plus a complete ProbeTrace."""
from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field
from typing import Optional

from . import dhprimes
from .configuration import Configuration
from .engine import (
    HandshakeEngine, HandshakeOffer, HandshakeOutcome, HeartbleedResult,
    ProbeStatus, SessionArtifacts,
)
from .registry import Auth, CipherDb, Version, browser_union, cert_compatible, sort_offer
from .wire import Compression

logger = logging.getLogger(__name__)

_WALK_LADDER = [Version.SSLv3, Version.TLS1_0, Version.TLS1_1, Version.TLS1_2]

_EXTENSION_PROBE_SET = frozenset({
    "server_name", "heartbeat", "session_ticket", "alpn", "status_request",
    "renegotiation_info", "extended_master_secret",
    "signed_certificate_timestamp",
})


@dataclass
class ProbePolicy:
    timeout_s: float = 5.0
    delay_min_s: float = 0.0
    delay_max_s: float = 2.0
    retry: int = 1
    seed: Optional[int] = None

    @classmethod
    def from_json(cls, obj: dict) -> "ProbePolicy":
        return cls(
            timeout_s=obj.get("timeout_ms", 5000) / 1000.0,
            delay_min_s=obj.get("delay_min_ms", 0) / 1000.0,
            delay_max_s=obj.get("delay_max_ms", 2000) / 1000.0,
            retry=obj.get("retry", 1),
            seed=obj.get("seed"),
        )


@dataclass
class TraceEntry:
    kind: str
    offer: dict
    outcome: dict
    retried: bool = False


@dataclass
class ProbeTrace:
    entries: list[TraceEntry] = field(default_factory=list)
    wall_time_s: float = 0.0
    partial: bool = False
    eligible: bool = True
    exclusion_reason: Optional[str] = None
    server_header: Optional[str] = None
    # raw FFDHE primes observed in ServerKeyExchange, in probe order
    ffdhe_observations: list[bytes] = field(default_factory=list)

    @property
    def handshake_count(self) -> int:
        return len(self.entries)

    def count(self, kind: str) -> int:
        return sum(1 for e in self.entries if e.kind == kind)

    def to_json(self) -> dict:
        return {
            "handshake_count": self.handshake_count,
            "wall_time_s": self.wall_time_s,
            "partial": self.partial,
            "eligible": self.eligible,
            "exclusion_reason": self.exclusion_reason,
            "server_header": self.server_header,
            "entries": [
                {"kind": e.kind, "offer": e.offer, "outcome": e.outcome,
                 "retried": e.retried}
                for e in self.entries
            ],
        }


def _offer_summary(offer: HandshakeOffer) -> dict:
    return {
        "max_version": offer.max_version.label,
        "min_version": offer.min_version.label,
        "suites": [f"0x{s:04X}" for s in offer.suites],
        "extensions": sorted(offer.extensions),
        "compression": list(offer.compression_methods),
    }


def _outcome_summary(outcome: HandshakeOutcome) -> dict:
    out: dict = {"status": outcome.status.value}
    if outcome.selected_version is not None:
        out["version"] = outcome.selected_version.label
    if outcome.selected_suite is not None:
        out["suite"] = f"0x{outcome.selected_suite:04X}"
    if outcome.selected_compression is not None:
        out["compression"] = outcome.selected_compression
    if outcome.alert_code is not None:
        out["alert"] = outcome.alert_code
    if outcome.error:
        out["error"] = outcome.error
    if outcome.resumed:
        out["resumed"] = True
    return out


class SiteProber:
    """Drives the full measurement for single targets. One instance may be
    shared across worker threads; per-site state lives in locals."""

    def __init__(self, db: CipherDb, policy: Optional[ProbePolicy] = None):
        self.db = db
        self.policy = policy or ProbePolicy()
        self.engine = HandshakeEngine(db, timeout=self.policy.timeout_s)
        self._rng = random.Random(self.policy.seed)

    # -- plumbing ------------------------------------------------------------

    def _pace(self) -> None:
        if self.policy.delay_max_s > 0:
            time.sleep(self._rng.uniform(self.policy.delay_min_s,
                                         self.policy.delay_max_s))

    def _probe(self, trace: ProbeTrace, kind: str, target: str,
               offer: HandshakeOffer) -> HandshakeOutcome:
        self._pace()
        outcome = self.engine.probe(target, offer)
        if (outcome.server_key_exchange is not None
                and outcome.server_key_exchange.group_kind == "FFDHE"):
            trace.ffdhe_observations.append(
                outcome.server_key_exchange.dh_prime_bytes)
        trace.entries.append(TraceEntry(kind, _offer_summary(offer),
                                        _outcome_summary(outcome),
                                        retried=outcome.retried))
        return outcome

    # -- sub-probes ------------------------------------------------------------

    def baseline_probe(self, target: str, trace: ProbeTrace,
                       sni_name: str = "") -> dict:
        """Modern-browser emulation plus a GET; both must succeed for the
        site to be eligible."""
        offer = HandshakeOffer(
            max_version=Version.TLS1_2, min_version=Version.SSLv3,
            suites=browser_union(self.db), sni_name=sni_name,
            extensions={"renegotiation_info"},
        )
        outcome = self._probe(trace, "baseline", target, offer)
        if outcome.status != ProbeStatus.NEGOTIATED:
            return {"eligible": False, "reason": outcome.status.value}

        self._pace()
        get = self.engine.http_get_over_tls(target, sni_name,
                                            browser_union(self.db))
        trace.entries.append(TraceEntry("baseline_get", {"http_get": True},
                                        _outcome_summary(get),
                                        retried=get.retried))
        if get.status != ProbeStatus.NEGOTIATED or get.http is None:
            return {"eligible": False, "reason": "NO_HTTP"}
        return {
            "eligible": True,
            "cert_sig_alg": outcome.certificate_sig_alg,
            "baseline_version": outcome.selected_version,
            "server_header": get.http.server_header,
        }

    def version_walk(self, target: str, trace: ProbeTrace,
                     baseline_version: Version, offer_suites: list[int]) -> set[Version]:
        versions = {baseline_version}
        last = baseline_version
        while last > Version.SSLv3:
            older = [v for v in _WALK_LADDER if v < last]
            if not older:
                break
            offer = HandshakeOffer(max_version=older[-1], min_version=Version.SSLv3,
                                   suites=offer_suites)
            outcome = self._probe(trace, "version_walk", target, offer)
            if outcome.status != ProbeStatus.NEGOTIATED:
                break
            if outcome.selected_version >= last:
                trace.partial = True
                logger.warning("%s: version walk did not descend (%s)", target,
                               outcome.selected_version.label)
                break
            versions.add(outcome.selected_version)
            last = outcome.selected_version
        # the two out-of-ladder checks
        self._pace()
        v2, _err = self.engine.sslv2_probe(target)
        trace.entries.append(TraceEntry("sslv2_probe", {"sslv2": True},
                                        {"supported": v2}))
        if v2:
            versions.add(Version.SSLv2)
        self._pace()
        v13 = self.engine.tls13_probe(target, offer_suites)
        trace.entries.append(TraceEntry("tls13_probe", {"tls13": True},
                                        {"supported": v13}))
        if v13:
            versions.add(Version.TLS1_3)
        return versions

    def enumerate_ciphers(self, target: str, trace: ProbeTrace,
                          cert_sig_alg: str) -> tuple[list[int], bool]:
        """Elimination loop; returns (selection-ordered supported suites,
        completed cleanly). Always |supported|+1 handshakes when clean."""
        auth = Auth.ECDSA if cert_sig_alg == "ECDSA" else Auth.RSA
        remaining = cert_compatible(self.db, auth, at_version=Version.TLS1_2)
        supported: list[int] = []
        while remaining:
            offer = HandshakeOffer(max_version=Version.TLS1_2,
                                   min_version=Version.SSLv3,
                                   suites=list(remaining))
            outcome = self._probe(trace, "enumerate", target, offer)
            if outcome.status == ProbeStatus.NEGOTIATED:
                suite = outcome.selected_suite
                supported.append(suite)
                remaining = [s for s in remaining if s != suite]
                continue
            if outcome.status == ProbeStatus.TLS_ALERT:
                return supported, True
            # transport failure survived the retry: give up on the loop
            trace.partial = True
            return supported, False
        return supported, True

    def probe_preference(self, target: str, trace: ProbeTrace,
                         supported: list[int]) -> bool:
        """Two opposite-order offers; preference holds iff the server picks
        the same suite both times and it is not simply our first listing."""
        order = sort_offer(self.db, supported)
        first = self._probe(trace, "preference", target, HandshakeOffer(
            max_version=Version.TLS1_2, min_version=Version.SSLv3,
            suites=order))
        second = self._probe(trace, "preference", target, HandshakeOffer(
            max_version=Version.TLS1_2, min_version=Version.SSLv3,
            suites=list(reversed(order))))
        if (first.status != ProbeStatus.NEGOTIATED
                or second.status != ProbeStatus.NEGOTIATED):
            return False
        if first.selected_suite != second.selected_suite:
            return False
        client_first_both = (first.selected_suite == order[0]
                             and second.selected_suite == order[-1])
        return not client_first_both

    def probe_extensions(self, target: str, trace: ProbeTrace,
                         offer_suites: list[int]) -> tuple[set[str], Optional[HeartbleedResult]]:
        offer = HandshakeOffer(
            max_version=Version.TLS1_2, min_version=Version.SSLv3,
            suites=offer_suites, extensions=set(_EXTENSION_PROBE_SET),
            sni_name="probe.invalid",
        )
        outcome = self._probe(trace, "extensions", target, offer)
        acked = (set(outcome.acknowledged_extensions)
                 if outcome.status == ProbeStatus.NEGOTIATED else set())
        heartbleed = None
        if "heartbeat" in acked:
            self._pace()
            heartbleed = self.engine.heartbleed_probe(target, offer_suites)
            trace.entries.append(TraceEntry(
                "heartbleed", {"heartbeat_overread": True},
                {"acknowledged": heartbleed.heartbeat_acknowledged,
                 "vulnerable": heartbleed.vulnerable,
                 "evidence_len": heartbleed.evidence_len}))
        return acked, heartbleed

    def probe_compression(self, target: str, trace: ProbeTrace,
                          offer_suites: list[int]) -> bool:
        offer = HandshakeOffer(
            max_version=Version.TLS1_2, min_version=Version.SSLv3,
            suites=offer_suites,
            compression_methods=[Compression.DEFLATE, Compression.LZS,
                                 Compression.NULL],
        )
        outcome = self._probe(trace, "compression", target, offer)
        return (outcome.status == ProbeStatus.NEGOTIATED
                and bool(outcome.selected_compression))

    def probe_resumption(self, target: str, trace: ProbeTrace,
                         offer_suites: list[int]) -> dict:
        # mechanism 1: session id. Establish, then replay the id (or a
        # synthetic one, keeping the handshake budget constant).
        est = self._probe(trace, "resume_establish_id", target, HandshakeOffer(
            max_version=Version.TLS1_2, min_version=Version.SSLv3,
            suites=offer_suites, complete=True))
        artifacts = est.session_artifacts or SessionArtifacts()
        self._pace()
        res = self.engine.resume(target, artifacts, "SESSION_ID", offer_suites)
        trace.entries.append(TraceEntry("resume_id",
                                        {"session_id": bool(artifacts.session_id)},
                                        _outcome_summary(res), res.retried))
        session_id_resumption = res.resumed

        # mechanism 2: tickets
        est_t = self._probe(trace, "resume_establish_ticket", target, HandshakeOffer(
            max_version=Version.TLS1_2, min_version=Version.SSLv3,
            suites=offer_suites, extensions={"session_ticket"}, complete=True))
        t_artifacts = est_t.session_artifacts or SessionArtifacts()
        self._pace()
        res_t = self.engine.resume(target, t_artifacts, "TICKET", offer_suites)
        trace.entries.append(TraceEntry("resume_ticket",
                                        {"ticket": t_artifacts.ticket is not None},
                                        _outcome_summary(res_t), res_t.retried))
        return {
            "session_id_resumption": session_id_resumption,
            "session_tickets": t_artifacts.ticket is not None,
            "ticket_lifetime_hint_s": t_artifacts.ticket_lifetime_hint_s,
            "ticket_resumption": res_t.resumed,
        }

    # -- the composite ---------------------------------------------------------

    def probe_site(self, target: str,
                   sni_name: str = "") -> tuple[Optional[Configuration], ProbeTrace]:
        trace = ProbeTrace()
        started = time.monotonic()
        try:
            return self._probe_site(target, sni_name, trace)
        finally:
            trace.wall_time_s = time.monotonic() - started

    def _probe_site(self, target, sni_name, trace):
        baseline = self.baseline_probe(target, trace, sni_name)
        if not baseline["eligible"]:
            trace.eligible = False
            trace.exclusion_reason = baseline["reason"]
            return None, trace
        trace.server_header = baseline["server_header"]
        cert_sig_alg = baseline["cert_sig_alg"] or "RSA"
        auth = Auth.ECDSA if cert_sig_alg == "ECDSA" else Auth.RSA
        offer_suites = cert_compatible(self.db, auth, at_version=Version.TLS1_2)

        versions = self.version_walk(target, trace,
                                     baseline["baseline_version"], offer_suites)
        supported, clean = self.enumerate_ciphers(target, trace, cert_sig_alg)
        if not supported:
            trace.eligible = False
            trace.exclusion_reason = "NO_SUITES"
            return None, trace
        preferred = supported[0]  # server's pick under the full offer
        preference = self.probe_preference(target, trace, supported)
        acked, heartbleed = self.probe_extensions(target, trace, offer_suites)
        compression = self.probe_compression(target, trace, offer_suites)
        resumption = self.probe_resumption(target, trace, offer_suites)

        dh_bits: Optional[int] = None
        dh_common: Optional[bool] = None
        if trace.ffdhe_observations:
            prime = trace.ffdhe_observations[-1]
            dh_bits = dhprimes.prime_bits(prime)
            dh_common = dhprimes.prime_is_common(prime)

        config = Configuration.assemble(
            self.db, frozenset(supported), preferred,
            versions=frozenset(versions),
            server_preference=preference,
            extensions=frozenset(acked),
            tls_compression=compression,
            session_id_resumption=resumption["session_id_resumption"],
            session_tickets=resumption["session_tickets"],
            ticket_lifetime_hint_s=resumption["ticket_lifetime_hint_s"],
            dh_prime_bits=dh_bits,
            dh_group_common=dh_common,
            heartbleed_vulnerable=bool(heartbleed and heartbleed.vulnerable),
            cert_sig_alg=cert_sig_alg,
        )
        return config, trace
