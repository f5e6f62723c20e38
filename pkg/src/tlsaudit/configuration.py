"""Recovered server configuration: the value the prober emits and the
grader and report modules consume."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .registry import AEAD_MODES, CipherDb, CipherFamily, CipherMode, Kex, Mac, Version

COMPONENT_FLAG_NAMES = (
    "DES", "TRIPLE_DES", "RC4", "IDEA", "SEED", "CAMELLIA", "ARIA", "CHACHA",
    "AES", "AES_GCM", "AEAD", "CBC", "MD5", "SHA1", "SHA256", "SHA384",
    "NULL", "EXPORT",
)
KEX_FLAG_NAMES = ("RSA", "DHE", "ECDHE")


def compute_component_flags(db: CipherDb, suites) -> dict[str, bool]:
    flags = {name: False for name in COMPONENT_FLAG_NAMES}
    for suite_id in suites:
        info = db.get(suite_id)
        if info is None:
            continue
        fam = info.cipher_family
        if fam.value in flags:
            flags[fam.value] = True
        if fam == CipherFamily.AES and info.cipher_mode == CipherMode.GCM:
            flags["AES_GCM"] = True
        if info.is_aead or info.cipher_mode in AEAD_MODES:
            flags["AEAD"] = True
        if info.cipher_mode == CipherMode.CBC:
            flags["CBC"] = True
        if info.mac.value in flags:
            flags[info.mac.value] = True
        if info.is_export:
            flags["EXPORT"] = True
    return flags


def compute_kex_flags(db: CipherDb, suites) -> dict[str, bool]:
    flags = {name: False for name in KEX_FLAG_NAMES}
    for suite_id in suites:
        info = db.get(suite_id)
        if info is None:
            continue
        if info.kex in (Kex.RSA, Kex.DHE, Kex.ECDHE):
            flags[info.kex.value] = True
    return flags


class ConfigError(ValueError):
    """Configuration violates its own invariants."""


@dataclass
class Configuration:
    versions: frozenset[Version]
    supported_suites: frozenset[int]
    component_flags: dict[str, bool]
    kex_flags: dict[str, bool]
    preferred_suite: int
    server_preference: bool
    extensions: frozenset[str] = frozenset()
    tls_compression: bool = False
    session_id_resumption: bool = False
    session_tickets: bool = False
    ticket_lifetime_hint_s: Optional[int] = None
    dh_prime_bits: Optional[int] = None
    dh_group_common: Optional[bool] = None
    heartbleed_vulnerable: bool = False
    cert_sig_alg: Optional[str] = None

    def __post_init__(self):
        self.versions = frozenset(self.versions)
        self.supported_suites = frozenset(self.supported_suites)
        self.extensions = frozenset(self.extensions)
        if self.preferred_suite not in self.supported_suites:
            raise ConfigError(
                f"preferred suite 0x{self.preferred_suite:04X} not in supported set"
            )
        if self.ticket_lifetime_hint_s is not None and not self.session_tickets:
            raise ConfigError("ticket lifetime hint without session tickets")
        if self.dh_group_common is not None and self.dh_prime_bits is None:
            raise ConfigError("dh_group_common set without dh_prime_bits")
        missing = set(COMPONENT_FLAG_NAMES) - set(self.component_flags)
        if missing:
            raise ConfigError(f"missing component flags: {sorted(missing)}")
        missing = set(KEX_FLAG_NAMES) - set(self.kex_flags)
        if missing:
            raise ConfigError(f"missing kex flags: {sorted(missing)}")

    @classmethod
    def assemble(cls, db: CipherDb, suites, preferred_suite: int, **kw) -> "Configuration":
        """Build with component/kex flags projected from the registry."""
        return cls(
            supported_suites=frozenset(suites),
            component_flags=compute_component_flags(db, suites),
            kex_flags=compute_kex_flags(db, suites),
            preferred_suite=preferred_suite,
            **kw,
        )

    def flags_consistent_with(self, db: CipherDb) -> bool:
        return (self.component_flags == compute_component_flags(db, self.supported_suites)
                and self.kex_flags == compute_kex_flags(db, self.supported_suites))

    def to_json(self) -> dict:
        return {
            "versions": sorted(v.label for v in self.versions),
            "supported_suites": sorted(f"0x{s:04X}" for s in self.supported_suites),
            "component_flags": {k: self.component_flags[k] for k in COMPONENT_FLAG_NAMES},
            "kex_flags": {k: self.kex_flags[k] for k in KEX_FLAG_NAMES},
            "preferred_suite": f"0x{self.preferred_suite:04X}",
            "server_preference": self.server_preference,
            "extensions": sorted(self.extensions),
            "tls_compression": self.tls_compression,
            "session_id_resumption": self.session_id_resumption,
            "session_tickets": self.session_tickets,
            "ticket_lifetime_hint_s": self.ticket_lifetime_hint_s,
            "dh_prime_bits": self.dh_prime_bits,
            "dh_group_common": self.dh_group_common,
            "heartbleed_vulnerable": self.heartbleed_vulnerable,
            "cert_sig_alg": self.cert_sig_alg,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Configuration":
        return cls(
            versions=frozenset(Version.from_label(v) for v in obj["versions"]),
            supported_suites=frozenset(int(s, 16) for s in obj["supported_suites"]),
            component_flags=dict(obj["component_flags"]),
            kex_flags=dict(obj["kex_flags"]),
            preferred_suite=int(obj["preferred_suite"], 16),
            server_preference=obj["server_preference"],
            extensions=frozenset(obj.get("extensions", [])),
            tls_compression=obj["tls_compression"],
            session_id_resumption=obj["session_id_resumption"],
            session_tickets=obj["session_tickets"],
            ticket_lifetime_hint_s=obj.get("ticket_lifetime_hint_s"),
            dh_prime_bits=obj.get("dh_prime_bits"),
            dh_group_common=obj.get("dh_group_common"),
            heartbleed_vulnerable=obj.get("heartbleed_vulnerable", False),
            cert_sig_alg=obj.get("cert_sig_alg"),
        )
