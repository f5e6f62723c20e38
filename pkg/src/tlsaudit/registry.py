"""Cipher suite registry: classification database and offer-list construction.

The registry ships as a checked-in CSV with precomputed classification
columns (deriving components from suite names at runtime is fragile across
registry naming conventions). All lookups after load are read-only.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Optional, Union


class RegistryError(ValueError):
    """Malformed or inconsistent registry data."""


class Kex(Enum):
    RSA = "RSA"
    DHE = "DHE"
    ECDHE = "ECDHE"
    OTHER = "OTHER"


class Auth(Enum):
    RSA = "RSA"
    ECDSA = "ECDSA"
    DSS = "DSS"
    ANON = "ANON"
    OTHER = "OTHER"


class CipherFamily(Enum):
    AES = "AES"
    CAMELLIA = "CAMELLIA"
    ARIA = "ARIA"
    SEED = "SEED"
    IDEA = "IDEA"
    CHACHA = "CHACHA"
    RC4 = "RC4"
    DES = "DES"
    TRIPLE_DES = "TRIPLE_DES"
    NULL = "NULL"
    OTHER = "OTHER"


class CipherMode(Enum):
    GCM = "GCM"
    CCM = "CCM"
    CBC = "CBC"
    STREAM = "STREAM"
    POLY1305 = "POLY1305"
    NONE = "NONE"


class Mac(Enum):
    MD5 = "MD5"
    SHA1 = "SHA1"
    SHA256 = "SHA256"
    SHA384 = "SHA384"
    AEAD = "AEAD"
    NONE = "NONE"


class Version(Enum):
    """Protocol versions, ordered oldest to newest."""

    SSLv2 = 0x0002
    SSLv3 = 0x0300
    TLS1_0 = 0x0301
    TLS1_1 = 0x0302
    TLS1_2 = 0x0303
    TLS1_3 = 0x0304

    @property
    def label(self) -> str:
        return _VERSION_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Version":
        for v, lab in _VERSION_LABELS.items():
            if lab == label:
                return v
        raise RegistryError(f"unknown protocol version {label!r}")

    def __lt__(self, other):
        if not isinstance(other, Version):
            return NotImplemented
        return self.value < other.value

    def __le__(self, other):
        if not isinstance(other, Version):
            return NotImplemented
        return self.value <= other.value


_VERSION_LABELS = {
    Version.SSLv2: "SSLv2",
    Version.SSLv3: "SSLv3",
    Version.TLS1_0: "TLS1.0",
    Version.TLS1_1: "TLS1.1",
    Version.TLS1_2: "TLS1.2",
    Version.TLS1_3: "TLS1.3",
}

AEAD_MODES = frozenset({CipherMode.GCM, CipherMode.CCM, CipherMode.POLY1305})


@dataclass(frozen=True)
class CipherSuiteInfo:
    id: int
    name: str
    kex: Kex
    auth: Auth
    cipher_family: CipherFamily
    cipher_mode: CipherMode
    mac: Mac
    is_aead: bool
    is_export: bool
    min_version: Version
    max_version: Version
    unsupported_by_engine: bool = False

    def __post_init__(self):
        if self.is_aead != (self.cipher_mode in AEAD_MODES):
            raise RegistryError(
                f"{self.name}: is_aead must mirror the cipher mode"
            )
        if self.is_export and "EXPORT" not in self.name:
            raise RegistryError(f"{self.name}: export flag without EXPORT marker")


class CipherDb:
    """Immutable id -> suite map; safe for unrestricted concurrent reads."""

    def __init__(self, suites: Iterable[CipherSuiteInfo], source_version: str = ""):
        self.suites: dict[int, CipherSuiteInfo] = {}
        self.source_version = source_version
        for s in suites:
            if s.id in self.suites:
                raise RegistryError(f"duplicate suite id 0x{s.id:04X}")
            self.suites[s.id] = s

    def __len__(self) -> int:
        return len(self.suites)

    def __contains__(self, suite_id: int) -> bool:
        return suite_id in self.suites

    def __getitem__(self, suite_id: int) -> CipherSuiteInfo:
        try:
            return self.suites[suite_id]
        except KeyError:
            raise KeyError(f"suite 0x{suite_id:04X} not in registry") from None

    def get(self, suite_id: int) -> Optional[CipherSuiteInfo]:
        return self.suites.get(suite_id)


_COLUMNS = [
    "id", "name", "kex", "auth", "cipher_family", "cipher_mode", "mac",
    "is_aead", "is_export", "min_version", "max_version", "unsupported_by_engine",
]

_BOOLS = {"true": True, "false": False}


def _bundled(name: str):
    return resources.files("tlsaudit.data").joinpath(name)


def load_registry(source: Union[str, Path, None] = None) -> CipherDb:
    """Load a registry CSV; defaults to the bundled IANA-derived file."""
    if source is None:
        text = _bundled("cipher_suites.csv").read_text(encoding="utf-8")
        label = "bundled"
    else:
        text = Path(source).read_text(encoding="utf-8")
        label = str(source)
    reader = csv.DictReader(text.splitlines())
    if reader.fieldnames != _COLUMNS:
        raise RegistryError(f"{label}: bad header {reader.fieldnames}")
    suites = []
    for lineno, row in enumerate(reader, start=2):
        try:
            suites.append(CipherSuiteInfo(
                id=int(row["id"], 16),
                name=row["name"],
                kex=Kex(row["kex"]),
                auth=Auth(row["auth"]),
                cipher_family=CipherFamily(row["cipher_family"]),
                cipher_mode=CipherMode(row["cipher_mode"]),
                mac=Mac(row["mac"]),
                is_aead=_BOOLS[row["is_aead"]],
                is_export=_BOOLS[row["is_export"]],
                min_version=Version.from_label(row["min_version"]),
                max_version=Version.from_label(row["max_version"]),
                unsupported_by_engine=_BOOLS[row["unsupported_by_engine"]],
            ))
        except RegistryError:
            raise
        except (KeyError, ValueError) as exc:
            raise RegistryError(f"{label}:{lineno}: malformed row ({exc})") from exc
    try:
        return CipherDb(suites, source_version=label)
    except RegistryError as exc:
        raise RegistryError(f"{label}: {exc}") from exc


# Union of the TLS 1.2-compatible cipher suites offered by Chrome 65,
# Firefox 66, Safari 13.0.1 and Edge 18 (extraction sources documented in
# docs/browser-union.md). Emitted in descending security preference:
# AEAD-ECDHE first, then AEAD, forward-secret CBC, static-RSA, legacy.
_BROWSER_LISTS = {
    "chrome65": [0xC02B, 0xC02F, 0xC02C, 0xC030, 0xCCA9, 0xCCA8, 0xC013,
                 0xC014, 0x009C, 0x009D, 0x002F, 0x0035, 0x000A],
    "firefox66": [0xC02B, 0xC02F, 0xCCA9, 0xCCA8, 0xC02C, 0xC030, 0xC00A,
                  0xC009, 0xC013, 0xC014, 0x0033, 0x0039, 0x002F, 0x0035,
                  0x000A],
    "safari13": [0xC02C, 0xC02B, 0xC024, 0xC023, 0xC00A, 0xC009, 0xCCA9,
                 0xC030, 0xC02F, 0xC028, 0xC027, 0xC014, 0xC013, 0xCCA8,
                 0x009D, 0x009C, 0x003D, 0x003C, 0x0035, 0x002F, 0xC008,
                 0xC012, 0x000A],
    "edge18": [0xC02C, 0xC02B, 0xC030, 0xC02F, 0xC024, 0xC023, 0xC028,
               0xC027, 0xC00A, 0xC009, 0xC014, 0xC013, 0x009D, 0x009C,
               0x003D, 0x003C, 0x0035, 0x002F, 0x000A, 0x006A, 0x0040,
               0x0038, 0x0032],
}


def offer_sort_key(info: CipherSuiteInfo):
    """Deterministic preference order: more secure first, then id."""
    kex_rank = {Kex.ECDHE: 0, Kex.DHE: 1, Kex.RSA: 2, Kex.OTHER: 3}
    fam_rank = {
        CipherFamily.AES: 0, CipherFamily.CHACHA: 0, CipherFamily.CAMELLIA: 1,
        CipherFamily.ARIA: 1, CipherFamily.SEED: 2, CipherFamily.IDEA: 2,
        CipherFamily.TRIPLE_DES: 3, CipherFamily.RC4: 4, CipherFamily.DES: 5,
        CipherFamily.NULL: 6, CipherFamily.OTHER: 6,
    }
    return (
        0 if info.is_aead else 1,
        kex_rank[info.kex],
        fam_rank[info.cipher_family],
        1 if info.is_export else 0,
        info.id,
    )


def sort_offer(db: CipherDb, suite_ids: Iterable[int]) -> list[int]:
    return sorted(suite_ids, key=lambda sid: offer_sort_key(db[sid]))


def browser_union(db: CipherDb) -> list[int]:
    """Deduplicated union of the four browser lists, preference-ordered."""
    union: set[int] = set()
    for name, ids in _BROWSER_LISTS.items():
        for sid in ids:
            if sid not in db:
                raise RegistryError(
                    f"suite 0x{sid:04X} from {name} missing from registry"
                )
            union.add(sid)
    if not union:
        raise RegistryError("empty registry has no browser union")
    return sort_offer(db, union)


Predicate = dict


def suites_matching(db: CipherDb, predicate: Predicate) -> set[int]:
    """Suites whose fields equal every (field, value) pair in `predicate`."""
    valid = {f.name for f in fields(CipherSuiteInfo)}
    for key in predicate:
        if key not in valid:
            raise RegistryError(f"unknown predicate field {key!r}")
    out = set()
    for sid, info in db.suites.items():
        if all(getattr(info, k) == v for k, v in predicate.items()):
            out.add(sid)
    return out


def cert_compatible(db: CipherDb, cert_auth: Auth,
                    at_version: Version = Version.TLS1_2) -> list[int]:
    """Engine-offerable suites for a certificate key type, preference-ordered.

    The full first-offer list for cipher enumeration: everything the engine
    can negotiate that the presented certificate can authenticate.
    """
    out = [
        sid for sid, info in db.suites.items()
        if info.auth == cert_auth
        and not info.unsupported_by_engine
        and info.min_version <= at_version <= info.max_version
    ]
    return sort_offer(db, out)
