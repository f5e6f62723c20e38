"""Batch scan pipeline: target ingestion, annotation, and record persistence.

Drives the single-site prober across an ordered target list, annotates each
result with server software, OS hint, and ASN, and appends one self-contained
JSON line per target to the output sink. A newline-delimited checkpoint of
completed domains makes interrupted scans resumable.
"""

from __future__ import annotations

import csv
import datetime
import ipaddress
import json
import logging
import socket
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .configuration import Configuration
from .grading import DEFAULT_POLICY, GradeReport, GradingPolicy, grade
from .orchestrator import ProbePolicy, SiteProber
from .registry import CipherDb

logger = logging.getLogger(__name__)

RECORD_SCHEMA_VERSION = 1


class PipelineError(ValueError):
    pass


class Eligibility(Enum):
    GRADED = "GRADED"
    UNGRADEABLE = "UNGRADEABLE"
    EXCLUDED = "EXCLUDED"


@dataclass(frozen=True)
class Target:
    rank: Optional[int]
    domain: str

    @property
    def host_port(self) -> tuple[str, int]:
        host, _, port = self.domain.rpartition(":")
        if host and port.isdigit():
            return host, int(port)
        return self.domain, 443


@dataclass
class ScanRecord:
    domain: str
    eligibility: Eligibility
    rank: Optional[int] = None
    address: Optional[str] = None
    started_at: Optional[str] = None
    finished_at: Optional[str] = None
    server_software: Optional[dict] = None
    os_hint: Optional[str] = None
    asn: Optional[dict] = None
    configuration: Optional[Configuration] = None
    grade_report: Optional[GradeReport] = None
    trace_ref: Optional[str] = None
    exclusion_reason: Optional[str] = None

    def __post_init__(self):
        if self.grade_report is not None and self.configuration is None:
            raise PipelineError("grade_report requires a configuration")
        if self.eligibility is Eligibility.EXCLUDED and self.configuration is not None:
            raise PipelineError("EXCLUDED records carry no configuration")

    def to_json(self) -> dict:
        return {
            "schema_version": RECORD_SCHEMA_VERSION,
            "domain": self.domain,
            "rank": self.rank,
            "address": self.address,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "eligibility": self.eligibility.value,
            "server_software": self.server_software,
            "os_hint": self.os_hint,
            "asn": self.asn,
            "configuration": (self.configuration.to_json()
                              if self.configuration else None),
            "grade_report": (self.grade_report.to_json()
                             if self.grade_report else None),
            "trace_ref": self.trace_ref,
            "exclusion_reason": self.exclusion_reason,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ScanRecord":
        return cls(
            domain=obj["domain"],
            rank=obj.get("rank"),
            address=obj.get("address"),
            started_at=obj.get("started_at"),
            finished_at=obj.get("finished_at"),
            eligibility=Eligibility(obj["eligibility"]),
            server_software=obj.get("server_software"),
            os_hint=obj.get("os_hint"),
            asn=obj.get("asn"),
            configuration=(Configuration.from_json(obj["configuration"])
                           if obj.get("configuration") else None),
            grade_report=(GradeReport.from_json(obj["grade_report"])
                          if obj.get("grade_report") else None),
            trace_ref=obj.get("trace_ref"),
            exclusion_reason=obj.get("exclusion_reason"),
        )


# -- target ingestion -----------------------------------------------------------

def load_targets(path) -> list[Target]:
    """Parse a ``rank,domain`` CSV. Order is preserved, duplicate domains are
    dropped with a warning, and malformed rows are skipped with their line
    number logged."""
    targets: list[Target] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                logger.warning("targets line %d: malformed row %r, skipped",
                               lineno, row)
                continue
            rank_text, domain = row[0].strip(), row[1].strip()
            if rank_text.lower() == "rank" and domain.lower() == "domain":
                continue  # optional header
            if not domain:
                logger.warning("targets line %d: empty domain, skipped", lineno)
                continue
            try:
                rank = int(rank_text) if rank_text else None
            except ValueError:
                logger.warning("targets line %d: bad rank %r, skipped",
                               lineno, rank_text)
                continue
            if domain in seen:
                logger.warning("targets line %d: duplicate domain %s, dropped",
                               lineno, domain)
                continue
            seen.add(domain)
            targets.append(Target(rank=rank, domain=domain))
    return targets


# -- Server-header parsing ------------------------------------------------------

KNOWN_SERVER_PRODUCTS = (
    "apache", "nginx", "microsoft-iis", "litespeed", "openresty",
    "cloudflare", "cpanel", "bigip", "cloudfront", "varnish", "ats",
    "awselb", "squarespace", "akamai", "ghs", "caddy",
)


def parse_server_header(value: Optional[str]) -> dict:
    """Split a Server header into product name, version, and OS hint.

    The first recognized product token wins; the OS hint comes from the
    first parenthetical comment, lowercased.
    """
    result: dict = {"name": None, "version": None, "os_hint": None}
    if not value:
        return result
    rest = value.strip()
    # Pull out parenthetical comments before tokenizing.
    tokens: list[str] = []
    while rest:
        if rest.startswith("("):
            end = rest.find(")")
            if end < 0:
                break
            comment = rest[1:end].strip()
            if comment and result["os_hint"] is None:
                result["os_hint"] = comment.split(";")[0].strip().lower() or None
            rest = rest[end + 1:].lstrip()
            continue
        token, _, rest = rest.partition(" ")
        rest = rest.lstrip()
        if token:
            tokens.append(token)
    for token in tokens:
        name, _, version = token.partition("/")
        if name.lower() in KNOWN_SERVER_PRODUCTS and result["name"] is None:
            result["name"] = name.lower()
            result["version"] = version or None
    return result


# -- ASN annotation -------------------------------------------------------------

def load_asn_table(path) -> list[tuple[ipaddress._BaseNetwork, int, str]]:
    """Load a ``prefix,asn,as_name`` CSV into (network, asn, name) rows."""
    table = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().lower() == "prefix":
                continue
            if len(row) < 3:
                logger.warning("asn table line %d: malformed row %r, skipped",
                               lineno, row)
                continue
            try:
                network = ipaddress.ip_network(row[0].strip())
                asn = int(row[1])
            except ValueError as exc:
                logger.warning("asn table line %d: %s, skipped", lineno, exc)
                continue
            table.append((network, asn, row[2].strip()))
    return table


def annotate_asn(address: str, table) -> Optional[dict]:
    """Longest-prefix match of ``address`` over a loaded ASN table."""
    try:
        ip = ipaddress.ip_address(address)
    except ValueError:
        return None
    best = None
    for network, asn, name in table:
        if ip.version == network.version and ip in network:
            if best is None or network.prefixlen > best[0].prefixlen:
                best = (network, asn, name)
    if best is None:
        return None
    return {"number": best[1], "name": best[2]}


# -- scan driver ----------------------------------------------------------------

def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _resolve(host: str) -> Optional[str]:
    try:
        infos = socket.getaddrinfo(host, None, proto=socket.IPPROTO_TCP)
    except OSError:
        return None
    for family in (socket.AF_INET, socket.AF_INET6):
        for info in infos:
            if info[0] == family:
                return info[4][0]
    return None


def _is_loopback(address: str) -> bool:
    try:
        return ipaddress.ip_address(address).is_loopback
    except ValueError:
        return False


def read_checkpoint(path) -> set[str]:
    p = Path(path)
    if not p.exists():
        return set()
    return {line.strip() for line in p.read_text(encoding="utf-8").splitlines()
            if line.strip()}


@dataclass
class ScanOptions:
    allow_non_loopback: bool = False
    checkpoint_path: Optional[str] = None
    trace_dir: Optional[str] = None
    asn_table: list = field(default_factory=list)
    grading_policy: GradingPolicy = DEFAULT_POLICY


def scan_one(prober: SiteProber, db: CipherDb, target: Target,
             options: ScanOptions) -> ScanRecord:
    started = _now()
    host, port = target.host_port
    address = _resolve(host)
    if address is None:
        return ScanRecord(domain=target.domain, rank=target.rank,
                          eligibility=Eligibility.EXCLUDED,
                          exclusion_reason="DNS",
                          started_at=started, finished_at=_now())
    if not _is_loopback(address) and not options.allow_non_loopback:
        raise PipelineError(
            f"{target.domain} resolves to non-loopback {address}; "
            "pass --i-understand-scanning-ethics to scan real hosts")

    config, trace = prober.probe_site(f"{address}:{port}", sni_name=host)
    finished = _now()
    trace_ref = None
    if options.trace_dir:
        trace_dir = Path(options.trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)
        trace_path = trace_dir / f"{target.domain.replace(':', '_')}.trace.json"
        trace_path.write_text(json.dumps(trace.to_json(), indent=1),
                              encoding="utf-8")
        trace_ref = str(trace_path)

    asn = annotate_asn(address, options.asn_table) if options.asn_table else None
    if config is None:
        return ScanRecord(domain=target.domain, rank=target.rank,
                          address=address,
                          eligibility=Eligibility.EXCLUDED,
                          exclusion_reason=trace.exclusion_reason or "PROBE",
                          asn=asn, trace_ref=trace_ref,
                          started_at=started, finished_at=finished)

    software = parse_server_header(trace.server_header)
    report = grade(config, db, options.grading_policy)
    return ScanRecord(
        domain=target.domain, rank=target.rank, address=address,
        eligibility=Eligibility.GRADED,
        server_software=({"name": software["name"],
                          "version": software["version"]}
                         if software["name"] else None),
        os_hint=software["os_hint"],
        asn=asn,
        configuration=config,
        grade_report=report,
        trace_ref=trace_ref,
        started_at=started, finished_at=finished,
    )


def run_scan(targets: Iterable[Target], policy: ProbePolicy, db: CipherDb,
             out_path, options: Optional[ScanOptions] = None) -> list[ScanRecord]:
    """Scan every target, appending one JSON line per record to ``out_path``.

    Records are flushed as they complete. When a checkpoint path is set,
    completed domains are skipped on rerun and appended as they finish, so an
    interrupted scan resumes where it left off.
    """
    options = options or ScanOptions()
    done = (read_checkpoint(options.checkpoint_path)
            if options.checkpoint_path else set())
    prober = SiteProber(db, policy)
    records: list[ScanRecord] = []

    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    checkpoint_fh = (open(options.checkpoint_path, "a", encoding="utf-8")
                     if options.checkpoint_path else None)
    try:
        with open(out, "a", encoding="utf-8") as sink:
            for target in targets:
                if target.domain in done:
                    logger.info("%s: in checkpoint, skipped", target.domain)
                    continue
                record = scan_one(prober, db, target, options)
                sink.write(json.dumps(record.to_json()) + "\n")
                sink.flush()
                if checkpoint_fh is not None:
                    checkpoint_fh.write(target.domain + "\n")
                    checkpoint_fh.flush()
                records.append(record)
    finally:
        if checkpoint_fh is not None:
            checkpoint_fh.close()
    return records


def load_records(path) -> list[ScanRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(ScanRecord.from_json(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise PipelineError(f"{path}:{lineno}: bad record: {exc}")
    return records
