"""Seven-category configuration rubric.

Every category maps a Configuration onto A/B/C/F and the overall grade is
the minimum across categories. The policy knobs (forbidden component sets,
DH thresholds, ticket lifetime bands) live in ``DEFAULT_POLICY`` so the
rubric can be audited and tightened without touching control flow.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import total_ordering
from typing import Optional

from .configuration import Configuration
from .registry import CipherDb, Kex, Version


@total_ordering
class Grade(Enum):
    A = "A"
    B = "B"
    C = "C"
    F = "F"

    @property
    def rank(self) -> int:
        return {"A": 3, "B": 2, "C": 1, "F": 0}[self.value]

    def __lt__(self, other):
        if not isinstance(other, Grade):
            return NotImplemented
        return self.rank < other.rank


class Category(Enum):
    PROTOCOL = "protocol"
    KEY_EXCHANGE = "key_exchange"
    CIPHERS_MAC = "ciphers_mac"
    PREFERRED = "preferred"
    COMPRESSION = "compression"
    TICKET_LIFETIME = "ticket_lifetime"
    VULNERABILITIES = "vulnerabilities"


@dataclass(frozen=True)
class GradingPolicy:
    # ciphers/MAC: supporting anything in these sets caps the category
    cap_f_components: frozenset = frozenset({"DES", "NULL", "EXPORT"})
    cap_c_components: frozenset = frozenset({"RC4", "MD5"})
    cap_b_components: frozenset = frozenset({"CAMELLIA", "ARIA", "IDEA", "SEED"})
    # 3DES is deliberately absent from every set; flip this to cap it at C
    penalize_triple_des: bool = False
    # DH group size thresholds (bits)
    dh_fail_below: int = 768
    dh_weak_at_or_below: int = 1024
    dh_strong_at_least: int = 2048
    # ticket lifetime bands (seconds)
    ticket_b_from: int = 86400
    ticket_c_above: int = 604800


DEFAULT_POLICY = GradingPolicy()


@dataclass(frozen=True)
class VulnFlags:
    crime: bool = False
    poodle: bool = False
    freak: bool = False
    heartbleed: bool = False


@dataclass
class GradeReport:
    per_category: dict[Category, Grade]
    overall: Grade
    downgrade_reasons: dict[Grade, list[Category]]
    vulnerabilities: VulnFlags = field(default_factory=VulnFlags)

    def to_json(self) -> dict:
        reasons = {
            g.value: sorted(c.value for c in cats)
            for g, cats in self.downgrade_reasons.items()
            if cats
        }
        return {
            "overall": self.overall.value,
            "categories": {c.value: g.value for c, g in self.per_category.items()},
            "reasons": reasons,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GradeReport":
        per = {Category(c): Grade(g) for c, g in obj["categories"].items()}
        reasons = {
            Grade(g): [Category(c) for c in cats]
            for g, cats in obj.get("reasons", {}).items()
        }
        return cls(per_category=per, overall=Grade(obj["overall"]),
                   downgrade_reasons=reasons)


def derive_vulnerabilities(config: Configuration) -> VulnFlags:
    return VulnFlags(
        crime=config.tls_compression,
        poodle=(Version.SSLv3 in config.versions) and config.component_flags["CBC"],
        freak=config.component_flags["EXPORT"] and config.kex_flags["RSA"],
        heartbleed=config.heartbleed_vulnerable,
    )


def grade_protocol(config: Configuration,
                   policy: GradingPolicy = DEFAULT_POLICY) -> Grade:
    versions = config.versions
    if Version.SSLv2 in versions:
        return Grade.F
    if Version.TLS1_2 not in versions and Version.TLS1_3 not in versions:
        return Grade.C
    if Version.SSLv3 in versions:
        return Grade.C
    return Grade.A


def grade_key_exchange(config: Configuration,
                       policy: GradingPolicy = DEFAULT_POLICY) -> Grade:
    bits = config.dh_prime_bits
    if config.kex_flags["DHE"]:
        if bits is None:
            # group never observed; can't vouch for its size
            return Grade.B
        if bits < policy.dh_fail_below:
            return Grade.F
        if bits <= policy.dh_weak_at_or_below:
            # commonality decides B vs C at 1024; 768 is always C territory
            if bits < policy.dh_weak_at_or_below or config.dh_group_common:
                return Grade.C
            return Grade.B
        return Grade.B
    # no finite-field group observed: ECDHE-only forward secrecy is optimal
    if config.kex_flags["ECDHE"]:
        return Grade.A
    return Grade.B


def grade_ciphers_mac(config: Configuration,
                      policy: GradingPolicy = DEFAULT_POLICY) -> Grade:
    flags = config.component_flags
    if any(flags[name] for name in policy.cap_f_components):
        return Grade.F
    if any(flags[name] for name in policy.cap_c_components):
        return Grade.C
    if policy.penalize_triple_des and flags["TRIPLE_DES"]:
        return Grade.C
    if any(flags[name] for name in policy.cap_b_components) or not flags["AEAD"]:
        return Grade.B
    return Grade.A


def grade_preferred(config: Configuration, db: CipherDb,
                    policy: GradingPolicy = DEFAULT_POLICY) -> Grade:
    if not config.server_preference:
        return Grade.B
    info = db.get(config.preferred_suite)
    if info is None:
        return Grade.B
    if info.is_aead and info.kex in (Kex.ECDHE, Kex.DHE):
        return Grade.A
    return Grade.B


def grade_compression(config: Configuration,
                      policy: GradingPolicy = DEFAULT_POLICY) -> Grade:
    return Grade.C if config.tls_compression else Grade.A


def grade_ticket_lifetime(config: Configuration,
                          policy: GradingPolicy = DEFAULT_POLICY) -> Grade:
    hint = config.ticket_lifetime_hint_s
    if not config.session_tickets or hint is None:
        return Grade.A
    if hint < policy.ticket_b_from:
        return Grade.A
    if hint > policy.ticket_c_above:
        return Grade.C
    return Grade.B


def grade_vulnerabilities(flags: VulnFlags,
                          policy: GradingPolicy = DEFAULT_POLICY) -> Grade:
    if flags.heartbleed:
        return Grade.F
    if flags.crime or flags.poodle or flags.freak:
        return Grade.C
    return Grade.A


def grade(config: Configuration, db: CipherDb,
          policy: GradingPolicy = DEFAULT_POLICY) -> GradeReport:
    vulns = derive_vulnerabilities(config)
    per = {
        Category.PROTOCOL: grade_protocol(config, policy),
        Category.KEY_EXCHANGE: grade_key_exchange(config, policy),
        Category.CIPHERS_MAC: grade_ciphers_mac(config, policy),
        Category.PREFERRED: grade_preferred(config, db, policy),
        Category.COMPRESSION: grade_compression(config, policy),
        Category.TICKET_LIFETIME: grade_ticket_lifetime(config, policy),
        Category.VULNERABILITIES: grade_vulnerabilities(vulns, policy),
    }
    overall = min(per.values())
    reasons = {
        g: [c for c in Category if per[c] == g]
        for g in (Grade.B, Grade.C, Grade.F)
    }
    return GradeReport(per_category=per, overall=overall,
                       downgrade_reasons=reasons, vulnerabilities=vulns)


def downgrade_table(reports) -> dict[Grade, dict[Category, float]]:
    """For each grade level below A, the fraction of graded sites whose
    overall landed exactly there because of each category."""
    reports = list(reports)
    table = {g: {c: 0 for c in Category} for g in (Grade.B, Grade.C, Grade.F)}
    for report in reports:
        g = report.overall
        if g == Grade.A:
            continue
        for category, cat_grade in report.per_category.items():
            if cat_grade == g:
                table[g][category] += 1
    n = len(reports)
    return {
        g: {c: (count / n if n else 0.0) for c, count in row.items()}
        for g, row in table.items()
    }
