"""Shared generators for property-style tests."""

import random

from tlsaudit.configuration import Configuration, compute_kex_flags
from tlsaudit.registry import CipherDb, Version, sort_offer

ALL_VERSIONS = (Version.SSLv2, Version.SSLv3, Version.TLS1_0,
                Version.TLS1_1, Version.TLS1_2, Version.TLS1_3)


def random_configuration(rng: random.Random, db: CipherDb) -> Configuration:
    all_ids = sorted(db.suites)
    suites = rng.sample(all_ids, rng.randint(1, 16))
    versions = frozenset(v for v in ALL_VERSIONS if rng.random() < 0.4)
    if not versions:
        versions = frozenset({Version.TLS1_2})
    tickets = rng.random() < 0.5
    hint = rng.choice([None, 300, 86400, 604800, 10_000_000]) if tickets else None
    kex = compute_kex_flags(db, suites)
    dh_bits = (rng.choice([None, 512, 768, 1024, 2048])
               if kex["DHE"] else None)
    dh_common = (rng.random() < 0.5) if dh_bits is not None else None
    return Configuration.assemble(
        db, suites, preferred_suite=rng.choice(suites),
        versions=versions,
        server_preference=rng.random() < 0.5,
        tls_compression=rng.random() < 0.2,
        session_id_resumption=rng.random() < 0.5,
        session_tickets=tickets,
        ticket_lifetime_hint_s=hint,
        dh_prime_bits=dh_bits,
        dh_group_common=dh_common,
        heartbleed_vulnerable=rng.random() < 0.1,
    )


def reassemble(db: CipherDb, config: Configuration, *, suites=None,
               versions=None, tls_compression=None) -> Configuration:
    """Copy a Configuration with some grading inputs replaced; flags and the
    preferred suite are re-projected so invariants keep holding."""
    suites = sorted(config.supported_suites) if suites is None else sorted(suites)
    preferred = (config.preferred_suite if config.preferred_suite in suites
                 else sort_offer(db, suites)[0])
    kex = compute_kex_flags(db, suites)
    dh_bits = config.dh_prime_bits if kex["DHE"] else None
    return Configuration.assemble(
        db, suites, preferred_suite=preferred,
        versions=config.versions if versions is None else frozenset(versions),
        server_preference=config.server_preference,
        extensions=config.extensions,
        tls_compression=(config.tls_compression if tls_compression is None
                         else tls_compression),
        session_id_resumption=config.session_id_resumption,
        session_tickets=config.session_tickets,
        ticket_lifetime_hint_s=config.ticket_lifetime_hint_s,
        dh_prime_bits=dh_bits,
        dh_group_common=config.dh_group_common if dh_bits is not None else None,
        heartbleed_vulnerable=config.heartbleed_vulnerable,
        cert_sig_alg=config.cert_sig_alg,
    )
