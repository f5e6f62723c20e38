"""Bundled finite-field DH groups: the well-known primes servers commonly
ship plus one locally generated group used as the "uncommon" reference."""
from __future__ import annotations

import json
from importlib import resources


class PrimeError(KeyError):
    pass


def _load() -> dict[str, dict]:
    path = resources.files("tlsaudit.data").joinpath("common_dh_primes.json")
    return json.loads(path.read_text())


_PRIMES = _load()
COMMON_PRIME_NAMES = tuple(n for n, e in _PRIMES.items() if e["common"])
ALL_PRIME_NAMES = tuple(_PRIMES)


def named_prime(name: str) -> bytes:
    try:
        return bytes.fromhex(_PRIMES[name]["hex"])
    except KeyError:
        raise PrimeError(f"unknown named prime {name!r}") from None


def prime_bits(prime: bytes) -> int:
    return int.from_bytes(prime.lstrip(b"\x00"), "big").bit_length()


def prime_is_common(prime: bytes) -> bool:
    """Membership in the well-known list (Oakley/RFC 3526/RFC 7919 and
    stock server defaults); anything else is treated as operator-generated."""
    hexval = prime.lstrip(b"\x00").hex()
    return any(e["hex"] == hexval for e in _PRIMES.values() if e["common"])
