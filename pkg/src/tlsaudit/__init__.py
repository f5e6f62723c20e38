"""tlsaudit: HTTPS configuration auditor.

Probes a server's user-configurable TLS surface through a bounded series
of parametric handshakes, grades the recovered configuration on a
seven-category A/B/C/F rubric, checks cipher-string recommendations for
consistency, and aggregates scan corpora into ecosystem reports.
"""

__version__ = "1.0.0"
