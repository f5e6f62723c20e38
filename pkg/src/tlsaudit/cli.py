"""Command-line entry point.

Subcommands: ``scan`` (the only one that opens sockets), ``grade``,
``check-rec``, ``report``, and ``fixtures``. Exit codes: 0 success,
1 input error, 2 policy/ethics refusal, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import cipherstring, fixtures, pipeline, report as report_mod
from .configuration import ConfigError, Configuration
from .grading import grade
from .orchestrator import ProbePolicy
from .registry import load_registry

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_POLICY = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlsaudit",
        description="HTTPS configuration auditor: probe, grade, and report.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_scan = sub.add_parser("scan", help="probe a target list and grade it")
    p_scan.add_argument("--targets", required=True,
                        help="CSV of rank,domain rows")
    p_scan.add_argument("--out", required=True, help="output JSONL path")
    p_scan.add_argument("--policy", help="probe policy JSON file")
    p_scan.add_argument("--asn-table", help="CSV of prefix,asn,as_name rows")
    p_scan.add_argument("--checkpoint", help="checkpoint file for resume")
    p_scan.add_argument("--trace-dir", help="directory for per-site traces")
    p_scan.add_argument("--seed", type=int, help="politeness jitter seed")
    p_scan.add_argument("--i-understand-scanning-ethics", action="store_true",
                        dest="ethics",
                        help="required to scan anything outside loopback")

    p_grade = sub.add_parser("grade", help="grade configurations offline")
    p_grade.add_argument("--in", dest="infile", required=True,
                         help="JSONL of Configuration objects")
    p_grade.add_argument("--out", help="output JSONL (default stdout)")

    p_rec = sub.add_parser("check-rec",
                           help="analyze cipher-string recommendations")
    p_rec.add_argument("--recs", required=True,
                       help="JSONL of recommendation objects")
    p_rec.add_argument("--configs",
                       help="JSONL of labeled configurations to check")
    p_rec.add_argument("--defaults", action="store_true",
                       help="grade against the bundled stock defaults")
    p_rec.add_argument("--defaults-dir",
                       help="directory of labeled default configuration JSON")
    p_rec.add_argument("--profiles-dir",
                       help="directory of library profile JSON files")
    p_rec.add_argument("--out", help="output JSONL (default stdout)")

    p_rep = sub.add_parser("report", help="aggregate scan records")
    p_rep.add_argument("--records", required=True, help="scan JSONL")
    p_rep.add_argument("--which", required=True,
                       help="dist | cdf-asn | cdf-config | downgrades | "
                            "dominance | records")
    p_rep.add_argument("--format", default="csv", choices=("csv", "json"))
    p_rep.add_argument("--out", required=True)

    p_fix = sub.add_parser("fixtures",
                           help="write the bundled fixture corpus to disk")
    p_fix.add_argument("--out-dir", required=True)
    p_fix.add_argument("--seed", type=int, default=0)
    return parser


def _open_out(path):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def cmd_scan(args) -> int:
    db = load_registry()
    try:
        targets = pipeline.load_targets(args.targets)
    except OSError as exc:
        print(f"error: cannot read targets: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not targets:
        print("error: no valid targets", file=sys.stderr)
        return EXIT_INPUT

    policy = ProbePolicy(delay_min_s=0.0, delay_max_s=0.0, seed=args.seed)
    if args.policy:
        try:
            policy = ProbePolicy.from_json(
                json.loads(Path(args.policy).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            print(f"error: bad policy file: {exc}", file=sys.stderr)
            return EXIT_INPUT

    asn_table = []
    if args.asn_table:
        try:
            asn_table = pipeline.load_asn_table(args.asn_table)
        except OSError as exc:
            print(f"error: cannot read asn table: {exc}", file=sys.stderr)
            return EXIT_INPUT

    options = pipeline.ScanOptions(
        allow_non_loopback=args.ethics,
        checkpoint_path=args.checkpoint,
        trace_dir=args.trace_dir,
        asn_table=asn_table,
    )
    try:
        pipeline.run_scan(targets, policy, db, args.out, options)
    except pipeline.PipelineError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_POLICY
    return EXIT_OK


def cmd_grade(args) -> int:
    db = load_registry()
    errors = 0
    lines_out = []
    try:
        text = Path(args.infile).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            label = obj.get("label")
            config = Configuration.from_json(obj.get("configuration", obj))
            result = grade(config, db).to_json()
        except (ValueError, KeyError, ConfigError) as exc:
            print(f"line {lineno}: invalid record: {exc}", file=sys.stderr)
            errors += 1
            continue
        out_obj = {"grade_report": result}
        if label is not None:
            out_obj["label"] = label
        lines_out.append(json.dumps(out_obj))
    out = _open_out(args.out)
    try:
        for line in lines_out:
            out.write(line + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_INPUT if errors else EXIT_OK


def _load_defaults(args, db):
    """Resolve the (label, Configuration, LibraryProfile) defaults list."""
    if args.defaults_dir:
        defaults = []
        for path in sorted(Path(args.defaults_dir).glob("*.json")):
            obj = json.loads(path.read_text(encoding="utf-8"))
            profile = cipherstring.load_profile(obj["profile"])
            defaults.append((obj["label"],
                             Configuration.from_json(obj["configuration"]),
                             profile))
        return defaults
    return [(label, config, cipherstring.load_profile(profile_name))
            for label, config, profile_name
            in fixtures.ubuntu_default_configurations(db)]


def cmd_check_rec(args) -> int:
    db = load_registry()
    if not args.configs and not args.defaults and not args.defaults_dir:
        print("error: need --configs, --defaults, or --defaults-dir",
              file=sys.stderr)
        return EXIT_INPUT
    profiles = cipherstring.load_all_profiles(args.profiles_dir)

    configs = []
    if args.configs:
        try:
            for lineno, line in enumerate(
                    Path(args.configs).read_text(encoding="utf-8").splitlines(),
                    start=1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                configs.append((obj.get("label", f"config-{lineno}"),
                                Configuration.from_json(
                                    obj.get("configuration", obj))))
        except (OSError, ValueError, KeyError, ConfigError) as exc:
            print(f"error: bad configs file: {exc}", file=sys.stderr)
            return EXIT_INPUT

    defaults = None
    if args.defaults or args.defaults_dir:
        defaults = _load_defaults(args, db)

    results = []
    try:
        rec_text = Path(args.recs).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for lineno, line in enumerate(rec_text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            rec = cipherstring.Recommendation.from_json(obj)
        except (ValueError, cipherstring.CipherStringError,
                cipherstring.RecommendationError) as exc:
            print(f"recs line {lineno}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        entry: dict = {"recommendation": rec.to_json()}
        if defaults is not None:
            try:
                per_default, summary = cipherstring.grade_recommendation(
                    rec, defaults, db, profiles)
            except cipherstring.RecommendationError as exc:
                entry["error"] = str(exc)
                results.append(entry)
                continue
            entry["grades"] = {
                label: (r if isinstance(r, dict) else r.to_json())
                for label, r in per_default.items()
            }
            entry["best"] = summary["best"].value
            entry["worst"] = summary["worst"].value
        if configs:
            entry["consistent"] = {
                label: cipherstring.consistent(config, rec, db, profiles)
                for label, config in configs
            }
        results.append(entry)

    out = _open_out(args.out)
    try:
        for entry in results:
            out.write(json.dumps(entry) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        records = pipeline.load_records(args.records)
    except (OSError, pipeline.PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        data = report_mod.build(records, args.which)
        report_mod.emit(args.which, data, args.format, args.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def cmd_fixtures(args) -> int:
    db = load_registry()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = fixtures.bundled_corpus(db, seed=args.seed)
    for n, spec in enumerate(specs):
        path = out_dir / f"spec-{n:03d}.json"
        path.write_text(json.dumps(spec.to_json(), indent=1) + "\n",
                        encoding="utf-8")
    with open(out_dir / "ubuntu_defaults.jsonl", "w", encoding="utf-8") as fh:
        for label, config, profile in fixtures.ubuntu_default_configurations(db):
            fh.write(json.dumps({"label": label, "profile": profile,
                                 "configuration": config.to_json()}) + "\n")
    print(f"wrote {len(specs)} fixture specs and the stock defaults "
          f"to {out_dir}")
    return EXIT_OK


_COMMANDS = {
    "scan": cmd_scan,
    "grade": cmd_grade,
    "check-rec": cmd_check_rec,
    "report": cmd_report,
    "fixtures": cmd_fixtures,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - defensive catch-all
        logger.exception("unhandled failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
