import sys

from core.oracle import bundled_systems, check_system, load_bundled
from core.records import RecordWriter


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else None
    writer = RecordWriter(out) if out else None
    failures = 0

    for name in bundled_systems():
        system = load_bundled(name)
        report = check_system(system)
        if writer:
            writer.write_many(report.to_records())

        at_default = next(v for v in report.verdicts if v.lam == 1e-3)
        expected = not report.faithfulness_errors
        ok = at_default.passed == expected
        failures += not ok
        print(
            f"{name:16s} K={report.k} optima={len(at_default.optima)} "
            f"passed={at_default.passed} eta={report.eta} "
            f"faithful={expected} -> {'ok' if ok else 'UNEXPECTED'}"
        )

    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()
