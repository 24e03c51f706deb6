import sys
from pathlib import Path

from core.evaluation.report import EvalReport, aggregate_by_codebook_size
from core.records import iter_records


def last_eval(path: Path) -> EvalReport:
    evals = [r for r in iter_records(path) if r.get("kind") == "eval"]
    if not evals:
        raise SystemExit(f"no eval records in {path}")
    record = dict(evals[-1])
    record.pop("kind")
    return EvalReport.model_validate(record)


def main():
    if len(sys.argv) < 2:
        print("Usage: python scripts/aggregate_seeds.py runs/<seed>/metrics.jsonl [...]")
        sys.exit(1)

    reports = [last_eval(Path(p)) for p in sys.argv[1:]]
    for k, summary in aggregate_by_codebook_size(reports).items():
        print(f"K={k} seeds={summary['seeds']}")
        for key, stats in summary["metrics"].items():
            print(f"    {key:28s} {stats['mean']:.4f} ± {stats['std']:.4f} (n={stats['n']})")


if __name__ == "__main__":
    main()
