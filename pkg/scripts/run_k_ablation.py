import sys
from pathlib import Path

from core.config import get_settings, load_config
from core.errors import FcdlError
from core.records import RecordWriter
from core.workflow import DEFAULT_K_SWEEP, run_k_sweep


def main():
    if len(sys.argv) < 2:
        print("Usage: python scripts/run_k_ablation.py config.yaml [out_root] [K ...]")
        sys.exit(1)

    try:
        cfg = load_config(sys.argv[1])
        out = Path(sys.argv[2]) if len(sys.argv) > 2 else Path(cfg.output_dir) / "k_ablation"
        ks = [int(k) for k in sys.argv[3:]] or list(DEFAULT_K_SWEEP)
        summary = run_k_sweep(cfg, ks, out, get_settings().workers)
    except (FcdlError, ValueError) as err:
        raise SystemExit(f"error: {err}")

    RecordWriter(out / "ablation.jsonl").write_many(summary.values())
    for k, agg in summary.items():
        print(f"K={k:<3d} seeds={agg['seeds']}")
        for key, stats in agg["metrics"].items():
            print(f"    {key:28s} {stats['mean']:.4f} ± {stats['std']:.4f} (n={stats['n']})")


if __name__ == "__main__":
    main()
