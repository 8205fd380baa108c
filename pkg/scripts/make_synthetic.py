"""
Synthetic data script.

This script writes a labeled Dirichlet-mixture task (train and test
matrices plus class-id files) for trying the command line end to end.

Usage:
    python scripts/make_synthetic.py OUT_DIR [--n 2000] [--d 64] [--classes 5] [--boost 1.0] [--seed 0]
"""

import argparse
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from chi2map.logging_config import configure_logging
from chi2map.models.histogram import HistogramMatrix
from chi2map.services.bench_service import BenchService
from chi2map.services.histio_service import HistIOService


def make_synthetic(out_dir: Path, n: int, d: int, classes: int, boost: float, seed: int) -> bool:
    """
    Write train.bin, train_labels.csv, test.bin and test_labels.csv.

    Returns:
        bool: True if successful, False otherwise
    """
    try:
        print("=" * 60)
        print("Synthetic Dirichlet Task")
        print("=" * 60)

        print(f"\n[1/2] Sampling {2 * n} histograms (d={d}, {classes} classes)...")
        X, ids = BenchService.synthetic_dirichlet(2 * n, d, classes, boost, seed)
        print("✓ Sampled")

        print(f"\n[2/2] Writing files to {out_dir}...")
        out_dir.mkdir(parents=True, exist_ok=True)
        HistIOService.write_matrix(HistogramMatrix(X.data[:n]), out_dir / "train.bin")
        HistIOService.write_matrix(HistogramMatrix(X.data[n:]), out_dir / "test.bin")
        HistIOService.write_array(ids[:n], out_dir / "train_labels.csv")
        HistIOService.write_array(ids[n:], out_dir / "test_labels.csv")
        for name in ("train.bin", "train_labels.csv", "test.bin", "test_labels.csv"):
            print(f"  - {out_dir / name}")

        print("\n" + "=" * 60)
        print("Synthetic data written successfully!")
        print("=" * 60)
        print("\nTry:")
        print(f"  chi2map pca-fit {out_dir / 'train.bin'} --labels {out_dir / 'train_labels.csv'} "
              f"--dims-keep 256 --model-out model.c2m")
        print("  chi2map train --model model.c2m")
        print(f"  chi2map predict {out_dir / 'test.bin'} --model model.c2m --out scores.csv")
        print("=" * 60)

        return True

    except Exception as e:
        print(f"\n✗ Error writing synthetic data: {str(e)}")
        import traceback
        traceback.print_exc()
        return False


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Write a synthetic Dirichlet-mixture task.")
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--n", type=int, default=2000, help="Rows per split")
    parser.add_argument("--d", type=int, default=64)
    parser.add_argument("--classes", type=int, default=5)
    parser.add_argument("--boost", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    configure_logging()
    success = make_synthetic(args.out_dir, args.n, args.d, args.classes, args.boost, args.seed)
    sys.exit(0 if success else 1)
