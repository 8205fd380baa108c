"""
Benchmark commands: approximation error curves and the end-to-end accuracy comparison.

Every command writes a ``# chi2map-bench v1`` CSV to ``--out`` or stdout.
"""

import argparse
import logging

from chi2map.config import Settings
from chi2map.exceptions import ParameterError
from chi2map.models.histogram import HistogramMatrix
from chi2map.services.bench_service import BenchService
from chi2map.services.histio_service import HistIOService
from chi2map.commands.common import parse_int_list, parse_name_list, write_report

logger = logging.getLogger(__name__)


def _read(args: argparse.Namespace, path: str) -> HistogramMatrix:
    return HistIOService.read_matrix(path, args.format, args.strict_l1, args.l1_tolerance)


# ============================================================================
# HANDLERS
# ============================================================================

def _cmd_bench_chi2_error(args: argparse.Namespace) -> int:
    X = _read(args, args.input)
    report = BenchService.bench_chi2_error(
        X, parse_name_list(args.methods), parse_int_list(args.terms_list),
        args.bins, args.pairs, args.seed,
    )
    write_report(report, args.out)
    return 0


def _cmd_bench_kernel_error(args: argparse.Namespace) -> int:
    X = _read(args, args.input)
    report = BenchService.bench_kernel_error(
        X, parse_name_list(args.methods), args.terms, parse_int_list(args.dims_list),
        range(args.seeds), args.gamma, args.bins, args.rows, args.seed,
    )
    write_report(report, args.out)
    return 0


def _cmd_end2end(args: argparse.Namespace) -> int:
    """Exact-kernel ridge versus the approximate pipelines on real or synthetic data."""
    if args.input:
        if not (args.labels and args.test_input and args.test_labels):
            raise ParameterError("--input needs --labels, --test-input and --test-labels")
        X_train = _read(args, args.input)
        X_test = _read(args, args.test_input)
        ids_train = HistIOService.read_labels(args.labels).class_ids()
        ids_test = HistIOService.read_labels(args.test_labels).class_ids()
    else:
        X, ids = BenchService.synthetic_dirichlet(2 * args.n, args.d, args.classes, args.boost,
                                                  args.data_seed)
        X_train, X_test = HistogramMatrix(X.data[:args.n]), HistogramMatrix(X.data[args.n:])
        ids_train, ids_test = ids[:args.n], ids[args.n:]
        logger.info("synthetic task: %d train / %d test rows, d=%d, %d classes",
                    args.n, args.n, args.d, args.classes)

    report = BenchService.end2end(
        X_train, ids_train, X_test, ids_test, args.method, args.terms,
        parse_int_list(args.dims_list), range(args.seeds), args.gamma, args.lambda_,
        args.oversample, args.chunk_rows, args.bins, args.threads,
    )
    write_report(report, args.out)
    return 0


# ============================================================================
# REGISTRATION
# ============================================================================

def register(sub: argparse._SubParsersAction, parent: argparse.ArgumentParser,
             settings: Settings) -> None:
    """Add the benchmark subcommands."""
    p_chi2 = sub.add_parser("bench-chi2-error", parents=[parent],
                            help="Scalar chi2 approximation error versus the term count.")
    p_chi2.add_argument("input", help="Histogram matrix whose values are sampled")
    p_chi2.add_argument("--methods", default="direct,chebyshev")
    p_chi2.add_argument("--terms-list", default="1..10", help="Term counts, e.g. 1..10 or 1,5,10")
    p_chi2.add_argument("--pairs", type=int, default=2000, help="Sampled value pairs")
    p_chi2.add_argument("--seed", type=int, default=settings.SEED)
    p_chi2.add_argument("--out", help="Output CSV (default: stdout)")
    p_chi2.set_defaults(handler=_cmd_bench_chi2_error)

    p_kernel = sub.add_parser("bench-kernel-error", parents=[parent],
                              help="RF Gram-matrix error versus the exact exp-chi2 kernel.")
    p_kernel.add_argument("input", help="Histogram matrix")
    p_kernel.add_argument("--methods", default="direct,chebyshev")
    p_kernel.add_argument("--terms", type=int, default=settings.TERMS)
    p_kernel.add_argument("--dims-list", default="1000,3000,7000")
    p_kernel.add_argument("--seeds", type=int, default=50, help="Number of basis seeds (0..SEEDS-1)")
    p_kernel.add_argument("--rows", type=int, default=20, help="Rows in the Gram sample")
    p_kernel.add_argument("--gamma", type=float, default=settings.GAMMA)
    p_kernel.add_argument("--seed", type=int, default=settings.SEED, help="Row sample seed")
    p_kernel.add_argument("--out", help="Output CSV (default: stdout)")
    p_kernel.set_defaults(handler=_cmd_bench_kernel_error)

    p_e2e = sub.add_parser("end2end", parents=[parent],
                           help="Accuracy of PCA + ridge pipelines against exact-kernel ridge.")
    p_e2e.add_argument("--input", help="Training matrix (synthetic data if omitted)")
    p_e2e.add_argument("--labels", help="Training class ids")
    p_e2e.add_argument("--test-input", help="Test matrix")
    p_e2e.add_argument("--test-labels", help="Test class ids")
    p_e2e.add_argument("--n", type=int, default=2000, help="Synthetic rows per split")
    p_e2e.add_argument("--d", type=int, default=64, help="Synthetic histogram bins")
    p_e2e.add_argument("--classes", type=int, default=5)
    p_e2e.add_argument("--boost", type=float, default=1.0, help="Extra concentration on each class's block")
    p_e2e.add_argument("--data-seed", type=int, default=settings.SEED)
    p_e2e.add_argument("--method", choices=["direct", "chebyshev"], default="direct")
    p_e2e.add_argument("--terms", type=int, default=settings.TERMS)
    p_e2e.add_argument("--dims-list", default="1000,7000")
    p_e2e.add_argument("--seeds", type=int, default=5, help="Number of basis seeds")
    p_e2e.add_argument("--oversample", type=int, default=settings.OVERSAMPLE)
    p_e2e.add_argument("--lambda", dest="lambda_", type=float, default=settings.RIDGE_LAMBDA)
    p_e2e.add_argument("--gamma", type=float, default=settings.GAMMA)
    p_e2e.add_argument("--out", help="Output CSV (default: stdout)")
    p_e2e.set_defaults(handler=_cmd_end2end)
