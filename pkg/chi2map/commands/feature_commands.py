"""
Feature-map commands: parameter fitting, chi2 embedding and RF lifting.
"""

import argparse
import logging

from chi2map.config import Settings
from chi2map.exceptions import ParameterError
from chi2map.schemas.pipeline_schema import EmbeddingMethod
from chi2map.services.chebyshev_service import ChebyshevService
from chi2map.services.chi2direct_service import Chi2DirectService
from chi2map.services.histio_service import HistIOService
from chi2map.services.rfmap_service import RFMapService
from chi2map.commands.common import open_matrix

logger = logging.getLogger(__name__)


# ============================================================================
# HANDLERS
# ============================================================================

def _cmd_fit_params(args: argparse.Namespace) -> int:
    """Fit direct-series parameters to the value distribution of a matrix."""
    spec = open_matrix(args, args.input)
    params = Chi2DirectService.fit_params_stream(spec, args.n, args.bins)
    HistIOService.write_params(params, args.out)
    logger.info("wrote %d parameters to %s", params.terms, args.out)
    return 0


def _cmd_embed(args: argparse.Namespace) -> int:
    """Chi2-embed a matrix chunk by chunk."""
    spec = open_matrix(args, args.input)
    method = EmbeddingMethod(args.method)
    if method is EmbeddingMethod.DIRECT:
        if args.params:
            params = HistIOService.read_params(args.params)
        else:
            params = Chi2DirectService.fit_params_stream(spec, args.terms, args.bins)

        def embed(chunk):
            return Chi2DirectService.embed_matrix(chunk, params, args.threads)
        per_value = params.terms
    else:
        def embed(chunk):
            return ChebyshevService.cheb_embed_matrix(chunk, args.terms, args.floor, args.threads)
        per_value = args.terms + 1

    cols = HistIOService.column_count(spec) * per_value
    blocks = (embed(chunk) for chunk in HistIOService.stream_chunks(spec))
    HistIOService.write_chunks(blocks, args.out, spec.total_rows, cols, args.out_format)
    logger.info("embedded %d rows into %d columns (%s)", spec.total_rows, cols, method.value)
    return 0


def _cmd_rf(args: argparse.Namespace) -> int:
    """Sample a random Fourier basis and optionally lift an embedding matrix."""
    spec = None
    embed_dim = args.embed_dim
    if args.input:
        spec = HistIOService.chunk_spec(args.input, args.chunk_rows, args.format)
        embed_dim = HistIOService.column_count(spec)
    if embed_dim is None:
        raise ParameterError("give an embedding matrix or --embed-dim")
    basis = RFMapService.sample_basis(embed_dim, args.dims, args.gamma, args.seed)
    RFMapService.write_basis(basis, args.basis_out)
    logger.info("wrote %dx%d basis to %s (fingerprint %s)", basis.embed_dim, basis.dims,
                args.basis_out, basis.fingerprint[:12])
    if spec is not None and args.out:
        blocks = (RFMapService.rf_transform(block, basis, args.threads)
                  for _, block in HistIOService.stream_arrays(spec))
        HistIOService.write_chunks(blocks, args.out, spec.total_rows, basis.dims, args.out_format)
    return 0


# ============================================================================
# REGISTRATION
# ============================================================================

def register(sub: argparse._SubParsersAction, parent: argparse.ArgumentParser,
             settings: Settings) -> None:
    """Add the feature-map subcommands."""
    p_fit = sub.add_parser("fit-params", parents=[parent],
                           help="Fit direct-series parameters k_1..k_N to a matrix.")
    p_fit.add_argument("input", help="Histogram matrix")
    p_fit.add_argument("--n", type=int, default=settings.TERMS, help="Number of parameters N")
    p_fit.add_argument("--out", required=True, help="Output one-column CSV")
    p_fit.set_defaults(handler=_cmd_fit_params)

    p_embed = sub.add_parser("embed", parents=[parent], help="Chi2-embed a histogram matrix.")
    p_embed.add_argument("input", help="Histogram matrix")
    p_embed.add_argument("--method", choices=[m.value for m in EmbeddingMethod],
                         default=EmbeddingMethod.DIRECT.value)
    p_embed.add_argument("--params", help="Direct-series parameter CSV (fitted if omitted)")
    p_embed.add_argument("--terms", type=int, default=settings.TERMS, help="Series terms N")
    p_embed.add_argument("--floor", type=float, default=settings.CHEB_FLOOR,
                         help="Chebyshev zero threshold (default: %(default)s)")
    p_embed.add_argument("--out", required=True, help="Output matrix")
    p_embed.add_argument("--out-format", choices=["csv", "bin"], default=None)
    p_embed.set_defaults(handler=_cmd_embed)

    p_rf = sub.add_parser("rf", parents=[parent], help="Sample a random Fourier basis.")
    p_rf.add_argument("input", nargs="?", help="Embedding matrix to lift (sets the input dimension)")
    p_rf.add_argument("--embed-dim", type=int, help="Input dimension when no matrix is given")
    p_rf.add_argument("--dims", type=int, default=settings.RF_DIMS, help="Random features D")
    p_rf.add_argument("--gamma", type=float, default=settings.GAMMA)
    p_rf.add_argument("--seed", type=int, default=settings.SEED)
    p_rf.add_argument("--basis-out", required=True, help="Output basis file")
    p_rf.add_argument("--out", help="Output feature matrix")
    p_rf.add_argument("--out-format", choices=["csv", "bin"], default=None)
    p_rf.set_defaults(handler=_cmd_rf)
