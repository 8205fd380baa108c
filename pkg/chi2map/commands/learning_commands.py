"""
Learning commands: out-of-core PCA, ridge training, prediction and score calibration.
"""

import argparse
import logging
from pathlib import Path
from typing import Optional

from pydantic import ValidationError as PydanticValidationError

from chi2map.config import Settings, get_settings
from chi2map.exceptions import ParameterError, ValidationError
from chi2map.models.histogram import ChunkSpec
from chi2map.models.pca import MomentAccumulator
from chi2map.schemas.pipeline_schema import EmbeddingMethod, PipelineConfig, read_kernel_config
from chi2map.services.histio_service import HistIOService
from chi2map.services.model_io_service import ModelBundle, ModelIOService
from chi2map.services.oocpca_service import OOCPCAService
from chi2map.services.pipeline_service import FeaturePipeline, PipelineService
from chi2map.commands.common import open_matrix

logger = logging.getLogger(__name__)


# ============================================================================
# HELPERS
# ============================================================================

def _base_config(settings: Settings, path: Optional[str]) -> PipelineConfig:
    """Configuration from a ``key=value`` file, or from the settings."""
    if path:
        return PipelineConfig.from_text(Path(path).read_text())
    return PipelineConfig(
        terms=settings.TERMS, rf_dims=settings.RF_DIMS, gamma=settings.GAMMA,
        seed=settings.SEED, pca_keep=settings.RF_DIMS, lambda_=settings.RIDGE_LAMBDA,
        chunk_rows=settings.CHUNK_ROWS,
    )


def _pca_config(args: argparse.Namespace) -> PipelineConfig:
    """Apply the pca-fit flags to the base configuration."""
    settings = get_settings()
    values = _base_config(settings, args.config).model_dump()
    if args.method is not None:
        values["method"] = args.method
    if args.terms is not None:
        values["terms"] = args.terms
    if args.gamma is not None:
        values["gamma"] = args.gamma
    if args.seed is not None:
        values["seed"] = args.seed
    if args.lambda_ is not None:
        values["lambda_"] = args.lambda_
    if args.dims_keep is not None:
        values["pca_keep"] = args.dims_keep
    if args.no_rf:
        values["rf"] = False
    oversample = args.oversample if args.oversample is not None else settings.OVERSAMPLE
    values["rf_dims"] = args.rf_dims if args.rf_dims is not None else oversample * values["pca_keep"]
    values["chunk_rows"] = args.chunk_rows
    paths = dict(values["paths"])
    for name in ("input", "labels", "multi_kernel"):
        if getattr(args, name, None):
            paths[name] = str(getattr(args, name))
    values["paths"] = paths
    try:
        return PipelineConfig.model_validate(values)
    except PydanticValidationError as error:
        raise ParameterError(f"invalid pipeline settings: {error}") from error


def _kernel_inputs(path: str, chunk_rows: int, bins: int) -> tuple[list[ChunkSpec], list[FeaturePipeline]]:
    """Build the pipelines and chunk specs of a multi-kernel configuration."""
    specs, pipelines = [], []
    for record in read_kernel_config(path):
        pipeline, spec = PipelineService.from_record(record, chunk_rows, bins)
        pipelines.append(pipeline)
        specs.append(spec)
    return specs, pipelines


# ============================================================================
# HANDLERS
# ============================================================================

def _cmd_pca_fit(args: argparse.Namespace) -> int:
    """Accumulate moments and fit the PCA model (out of core)."""
    if bool(args.input) == bool(args.multi_kernel):
        raise ParameterError("give exactly one of INPUT or --multi-kernel")
    config = _pca_config(args)

    if args.multi_kernel:
        specs, pipelines = _kernel_inputs(args.multi_kernel, args.chunk_rows, args.bins)
    else:
        spec = open_matrix(args, args.input)
        specs, pipelines = [spec], [PipelineService.from_config(config, spec, args.bins)]

    labels = HistIOService.read_labels(args.labels) if args.labels else None
    accs = OOCPCAService.accumulate_kernels(specs, pipelines, labels, threads=args.threads)

    if args.include_unlabeled:
        if len(args.include_unlabeled) != len(pipelines):
            raise ParameterError(
                f"--include-unlabeled needs one matrix per kernel ({len(pipelines)}), "
                f"got {len(args.include_unlabeled)}"
            )
        extra_specs = [open_matrix(args, path) for path in args.include_unlabeled]
        extras = OOCPCAService.accumulate_kernels(extra_specs, pipelines, classes=accs[0].classes,
                                                  threads=args.threads)
        logger.warning("PCA moments include %d unlabeled rows", extras[0].n)
        for acc, extra in zip(accs, extras):
            acc.merge(extra)

    # --dims-keep counts components per kernel
    keeps = [min(config.pca_keep, acc.dims) for acc in accs]
    for acc, keep in zip(accs, keeps):
        if keep < config.pca_keep:
            logger.warning("only %d features; keeping %d components instead of %d",
                           acc.dims, keep, config.pca_keep)
    pca = OOCPCAService.eig_kernels(accs, keeps, [p.fingerprint for p in pipelines])
    moments = accs[0] if len(accs) == 1 else MomentAccumulator.concat(accs)
    bundle = ModelBundle(pipelines=pipelines, pca=pca, moments=moments, config=config)
    ModelIOService.save_bundle(bundle, args.model_out)
    logger.info("PCA model over %d rows written to %s", moments.n, args.model_out)
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    """Ridge regression in the PCA space, from stored moments or a second pass."""
    bundle = ModelIOService.load_bundle(args.model)
    lambda_ = args.lambda_
    if lambda_ is None:
        lambda_ = bundle.config.lambda_ if bundle.config is not None else get_settings().RIDGE_LAMBDA

    if args.multi_kernel or args.inputs:
        if not args.labels:
            raise ParameterError("a second training pass needs --labels")
        if args.multi_kernel:
            specs, pipelines = _kernel_inputs(args.multi_kernel, args.chunk_rows, args.bins)
        else:
            specs = [open_matrix(args, path) for path in args.inputs]
            pipelines = bundle.pipelines
        labels = HistIOService.read_labels(args.labels)
        ridge = OOCPCAService.two_stage_multikernel(specs, pipelines, bundle.pca, labels,
                                                    lambda_, args.threads)
    else:
        if bundle.moments is None or bundle.moments.n_labeled == 0:
            raise ValidationError("model has no label moments; rerun pca-fit with --labels "
                                  "or pass --labels with the training matrices")
        ridge = OOCPCAService.ridge_after_pca(bundle.moments, bundle.pca, lambda_)

    bundle.ridge = ridge
    out = args.model_out or args.model
    ModelIOService.save_bundle(bundle, out)
    logger.info("trained %d-class ridge model (lambda=%g) into %s", ridge.classes, lambda_, out)
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    """Score matrices with a trained model, one input per kernel."""
    bundle = ModelIOService.load_bundle(args.model)
    if bundle.ridge is None:
        raise ValidationError(f"{args.model} has no trained ridge model; run train first")
    if len(args.inputs) != len(bundle.pipelines):
        raise ParameterError(f"model has {len(bundle.pipelines)} kernels, got {len(args.inputs)} inputs")
    specs = [open_matrix(args, path) for path in args.inputs]
    scores = OOCPCAService.predict_stream(specs, bundle.pipelines, bundle.ridge, bundle.pca, args.threads)
    HistIOService.write_array(scores, args.out, args.out_format)
    logger.info("wrote %dx%d scores to %s", scores.shape[0], scores.shape[1], args.out)
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    """Shift per-class scores so their rank-th highest values agree."""
    scores = HistIOService.read_array(args.scores, args.format)
    calibrated = OOCPCAService.calibrate_scores(scores, args.rank)
    HistIOService.write_array(calibrated, args.out, args.out_format)
    return 0


# ============================================================================
# REGISTRATION
# ============================================================================

def register(sub: argparse._SubParsersAction, parent: argparse.ArgumentParser,
             settings: Settings) -> None:
    """Add the learning subcommands."""
    p_pca = sub.add_parser("pca-fit", parents=[parent],
                           help="Accumulate feature moments and fit an out-of-core PCA.")
    p_pca.add_argument("input", nargs="?", help="Training histogram matrix")
    p_pca.add_argument("--multi-kernel", help="Multi-kernel configuration file")
    p_pca.add_argument("--labels", help="Labels or class ids aligned with the training rows")
    p_pca.add_argument("--config", help="Pipeline configuration (key=value lines)")
    p_pca.add_argument("--method", choices=[m.value for m in EmbeddingMethod], default=None)
    p_pca.add_argument("--terms", type=int, default=None, help="Series terms N")
    p_pca.add_argument("--dims-keep", type=int, default=None, help="Components kept after PCA, per kernel")
    p_pca.add_argument("--oversample", type=int, default=None,
                       help=f"RF dimension as a multiple of --dims-keep (default: {settings.OVERSAMPLE})")
    p_pca.add_argument("--rf-dims", type=int, default=None, help="Explicit RF dimension of the moment pass")
    p_pca.add_argument("--no-rf", action="store_true", help="Learn on the chi2 embedding itself")
    p_pca.add_argument("--gamma", type=float, default=None)
    p_pca.add_argument("--seed", type=int, default=None)
    p_pca.add_argument("--lambda", dest="lambda_", type=float, default=None,
                       help="Ridge lambda recorded for the train step")
    p_pca.add_argument("--include-unlabeled", nargs="+", metavar="MATRIX",
                       help="Unlabeled matrices (one per kernel) pooled into the PCA moments")
    p_pca.add_argument("--model-out", required=True, help="Output model file")
    p_pca.set_defaults(handler=_cmd_pca_fit)

    p_train = sub.add_parser("train", parents=[parent], help="Train ridge regression after PCA.")
    p_train.add_argument("--model", required=True, help="Model file from pca-fit")
    p_train.add_argument("--lambda", dest="lambda_", type=float, default=None,
                         help="Ridge lambda (default: the model's configuration)")
    p_train.add_argument("--multi-kernel", help="Rebuild pipelines from this configuration for a second pass")
    p_train.add_argument("--inputs", nargs="+", metavar="MATRIX",
                         help="Training matrices (one per kernel) for a second pass")
    p_train.add_argument("--labels", help="Labels for the second pass")
    p_train.add_argument("--model-out", help="Output model file (default: overwrite --model)")
    p_train.set_defaults(handler=_cmd_train)

    p_predict = sub.add_parser("predict", parents=[parent], help="Score histograms with a trained model.")
    p_predict.add_argument("inputs", nargs="+", help="Matrices to score, one per kernel")
    p_predict.add_argument("--model", required=True)
    p_predict.add_argument("--out", required=True, help="Output score matrix")
    p_predict.add_argument("--out-format", choices=["csv", "bin"], default=None)
    p_predict.set_defaults(handler=_cmd_predict)

    p_cal = sub.add_parser("calibrate", parents=[parent],
                           help="Make the rank-th highest score equal across classes.")
    p_cal.add_argument("scores", help="Score matrix")
    p_cal.add_argument("--rank", type=int, default=500)
    p_cal.add_argument("--out", required=True)
    p_cal.add_argument("--out-format", choices=["csv", "bin"], default=None)
    p_cal.set_defaults(handler=_cmd_calibrate)
