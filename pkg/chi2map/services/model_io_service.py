"""
Model bundle service.

A bundle stores everything needed to score new histograms: the feature
pipelines (direct parameters and RF bases), the PCA model, the first-order
moments needed to train later, and the ridge weights.

Layout (little-endian)::

    b"CHI2MDL1" | u64 header length | UTF-8 JSON header | raw f64 arrays

The header lists the arrays in file order with their shapes. The D x D
second-moment matrix is not stored.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from chi2map.exceptions import FormatError
from chi2map.models.basis import RFBasis
from chi2map.models.params import ParamVector
from chi2map.models.pca import MomentAccumulator, PCAModel, RidgeModel
from chi2map.schemas.model_schema import ArrayEntry, BundleHeader, PipelineEntry
from chi2map.schemas.pipeline_schema import PipelineConfig
from chi2map.services.pipeline_service import FeaturePipeline

logger = logging.getLogger(__name__)

BUNDLE_MAGIC = b"CHI2MDL1"
_PREFIX = struct.Struct("<8sQ")
_F64 = np.dtype("<f8")


@dataclass
class ModelBundle:
    """
    In-memory contents of a model file.

    Attributes:
        pipelines: Feature pipelines in concatenation order
        pca: PCA model of the concatenated features, block-diagonal for several kernels
        moments: First-order moments (m, m_labeled, v, y_sum); H is left empty
        ridge: Ridge model, once trained
        config: Configuration the pipelines were built from
    """

    pipelines: list[FeaturePipeline]
    pca: PCAModel
    moments: Optional[MomentAccumulator] = None
    ridge: Optional[RidgeModel] = None
    config: Optional[PipelineConfig] = None


class ModelIOService:
    """Service class for reading and writing model bundles."""

    @staticmethod
    def save_bundle(bundle: ModelBundle, path: Union[str, Path]) -> Path:
        """
        Write a model bundle.

        Args:
            bundle: Bundle contents
            path: Destination

        Returns:
            Path: The written path
        """
        arrays: list[tuple[str, np.ndarray]] = []
        entries = []
        for i, pipeline in enumerate(bundle.pipelines):
            if pipeline.params is not None:
                arrays.append((f"pipeline{i}.k", pipeline.params.k))
            if pipeline.basis is not None:
                arrays.append((f"pipeline{i}.omega", pipeline.basis.omega))
                arrays.append((f"pipeline{i}.phase", pipeline.basis.phase))
            entries.append(PipelineEntry(
                method=pipeline.method,
                input_dims=pipeline.input_dims,
                terms=pipeline.terms,
                floor=pipeline.floor,
                gamma=pipeline.basis.gamma if pipeline.basis is not None else None,
                seed=pipeline.basis.seed if pipeline.basis is not None else None,
                fingerprint=pipeline.fingerprint,
            ))
        arrays += [("U_bar", bundle.pca.U_bar), ("eigvals", bundle.pca.eigvals), ("mean", bundle.pca.mean)]
        if bundle.moments is not None:
            arrays += [("m", bundle.moments.m), ("m_labeled", bundle.moments.m_labeled),
                       ("v", bundle.moments.v), ("y_sum", bundle.moments.y_sum)]
        if bundle.ridge is not None:
            arrays += [("w", bundle.ridge.w), ("bias", bundle.ridge.bias), ("w_orig", bundle.ridge.w_orig)]

        header = BundleHeader(
            config=bundle.config.to_text() if bundle.config is not None else "",
            pipelines=entries,
            n=bundle.pca.n,
            blocks=list(bundle.pca.blocks),
            n_labeled=bundle.moments.n_labeled if bundle.moments is not None else 0,
            lambda_=bundle.ridge.lambda_ if bundle.ridge is not None else None,
            arrays=[ArrayEntry(name=name, shape=list(array.shape)) for name, array in arrays],
        )
        encoded = header.model_dump_json().encode("utf-8")
        path = Path(path)
        with path.open("wb") as handle:
            handle.write(_PREFIX.pack(BUNDLE_MAGIC, len(encoded)))
            handle.write(encoded)
            for _, array in arrays:
                handle.write(np.ascontiguousarray(array, dtype=_F64).tobytes())
        logger.info("wrote model bundle %s (%d arrays)", path, len(arrays))
        return path

    @staticmethod
    def load_bundle(path: Union[str, Path]) -> ModelBundle:
        """
        Read a model bundle written by ``save_bundle``.

        Returns:
            ModelBundle: The stored contents

        Raises:
            FormatError: Bad magic, malformed header, truncated arrays, or a
                pipeline whose arrays no longer match its fingerprint
        """
        path = Path(path)
        raw = path.read_bytes()
        if len(raw) < _PREFIX.size:
            raise FormatError(f"{path}: file too short for a model header")
        magic, length = _PREFIX.unpack_from(raw)
        if magic != BUNDLE_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {BUNDLE_MAGIC!r}")
        try:
            header = BundleHeader.model_validate_json(raw[_PREFIX.size:_PREFIX.size + length])
        except PydanticValidationError as error:
            raise FormatError(f"{path}: malformed model header: {error}") from error

        arrays: dict[str, np.ndarray] = {}
        offset = _PREFIX.size + length
        for entry in header.arrays:
            nbytes = entry.size * _F64.itemsize
            if offset + nbytes > len(raw):
                raise FormatError(f"{path}: array {entry.name} is truncated")
            if entry.size == 0:
                arrays[entry.name] = np.zeros(entry.shape)
            else:
                arrays[entry.name] = np.frombuffer(raw, dtype=_F64, count=entry.size,
                                                   offset=offset).reshape(entry.shape)
            offset += nbytes
        if offset != len(raw):
            raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")

        pipelines = []
        for i, entry in enumerate(header.pipelines):
            params = arrays.get(f"pipeline{i}.k")
            basis = None
            if f"pipeline{i}.omega" in arrays:
                basis = RFBasis(omega=arrays[f"pipeline{i}.omega"], phase=arrays[f"pipeline{i}.phase"],
                                gamma=entry.gamma, seed=entry.seed)
            pipeline = FeaturePipeline(
                method=entry.method, input_dims=entry.input_dims, terms=entry.terms,
                params=ParamVector(params) if params is not None else None,
                basis=basis, floor=entry.floor,
            )
            if pipeline.fingerprint != entry.fingerprint:
                raise FormatError(f"{path}: pipeline {i} does not match its stored fingerprint")
            pipelines.append(pipeline)

        pca = PCAModel(U_bar=arrays["U_bar"], eigvals=arrays["eigvals"], mean=arrays["mean"],
                       n=header.n, fingerprints=tuple(p.fingerprint for p in pipelines),
                       blocks=tuple(header.blocks))
        moments = None
        if "m" in arrays:
            moments = MomentAccumulator(H=np.zeros((0, 0)), m=arrays["m"].copy(), v=arrays["v"].copy(),
                                        n=header.n, y_sum=arrays["y_sum"].copy(),
                                        n_labeled=header.n_labeled,
                                        m_labeled=arrays["m_labeled"].copy())
        ridge = None
        if "w" in arrays:
            ridge = RidgeModel(w=arrays["w"], bias=arrays["bias"], lambda_=header.lambda_,
                               w_orig=arrays["w_orig"])
        config = PipelineConfig.from_text(header.config) if header.config else None
        return ModelBundle(pipelines=pipelines, pca=pca, moments=moments, ridge=ridge, config=config)
