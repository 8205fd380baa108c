"""
Pydantic schemas for the model bundle header.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from chi2map.schemas.pipeline_schema import EmbeddingMethod

BUNDLE_VERSION = 1


class ArrayEntry(BaseModel):
    """
    One raw array stored after the header.

    Attributes:
        name: Array name, e.g. ``U_bar`` or ``pipeline0.omega``
        shape: Array shape; data is little-endian f64, row-major
    """

    model_config = ConfigDict(frozen=True)

    name: str
    shape: list[int]

    @property
    def size(self) -> int:
        count = 1
        for extent in self.shape:
            count *= extent
        return count


class PipelineEntry(BaseModel):
    """
    Scalar description of one feature pipeline.

    Arrays (parameters, frequencies, phases) are stored separately.
    """

    model_config = ConfigDict(frozen=True)

    method: EmbeddingMethod
    input_dims: int = Field(..., ge=1)
    terms: int = Field(..., ge=0)
    floor: float = Field(..., ge=0)
    gamma: Optional[float] = None
    seed: Optional[int] = None
    fingerprint: str


class BundleHeader(BaseModel):
    """
    JSON header of a model bundle.

    Attributes:
        version: Bundle layout version
        config: Pipeline configuration text the model was built with
        pipelines: Feature pipelines, in feature-concatenation order
        n: Rows of the PCA moments
        blocks: PCA components per kernel; empty for a single kernel
        n_labeled: Labeled rows of the PCA moments
        lambda_: Ridge regularization, when a ridge model is stored
        arrays: Raw arrays following the header, in file order
    """

    version: int = BUNDLE_VERSION
    config: str = ""
    pipelines: list[PipelineEntry]
    n: int = Field(..., ge=0)
    blocks: list[int] = Field(default_factory=list)
    n_labeled: int = Field(0, ge=0)
    lambda_: Optional[float] = None
    arrays: list[ArrayEntry]
