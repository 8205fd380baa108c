"""
Pydantic schemas for pipeline configuration.
"""

import enum
from pathlib import Path
from typing import Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError

from chi2map.exceptions import ParseError


class EmbeddingMethod(str, enum.Enum):
    """Enumeration of chi2 embeddings."""
    DIRECT = "direct"
    CHEBYSHEV = "chebyshev"


class PipelineConfig(BaseModel):
    """
    Configuration of one ingestion -> embedding -> RF -> PCA -> ridge run.

    Attributes:
        method: Chi2 embedding
        terms: Series terms N per input dimension
        rf_dims: Random Fourier dimension D
        gamma: Gaussian parameter of the RF lifting (2 * gamma = beta)
        seed: RF basis seed
        pca_keep: Dimensions kept after PCA
        lambda_: Ridge regularization (``lambda`` in text form)
        chunk_rows: Rows per streamed chunk
        rf: Lift with random Fourier features; False learns on the chi2
            embedding itself
        paths: Named file paths (input, labels, model, ...)
    """

    model_config = ConfigDict(populate_by_name=True, frozen=True, extra="forbid")

    method: EmbeddingMethod = EmbeddingMethod.DIRECT
    terms: int = Field(5, ge=1)
    rf_dims: int = Field(7000, ge=1)
    gamma: float = Field(0.75, ge=0)
    seed: int = Field(0, ge=0)
    pca_keep: int = Field(7000, ge=1)
    lambda_: float = Field(1.0, ge=0, alias="lambda")
    chunk_rows: int = Field(4096, ge=1)
    rf: bool = True
    paths: dict[str, str] = Field(default_factory=dict)

    def to_text(self) -> str:
        """
        Render the configuration as ``key=value`` lines.

        Returns:
            str: Text that ``from_text`` parses back to an equal config
        """
        lines = [
            f"method={self.method.value}",
            f"terms={self.terms}",
            f"rf_dims={self.rf_dims}",
            f"gamma={self.gamma!r}",
            f"seed={self.seed}",
            f"pca_keep={self.pca_keep}",
            f"lambda={self.lambda_!r}",
            f"chunk_rows={self.chunk_rows}",
            f"rf={'true' if self.rf else 'false'}",
        ]
        lines.extend(f"path.{name}={value}" for name, value in sorted(self.paths.items()))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        """
        Parse ``key=value`` lines produced by ``to_text``.

        Args:
            text: Configuration text; blank lines and ``#`` comments are ignored

        Returns:
            PipelineConfig: Validated configuration

        Raises:
            ParseError: If a line is malformed or a value fails validation
        """
        values: dict[str, object] = {}
        paths: dict[str, str] = {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {raw!r}", row=number)
            key, value = (part.strip() for part in line.split("=", 1))
            if key.startswith("path."):
                paths[key[len("path."):]] = value
            else:
                values[key] = value
        values["paths"] = paths
        try:
            return cls.model_validate(values)
        except PydanticValidationError as error:
            raise ParseError(f"invalid pipeline configuration: {error}") from error


class KernelRecord(BaseModel):
    """
    One kernel of a multi-kernel configuration.

    Attributes:
        path: Matrix file with this kernel's descriptors
        method: Chi2 embedding
        terms: Series terms N
        rf_dims: Random Fourier dimension D
        gamma: Gaussian parameter of the RF lifting
        seed: RF basis seed
    """

    model_config = ConfigDict(frozen=True)

    path: Path
    method: EmbeddingMethod
    terms: int = Field(..., ge=1)
    rf_dims: int = Field(..., ge=1)
    gamma: float = Field(..., gt=0)
    seed: int = Field(..., ge=0)


def read_kernel_config(source: Union[str, Path]) -> list[KernelRecord]:
    """
    Read a multi-kernel configuration file.

    Each non-comment line holds ``path method terms rf_dims gamma seed``,
    separated by whitespace or commas. Relative paths resolve against the
    configuration file's directory.

    Args:
        source: Configuration file path

    Returns:
        list[KernelRecord]: Records in file order

    Raises:
        ParseError: If a record is malformed or the file lists no kernels
    """
    source = Path(source)
    records = []
    for number, raw in enumerate(source.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.replace(",", " ").split()
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields, got {len(fields)}", row=number)
        path = Path(fields[0])
        if not path.is_absolute():
            path = source.parent / path
        try:
            records.append(KernelRecord(
                path=path, method=fields[1], terms=fields[2],
                rf_dims=fields[3], gamma=fields[4], seed=fields[5],
            ))
        except PydanticValidationError as error:
            raise ParseError(f"invalid kernel record: {error}", row=number) from error
    if not records:
        raise ParseError(f"{source} lists no kernels")
    return records
