"""
Moment, PCA and ridge models for out-of-core learning.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from chi2map.exceptions import AlignmentError, DimensionError
from chi2map.models.base import ArrayModel, frozen_array


@dataclass(repr=False, eq=False)
class MomentAccumulator(ArrayModel):
    """
    Sufficient statistics of a feature stream.

    Attributes:
        H: (D, D) sum of Z^T Z over all rows
        m: (D,) sum of Z^T 1 over all rows
        v: (D, c) sum of Z^T y over labeled rows
        n: Number of rows seen
        y_sum: (c,) sum of the labels
        n_labeled: Number of labeled rows
        m_labeled: (D,) sum of Z^T 1 over labeled rows
    """

    H: np.ndarray
    m: np.ndarray
    v: np.ndarray
    n: int = 0
    y_sum: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_labeled: int = 0
    m_labeled: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.m_labeled is None:
            self.m_labeled = np.zeros_like(self.m)

    @classmethod
    def empty(cls, dims: int, classes: int = 0) -> "MomentAccumulator":
        """
        Create a zero accumulator.

        Args:
            dims: Feature dimension D
            classes: Number of label columns c

        Returns:
            MomentAccumulator: All moments zero
        """
        return cls(
            H=np.zeros((dims, dims)),
            m=np.zeros(dims),
            v=np.zeros((dims, classes)),
            y_sum=np.zeros(classes),
        )

    @classmethod
    def concat(cls, parts: Sequence["MomentAccumulator"]) -> "MomentAccumulator":
        """
        Stack the first-order moments of per-kernel accumulators.

        The accumulators must come from the same rows. H is left empty, since
        the cross-kernel blocks were never accumulated.

        Returns:
            MomentAccumulator: m, v and m_labeled of the concatenated features
        """
        first = parts[0]
        for part in parts[1:]:
            if (part.n, part.n_labeled, part.classes) != (first.n, first.n_labeled, first.classes):
                raise AlignmentError("per-kernel moments were accumulated over different rows")
        return cls(
            H=np.zeros((0, 0)),
            m=np.concatenate([p.m for p in parts]),
            v=np.vstack([p.v for p in parts]),
            n=first.n,
            y_sum=first.y_sum.copy(),
            n_labeled=first.n_labeled,
            m_labeled=np.concatenate([p.m_labeled for p in parts]),
        )

    @property
    def dims(self) -> int:
        return self.m.shape[0]

    @property
    def classes(self) -> int:
        return self.v.shape[1]

    @property
    def mean(self) -> np.ndarray:
        """Feature mean m / n."""
        return self.m / self.n

    @property
    def label_mean(self) -> np.ndarray:
        """Label mean over labeled rows (zeros when nothing is labeled)."""
        if self.n_labeled == 0:
            return np.zeros(self.classes)
        return self.y_sum / self.n_labeled

    @property
    def labeled_mean(self) -> np.ndarray:
        """Feature mean over labeled rows (zeros when nothing is labeled)."""
        if self.n_labeled == 0:
            return np.zeros(self.dims)
        return self.m_labeled / self.n_labeled

    def add(self, Z: np.ndarray, y: Optional[np.ndarray] = None) -> "MomentAccumulator":
        """
        Accumulate one chunk of features.

        Args:
            Z: (rows, D) feature chunk
            y: (rows, c) labels of the chunk, or None for unlabeled rows

        Returns:
            MomentAccumulator: self, for chaining
        """
        if Z.ndim != 2 or Z.shape[1] != self.dims:
            raise DimensionError(f"feature chunk has shape {Z.shape}, expected (*, {self.dims})")
        column_sum = Z.sum(axis=0)
        self.H += Z.T @ Z
        self.m += column_sum
        self.n += Z.shape[0]
        if y is not None:
            y = np.asarray(y, dtype=np.float64).reshape(Z.shape[0], -1)
            if y.shape[1] != self.classes:
                raise AlignmentError(f"label chunk has {y.shape[1]} columns, expected {self.classes}")
            self.v += Z.T @ y
            self.y_sum += y.sum(axis=0)
            self.m_labeled += column_sum
            self.n_labeled += Z.shape[0]
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """
        Add the moments of another accumulator into this one.

        Returns:
            MomentAccumulator: self, for chaining
        """
        if other.dims != self.dims or other.classes != self.classes:
            raise DimensionError("cannot merge accumulators of different shapes")
        self.H += other.H
        self.m += other.m
        self.v += other.v
        self.y_sum += other.y_sum
        self.m_labeled += other.m_labeled
        self.n += other.n
        self.n_labeled += other.n_labeled
        return self

    def centered(self) -> np.ndarray:
        """
        Get the centered second-moment matrix H - m m^T / n, symmetrized.

        Returns:
            np.ndarray: (D, D) symmetric matrix
        """
        Hc = self.H - np.outer(self.m, self.m) / self.n
        return 0.5 * (Hc + Hc.T)


@dataclass(frozen=True, repr=False, eq=False)
class PCAModel(ArrayModel):
    """
    Leading eigenpairs of the centered second-moment matrix.

    A model fitted kernel by kernel has a block-diagonal U_bar: block i maps
    the features of kernel i onto its own ``blocks[i]`` components.

    Attributes:
        U_bar: (D, D_kept) orthonormal eigenvectors, eigenvalues descending
            within each block
        eigvals: (D_kept,) nonnegative eigenvalues
        mean: (D,) feature mean m / n
        n: Rows the moments were computed from
        fingerprints: Fingerprints of the RF bases that produced the features
        blocks: Components per kernel; empty for a single kernel
    """

    U_bar: np.ndarray
    eigvals: np.ndarray
    mean: np.ndarray
    n: int
    fingerprints: tuple[str, ...] = ()
    blocks: tuple[int, ...] = ()

    def __post_init__(self):
        U_bar = frozen_array(self.U_bar, ndim=2)
        eigvals = frozen_array(self.eigvals, ndim=1)
        mean = frozen_array(self.mean, ndim=1)
        if U_bar.shape[1] != eigvals.shape[0] or U_bar.shape[0] != mean.shape[0]:
            raise DimensionError(
                f"inconsistent PCA shapes: U_bar {U_bar.shape}, eigvals {eigvals.shape}, mean {mean.shape}"
            )
        blocks = tuple(int(b) for b in self.blocks)
        if blocks and sum(blocks) != eigvals.shape[0]:
            raise DimensionError(f"blocks {blocks} do not add up to {eigvals.shape[0]} components")
        object.__setattr__(self, "U_bar", U_bar)
        object.__setattr__(self, "eigvals", eigvals)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "fingerprints", tuple(self.fingerprints))
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def block_diagonal(cls, models: Sequence["PCAModel"]) -> "PCAModel":
        """
        Combine per-kernel PCA models into one model of the concatenated features.

        Args:
            models: One model per kernel, fitted on the same rows

        Returns:
            PCAModel: Block-diagonal U_bar; a single model is returned unchanged
        """
        if len(models) == 1:
            return models[0]
        if len({m.n for m in models}) != 1:
            raise AlignmentError("per-kernel PCA models were fitted on different rows")
        return cls(
            U_bar=linalg.block_diag(*[m.U_bar for m in models]),
            eigvals=np.concatenate([m.eigvals for m in models]),
            mean=np.concatenate([m.mean for m in models]),
            n=models[0].n,
            fingerprints=tuple(fp for m in models for fp in m.fingerprints),
            blocks=tuple(m.kept for m in models),
        )

    @property
    def dims(self) -> int:
        """Dimension D of the unprojected features."""
        return self.U_bar.shape[0]

    @property
    def kept(self) -> int:
        """Retained dimension D_kept."""
        return self.U_bar.shape[1]

    @property
    def is_blocked(self) -> bool:
        """True when the model was fitted kernel by kernel over several kernels."""
        return len(self.blocks) > 1

    def project(self, Z: np.ndarray) -> np.ndarray:
        """
        Center with the stored mean and project onto U_bar.

        Args:
            Z: (rows, D) features

        Returns:
            np.ndarray: (rows, D_kept) projected features
        """
        if Z.shape[1] != self.dims:
            raise DimensionError(f"features have {Z.shape[1]} columns, PCA expects {self.dims}")
        return (Z - self.mean) @ self.U_bar


@dataclass(frozen=True, repr=False, eq=False)
class RidgeModel(ArrayModel):
    """
    Ridge regression weights learned in the projected space.

    Attributes:
        w: (D_kept, c) weights on projected features
        bias: (c,) offset applied to raw-feature scores
        lambda_: Regularization strength
        w_orig: (D, c) weights back-projected onto the raw RF features
    """

    w: np.ndarray
    bias: np.ndarray
    lambda_: float
    w_orig: np.ndarray

    def __post_init__(self):
        w = frozen_array(self.w, ndim=2)
        bias = frozen_array(self.bias, ndim=1)
        w_orig = frozen_array(self.w_orig, ndim=2)
        if w.shape[1] != bias.shape[0] or w_orig.shape[1] != bias.shape[0]:
            raise DimensionError(
                f"inconsistent ridge shapes: w {w.shape}, bias {bias.shape}, w_orig {w_orig.shape}"
            )
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "w_orig", w_orig)

    @property
    def classes(self) -> int:
        return self.bias.shape[0]
