"""Flat parameter layout theta = [A_1..A_P, B_1..B_Q, beta, gamma].

Coefficient matrices are stored row-major, beta component-major (all
columns of eta_1 first). Masked AR/MA entries keep their slot and are
held at exactly zero; samplers and optimizers work on the free slots only.
"""

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from bdarma.core.model.spec import ModelSpec
from bdarma.exceptions import UsageError


class ParamVector(BaseModel):
    """Structured view of one parameter vector.

    Attributes:
        ar: Array (P, J-1, J-1)
        ma: Array (Q, J-1, J-1)
        beta: Array (J-1, r_beta0), row j holds the coefficients of eta_j
        gamma: Array (r_gamma,)
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    ar: np.ndarray
    ma: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray


class ParamLayout:
    """Index bookkeeping for the parameter vector of a ``ModelSpec``."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.dim = d = spec.dim
        self.ar_order = spec.ar_order
        self.ma_order = spec.ma_order
        self.n_beta_columns = spec.mean_design.n_columns
        self.n_gamma = spec.resolved_scale_design.n_columns

        sizes = [
            spec.ar_order * d * d,
            spec.ma_order * d * d,
            d * self.n_beta_columns,
            self.n_gamma,
        ]
        bounds = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.ar_slice = slice(bounds[0], bounds[1])
        self.ma_slice = slice(bounds[1], bounds[2])
        self.beta_slice = slice(bounds[2], bounds[3])
        self.gamma_slice = slice(bounds[3], bounds[4])
        self.size = int(bounds[4])

        free = np.ones(self.size, dtype=bool)
        free[self.ar_slice] = np.tile(spec.ar_mask_matrix().ravel(), spec.ar_order)
        free[self.ma_slice] = np.tile(spec.ma_mask_matrix().ravel(), spec.ma_order)
        self.free = free
        self.free_index = np.flatnonzero(free)

        self.names = self._build_names()
        self.blocks = self._build_blocks()
        self.row_groups = self._build_row_groups()

    def _build_names(self) -> List[str]:
        d = self.dim
        names: List[str] = []
        for label, order in (("A", self.ar_order), ("B", self.ma_order)):
            for p in range(1, order + 1):
                names.extend(
                    f"{label}{p}[{r},{s}]" for r in range(1, d + 1) for s in range(1, d + 1)
                )
        beta_cols = self.spec.mean_design.column_names
        names.extend(f"beta[{j},{col}]" for j in range(1, d + 1) for col in beta_cols)
        names.extend(f"gamma[{col}]" for col in self.spec.resolved_scale_design.column_names)
        return names

    def _build_blocks(self) -> np.ndarray:
        blocks = np.empty(self.size, dtype=object)
        blocks[self.ar_slice] = "ar"
        blocks[self.ma_slice] = "ma"
        blocks[self.beta_slice] = "beta"
        blocks[self.gamma_slice] = "gamma"
        return blocks

    def _build_row_groups(self) -> np.ndarray:
        """Horseshoe group of every slot: eta row for A/B/beta, ``dim`` for gamma."""
        d = self.dim
        groups = np.empty(self.size, dtype=int)
        rows = np.repeat(np.arange(d), d)
        groups[self.ar_slice] = np.tile(rows, self.ar_order)
        groups[self.ma_slice] = np.tile(rows, self.ma_order)
        groups[self.beta_slice] = np.repeat(np.arange(d), self.n_beta_columns)
        groups[self.gamma_slice] = d
        return groups

    @property
    def n_free(self) -> int:
        return int(self.free_index.size)

    @property
    def free_names(self) -> List[str]:
        return [self.names[i] for i in self.free_index]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UsageError(f"no parameter named {name!r}") from None

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    def expand(self, free_values: np.ndarray) -> np.ndarray:
        """Full theta with ``free_values`` in the free slots and zeros elsewhere."""
        theta = np.zeros(self.size)
        theta[self.free_index] = free_values
        return theta

    def restrict(self, theta: np.ndarray) -> np.ndarray:
        return np.asarray(theta, dtype=float)[self.free_index]

    def split(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(ar, ma, beta, gamma) array views of a flat vector."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.size:
            raise UsageError(f"parameter vector has length {theta.shape[-1]}, expected {self.size}")
        lead = theta.shape[:-1]
        d = self.dim
        ar = theta[..., self.ar_slice].reshape(lead + (self.ar_order, d, d))
        ma = theta[..., self.ma_slice].reshape(lead + (self.ma_order, d, d))
        beta = theta[..., self.beta_slice].reshape(lead + (d, self.n_beta_columns))
        gamma = theta[..., self.gamma_slice]
        return ar, ma, beta, gamma

    def unpack(self, theta: np.ndarray) -> ParamVector:
        ar, ma, beta, gamma = self.split(theta)
        return ParamVector.model_construct(ar=ar, ma=ma, beta=beta, gamma=gamma)

    def pack(self, params: ParamVector) -> np.ndarray:
        theta = np.concatenate(
            [
                np.asarray(params.ar, dtype=float).ravel(),
                np.asarray(params.ma, dtype=float).ravel(),
                np.asarray(params.beta, dtype=float).ravel(),
                np.asarray(params.gamma, dtype=float).ravel(),
            ]
        )
        if theta.size != self.size:
            raise UsageError(f"parameter blocks hold {theta.size} values, expected {self.size}")
        return theta

    def check_masked_zero(self, theta: np.ndarray) -> None:
        masked = np.asarray(theta)[..., ~self.free]
        if np.any(masked != 0.0):
            raise UsageError("masked coefficient entries must be exactly zero")

    def __repr__(self) -> str:
        return f"ParamLayout(size={self.size}, free={self.n_free})"


def as_theta(layout: ParamLayout, theta: "np.ndarray | ParamVector") -> np.ndarray:
    """Accept either a flat vector or a ``ParamVector``."""
    if isinstance(theta, ParamVector):
        return layout.pack(theta)
    return np.asarray(theta, dtype=float)
