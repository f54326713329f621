"""Dictionary functions, design expansion and smoothing factors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

FAMILIES = ("step", "polynomial", "bspline")


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class DictionarySpec:
    """``d`` univariate dictionary functions on ``domain``.

    ``bound`` is ``C = sup_k sup_x |Psi_k(x)|``; it is computed for the family
    and checked on a 1000-point grid.
    """

    family: str
    d: int
    domain: tuple = (0.0, 1.0)
    bound: float = field(init=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown dictionary family {self.family!r}; expected one of {FAMILIES}")
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.family == "bspline" and self.d < 4:
            raise ValueError("cubic B-splines need d >= 4")
        a, b = map(float, self.domain)
        if not a < b:
            raise ValueError("domain must satisfy a < b")
        object.__setattr__(self, "domain", (a, b))
        if self.family == "polynomial":
            C = max(1.0, max(abs(a), abs(b)) ** (self.d - 1))
        else:
            C = 1.0
        grid = evaluate_basis(self, np.linspace(a, b, 1000))
        if np.abs(grid).max() > C * (1 + 1e-12):
            raise AssertionError("dictionary bound check failed")
        object.__setattr__(self, "bound", C)

    @property
    def knots(self) -> np.ndarray:
        a, b = self.domain
        interior = np.linspace(a, b, self.d - 2)
        return np.concatenate([[a] * 3, interior, [b] * 3])

    def to_json(self) -> dict:
        return {"family": self.family, "d": self.d, "domain": list(self.domain)}

    @classmethod
    def from_json(cls, obj: dict) -> "DictionarySpec":
        return cls(obj["family"], int(obj["d"]), tuple(obj.get("domain", (0.0, 1.0))))


def evaluate_basis(spec: DictionarySpec, x) -> np.ndarray:
    """``(Psi_1(x), ..., Psi_d(x))``; vectorised over ``x`` (rows)."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    a, b = spec.domain
    if np.any((x < a) | (x > b) | ~np.isfinite(x)):
        bad = x[(x < a) | (x > b) | ~np.isfinite(x)][0]
        raise DomainError(f"x = {bad} outside [{a}, {b}]")
    d = spec.d
    if spec.family == "step":
        k = np.minimum(np.floor((x - a) / (b - a) * d).astype(int), d - 1)
        out = np.zeros((x.size, d))
        out[np.arange(x.size), k] = 1.0
    elif spec.family == "polynomial":
        out = x[:, None] ** np.arange(d)
    else:
        out = BSpline.design_matrix(x, spec.knots, 3).toarray()
    return out[0] if scalar else out


def _basis_second_derivative(spec: DictionarySpec, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = spec.d
    if spec.family == "polynomial":
        k = np.arange(d)
        return k * (k - 1) * x[:, None] ** np.maximum(k - 2, 0)
    if spec.family == "bspline":
        out = np.empty((x.size, d))
        for k in range(d):
            coef = np.zeros(d)
            coef[k] = 1.0
            out[:, k] = BSpline(spec.knots, coef, 3).derivative(2)(x)
        return out
    raise ValueError("step dictionary is not twice differentiable")


@dataclass(frozen=True, eq=False)
class DesignExpansion:
    """``n x (p d)`` matrix whose row ``i`` is ``Psi(X_i)``; group ``j`` owns
    columns ``j*d:(j+1)*d``."""

    matrix: np.ndarray
    p: int
    d: int
    bound: float
    spec: DictionarySpec | None = None
    column_scale: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def groups(self) -> list:
        return [np.arange(j * self.d, (j + 1) * self.d) for j in range(self.p)]

    def block(self, j: int) -> np.ndarray:
        return self.matrix[:, j * self.d:(j + 1) * self.d]

    def f_values(self, b) -> np.ndarray:
        return self.matrix @ np.asarray(b, dtype=float)


def expand_design(ds_or_X, spec: DictionarySpec, standardize: bool = False) -> DesignExpansion:
    """Expand every covariate with the dictionary.

    ``standardize=True`` rescales each non-constant column to unit sample
    standard deviation; the reported bound is then the largest absolute entry.
    """
    X = getattr(ds_or_X, "covariates", ds_or_X)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, p = X.shape
    blocks = []
    for j in range(p):
        try:
            blocks.append(evaluate_basis(spec, X[:, j]))
        except DomainError:
            a, b = spec.domain
            i = int(np.flatnonzero((X[:, j] < a) | (X[:, j] > b) | ~np.isfinite(X[:, j]))[0])
            raise DomainError(
                f"record {i}, covariate x{j + 1}: value {X[i, j]} outside [{a}, {b}]"
            ) from None
    M = np.hstack(blocks) if blocks else np.zeros((n, 0))
    bound = spec.bound
    scale = None
    if standardize:
        sd = M.std(axis=0)
        scale = np.where(sd > 0, sd, 1.0)
        M = M / scale
        bound = float(np.abs(M).max())
    M.setflags(write=False)
    return DesignExpansion(M, p, spec.d, bound, spec, scale)


@dataclass(frozen=True, eq=False)
class SmoothingFactors:
    """Per-group ``M_j`` (second-derivative Gram matrix) and upper-triangular
    ``R_j`` with ``R_j^T R_j = M_j + eps_R I``."""

    M: list
    R: list
    eps_R: float

    @property
    def M_reg(self) -> list:
        return [m + self.eps_R * np.eye(m.shape[0]) for m in self.M]

    @property
    def min_eig_R(self) -> float:
        return float(min(np.abs(np.diag(r)).min() for r in self.R))

    def block_diag(self) -> np.ndarray:
        from scipy.linalg import block_diag
        return block_diag(*self.R)

    def to_csv(self, directory, prefix="group"):
        from pathlib import Path
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for j, (m, r) in enumerate(zip(self.M, self.R)):
            np.savetxt(out / f"{prefix}{j + 1}_M.csv", m, delimiter=",")
            np.savetxt(out / f"{prefix}{j + 1}_R.csv", r, delimiter=",")


def smoothing_matrix(spec: DictionarySpec, n_nodes: int = 32) -> np.ndarray:
    """``M_kl = int Psi_k'' Psi_l''`` by Gauss-Legendre quadrature per knot interval."""
    if spec.family == "step":
        raise ValueError("step dictionary is not twice differentiable")
    a, b = spec.domain
    if spec.family == "bspline":
        breaks = np.unique(spec.knots)
    else:
        breaks = np.array([a, b])
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    M = np.zeros((spec.d, spec.d))
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        half = 0.5 * (hi - lo)
        x = half * nodes + 0.5 * (hi + lo)
        # stay inside the half-open knot interval so the spline piece is the right one
        D2 = _basis_second_derivative(spec, np.clip(x, lo, np.nextafter(hi, lo)))
        M += (D2 * (half * weights)[:, None]).T @ D2
    return 0.5 * (M + M.T)


def smoothing_factors(spec: DictionarySpec, eps_R: float = 1e-8, p: int = 1) -> SmoothingFactors:
    M = smoothing_matrix(spec)
    try:
        L = np.linalg.cholesky(M + eps_R * np.eye(spec.d))
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"factorization of M + eps_R I failed: {exc}") from None
    R = L.T
    return SmoothingFactors([M.copy() for _ in range(p)], [R.copy() for _ in range(p)], eps_R)


def reparametrize_design(design: DesignExpansion, factors: SmoothingFactors) -> DesignExpansion:
    """Right-multiply block ``j`` of every row by ``R_j^{-1}``.

    With ``b_tilde_j = R_j b_j`` the fitted values are unchanged.
    """
    if len(factors.R) != design.p:
        raise ValueError("need one factor per group")
    blocks = []
    for j, R in enumerate(factors.R):
        if np.abs(np.diag(R)).min() <= 0 or np.linalg.cond(R) > 1e15:
            raise ValueError(f"R_{j + 1} is singular")
        # block @ R^{-1} == solve(R^T, block^T)^T
        blocks.append(np.linalg.solve(R.T, design.block(j).T).T)
    M = np.hstack(blocks)
    bound = float(np.abs(M).max()) if M.size else 0.0
    M.setflags(write=False)
    return DesignExpansion(M, design.p, design.d, bound, design.spec, design.column_scale)


def to_original_coefficients(b_tilde, factors: SmoothingFactors) -> np.ndarray:
    """``b_j = R_j^{-1} b_tilde_j`` blockwise."""
    b_tilde = np.asarray(b_tilde, dtype=float)
    d = factors.R[0].shape[0]
    return np.concatenate([
        np.linalg.solve(R, b_tilde[j * d:(j + 1) * d]) for j, R in enumerate(factors.R)
    ])


def to_tilde_coefficients(b, factors: SmoothingFactors) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    d = factors.R[0].shape[0]
    return np.concatenate([R @ b[j * d:(j + 1) * d] for j, R in enumerate(factors.R)])
