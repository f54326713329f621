"""Group penalty functions, their dual norms, and blockwise proximal maps.

The penalty is ``P(b) = sum_j |G_j|^{1/gamma_j*} rho(||b_j||_{gamma_j})``.  The
smooth-selection variant adds a second-derivative roughness term inside ``rho``
and is handled in reparametrised coordinates ``b~_j = R_j b_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INF = float("inf")


class UnsupportedPenalty(ValueError):
    pass


def _parse_gamma(g) -> float:
    if isinstance(g, str):
        if g.strip().lower() in ("inf", "infinity", "∞"):
            return INF
        g = float(g)
    return float(g)


def holder_conjugate(gamma) -> float:
    """``gamma*`` with ``1/gamma + 1/gamma* = 1``."""
    g = _parse_gamma(gamma)
    if not g >= 1:
        raise ValueError(f"exponent must be >= 1, got {gamma}")
    if g == 1:
        return INF
    if g == INF:
        return 1.0
    return g / (g - 1.0)


def group_scaling(size: int, gamma) -> float:
    """``size^{1/gamma*}``: 1 for gamma=1, sqrt(size) for 2, size for inf."""
    gs = holder_conjugate(gamma)
    return 1.0 if gs == INF else float(size) ** (1.0 / gs)


def lp_norm(x, gamma) -> float:
    g = _parse_gamma(gamma)
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    if g == INF:
        return float(np.abs(x).max())
    if g == 1:
        return float(np.abs(x).sum())
    if g == 2:
        return float(np.sqrt(x @ x))
    m = np.abs(x).max()
    if m == 0:
        return 0.0
    return float(m * ((np.abs(x) / m) ** g).sum() ** (1.0 / g))


@dataclass(frozen=True)
class Rho:
    """Convex outer function: ``identity`` (``rho(t)=t``) or ``quadratic`` (``t + kappa t^2``)."""

    kind: str = "identity"
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "quadratic"):
            raise ValueError(f"unknown rho {self.kind!r}")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")

    def __call__(self, t):
        return t + self.kappa * t * t if self.kind == "quadratic" else t

    def derivative(self, t):
        return 1.0 + 2.0 * self.kappa * t if self.kind == "quadratic" else 1.0

    @property
    def slope_at_zero(self) -> float:
        return 1.0

    def to_json(self):
        return "identity" if self.kind == "identity" else {"quadratic": self.kappa}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, Rho):
            return obj
        if obj in (None, "identity"):
            return cls()
        if isinstance(obj, dict) and set(obj) == {"quadratic"}:
            return cls("quadratic", float(obj["quadratic"]))
        raise ValueError(f"unknown rho {obj!r}")


@dataclass(frozen=True, eq=False)
class GroupStructure:
    """Index sets over ``n_coords`` coordinates, possibly overlapping."""

    groups: tuple
    n_coords: int

    def __post_init__(self):
        gs = tuple(np.asarray(g, dtype=int) for g in self.groups)
        for j, g in enumerate(gs):
            if g.size == 0:
                raise ValueError(f"group {j} is empty")
            if g.min() < 0 or g.max() >= self.n_coords:
                raise ValueError(f"group {j} indexes outside 0..{self.n_coords - 1}")
            if np.unique(g).size != g.size:
                raise ValueError(f"group {j} repeats a coordinate")
        object.__setattr__(self, "groups", gs)

    @classmethod
    def contiguous(cls, p: int, d: int) -> "GroupStructure":
        return cls(tuple(np.arange(j * d, (j + 1) * d) for j in range(p)), p * d)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups])

    @property
    def overlap_map(self) -> dict:
        out = {}
        for j, g in enumerate(self.groups):
            for k in g:
                out.setdefault(int(k), []).append(j)
        return out

    @property
    def latent_dim(self) -> int:
        return int(self.sizes.sum())

    @property
    def overlapping(self) -> bool:
        return self.latent_dim != np.unique(np.concatenate(self.groups)).size

    @property
    def covers(self) -> bool:
        return np.unique(np.concatenate(self.groups)).size == self.n_coords


@dataclass(frozen=True, eq=False)
class PenaltySpec:
    """GPF configuration.

    ``lam`` multiplies every group unless ``per_group_lambda`` is given, in
    which case group ``j`` carries ``per_group_lambda[j]`` instead.
    """

    structure: GroupStructure
    gammas: tuple
    lam: float = 0.0
    rho: Rho = field(default_factory=Rho)
    per_group_lambda: tuple | None = None

    def __post_init__(self):
        gammas = self.gammas
        if np.isscalar(gammas) or isinstance(gammas, str):
            gammas = [gammas] * len(self.structure.groups)
        gammas = tuple(_parse_gamma(g) for g in gammas)
        if len(gammas) != len(self.structure.groups):
            raise ValueError("need one exponent per group")
        for g in gammas:
            holder_conjugate(g)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "rho", Rho.from_json(self.rho))
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        if self.per_group_lambda is not None:
            pg = tuple(float(v) for v in self.per_group_lambda)
            if len(pg) != len(gammas) or min(pg) < 0:
                raise ValueError("per_group_lambda needs one nonnegative value per group")
            object.__setattr__(self, "per_group_lambda", pg)

    @classmethod
    def grouped(cls, p, d, gamma=2, lam=0.0, rho="identity", per_group_lambda=None):
        return cls(GroupStructure.contiguous(p, d), gamma, lam, Rho.from_json(rho), per_group_lambda)

    @property
    def n_groups(self) -> int:
        return len(self.gammas)

    @property
    def conjugates(self) -> tuple:
        return tuple(holder_conjugate(g) for g in self.gammas)

    @property
    def scalings(self) -> np.ndarray:
        return np.array([group_scaling(s, g) for s, g in zip(self.structure.sizes, self.gammas)])

    @property
    def group_lambdas(self) -> np.ndarray:
        if self.per_group_lambda is not None:
            return np.array(self.per_group_lambda)
        return np.full(self.n_groups, float(self.lam))

    @property
    def weights(self) -> np.ndarray:
        """Multiplier of ``rho(||b_j||)`` in the objective."""
        return self.group_lambdas * self.scalings

    def with_lambda(self, lam) -> "PenaltySpec":
        return PenaltySpec(self.structure, self.gammas, float(lam), self.rho, None)

    def to_json(self) -> dict:
        out = {
            "rho": self.rho.to_json(),
            "gamma": ["inf" if g == INF else g for g in self.gammas],
            "lambda": self.lam,
            "groups": [g.tolist() for g in self.structure.groups],
        }
        if self.per_group_lambda is not None:
            out["per_group_lambda"] = list(self.per_group_lambda)
        return out

    @classmethod
    def from_json(cls, obj: dict, n_coords: int | None = None) -> "PenaltySpec":
        groups = obj["groups"]
        if n_coords is None:
            n_coords = 1 + max(max(g) for g in groups)
        gam = obj.get("gamma", 2)
        return cls(GroupStructure(tuple(groups), n_coords), gam, float(obj.get("lambda", 0.0)),
                   Rho.from_json(obj.get("rho", "identity")), obj.get("per_group_lambda"))


def _check_len(spec, b):
    b = np.asarray(b, dtype=float)
    if b.shape != (spec.structure.n_coords,):
        raise ValueError(f"coefficient length {b.shape} does not match {spec.structure.n_coords} coordinates")
    return b


def penalty_value(spec: PenaltySpec, b) -> float:
    """``P(b)``; with per-group lambdas, the lambda-weighted sum."""
    b = _check_len(spec, b)
    vals = np.array([spec.rho(lp_norm(b[g], gm)) for g, gm in zip(spec.structure.groups, spec.gammas)])
    if spec.per_group_lambda is not None:
        return float(spec.weights @ vals)
    return float(spec.scalings @ vals)


def weighted_penalty(spec: PenaltySpec, b) -> float:
    """The penalty term as it enters the objective."""
    b = _check_len(spec, b)
    vals = np.array([spec.rho(lp_norm(b[g], gm)) for g, gm in zip(spec.structure.groups, spec.gammas)])
    return float(spec.weights @ vals)


def dual_block_norm(spec: PenaltySpec, v, j: int) -> float:
    """``||v_j||_{gamma_j*}``."""
    v = np.asarray(v, dtype=float)
    return lp_norm(v[spec.structure.groups[j]], spec.conjugates[j])


def threshold_holds(spec: PenaltySpec, v, j: int, lam: float | None = None) -> bool:
    """``||v_j||_{gamma_j*} <= lambda |G_j|^{1/gamma_j*} rho'(0+)``."""
    lam_j = spec.group_lambdas[j] if lam is None else lam
    return dual_block_norm(spec, v, j) <= lam_j * spec.scalings[j] * spec.rho.slope_at_zero


# -- proximal maps --------------------------------------------------------


def project_l1_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_1 <= radius}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    if radius <= 0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    r = np.nonzero(u * k > css - radius)[0][-1]
    theta = (css[r] - radius) / (r + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def project_simplex(w, total: float) -> np.ndarray:
    """Projection onto ``{u >= 0, sum u = total}``."""
    w = np.asarray(w, dtype=float)
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, u.size + 1)
    r = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(w - css[r] / (r + 1.0), 0.0)


def prox_norm(z, gamma, t: float) -> np.ndarray:
    """``argmin_x 0.5||x - z||^2 + t ||x||_gamma`` for gamma in {1, 2, inf}."""
    z = np.asarray(z, dtype=float)
    g = _parse_gamma(gamma)
    if t <= 0:
        return z.copy()
    if g == 2:
        nz = np.sqrt(z @ z)
        return np.zeros_like(z) if nz <= t else (1.0 - t / nz) * z
    if g == 1:
        return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    if g == INF:
        # Moreau: prox of t||.||_inf is z minus projection onto the t-scaled l1 ball
        return z - project_l1_ball(z, t)
    raise UnsupportedPenalty(f"no closed-form prox for gamma = {gamma}; use 1, 2 or inf")


def prox_norm_plus_l2(z, gamma, t: float) -> np.ndarray:
    """Prox of ``t (||x||_gamma + ||x||_2)``: the l2 shrink after the gamma prox.

    Exact because the l2 prox only rescales, and the subdifferential of a norm
    is invariant under positive rescaling of its argument.
    """
    return prox_norm(prox_norm(z, gamma, t), 2, t)


def prox_group(spec: PenaltySpec, z, step: float) -> np.ndarray:
    """``argmin_x 0.5||x - z||^2 + step * sum_j w_j ||x_j||_{gamma_j}`` for disjoint groups."""
    if spec.rho.kind != "identity":
        raise UnsupportedPenalty("closed-form prox only for rho = identity; the solver falls back to subgradient steps")
    if spec.structure.overlapping:
        raise UnsupportedPenalty("overlapping groups: expand to latent coordinates first")
    z = _check_len(spec, z)
    out = z.copy()
    for g, gm, w in zip(spec.structure.groups, spec.gammas, spec.weights):
        out[g] = prox_norm(z[g], gm, step * w)
    return out


# -- subgradient distance (KKT) -------------------------------------------


def _argmax_set(x, rel=1e-9):
    a = np.abs(x)
    m = a.max()
    return a >= m * (1 - rel)


def norm_subgradient_distance(v, x, gamma, c: float) -> float:
    """Euclidean distance from ``v`` to ``c * subdiff ||.||_gamma (x)``."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    g = _parse_gamma(gamma)
    if not np.any(x):
        if g == 2:
            return max(np.sqrt(v @ v) - c, 0.0)
        if g == 1:
            return float(np.sqrt((np.maximum(np.abs(v) - c, 0.0) ** 2).sum()))
        if g == INF:
            r = v - project_l1_ball(v, c)
            return float(np.sqrt(r @ r))
        return max(lp_norm(v, holder_conjugate(g)) - c, 0.0)
    if g == 2:
        r = v - c * x / np.sqrt(x @ x)
        return float(np.sqrt(r @ r))
    if g == 1:
        nz = x != 0
        r = np.where(nz, v - c * np.sign(x), np.maximum(np.abs(v) - c, 0.0))
        return float(np.sqrt(r @ r))
    if g == INF:
        top = _argmax_set(x)
        off = v[~top]
        s = np.sign(x[top])
        w = s * v[top]
        u = project_simplex(w, c)
        return float(np.sqrt(off @ off + ((w - u) ** 2).sum()))
    nx = lp_norm(x, g)
    grad = np.sign(x) * (np.abs(x) / nx) ** (g - 1)
    r = v - c * grad
    return float(np.sqrt(r @ r))


def norm_plus_l2_subgradient_distance(v, x, gamma, c: float) -> float:
    """Distance from ``v`` to ``c * subdiff(||.||_gamma + ||.||_2)(x)``."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    g = _parse_gamma(gamma)
    if np.any(x):
        return norm_subgradient_distance(v - c * x / np.sqrt(x @ x), x, g, c)
    if g == 2:
        return max(np.sqrt(v @ v) - 2 * c, 0.0)
    if g == INF:
        # v in c(B_1 + B_2)  iff  dist_2(v, c B_1) <= c
        r = v - project_l1_ball(v, c)
        return max(np.sqrt(r @ r) - c, 0.0)
    raise UnsupportedPenalty(f"smooth penalty supports gamma in {{2, inf}}, got {gamma}")


# -- smooth-selection variant ---------------------------------------------


@dataclass(frozen=True, eq=False)
class SmoothPenaltySpec:
    """``sum_j sqrt(d) rho(||R_j b_j||_{gamma_j} + sqrt(b_j^T M_j b_j))`` over contiguous groups."""

    factors: object
    gammas: tuple
    lam: float = 0.0
    rho: Rho = field(default_factory=Rho)

    def __post_init__(self):
        p = len(self.factors.R)
        gammas = self.gammas
        if np.isscalar(gammas) or isinstance(gammas, str):
            gammas = [gammas] * p
        gammas = tuple(_parse_gamma(g) for g in gammas)
        if len(gammas) != p:
            raise ValueError("need one exponent per group")
        if min(gammas) < 2:
            raise ValueError("smooth penalty requires gamma_j >= 2 for every group")
        if self.factors.min_eig_R <= 0:
            raise ValueError("R_j must be invertible")
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "rho", Rho.from_json(self.rho))
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")

    @property
    def p(self) -> int:
        return len(self.factors.R)

    @property
    def d(self) -> int:
        return self.factors.R[0].shape[0]

    def tilde_spec(self) -> PenaltySpec:
        """Group structure of the reparametrised problem (prox handles the extra l2 term)."""
        return PenaltySpec.grouped(self.p, self.d, self.gammas, self.lam, self.rho)

    def to_json(self) -> dict:
        return {"rho": self.rho.to_json(), "gamma": ["inf" if g == INF else g for g in self.gammas],
                "lambda": self.lam, "smooth": {"eps_R": self.factors.eps_R}}


def smooth_penalty_value(spec: SmoothPenaltySpec, b, use_regularized: bool = True) -> float:
    """Original-coordinate form.

    ``use_regularized`` takes ``M_j + eps_R I`` (which equals ``R_j^T R_j``) in
    the square-root term, so the value matches the reparametrised form exactly.
    """
    b = np.asarray(b, dtype=float)
    d = spec.d
    if b.shape != (spec.p * d,):
        raise ValueError("coefficient length does not match the smoothing factors")
    Ms = spec.factors.M_reg if use_regularized else spec.factors.M
    total = 0.0
    for j, (R, M, g) in enumerate(zip(spec.factors.R, Ms, spec.gammas)):
        bj = b[j * d:(j + 1) * d]
        total += np.sqrt(d) * spec.rho(lp_norm(R @ bj, g) + np.sqrt(max(bj @ M @ bj, 0.0)))
    return float(total)


def smooth_penalty_value_tilde(spec: SmoothPenaltySpec, b_tilde) -> float:
    """Reparametrised form ``sum_j sqrt(d) rho(||b~_j||_gamma + ||b~_j||_2)``."""
    b_tilde = np.asarray(b_tilde, dtype=float)
    d = spec.d
    total = 0.0
    for j, g in enumerate(spec.gammas):
        x = b_tilde[j * d:(j + 1) * d]
        total += np.sqrt(d) * spec.rho(lp_norm(x, g) + lp_norm(x, 2))
    return float(total)


# -- overlapping groups ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class RecoveryMap:
    """Latent coordinate ``k`` is a copy of original coordinate ``source[k]`` owned by ``owner[k]``."""

    source: np.ndarray
    owner: np.ndarray
    n_coords: int

    def recover(self, b_latent) -> np.ndarray:
        out = np.zeros(self.n_coords)
        np.add.at(out, self.source, np.asarray(b_latent, dtype=float))
        return out

    @property
    def latent_groups(self) -> tuple:
        return tuple(np.flatnonzero(self.owner == j) for j in range(int(self.owner.max()) + 1))


def expand_overlap(structure: GroupStructure, design):
    """Duplicate columns so that every group owns its own copies.

    Returns ``(latent matrix, RecoveryMap)``.  Coordinates outside every group
    are not supported.
    """
    if not structure.covers:
        raise ValueError("groups must cover every coordinate")
    X = np.asarray(getattr(design, "matrix", design), dtype=float)
    if X.shape[1] != structure.n_coords:
        raise ValueError("design width does not match the group structure")
    source = np.concatenate(structure.groups)
    owner = np.concatenate([np.full(g.size, j) for j, g in enumerate(structure.groups)])
    return X[:, source], RecoveryMap(source, owner, structure.n_coords)


def latent_spec(spec: PenaltySpec) -> tuple:
    """Disjoint-group spec on the duplicated coordinates plus its recovery map."""
    source = np.concatenate(spec.structure.groups)
    owner = np.concatenate([np.full(g.size, j) for j, g in enumerate(spec.structure.groups)])
    rec = RecoveryMap(source, owner, spec.structure.n_coords)
    lat = PenaltySpec(GroupStructure(rec.latent_groups, source.size), spec.gammas, spec.lam,
                      spec.rho, spec.per_group_lambda)
    return lat, rec

