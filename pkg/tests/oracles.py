"""Independent numerical references used by the tests."""

import numpy as np



def _norm_subgradient(x, gamma):
    """One subgradient of ``||x_r||_gamma`` for every row ``r``."""
    if gamma == 2:
        nx = np.linalg.norm(x, axis=1, keepdims=True)
        return np.where(nx > 0, x / np.where(nx > 0, nx, 1.0), 0.0)
    if gamma == 1:
        return np.sign(x)
    a = np.abs(x)
    m = a.max(axis=1, keepdims=True)
    top = (a >= m) & (m > 0)
    return np.sign(x) * top / np.maximum(top.sum(axis=1, keepdims=True), 1)


def subgradient_prox(Z, thresholds, gamma, iters=200_000):
    """Rows of ``argmin_x 0.5||x - z||^2 + t ||x||_gamma`` by subgradient steps ``1/k``.

    The objective is 1-strongly convex, so the iterate is a running average of
    ``z - t g_k`` and converges without any projection onto a dual ball.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    T = np.asarray(thresholds, dtype=float).reshape(-1, 1)
    x = Z.copy()
    for k in range(1, iters + 1):
        x -= (x - Z + T * _norm_subgradient(x, gamma)) / k
    return x


def batch_objective(X, ds, spec, B):
    """Penalised objective at every column of ``B`` by direct risk-set sums."""
    X = np.asarray(getattr(X, "matrix", X), dtype=float)
    B = np.asarray(B, dtype=float)
    eta = X @ B
    n = X.shape[0]
    L = np.zeros(B.shape[1])
    for t in ds.failure_times:
        R = ds.time >= t
        D = R & (ds.time == t) & (ds.status == 1)
        m = eta[R].max(axis=0)
        log_s0 = m + np.log(np.exp(eta[R] - m).sum(axis=0)) - np.log(n)
        L += (eta[D] - log_s0).sum(axis=0)
    L /= n
    pen = np.zeros(B.shape[1])
    for g, gm, w in zip(spec.structure.groups, spec.gammas, spec.weights):
        pen += w * np.linalg.norm(B[g], ord=gm, axis=0)
    return -L + pen


def grid_minimum(design, ds, spec, half_width=2.0, step=1e-3):
    """Exhaustive grid minimum of the penalised objective for 1 to 3 coordinates.

    Beyond one coordinate the ``step`` grid over the whole box is out of reach,
    so a 41-point-per-axis pass is refined twice around its minimiser; the
    objective is convex, which makes the refinement safe.
    """
    X = np.asarray(getattr(design, "matrix", design), dtype=float)
    k = X.shape[1]

    def best_of(axes):
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, k).T
        vals = batch_objective(X, ds, spec, mesh)
        i = int(np.argmin(vals))
        return vals[i], mesh[:, i]

    if k == 1:
        return best_of([np.arange(-half_width, half_width + step / 2, step)])
    coarse = np.linspace(-half_width, half_width, 41)
    val, best = best_of([coarse] * k)
    h = coarse[1] - coarse[0]
    for width, st in ((h, h / 20), (h / 20, step)):
        val, best = best_of([np.arange(c - width, c + width + st / 2, st) for c in best])
    return val, best
