"""White-box attacks on a ``Classifier``: golden-ratio search (GRS), bisection,
FGSM, PGD and a simplified Carlini-Wagner L2, plus grid oracles used to check
the bracketing searches.

Every attack takes one flattened frame ``x`` (length ``2N``) and its true label
and returns an ``AttackResult`` whose ``perturbation`` is added to ``x``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import nn

PHI = (math.sqrt(5) - 1) / 2
METHODS = ("grs", "fgsm", "pgd", "bisect", "cw")


@dataclass
class AttackConfig:
    method: str = "grs"
    p_max: float = 0.05
    tol: float = 1e-4
    eps: float = 0.05
    step: float = 0.05
    iters: int = 10
    initial_const: float = 1e-3
    cw_iters: int = 100
    cw_lr: float = 0.01
    prune: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown attack method {self.method!r}; choose from {', '.join(METHODS)}")
        if not 0 < self.tol < self.p_max:
            raise ValueError("need 0 < tol < p_max")
        if self.eps <= 0 or self.step <= 0:
            raise ValueError("eps and step must be positive")
        if self.iters < 1:
            raise ValueError("iters must be at least 1")
        if self.cw_iters < 0:
            raise ValueError("cw_iters must be non-negative")


@dataclass
class AttackResult:
    perturbation: np.ndarray
    eps_star: float
    target_class: int | None
    per_class_eps: np.ndarray
    success: bool
    iterations: int
    wall_time_s: float
    method: str = ""
    # loop count of every bracketing search that ran, keyed by class index
    per_class_iters: dict = field(default_factory=dict)
    # perturbation tried when the attack failed (the full-budget step)
    attempted: np.ndarray | None = None


def _unit(v: np.ndarray) -> np.ndarray | None:
    n = np.linalg.norm(v)
    if n == 0 or not np.isfinite(n):
        return None
    return v / n


def bracket_search(fools, p_max: float, tol: float, split: float = PHI, trace=None) -> tuple[float, int]:
    """Shrink ``[lo, hi] = [0, p_max]`` around the smallest fooling strength.

    ``fools(eps)`` must be false at 0. The probe sits at ``lo + (hi - lo) * split``.
    Returns ``(hi, loop_count)``; ``hi`` always fools. If ``p_max`` itself does
    not fool, returns ``(inf, 0)`` without searching.
    """
    if not fools(p_max):
        return math.inf, 0
    lo, hi = 0.0, p_max
    n = 0
    while hi - lo > tol:
        probe = lo + (hi - lo) * split
        if fools(probe):
            hi = probe
        else:
            lo = probe
        n += 1
        if trace is not None:
            trace.append((lo, hi, probe))
    return hi, n


def _line_attack(model, x, l_true, cfg: AttackConfig, split: float, method: str, trace=None) -> AttackResult:
    t0 = time.perf_counter()
    x = np.asarray(x, dtype=np.float64)
    C = model.num_classes
    per_class = np.full(C, math.inf)
    zero = np.zeros_like(x)
    if nn.predict(model, x) != l_true:
        return AttackResult(zero, 0.0, None, per_class, True, 0, time.perf_counter() - t0, method)

    # one batched backward pass gives the targeted gradient for every class
    grads = nn.grad_input(model, np.repeat(x[None], C, axis=0), np.arange(C))
    dirs = {}
    iters = {}
    best = math.inf
    for k in range(C):
        if k == l_true:
            continue
        r_norm = _unit(grads[k])
        if r_norm is None:
            continue
        dirs[k] = r_norm

        def fools(eps, r_norm=r_norm):
            return nn.predict(model, x - eps * r_norm) != l_true

        upper = min(cfg.p_max, best) if cfg.prune else cfg.p_max
        if upper <= cfg.tol:
            continue
        class_trace = [] if trace is not None else None
        eps_k, n = bracket_search(fools, upper, cfg.tol, split, class_trace)
        per_class[k] = eps_k
        if math.isfinite(eps_k):
            iters[k] = n
            best = min(best, eps_k)
        if trace is not None:
            trace.append((k, r_norm, class_trace))

    total = sum(iters.values())
    if math.isfinite(best):
        # argmin returns the lowest index among ties
        target = int(np.argmin(per_class))
        eps_star = float(per_class[target])
        r = -eps_star * dirs[target]
        return AttackResult(r, eps_star, target, per_class, True, total, time.perf_counter() - t0, method, iters)

    attempted = None
    if dirs:
        # fallback: full budget toward the most probable wrong class
        probs = nn.softmax(nn.forward(model, x))
        k = max(dirs, key=lambda c: (probs[c], -c))
        attempted = -cfg.p_max * dirs[k]
    return AttackResult(
        zero, math.inf, None, per_class, False, total, time.perf_counter() - t0, method, iters, attempted
    )


def grs_attack(model, x, l_true: int, cfg: AttackConfig, trace=None) -> AttackResult:
    """Minimum-strength targeted attack using golden-ratio interval splitting.

    For each wrong class, the normalized targeted gradient is computed once at
    the clean input and the strength along it is searched in ``[0, p_max]``.
    The class with the smallest fooling strength wins.
    """
    return _line_attack(model, x, l_true, cfg, PHI, "grs", trace)


def bisect_attack(model, x, l_true: int, cfg: AttackConfig, trace=None) -> AttackResult:
    return _line_attack(model, x, l_true, cfg, 0.5, "bisect", trace)


def _finish(model, x, l_true, r, eps_star, t0, method, iterations) -> AttackResult:
    success = nn.predict(model, x + r) != l_true
    return AttackResult(
        r,
        eps_star,
        None,
        np.full(model.num_classes, math.inf),
        bool(success),
        iterations,
        time.perf_counter() - t0,
        method,
        attempted=r,
    )


def fgsm_batch(model, X, y, eps: float) -> np.ndarray:
    """Untargeted FGSM on rows of ``X``; returns the adversarial inputs."""
    return X + eps * np.sign(nn.grad_input(model, X, y))


def pgd_batch(model, X, y, eps: float, step: float, iters: int) -> np.ndarray:
    """Untargeted L-inf PGD; the perturbation is clipped to ``[-eps, eps]`` each step."""
    X0 = np.asarray(X, dtype=np.float64)
    D = np.zeros_like(X0)
    for _ in range(iters):
        D = np.clip(D + step * np.sign(nn.grad_input(model, X0 + D, y)), -eps, eps)
    return X0 + D


def fgsm_attack(model, x, l_true: int, cfg: AttackConfig) -> AttackResult:
    t0 = time.perf_counter()
    x = np.asarray(x, dtype=np.float64)
    r = cfg.eps * np.sign(nn.grad_input(model, x, l_true))
    return _finish(model, x, l_true, r, cfg.eps, t0, "fgsm", 1)


def pgd_attack(model, x, l_true: int, cfg: AttackConfig) -> AttackResult:
    t0 = time.perf_counter()
    x = np.asarray(x, dtype=np.float64)
    r = np.zeros_like(x)
    for _ in range(cfg.iters):
        r = np.clip(r + cfg.step * np.sign(nn.grad_input(model, x + r, l_true)), -cfg.eps, cfg.eps)
    return _finish(model, x, l_true, r, cfg.eps, t0, "pgd", cfg.iters)


def _margin_grad(model, X, y):
    """Per-row logit margin ``z_true - max_{k != true} z_k`` and its input gradient."""
    acts, pre = nn._forward_cache(model, X)
    z = acts[-1]
    rows = np.arange(len(y))
    others = z.copy()
    others[rows, y] = -np.inf
    j = np.argmax(others, axis=1)
    d = np.zeros_like(z)
    d[rows, y] = 1.0
    d[rows, j] -= 1.0
    g, _, _ = nn._backward(model, acts, pre, d, need_params=False)
    return z[rows, y] - z[rows, j], g


def _cw_pass(model, X, y, c, cfg):
    n = len(y)
    R = np.zeros_like(X)
    best = np.zeros_like(X)
    best_norm = np.full(n, np.inf)
    for _ in range(cfg.cw_iters):
        margin, g = _margin_grad(model, X + R, y)
        fooled = margin < 0
        norms = np.linalg.norm(R, axis=1)
        better = fooled & (norms < best_norm)
        best[better], best_norm[better] = R[better], norms[better]
        # the hinge term is inactive once the margin is negative
        grad = 2 * R + np.where(fooled, 0.0, c)[:, None] * g
        R = R - cfg.cw_lr * grad
    if cfg.cw_iters:
        fooled = nn.predict(model, X + R) != y
        norms = np.linalg.norm(R, axis=1)
        better = fooled & (norms < best_norm)
        best[better], best_norm[better] = R[better], norms[better]
    return best, best_norm, R


def cw_batch(model, X, y, cfg: AttackConfig):
    """Simplified CW-L2 on rows of ``X``.

    Gradient descent on ``||r||^2 + c * max(margin, 0)`` with ``c`` starting at
    ``initial_const``; rows with no fooling iterate get one more pass with ``c``
    doubled. Returns ``(perturbations, l2_norms, last_iterates, steps)`` where
    the norm is ``inf`` for rows that were never fooled; already misclassified
    rows get a zero perturbation and norm 0.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    pert = np.zeros_like(X)
    norm = np.full(len(y), np.inf)
    last = np.zeros_like(X)
    steps = np.zeros(len(y), dtype=np.int64)
    wrong = nn.predict(model, X) != y
    norm[wrong] = 0.0
    todo = np.flatnonzero(~wrong)
    c = cfg.initial_const
    for _ in range(2):
        if todo.size == 0:
            break
        best, best_norm, R = _cw_pass(model, X[todo], y[todo], c, cfg)
        pert[todo], norm[todo], last[todo] = best, best_norm, R
        steps[todo] += cfg.cw_iters
        todo = todo[~np.isfinite(best_norm)]
        c *= 2
    return pert, norm, last, steps


def cw_attack(model, x, l_true: int, cfg: AttackConfig) -> AttackResult:
    t0 = time.perf_counter()
    x = np.asarray(x, dtype=np.float64)
    pert, norm, last, steps = cw_batch(model, x[None], np.array([l_true]), cfg)
    none = np.full(model.num_classes, math.inf)
    elapsed = time.perf_counter() - t0
    if np.isfinite(norm[0]) and norm[0] > 0 and nn.predict(model, x + pert[0]) == l_true:
        norm[0] = math.inf
    if not np.isfinite(norm[0]):
        return AttackResult(
            np.zeros_like(x), math.inf, None, none, False, int(steps[0]), elapsed, "cw", attempted=last[0]
        )
    return AttackResult(pert[0], float(norm[0]), None, none, True, int(steps[0]), elapsed, "cw", attempted=pert[0])


ATTACKS = {
    "grs": grs_attack,
    "bisect": bisect_attack,
    "fgsm": fgsm_attack,
    "pgd": pgd_attack,
    "cw": cw_attack,
}


def run_attack(model, x, l_true: int, cfg: AttackConfig) -> AttackResult:
    return ATTACKS[cfg.method](model, x, l_true, cfg)


# --- verification oracles ---------------------------------------------------


def _grid_fools(model, x, l_true, direction, p_max, grid_step) -> tuple[np.ndarray, np.ndarray]:
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must have unit L2 norm")
    n = int(math.floor(p_max / grid_step + 1e-9))
    grid = np.arange(n + 1) * grid_step
    preds = nn.predict(model, x[None, :] - grid[:, None] * direction[None, :])
    return grid, preds != l_true


def oracle_min_eps(model, x, l_true: int, direction, p_max: float, grid_step: float) -> float | None:
    """Smallest grid strength ``k * grid_step <= p_max`` at which ``x - eps * direction``
    is misclassified, or ``None``."""
    grid, fooled = _grid_fools(model, np.asarray(x, dtype=np.float64), l_true, direction, p_max, grid_step)
    hits = np.flatnonzero(fooled)
    return float(grid[hits[0]]) if hits.size else None


def is_monotone_ray(model, x, l_true: int, direction, p_max: float, grid_step: float) -> bool:
    """True if misclassification along the ray is false on a grid prefix and true after."""
    _, fooled = _grid_fools(model, np.asarray(x, dtype=np.float64), l_true, direction, p_max, grid_step)
    return bool(np.all(np.diff(fooled.astype(np.int8)) >= 0))
