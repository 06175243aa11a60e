"""Entropy-regularized maximum-likelihood estimation of edge distributions.

For counts ``K`` the estimate is the minimizer of

    f(Q) = sum_{u,v} (Q[u,v] - K[u,v]) * log2 Q[u,v]

over the probability matrices allowed by a constraint set: blockwise-constant
matrices (``Block``/``Free``) or blockwise-constant products ``p_out p_in^T``
(``Configuration``). Both reduce to the weighted simplex problem

    minimize  sum_i (n_i q_i - K_i) log2 q_i   s.t.  sum_i n_i q_i = 1

whose stationarity condition ``ln q_i - c_i / q_i = t`` (``c_i = K_i / n_i``)
is solved per group for a shared level ``t``, with ``t`` then root-found so the
constraint holds. The simplex multiplier in bits is ``-(t + 1) / ln 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numba
import numpy as np

from .core import CountMatrix, Partition, ProbabilityMatrix

LN2 = math.log(2.0)


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Free:
    n: int

    @property
    def partition(self) -> Partition:
        return Partition.singletons(self.n)


@dataclass(frozen=True)
class Block:
    partition: Partition

    @property
    def n(self) -> int:
        return self.partition.n


@dataclass(frozen=True)
class Configuration:
    b_out: Partition
    b_in: Partition

    def __post_init__(self):
        if self.b_out.n != self.b_in.n:
            raise ValueError("out and in partitions cover different node counts")

    @property
    def n(self) -> int:
        return self.b_out.n


ConstraintSpec = Union[Free, Block, Configuration]


def free_parameters(spec: ConstraintSpec) -> int:
    if isinstance(spec, Free):
        return spec.n**2 - 1
    if isinstance(spec, Block):
        return spec.partition.p**2 - 1
    if isinstance(spec, Configuration):
        return spec.b_out.p + spec.b_in.p - 2
    raise TypeError(f"unknown constraint spec {spec!r}")


@dataclass(frozen=True)
class SolverOptions:
    grad_tol: float = 1e-10
    max_iters: int = 200
    min_prob_floor: float = 1e-300

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class SolverResult:
    q_star: ProbabilityMatrix
    multipliers: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    kkt_residual: float = 0.0
    # log-level of each simplex subproblem, reused for warm starts
    levels: np.ndarray = field(default_factory=lambda: np.zeros(0))


# -- scalar machinery -------------------------------------------------------


@numba.njit(cache=True)
def _simplex_kernel(n, c, t, max_iters, floor):
    """Newton on the level ``t`` with an exact per-group inner solve.

    For ``c_i > 0``, ``q_i = c_i e^{-s_i}`` with ``e^s + s = ln c_i - t``; that
    equation is convex and increasing in ``s`` so Newton converges from any
    start. ``c_i = 0`` gives ``q_i = e^t``. The outer iteration is Newton on
    ``ln sum_i n_i q_i(t)``, bracketed by bisection.
    """
    g_count = n.shape[0]
    q = np.empty(g_count)
    total = 0.0
    for i in range(g_count):
        total += n[i]
    # q_i >= e^t forces t <= -ln(total) at the root
    hi = -math.log(total)
    lo = -np.inf
    if not t < hi:
        t = hi
    converged = False
    it = 0
    while it < max_iters:
        it += 1
        s_sum = 0.0
        d_sum = 0.0
        for i in range(g_count):
            ci = c[i]
            if ci <= 0.0:
                qi = max(math.exp(t), floor)
            else:
                y = math.log(ci) - t
                s = math.log(y) if y > 1.0 else y
                for _ in range(100):
                    es = math.exp(s)
                    step = (es + s - y) / (es + 1.0)
                    s -= step
                    if abs(step) <= 4e-16 * max(1.0, abs(s)):
                        break
                qi = max(ci * math.exp(-s), floor)
            q[i] = qi
            s_sum += n[i] * qi
            d_sum += n[i] * qi * qi / (qi + ci)
        g = math.log(s_sum)
        if g > 0.0:
            hi = min(hi, t)
        else:
            lo = max(lo, t)
        if abs(g) <= 1e-15:
            converged = True
            break
        t_new = t - g * s_sum / d_sum
        if not (lo < t_new < hi):
            if lo > -np.inf:
                t_new = 0.5 * (lo + hi)
            else:
                t_new = t - 2.0 * abs(t - hi) - 1.0
        if abs(t_new - t) <= 4e-16 * max(1.0, abs(t)):
            converged = True
            break
        t = t_new
    s_sum = 0.0
    for i in range(g_count):
        s_sum += n[i] * q[i]
    for i in range(g_count):
        q[i] /= s_sum
    return q, t, it, converged


def solve_simplex(
    sizes,
    counts,
    t0: Optional[float] = None,
    tol: float = 1e-10,
    max_iters: int = 200,
    floor: float = 1e-300,
):
    """Minimize ``sum_i (n_i q_i - K_i) log2 q_i`` subject to ``sum_i n_i q_i = 1``.

    ``sizes`` are the positive cell counts ``n_i`` of each group and ``counts``
    the (possibly non-integer) observation totals ``K_i``. Returns
    ``(q, t, iterations, residual, converged)``; ``residual`` is the largest
    stationarity violation in bits, and convergence asks for
    ``residual <= tol * max(1, max_i c_i / q_i)`` since the ``c / q`` term sets
    the rounding floor. Groups held at ``floor`` are left out of the residual.
    """
    n = np.asarray(sizes, dtype=float)
    k = np.asarray(counts, dtype=float)
    if np.any(n <= 0):
        raise ValueError("group sizes must be positive")
    c = k / n
    start = math.inf if t0 is None or not math.isfinite(t0) else float(t0)
    q, t, it, ok = _simplex_kernel(n, c, start, int(max_iters), float(floor))
    ratio = c / q
    r = np.log2(q) + (1.0 - ratio) / LN2 + simplex_multiplier(t)
    # groups pinned at the floor have a true value below double range
    live = q > 2.0 * floor
    residual = float(np.max(np.abs(r[live]))) if live.any() else 0.0
    scale = max(1.0, float(ratio[live].max())) if live.any() else 1.0
    return q, t, it, residual, bool(ok) and residual <= tol * scale


def simplex_multiplier(t: float) -> float:
    return -(t + 1.0) / LN2


# -- objective --------------------------------------------------------------


def objective(q: ProbabilityMatrix, counts: CountMatrix) -> float:
    """``f(Q) = sum (Q - K) log2 Q`` in bits; ``inf`` if some observed slot has ``Q = 0``."""
    if q.n != counts.n:
        raise ValueError(f"dimension mismatch: {q.n} vs {counts.n}")
    p, k = q.p, counts.k
    if np.any((p == 0) & (k > 0)):
        return math.inf
    pos = p > 0
    return float(((p[pos] - k[pos]) * np.log2(p[pos])).sum())


def _block_counts(partition: Partition, counts: np.ndarray) -> np.ndarray:
    b = partition.block_of
    p = partition.p
    flat = np.bincount((b[:, None] * p + b[None, :]).ravel(), weights=counts.ravel(), minlength=p * p)
    return flat.reshape(p, p)


def _warm_level(warm: Optional[SolverResult], i: int = 0) -> Optional[float]:
    if warm is None or warm.levels.size <= i:
        return None
    return float(warm.levels[i])


# -- solvers ----------------------------------------------------------------


def block_minimize(
    partition: Partition,
    counts: CountMatrix,
    opts: SolverOptions = SolverOptions(),
    warm: Optional[SolverResult] = None,
) -> SolverResult:
    """Minimizer over matrices that are constant on every block pair of ``partition``."""
    if partition.n != counts.n:
        raise ValueError(f"dimension mismatch: {partition.n} vs {counts.n}")
    sz = partition.sizes.astype(float)
    cells = np.outer(sz, sz)
    kb = _block_counts(partition, counts.k)
    # groups with equal K/n share a value; solve once per distinct pair
    keys = np.stack([cells.ravel(), kb.ravel()], axis=1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    weight = np.bincount(inverse.ravel(), weights=keys[:, 0])
    mult = weight / uniq[:, 0]
    q_u, t, iters, res, ok = solve_simplex(
        weight, mult * uniq[:, 1], _warm_level(warm), opts.grad_tol, opts.max_iters, opts.min_prob_floor
    )
    values = q_u[inverse.ravel()].reshape(cells.shape)
    b = partition.block_of
    qmat = values[np.ix_(b, b)]
    qmat = qmat / qmat.sum()
    q_star = ProbabilityMatrix(qmat)
    return SolverResult(
        q_star=q_star,
        multipliers=np.array([simplex_multiplier(t)]),
        objective_value=objective(q_star, counts),
        iterations=iters,
        converged=ok,
        kkt_residual=res,
        levels=np.array([t]),
    )


def _marginal_minimize(partition: Partition, marg: np.ndarray, t0, opts: SolverOptions):
    sz = partition.sizes.astype(float)
    kb = np.bincount(partition.block_of, weights=marg, minlength=partition.p)
    q, t, iters, res, ok = solve_simplex(sz, kb, t0, opts.grad_tol, opts.max_iters, opts.min_prob_floor)
    return q[partition.block_of], t, iters, res, ok


def cm_minimize(
    b_out: Partition,
    b_in: Partition,
    counts: CountMatrix,
    opts: SolverOptions = SolverOptions(),
    warm: Optional[SolverResult] = None,
) -> SolverResult:
    """Minimizer over product matrices ``p_out p_in^T`` with blockwise-constant factors.

    The objective separates into one simplex problem on the out-degrees and one
    on the in-degrees, each driven only by the marginal counts.
    """
    if b_out.n != counts.n or b_in.n != counts.n:
        raise ValueError("partition and count matrix sizes differ")
    p_out, t_out, it_out, r_out, ok_out = _marginal_minimize(b_out, counts.k.sum(axis=1), _warm_level(warm, 0), opts)
    p_in, t_in, it_in, r_in, ok_in = _marginal_minimize(b_in, counts.k.sum(axis=0), _warm_level(warm, 1), opts)
    q_star = ProbabilityMatrix(np.outer(p_out, p_in))
    return SolverResult(
        q_star=q_star,
        multipliers=np.array([simplex_multiplier(t_out), simplex_multiplier(t_in)]),
        objective_value=objective(q_star, counts),
        iterations=max(it_out, it_in),
        converged=ok_out and ok_in,
        kkt_residual=max(r_out, r_in),
        levels=np.array([t_out, t_in]),
    )


def minimize(
    spec: ConstraintSpec,
    counts: CountMatrix,
    opts: SolverOptions = SolverOptions(),
    warm_start: Optional[SolverResult] = None,
) -> SolverResult:
    if spec.n != counts.n:
        raise ValueError(f"dimension mismatch: spec has {spec.n} nodes, counts {counts.n}")
    if isinstance(spec, (Free, Block)):
        return block_minimize(spec.partition, counts, opts, warm_start)
    if isinstance(spec, Configuration):
        return cm_minimize(spec.b_out, spec.b_in, counts, opts, warm_start)
    raise TypeError(f"unknown constraint spec {spec!r}")


def max_entropy(spec: ConstraintSpec) -> ProbabilityMatrix:
    return minimize(spec, CountMatrix.zeros(spec.n)).q_star


# -- KKT checks and the dense reference solver ------------------------------


def gradient(q: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Gradient of ``f`` in bits per unit probability."""
    return np.log2(q) + (1.0 - k / q) / LN2


def kkt_residual(spec: ConstraintSpec, result: SolverResult, counts: CountMatrix) -> float:
    """Sup-norm of the Lagrangian gradient at the reported solution.

    Within-block equality multipliers absorb any zero-sum variation of the
    gradient inside a block, so only the block means plus the simplex
    multiplier remain.
    """
    q = result.q_star.p
    if isinstance(spec, (Free, Block)):
        part = spec.partition
        g = gradient(q, counts.k)
        sz = part.sizes.astype(float)
        gbar = _block_counts(part, g) / np.outer(sz, sz)
        return float(np.max(np.abs(gbar + result.multipliers[0])))
    if isinstance(spec, Configuration):
        worst = 0.0
        for part, p, marg, mu in (
            (spec.b_out, q.sum(axis=1), counts.k.sum(axis=1), result.multipliers[0]),
            (spec.b_in, q.sum(axis=0), counts.k.sum(axis=0), result.multipliers[1]),
        ):
            g = gradient(p, marg)
            gbar = np.bincount(part.block_of, weights=g) / part.sizes
            worst = max(worst, float(np.max(np.abs(gbar + mu))))
        return worst
    raise TypeError(f"unknown constraint spec {spec!r}")


def constraint_matrix(spec: ConstraintSpec) -> tuple[np.ndarray, np.ndarray]:
    """Affine constraints ``A vec(Q) = b``: the simplex row, then one row per
    non-representative cell of each block pair."""
    if isinstance(spec, Configuration):
        raise TypeError("the configuration constraint set is not affine")
    part = spec.partition
    n = part.n
    rows = [np.ones(n * n)]
    rep = {}
    b = part.block_of
    for u in range(n):
        for v in range(n):
            key = (b[u], b[v])
            if key not in rep:
                rep[key] = u * n + v
                continue
            row = np.zeros(n * n)
            row[rep[key]] = 1.0
            row[u * n + v] = -1.0
            rows.append(row)
    a = np.array(rows)
    rhs = np.zeros(len(rows))
    rhs[0] = 1.0
    return a, rhs


def kkt_newton_minimize(
    spec: ConstraintSpec,
    counts: CountMatrix,
    opts: SolverOptions = SolverOptions(),
    x0: Optional[np.ndarray] = None,
) -> SolverResult:
    """Damped Newton on the full ``n^2 + s + 1`` Lagrange system.

    Dense and slow; it exists to cross-check the reduced solvers on small
    instances. ``x0`` must be a strictly positive feasible point (defaults to
    the uniform matrix).
    """
    a, rhs = constraint_matrix(spec)
    n = spec.n
    k = counts.k.ravel()
    x = np.full(n * n, 1.0 / (n * n)) if x0 is None else np.asarray(x0, dtype=float).ravel().copy()
    if np.any(x <= 0) or np.max(np.abs(a @ x - rhs)) > 1e-9:
        raise ValueError("starting point must be strictly positive and feasible")

    def f(z):
        return float(((z - k) * np.log2(z)).sum())

    s = a.shape[0]
    lam = np.zeros(s)
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        g = gradient(x, k)
        h = (x + k) / (x * x * LN2)
        kkt = np.block([[np.diag(h), a.T], [a, np.zeros((s, s))]])
        lam = np.linalg.lstsq(a.T, -g, rcond=None)[0]
        if np.max(np.abs(g + a.T @ lam)) <= opts.grad_tol:
            converged = True
            break
        dx = np.linalg.solve(kkt, np.concatenate([-g, rhs - a @ x]))[: n * n]
        neg = dx < 0
        step = 1.0
        if neg.any():
            step = min(1.0, 0.99 * float(np.min(-x[neg] / dx[neg])))
        fx = f(x)
        slope = float(g @ dx)
        while step > 1e-16:
            cand = x + step * dx
            if np.all(cand >= opts.min_prob_floor) and f(cand) <= fx + 1e-4 * step * slope + 1e-13 * abs(fx):
                break
            step *= 0.5
        x = x + step * dx
    x = x / x.sum()
    q_star = ProbabilityMatrix(x.reshape(n, n))
    return SolverResult(
        q_star=q_star,
        multipliers=lam,
        objective_value=objective(q_star, counts),
        iterations=it,
        converged=converged,
        kkt_residual=float(np.max(np.abs(gradient(x, k) + a.T @ lam))),
    )


# -- serialization ----------------------------------------------------------


def constraint_to_json(spec: ConstraintSpec) -> dict:
    if isinstance(spec, Free):
        return {"variant": "free", "n": spec.n}
    if isinstance(spec, Block):
        return {"variant": "block", "partition": spec.partition.block_of.tolist()}
    if isinstance(spec, Configuration):
        return {
            "variant": "configuration",
            "b_out": spec.b_out.block_of.tolist(),
            "b_in": spec.b_in.block_of.tolist(),
        }
    raise TypeError(f"unknown constraint spec {spec!r}")


def _partition_field(doc: dict, key: str, sizes_key: str) -> Partition:
    if key in doc:
        return Partition(doc[key])
    if sizes_key in doc:
        return Partition.from_sizes(doc[sizes_key])
    raise ValueError(f"constraint needs {key!r} or {sizes_key!r}")


def constraint_from_json(doc: dict) -> ConstraintSpec:
    """Inverse of :func:`constraint_to_json`. Partitions may also be given as
    contiguous block sizes (``sizes``, ``out_sizes``, ``in_sizes``)."""
    if not isinstance(doc, dict):
        raise ValueError("constraint document must be a JSON object")
    variant = doc.get("variant")
    if variant == "free":
        return Free(int(doc["n"]))
    if variant == "block":
        return Block(_partition_field(doc, "partition", "sizes"))
    if variant == "configuration":
        return Configuration(_partition_field(doc, "b_out", "out_sizes"), _partition_field(doc, "b_in", "in_sizes"))
    raise ValueError(f"unknown constraint variant {variant!r}")


def result_to_json(result: SolverResult) -> dict:
    return {
        "objective_bits": result.objective_value,
        "iterations": result.iterations,
        "converged": result.converged,
        "kkt_residual": result.kkt_residual,
        "multipliers": result.multipliers.tolist(),
    }
