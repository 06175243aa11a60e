"""Generative edge models and seeded edge samplers.

Every model is an edge distribution on ``n * n`` slots; sequences are i.i.d.
draws from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .core import EdgeSequence, Partition, ProbabilityMatrix

NORMALIZE_TOL = 1e-3


@dataclass(frozen=True)
class Uniform:
    n: int


@dataclass(frozen=True)
class Sbm:
    partition: Partition
    block_probs: np.ndarray = field(compare=False)


@dataclass(frozen=True)
class Cm:
    p_out: np.ndarray = field(compare=False)
    p_in: np.ndarray = field(compare=False)


@dataclass(frozen=True)
class BlockCm:
    b_out: Partition
    v_out: np.ndarray = field(compare=False)
    b_in: Partition
    v_in: np.ndarray = field(compare=False)


@dataclass(frozen=True)
class Mixture:
    lam: float
    a: "ModelSpec"
    b: "ModelSpec"

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"mixing weight must lie in [0, 1], got {self.lam}")


ModelSpec = Union[Uniform, Sbm, Cm, BlockCm, Mixture]


def _normalized(x: np.ndarray, what: str) -> np.ndarray:
    total = x.sum()
    if np.any(x < 0) or abs(total - 1.0) > NORMALIZE_TOL:
        raise ValueError(f"{what} sums to {total:.6g}; cannot renormalize")
    return x / total


def model_n(spec: ModelSpec) -> int:
    if isinstance(spec, Uniform):
        return spec.n
    if isinstance(spec, Sbm):
        return spec.partition.n
    if isinstance(spec, Cm):
        return len(spec.p_out)
    if isinstance(spec, BlockCm):
        return spec.b_out.n
    if isinstance(spec, Mixture):
        return model_n(spec.a)
    raise TypeError(f"unknown model spec {spec!r}")


def _matrix(spec: ModelSpec) -> np.ndarray:
    if isinstance(spec, Uniform):
        return np.full((spec.n, spec.n), 1.0 / spec.n**2)
    if isinstance(spec, Sbm):
        b = spec.partition.block_of
        q = np.asarray(spec.block_probs, dtype=float)[np.ix_(b, b)]
        return _normalized(q, "SBM edge mass")
    if isinstance(spec, Cm):
        p_out = _normalized(np.asarray(spec.p_out, dtype=float), "p_out")
        p_in = _normalized(np.asarray(spec.p_in, dtype=float), "p_in")
        return np.outer(p_out, p_in)
    if isinstance(spec, BlockCm):
        p_out = np.asarray(spec.v_out, dtype=float)[spec.b_out.block_of]
        p_in = np.asarray(spec.v_in, dtype=float)[spec.b_in.block_of]
        if spec.b_out.n != spec.b_in.n:
            raise ValueError("out and in partitions cover different node counts")
        return _matrix(Cm(p_out, p_in))
    if isinstance(spec, Mixture):
        a, b = _matrix(spec.a), _matrix(spec.b)
        if a.shape != b.shape:
            raise ValueError("mixture components have different node counts")
        return spec.lam * a + (1.0 - spec.lam) * b
    raise TypeError(f"unknown model spec {spec!r}")


def to_probability_matrix(spec: ModelSpec) -> ProbabilityMatrix:
    q = _matrix(spec)
    return ProbabilityMatrix(q / q.sum())


class AliasTable:
    """Vose alias table: O(n) setup, O(1) per draw."""

    def __init__(self, probs):
        probs = np.asarray(probs, dtype=float).ravel()
        k = probs.size
        scaled = probs * (k / probs.sum())
        self.prob = np.ones(k)
        self.alias = np.arange(k)
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        # leftovers are 1 up to rounding
        for i in small + large:
            self.prob[i] = 1.0

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.integers(0, self.prob.size, size=size)
        keep = rng.random(size) < self.prob[idx]
        return np.where(keep, idx, self.alias[idx])


def sample_matrix(q: ProbabilityMatrix, m: int, seed: int) -> EdgeSequence:
    if m < 0:
        raise ValueError("m must be nonnegative")
    rng = np.random.default_rng(seed)
    slots = AliasTable(q.p).draw(rng, m)
    u, v = np.divmod(slots, q.n)
    return EdgeSequence(q.n, np.stack([u, v], axis=1))


def sample(spec: ModelSpec, m: int, seed: int) -> EdgeSequence:
    """``m`` i.i.d. edges drawn from the model; deterministic in ``seed``."""
    return sample_matrix(to_probability_matrix(spec), m, seed)


# Raw block/vertex values of the canned models. Some of them do not sum to
# exactly 1; they are rescaled on construction and the factor is kept in
# CANNED_RAW_TOTAL for manifests.
CANNED_NAMES = (
    "s0_4x32",
    "s1_merge_split",
    "s2_heterogeneous",
    "s1_twoblock",
    "cm_paper",
    "annexF_s0",
    "annexF_s1",
    "annexF_s2",
)
CANNED_RAW_TOTAL: dict[str, float] = {}


def _block_sbm(sizes, diag) -> tuple[Sbm, float]:
    part = Partition.from_sizes(sizes)
    m = np.diag(np.asarray(diag, dtype=float))
    sz = part.sizes.astype(float)
    total = float(np.outer(sz, sz).ravel() @ m.ravel())
    return Sbm(part, m / total), total


def _canned_cm() -> tuple[BlockCm, float]:
    b_out = Partition.from_sizes([96, 24, 6, 2])
    v_out = np.array([0.0054, 0.0109, 0.0217, 0.0435])
    b_in = Partition.from_sizes([2, 6, 24, 96])
    v_in = v_out[::-1].copy()
    total = float(b_out.sizes @ v_out)
    return BlockCm(b_out, v_out / total, b_in, v_in / total), total


def canned(name: str) -> ModelSpec:
    n = 128
    if name in ("s0_4x32", "annexF_s2"):
        spec, total = _block_sbm([32] * 4, [4 / n**2] * 4)
    elif name in ("s1_twoblock", "annexF_s1"):
        spec, total = _block_sbm([64, 64], [2 / n**2] * 2)
    elif name == "annexF_s0":
        spec, total = _block_sbm([128], [1 / n**2])
    elif name == "s1_merge_split":
        spec, total = _block_sbm([6, 3, 3], [0.026, 0.003, 0.003])
    elif name == "s2_heterogeneous":
        spec, total = _block_sbm([128] + [4] * 32, [6e-5] + [7.6e-4] * 32)
    elif name == "cm_paper":
        spec, total = _canned_cm()
    else:
        raise KeyError(f"unknown canned model {name!r}; expected one of {', '.join(CANNED_NAMES)}")
    CANNED_RAW_TOTAL[name] = total
    return spec


def spec_to_json(spec: ModelSpec) -> dict:
    if isinstance(spec, Uniform):
        return {"variant": "uniform", "n": spec.n}
    if isinstance(spec, Sbm):
        return {
            "variant": "sbm",
            "partition": spec.partition.block_of.tolist(),
            "block_probs": np.asarray(spec.block_probs).tolist(),
        }
    if isinstance(spec, Cm):
        return {"variant": "cm", "p_out": list(map(float, spec.p_out)), "p_in": list(map(float, spec.p_in))}
    if isinstance(spec, BlockCm):
        return {
            "variant": "block_cm",
            "b_out": spec.b_out.block_of.tolist(),
            "v_out": list(map(float, spec.v_out)),
            "b_in": spec.b_in.block_of.tolist(),
            "v_in": list(map(float, spec.v_in)),
        }
    if isinstance(spec, Mixture):
        return {"variant": "mixture", "lambda": spec.lam, "a": spec_to_json(spec.a), "b": spec_to_json(spec.b)}
    raise TypeError(f"unknown model spec {spec!r}")


def spec_from_json(doc) -> ModelSpec:
    """Inverse of :func:`spec_to_json`; a bare string is taken as a canned name."""
    if isinstance(doc, str):
        return canned(doc)
    variant = doc.get("variant")
    if variant == "canned":
        return canned(doc["name"])
    if variant == "uniform":
        return Uniform(int(doc["n"]))
    if variant == "sbm":
        return Sbm(Partition(doc["partition"]), np.array(doc["block_probs"], dtype=float))
    if variant == "cm":
        return Cm(np.array(doc["p_out"], dtype=float), np.array(doc["p_in"], dtype=float))
    if variant == "block_cm":
        return BlockCm(
            Partition(doc["b_out"]),
            np.array(doc["v_out"], dtype=float),
            Partition(doc["b_in"]),
            np.array(doc["v_in"], dtype=float),
        )
    if variant == "mixture":
        return Mixture(float(doc["lambda"]), spec_from_json(doc["a"]), spec_from_json(doc["b"]))
    raise ValueError(f"unknown model variant {variant!r}")
