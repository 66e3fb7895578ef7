"""
Brute-force reference implementations used to cross-check the fast code paths.

The transport oracle solves the Wasserstein-1 problem as a linear program; the Krum
oracle enumerates every neighbour subset. Both are only practical on tiny inputs.
"""

import itertools
import logging
import time
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel
from scipy.optimize import linprog

from fedcom.aggregation import krum_scores, multi_krum_selection
from fedcom.commitment import wasserstein_1d
from fedcom.errors import EmptyInputError, InvalidArgumentError
from fedcom.model import ModelArch, ParameterVector

logger = logging.getLogger(__name__)

WASSERSTEIN_TOLERANCE = 1e-9


class OracleResult(BaseModel):
    """Outcome of one oracle suite."""

    name: str
    trials: int
    failures: int
    max_error: float = 0.0
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.failures == 0


def transport_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """
    Exact Wasserstein-1 distance between two empirical distributions via the transport LP.

    Masses are scaled to integers (|b| per point of a, |a| per point of b) so the simplex
    vertex is exact; the optimum is divided back by |a| * |b|.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    na, nb = len(a), len(b)
    if na == 0 or nb == 0:
        raise EmptyInputError("transport_distance needs two nonempty samples")

    cost = np.abs(a[:, None] - b[None, :]).reshape(-1)
    rows = np.kron(np.eye(na), np.ones(nb))
    cols = np.kron(np.ones(na), np.eye(nb))
    equality = np.vstack([rows, cols])
    targets = np.concatenate([np.full(na, float(nb)), np.full(nb, float(na))])
    result = linprog(cost, A_eq=equality, b_eq=targets, bounds=(0, None), method="highs-ds")
    if not result.success:
        raise RuntimeError(f"Transport LP failed: {result.message}")
    return float(result.fun) / (na * nb)


def brute_force_krum_scores(vectors: np.ndarray, f: int) -> np.ndarray:
    """Krum scores by minimising the distance sum over every (n - f - 1)-subset of the other points."""
    vectors = np.asarray(vectors, dtype=np.float64)
    n = len(vectors)
    size = n - f - 1
    if size < 1:
        raise InvalidArgumentError(f"Need n - f - 1 >= 1, got n={n}, f={f}")
    scores = np.empty(n)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        distances = {j: float(np.linalg.norm(vectors[i] - vectors[j])) for j in others}
        scores[i] = min(sum(distances[j] for j in subset) for subset in itertools.combinations(others, size))
    return scores


def brute_force_krum(vectors: np.ndarray, f: int) -> int:
    scores = brute_force_krum_scores(vectors, f)
    return int(np.argmin(scores))


def brute_force_multi_krum(vectors: np.ndarray, f: int) -> List[int]:
    """Sorted indices of the n - f - 1 lowest brute-force scores."""
    scores = brute_force_krum_scores(vectors, f)
    return sorted(int(i) for i in np.argsort(scores, kind="stable")[: len(vectors) - f - 1])


def _random_multiset(rng: np.random.Generator) -> np.ndarray:
    size = int(rng.integers(1, 7))
    # Half the draws are small integers so ties and repeated values get exercised.
    if rng.random() < 0.5:
        return rng.integers(-3, 4, size=size).astype(np.float64)
    return rng.normal(0.0, 2.0, size=size)


def check_wasserstein(trials: int = 500, seed: int = 0) -> OracleResult:
    """Compare wasserstein_1d against the transport LP on random multisets of size <= 6."""
    rng = np.random.default_rng(seed)
    started = time.perf_counter()
    failures = 0
    max_error = 0.0
    for trial in range(trials):
        a, b = _random_multiset(rng), _random_multiset(rng)
        error = abs(wasserstein_1d(a, b) - transport_distance(a, b))
        max_error = max(max_error, error)
        if error > WASSERSTEIN_TOLERANCE:
            failures += 1
            logger.warning(f"Wasserstein trial {trial}: |error|={error:.3e} for a={a.tolist()}, b={b.tolist()}")
    return OracleResult(
        name="wasserstein", trials=trials, failures=failures, max_error=max_error,
        seconds=time.perf_counter() - started,
    )


def _as_updates(vectors: np.ndarray) -> List[ParameterVector]:
    # LR with one input and two classes has exactly four parameters.
    arch = ModelArch(input_dim=1, class_count=2)
    return [ParameterVector(arch=arch, values=row) for row in vectors]


def check_krum(trials: int = 200, seed: int = 0) -> OracleResult:
    """Compare Krum and Multi-Krum selections with brute-force enumeration on 4-8 workers."""
    rng = np.random.default_rng(seed)
    started = time.perf_counter()
    failures = 0
    for trial in range(trials):
        n = int(rng.integers(4, 9))
        f = int(rng.integers(0, n - 1))
        vectors = rng.normal(0.0, 1.0, size=(n, 4))
        updates = _as_updates(vectors)

        fast_krum = int(np.argmin(krum_scores(updates, f)))
        fast_multi = sorted(int(i) for i in multi_krum_selection(updates, f))
        if fast_krum != brute_force_krum(vectors, f) or fast_multi != brute_force_multi_krum(vectors, f):
            failures += 1
            logger.warning(f"Krum trial {trial}: n={n}, f={f} disagrees with brute force")
    return OracleResult(name="krum", trials=trials, failures=failures, seconds=time.perf_counter() - started)


def run_oracle_suites(seed: int = 0) -> List[OracleResult]:
    """Run every oracle suite."""
    return [check_wasserstein(seed=seed), check_krum(seed=seed)]
