"""Set selection for decoupling dependent events.

Given a column-stochastic matrix Lambda with zero diagonal, find an index
set J with |J| >= ceil(N/3) such that every column j in J keeps at least
1/3 of its mass outside J.  Existence is guaranteed; we search for a
witness instead of reproving the underlying suppression theorem: greedy
local search with swap moves and restarts, with an exhaustive fallback
(and ground-truth oracle) for N <= 15.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import HeuristicMissError, InternalError, InvalidArgumentError, \
    InvalidWitnessError
from .randcore import SeedStream

MASS_TOL = 1e-9
EXHAUSTIVE_LIMIT = 15


@dataclass(frozen=True)
class DecouplingInstance:
    n: int
    lam: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.lam, dtype=float)
        if a.shape != (self.n, self.n):
            raise InvalidArgumentError("lambda must be N x N")
        if np.any(a < -MASS_TOL) or np.any(a > 1 + MASS_TOL):
            raise InvalidArgumentError("entries must lie in [0, 1]")
        if np.any(np.abs(np.diag(a)) > MASS_TOL):
            raise InvalidArgumentError("diagonal must vanish")
        colsums = a.sum(axis=0)
        if np.any(np.abs(colsums - 1.0) > MASS_TOL):
            j = int(np.argmax(np.abs(colsums - 1.0)))
            raise InvalidArgumentError(
                f"column {j} sums to {colsums[j]}, expected 1")
        object.__setattr__(self, "lam", a)


@dataclass(frozen=True)
class DecouplingResult:
    J: tuple[int, ...]
    ell: int
    min_outside_mass: float

    def __post_init__(self):
        if len(self.J) < self.ell:
            raise InternalError("result violates |J| >= ceil(N/3)")
        if self.min_outside_mass < 1.0 / 3.0 - MASS_TOL:
            raise InternalError("result violates the 1/3 outside-mass bound")


def _outside_mass(lam: np.ndarray, j_mask: np.ndarray) -> float:
    """min over j in J of the column mass outside J."""
    cols = lam[:, j_mask]
    if cols.shape[1] == 0:
        return math.inf
    return float(cols[~j_mask, :].sum(axis=0).min())


def _result(inst: DecouplingInstance, j_idx) -> DecouplingResult:
    mask = np.zeros(inst.n, dtype=bool)
    mask[list(j_idx)] = True
    mass = _outside_mass(inst.lam, mask)
    ell = math.ceil(inst.n / 3)
    return DecouplingResult(tuple(sorted(int(i) for i in j_idx)), ell, mass)


def exhaustive_oracle(inst: DecouplingInstance) -> DecouplingResult:
    """Ground truth for small N: scan subsets by increasing size and return,
    among the valid sets of minimal size, one maximizing the outside mass
    (lexicographically smallest on ties)."""
    if inst.n > EXHAUSTIVE_LIMIT:
        raise InvalidArgumentError(f"exhaustive oracle limited to N <= {EXHAUSTIVE_LIMIT}")
    n = inst.n
    ell = math.ceil(n / 3)
    threshold = 1.0 / 3.0 - MASS_TOL
    for size in range(ell, n + 1):
        best = None
        for j_idx in combinations(range(n), size):
            mask = np.zeros(n, dtype=bool)
            mask[list(j_idx)] = True
            mass = _outside_mass(inst.lam, mask)
            if mass >= threshold and (best is None or mass > best[0] + 1e-15):
                best = (mass, j_idx)
        if best is not None:
            return _result(inst, best[1])
    raise InternalError("no valid decoupling set exists; input invariants must be broken")


def find_decoupling_set(inst: DecouplingInstance, restarts: int = 50,
                        seed: SeedStream = SeedStream(1234)) -> DecouplingResult:
    """Greedy local search over size-ceil(N/3) subsets, maximizing the minimum
    outside mass with best-improvement swaps; exhaustive fallback for N <= 15.

    The returned set is validated before the return, never assumed.
    """
    n = inst.n
    ell = math.ceil(n / 3)
    threshold = 1.0 / 3.0 - MASS_TOL
    lam = inst.lam

    best_mass = -math.inf
    best_set: tuple[int, ...] | None = None
    rng = seed.rng()
    for attempt in range(restarts):
        if attempt == 0:
            current = list(range(ell))
        else:
            current = sorted(rng.choice(n, size=ell, replace=False).tolist())
        mask = np.zeros(n, dtype=bool)
        mask[current] = True
        mass = _outside_mass(lam, mask)
        improved = True
        while improved and mass < 1.0:
            improved = False
            move = None
            move_mass = mass
            for out in current:
                for inc in range(n):
                    if mask[inc]:
                        continue
                    mask[out] = False
                    mask[inc] = True
                    m2 = _outside_mass(lam, mask)
                    mask[inc] = False
                    mask[out] = True
                    if m2 > move_mass + 1e-15:
                        move_mass, move = m2, (out, inc)
            if move is not None:
                out, inc = move
                current.remove(out)
                current.append(inc)
                mask[out] = False
                mask[inc] = True
                mass = move_mass
                improved = True
        if mass > best_mass or (mass == best_mass and best_set is not None
                                and tuple(sorted(current)) < best_set):
            best_mass, best_set = mass, tuple(sorted(current))
        if best_mass >= 1.0 - 1e-15 and attempt >= 1:
            break

    if best_mass >= threshold and best_set is not None:
        return _result(inst, best_set)
    if n <= EXHAUSTIVE_LIMIT:
        return exhaustive_oracle(inst)
    raise HeuristicMissError(
        f"local search found no valid set for N={n}; best mass {best_mass:.6f}")


@dataclass(frozen=True)
class ColumnWitness:
    """Per-column witness: the total kappa_j and the sign-fixed inner products
    <G x_(i,j), z_j> for i != j (all non-negative, summing to kappa_j)."""

    j: int
    kappa_j: float
    inner_products: dict[int, float]


def build_lambda_from_witnesses(witnesses: list[ColumnWitness],
                                n: int) -> DecouplingInstance:
    """Assemble the dependency matrix lambda_ij = <G x_(i,j), z_j> / kappa_j."""
    lam = np.zeros((n, n))
    seen = set()
    for w in witnesses:
        if w.j in seen:
            raise InvalidWitnessError(f"duplicate witness column {w.j}")
        seen.add(w.j)
        if w.kappa_j <= 0:
            raise InvalidWitnessError(f"column {w.j}: kappa_j must be positive")
        total = 0.0
        for i, v in w.inner_products.items():
            if i == w.j:
                raise InvalidWitnessError(f"column {w.j}: diagonal entry supplied")
            if v < -1e-12:
                raise InvalidWitnessError(
                    f"column {w.j}: negative inner product {v} (sign fix violated)")
            lam[i, w.j] = max(v, 0.0) / w.kappa_j
            total += max(v, 0.0)
        if abs(total - w.kappa_j) > 1e-6 * max(1.0, w.kappa_j):
            raise InvalidWitnessError(
                f"column {w.j}: inner products sum to {total}, kappa_j={w.kappa_j}")
        lam[:, w.j] /= lam[:, w.j].sum()
    if seen != set(range(n)):
        raise InvalidWitnessError("witnesses must cover every column exactly once")
    return DecouplingInstance(n, lam)
