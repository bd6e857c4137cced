"""One ledger for every unnamed universal constant used by the pipelines.

The source material never pins these numerically; desk-scale experiments
need to relax them to probe the qualitative behaviour.  Every report and
log record embeds the snapshot in force so results stay interpretable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict, replace


@dataclass(frozen=True)
class Constants:
    # planner constants for the quotient (local) pipeline
    c1: float = 1.0          # dimension bound k <= c1*m0 / (sqrt(q) n^(1-a) log-term)
    C: float = 1.0           # C_p <= C*sqrt(q) as used in the planner inequalities
    C2: float = 8.0          # projection-net cardinality base (C2/delta)^(m(n-m))
    c_w2p: float = 1.0       # front constant of the combined k-bound min{...}

    # rotation-sum (global) pipeline constants
    c_prime: float = 1.0     # kappa^(1/3) = sqrt(alpha0) = gamma = c_prime/sqrt(k)
    c_case1: float = 0.1     # lower-bound constant in the two-rotation gain lemma
    c_bc2: float = 1.0       # k <= c_bc2 * min{n^(1/4), (n/log N)^(1/3)}
    c0: float = 1.0          # exceptional-measure exponent constant
    c4: float = 1.0          # combined union-bound constant
    c5: float = 1.0          # net-size condition beta*n^2(1+log n) <= c5*N/k^3
    C_net: float = 8.0       # O(n) net cardinality base (C_net/delta)^dim

    # mean-width module: checked constant in the ell_p-sum bound, deliberately
    # stricter than the planner's relaxed C (the suite fails if it is exceeded)
    cp_bound_C: float = 4.0

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    def override(self, **kwargs: float) -> "Constants":
        unknown = set(kwargs) - set(asdict(self))
        if unknown:
            raise KeyError(f"unknown constants: {sorted(unknown)}")
        return replace(self, **kwargs)


DEFAULTS = Constants()
