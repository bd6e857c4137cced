"""Mean-width functional M* and the lemma checkers built on it.

M*(S) is the spherical average of sup_{y in S} <x, y>; we estimate it by
Monte Carlo over normalized Gaussian directions and never claim exactness
except through the closed forms used as oracles in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bodies
from .bodies import Body, Budget, check_inclusion, dual_exponent
from .errors import InvalidArgumentError, PreconditionError
from .randcore import LinearMap, SeedStream, haar_subspace, sample_gaussian

_CS_CACHE = {"values": None}


def _cs_table(limit: int) -> np.ndarray:
    table = _CS_CACHE["values"]
    if table is None or table.size <= limit:
        size = max(limit + 1, 16384)
        r = np.empty(size, dtype=np.longdouble)
        sqrt_pi = np.sqrt(np.longdouble(
            "3.14159265358979323846264338327950288419716939937510"))
        r[0] = np.longdouble(0)
        r[1] = 1.0 / sqrt_pi
        for s in range(1, size - 1):
            # Gamma((s+2)/2) / Gamma((s+1)/2) = (s/2) / r_s
            r[s + 1] = (np.longdouble(s) / 2.0) / r[s]
        table = np.sqrt(np.longdouble(2)) * r
        _CS_CACHE["values"] = table
    return table


def gaussian_norm_constant(s: int) -> float:
    """c_s = sqrt(2) Gamma((s+1)/2) / Gamma(s/2), the mean length of a standard
    Gaussian vector in R^s.  Always <= sqrt(s).

    Evaluated by an extended-precision recurrence on the Gamma ratio, so the
    result is accurate to a few ulps across s up to 10^4 and beyond.
    """
    if s < 1:
        raise InvalidArgumentError("s must be a positive integer")
    return float(_cs_table(s)[s])


@dataclass(frozen=True)
class MeanWidthEstimate:
    value: float
    std_error: float
    directions: int
    seed: SeedStream


@dataclass
class LemmaCheckReport:
    """Empirical frequency of a lemma's event versus its predicted bound."""

    lemma_id: str
    trials: int
    successes: int
    predicted_bound: float
    empirical_mean: float
    details: Optional[dict] = None

    def to_dict(self):
        d = {"lemma_id": self.lemma_id, "trials": self.trials,
             "successes": self.successes,
             "predicted_bound": float(self.predicted_bound),
             "empirical_mean": float(self.empirical_mean)}
        if self.details:
            d["details"] = self.details
        return d


def mstar(s: Body, directions: int = 4096,
          seed: SeedStream = SeedStream(0)) -> MeanWidthEstimate:
    """Monte Carlo M*(S) over uniform unit directions (normalized Gaussians)."""
    if directions < 1:
        raise InvalidArgumentError("directions must be positive")
    Y = bodies.quasirandom_directions(s.dim, directions, seed)
    vals = s.support_batch(Y)
    value = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(directions)) if directions > 1 else 0.0
    return MeanWidthEstimate(value, stderr, directions, seed)


def check_mean_width_image(s: Body, d: int, sigma: float, trials: int,
                           seed: SeedStream, a: Optional[float] = None,
                           directions: int = 512,
                           t: Optional[float] = None) -> LemmaCheckReport:
    """Gaussian-image mean width: the average of M*(AS) over d x s Gaussian A
    with entry variance sigma^2 equals c_s * sigma * M*(S), and the upward
    deviations beyond t have probability at most exp(-d t^2 / (2 a^2 sigma^2)).

    `a` is the circumscribed Euclidean radius of S; it must be known (exact
    AST radius or caller-supplied).
    """
    if a is None:
        a = s.circumradius_exact()
        if a is None:
            raise PreconditionError(
                "circumscribed radius unknown; pass a= explicitly")
    sdim = s.dim
    cs = gaussian_norm_constant(sdim)
    base = mstar(s, directions=4 * directions, seed=seed.substream(0))
    predicted_mean = cs * sigma * base.value
    if t is None:
        t = 0.5 * a * sigma / math.sqrt(d) * math.sqrt(2.0)
    tail_bound = math.exp(-d * t * t / (2.0 * a * a * sigma * sigma))
    vals = np.empty(trials)
    for i in range(trials):
        sub = seed.substream(i + 1)
        A = sample_gaussian(d, sdim, sigma * sigma, sub)
        img = bodies.LinearImage(A, s)
        vals[i] = mstar(img, directions=directions, seed=sub.substream(1)).value
    emp_mean = float(vals.mean())
    exceed = float(np.mean(vals > predicted_mean + t))
    return LemmaCheckReport(
        lemma_id="mean_width_image", trials=trials,
        successes=int(np.sum(vals <= predicted_mean + t)),
        predicted_bound=tail_bound, empirical_mean=emp_mean,
        details={"predicted_mean": predicted_mean, "t": t,
                 "tail_frequency": exceed, "mstar_S": base.value,
                 "c_s": cs, "sigma": sigma})


def check_shrinking(s: Body, d: int, t: float, mode: str, trials: int,
                    seed: SeedStream, a: Optional[float] = None,
                    budget: Budget = Budget()) -> LemmaCheckReport:
    """Diameter shrinking under random projections or Gaussian maps.

    Projection mode draws Haar d-dimensional subspaces H of R^s and tests
    P_H(S) inside (a sqrt(d/s) + M*(S) + t) B_2, succeeding with probability
    at least 1 - exp(-t^2 s / (2 a^2) + 1); the Gaussian-map variant (entry
    variance 1/s) drops the +1 in the exponent.  Each form is tested against
    its own stated bound.
    """
    if mode not in ("projection", "gaussian"):
        raise InvalidArgumentError("mode must be 'projection' or 'gaussian'")
    if a is None:
        a = s.circumradius_exact()
        if a is None:
            raise PreconditionError(
                "circumscribed radius unknown; pass a= explicitly")
    sdim = s.dim
    m = mstar(s, directions=4096, seed=seed.substream(0)).value
    radius = a * math.sqrt(d / sdim) + m + t
    extra = 1.0 if mode == "projection" else 0.0
    bound = 1.0 - math.exp(-t * t * sdim / (2.0 * a * a) + extra)
    succ = 0
    for i in range(trials):
        sub = seed.substream(i + 1)
        if mode == "projection":
            H = haar_subspace(sdim, d, sub)
            image = bodies.LinearImage(LinearMap.from_array(H.frame.T), s)
        else:
            A = sample_gaussian(d, sdim, 1.0 / sdim, sub)
            image = bodies.LinearImage(A, s)
        exact = image.circumradius_exact()
        if exact is not None:
            ok = exact <= radius
        else:
            rep = check_inclusion(image, bodies.ball(d, radius), budget=budget,
                                  tol=1e-9)
            ok = rep.holds if rep.certification == bodies.GRID_EXHAUSTIVE \
                else rep.measured_ratio <= 1.0
        succ += bool(ok)
    return LemmaCheckReport(
        lemma_id="shrinking", trials=trials, successes=succ,
        predicted_bound=bound, empirical_mean=succ / trials,
        details={"radius": radius, "mstar_S": m, "mode": mode, "a": a, "t": t})


def lp_sum_of_balls(n_blocks: int, k: int, p: float) -> Body:
    """Unit ball of the l_p sum of n_blocks orthogonal copies of B_2^k."""
    dim = n_blocks * k
    parts = []
    for j in range(n_blocks):
        sub = _coordinate_block(dim, j, k)
        parts.append(bodies.EuclideanBall(1.0, dim, sub))
    return bodies.PConvexHull(p, parts)


def _coordinate_block(dim, j, k):
    from .randcore import Subspace
    return Subspace.coordinate(dim, list(range(j * k, (j + 1) * k)))


def cp_mean_width_bound(n_blocks: int, k: int, p: float,
                        directions: int = 4096,
                        seed: SeedStream = SeedStream(7),
                        c_constant: float = 4.0) -> tuple[float, float]:
    """(estimate, bound) where estimate is the Monte Carlo mean width of the
    l_p^N(l_2^k) ball and bound = C sqrt(q) N^(1/q - 1/2) with the checked
    module constant C.  Raises if the estimate ever exceeds the bound.
    """
    if n_blocks < 1 or k < 1:
        raise InvalidArgumentError("N and k must be positive")
    if not (1.0 < p <= 2.0):
        raise InvalidArgumentError("p must lie in (1, 2]")
    q = dual_exponent(p)
    est = mstar(lp_sum_of_balls(n_blocks, k, p), directions=directions,
                seed=seed).value
    bound = c_constant * math.sqrt(q) * n_blocks ** (1.0 / q - 0.5)
    if est > bound:
        raise InternalAssertion(
            f"mean-width estimate {est} exceeded the checked bound {bound}")
    return est, bound


class InternalAssertion(AssertionError):
    """The checked mean-width constant was exceeded; the suite must fail."""
