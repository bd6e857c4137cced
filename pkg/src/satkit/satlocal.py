"""Quotient-side saturation pipeline.

Construction: an n x Nk Gaussian quotient map G applied to the unit ball of
the l_p-sum of N copies of a k-dimensional base norm W.  For a rank-m
orthogonal projection Q, the trial machinery evaluates, block by block,

  * the spill event: the projection onto a block's image plane of the
    p-convex hull of all other block discs stays inside kappa*B;
  * the disc window: the block's image disc traps sqrt(m/n) between
    factors 1/2 and 2 (a singular-value window);
  * the swallowing test: the spill is inside the block disc shrunk by
    1/sqrt(k) (scaled further by epsilon in epsilon-mode), which is the
    inclusion that drives the certificate.

A winner block is one whose swallowing test holds with a certified grid
bound; the certificate then verifies the resulting isomorphism and
complementation constants directly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from itertools import product as iter_product
from typing import Optional

import numpy as np

from . import bodies
from .bodies import Body, Budget, GRID_EXHAUSTIVE, check_inclusion, dual_exponent, \
    polar_grid, quasirandom_directions, section_isomorphism_constant
from .constants import Constants, DEFAULTS
from .decouple import ColumnWitness, DecouplingInstance, build_lambda_from_witnesses
from .errors import CertificateRefusedError, ConfigError, DegenerateInstanceError, \
    InvalidArgumentError, PreconditionError
from .meanwidth import lp_sum_of_balls, mstar
from .randcore import LinearMap, SeedStream, Subspace, sample_gaussian, \
    singular_values

WINNER_PITCH = 1e-3


# ---------------------------------------------------------------------------
# base-norm handling

def make_base_norm(spec: dict, k: int, tol: float = 1e-6) -> Body:
    """Body for W in R^k, normalized so B_2^k inside B_W inside sqrt(k)*B_2^k.

    Presets: {"kind": "linf"}, {"kind": "l1"}, {"kind": "lr", "r": r}, and
    {"kind": "polytope", "vertices": [...]} (vertices are auto-scaled to
    inradius 1 and rejected if the circumradius then exceeds sqrt(k)).
    """
    kind = spec.get("kind")
    if kind == "linf":
        w = bodies.lr_ball(k, math.inf)
    elif kind == "l1":
        w = bodies.lr_ball(k, 1.0, scale=math.sqrt(k))
    elif kind == "lr":
        r = float(spec["r"])
        if r < 1:
            raise ConfigError("lr base norm needs r >= 1")
        scale = 1.0 if r >= 2 else k ** (1.0 / r - 0.5)
        w = bodies.lr_ball(k, r, scale=scale)
    elif kind == "polytope":
        w = bodies.polytope(np.asarray(spec["vertices"], dtype=float))
        inr = _inradius(w)
        if inr <= 0:
            raise ConfigError("polytope base norm is degenerate")
        w = bodies.polytope(np.asarray(spec["vertices"], dtype=float) / inr)
    else:
        raise ConfigError(f"unknown base norm kind {kind!r}")
    _check_norm_window(w, k, lo=1.0, hi=math.sqrt(k), tol=tol)
    return w


def _inradius(w: Body) -> float:
    if w.dim <= 3:
        Y, _ = polar_grid(w.dim, 2 * math.pi / 2048)
    else:
        Y = quasirandom_directions(w.dim, 4096, SeedStream(3, 1))
    return float(w.support_batch(Y).min())


def _check_norm_window(w: Body, k: int, lo: float, hi: float, tol: float):
    if w.dim <= 3:
        Y, _ = polar_grid(w.dim, 2 * math.pi / 2048)
    else:
        Y = quasirandom_directions(w.dim, 4096, SeedStream(3, 2))
    h = w.support_batch(Y)
    if h.min() < lo * (1 - tol) - tol:
        raise ConfigError(
            f"base norm violates the inner inclusion: min support {h.min():.6f} < {lo}")
    rmax = w.circumradius_exact()
    if rmax is None:
        rmax = float(h.max())
    if rmax > hi * (1 + tol):
        raise ConfigError(
            f"base norm violates the outer inclusion: circumradius {rmax:.6f} > {hi}")


# ---------------------------------------------------------------------------
# configuration

@dataclass
class LocalConfig:
    """Parameters of one quotient-side experiment."""

    q: float
    n: int
    m: int
    m0: int
    k: int
    N: int
    kappa: float
    master_seed: int
    epsilon: Optional[float] = None
    base_norm: dict = field(default_factory=lambda: {"kind": "linf"})

    def __post_init__(self):
        if not (self.q > 2):
            raise ConfigError("q must exceed 2 (q = inf allowed)")
        if not (1 <= self.k <= self.m0 <= self.m <= self.n <= self.k * self.N):
            raise ConfigError("need 1 <= k <= m0 <= m <= n <= k*N")
        if not (0 < self.kappa <= 1):
            raise ConfigError("kappa must lie in (0, 1]")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ConfigError("epsilon must be positive when given")
        self.W = make_base_norm(self.base_norm, self.k)

    @property
    def p(self) -> float:
        return dual_exponent(self.q)

    @property
    def dual_q(self) -> float:
        # q such that the p-hull support composes with the l_q norm
        return self.q

    @property
    def seed(self) -> SeedStream:
        return SeedStream(self.master_seed)

    def to_dict(self) -> dict:
        return {"q": self.q, "n": self.n, "m": self.m, "m0": self.m0,
                "k": self.k, "N": self.N, "kappa": self.kappa,
                "master_seed": self.master_seed, "epsilon": self.epsilon,
                "base_norm": self.base_norm}

    @classmethod
    def from_dict(cls, d: dict) -> "LocalConfig":
        q = d["q"]
        q = math.inf if q in ("inf", "Infinity") else float(q)
        return cls(q=q, n=int(d["n"]), m=int(d["m"]), m0=int(d["m0"]),
                   k=int(d["k"]), N=int(d["N"]), kappa=float(d["kappa"]),
                   master_seed=int(d["master_seed"]),
                   epsilon=None if d.get("epsilon") is None else float(d["epsilon"]),
                   base_norm=d.get("base_norm", {"kind": "linf"}))


def desk_local_config(master_seed: int = 0) -> LocalConfig:
    """The standard desk-scale preset (relaxed constants)."""
    n, m, k = 64, 32, 2
    kappa = (1.0 / 8.0) * math.sqrt(m / (n * k))
    return LocalConfig(q=4.0, n=n, m=m, m0=m, k=k, N=40, kappa=kappa,
                       master_seed=master_seed, base_norm={"kind": "linf"})


# ---------------------------------------------------------------------------
# planner

@dataclass
class PlanReport:
    alpha_exponent: float
    k_max: int
    N_chosen: int
    kappa_chosen: float
    feasible: bool
    constraints: list[tuple[str, float, float, bool]]

    def to_dict(self):
        return {"alpha_exponent": self.alpha_exponent, "k_max": self.k_max,
                "N_chosen": self.N_chosen, "kappa_chosen": self.kappa_chosen,
                "feasible": self.feasible,
                "constraints": [
                    {"name": n, "lhs": float(l), "rhs": float(r), "satisfied": bool(s)}
                    for (n, l, r, s) in self.constraints]}


def alpha_exponent(q: float) -> float:
    """(q-2)/(2q+2); tends to 1/2 as q grows."""
    if math.isinf(q):
        return 0.5
    return (q - 2.0) / (2.0 * q + 2.0)


def plan(q: float, n: int, m0: int, epsilon: Optional[float] = None,
         constants: Constants = DEFAULTS) -> PlanReport:
    """Parameter arithmetic: dimension cap, kappa, minimal N, and every
    governing inequality with recomputable sides.

    Infeasible plans (k_max < 1) are reported, not raised.
    """
    if not q > 2:
        raise InvalidArgumentError("q must exceed 2")
    if n < 4:
        raise InvalidArgumentError("n must be at least 4")
    if not (1 <= m0 <= n):
        raise InvalidArgumentError("need 1 <= m0 <= n")
    alpha = alpha_exponent(q)
    logn = math.log(n)
    denom = math.sqrt(q) * n ** (1.0 - alpha) * logn ** ((1.0 - 2.0 * alpha) / 3.0)
    k_real = constants.c1 * m0 / denom
    k_max = max(int(math.floor(k_real)), 0)
    feasible = k_max >= 1
    k = max(k_max, 1)
    eps_factor = epsilon if epsilon is not None else 1.0
    kappa = (eps_factor / 8.0) * math.sqrt(m0 / (n * k))
    kappa = min(kappa, 1.0)
    n_from_net = int(math.ceil(256.0 * n * logn / (kappa * kappa)))
    N = max(n_from_net, int(math.ceil(n / k)))
    cp = constants.C * math.sqrt(q)
    qq = q

    cons = []

    def add(name, lhs, rhs):
        cons.append((name, float(lhs), float(rhs), bool(lhs <= rhs)))

    add("m0_lower(dimension hypothesis)", denom / constants.c1, m0)
    add("k_bound(final)", k, k_real)
    add("half_disc(kappa <= s_min window /sqrt k)",
        kappa, 0.5 * math.sqrt(m0 / n) / math.sqrt(k))
    add("half_disc_doubled(2kappa <= quarter window /sqrt k)",
        2 * kappa, 0.25 * math.sqrt(m0 / n) / math.sqrt(k))
    add("kappa_lower(spill tail scale)",
        cp * (4.0 / math.sqrt(math.pi)) * math.sqrt(k / m0) * N ** (1.0 / qq),
        kappa / 12.0)
    add("diameter(n large enough for the 2B cap)",
        4.0 * cp * cp * N ** (2.0 / qq) * k, n)
    add("net_mass(256 n log n <= kappa^2 N)",
        256.0 * n * logn, kappa * kappa * N)
    add("k_combined_a", k,
        constants.c_w2p * m0 / (math.sqrt(qq * n) * N ** (1.0 / qq)))
    add("k_combined_b", k, constants.c_w2p * m0 * N / (n * n * logn))
    return PlanReport(alpha, k_max, N, kappa, feasible, cons)


# ---------------------------------------------------------------------------
# instance construction

@dataclass
class LocalInstance:
    """Random quotient body and its block decomposition."""

    cfg: LocalConfig
    G: LinearMap
    W: Body
    K_j: list[Body]
    K_p: Body
    D_j: list[Body]
    D_p: Body
    E_j: list[Subspace]

    def K_prime(self, j: int) -> Body:
        return bodies.PConvexHull(self.cfg.p, [b for i, b in enumerate(self.K_j)
                                               if i != j])

    def D_prime(self, j: int) -> Body:
        return bodies.PConvexHull(self.cfg.p, [b for i, b in enumerate(self.D_j)
                                               if i != j])

    def D_I(self, indices) -> Body:
        return bodies.PConvexHull(self.cfg.p, [self.D_j[i] for i in indices])


def assemble_gaussian_blocks(n: int, k: int, n_blocks: int,
                             seed: SeedStream) -> LinearMap:
    """n x (N k) Gaussian matrix with variance 1/n, one substream per block.

    Disjoint block substreams realize the independence of disjoint column
    sets; re-randomizing one block leaves every other block bit-identical.
    """
    cols = []
    for j in range(n_blocks):
        cols.append(sample_gaussian(n, k, 1.0 / n, seed.substream(100 + j)).entries)
    return LinearMap.from_array(np.hstack(cols))


def build_instance(cfg: LocalConfig) -> LocalInstance:
    """Sample G and build the block bodies over its column blocks."""
    g = assemble_gaussian_blocks(cfg.n, cfg.k, cfg.N, cfg.seed)
    return instance_from_matrix(cfg, g)


def instance_from_matrix(cfg: LocalConfig, g: LinearMap) -> LocalInstance:
    n, k, N, p = cfg.n, cfg.k, cfg.N, cfg.p
    w = cfg.W
    K_j, D_j, E_j = [], [], []
    for j in range(N):
        block = LinearMap.from_array(g.entries[:, j * k:(j + 1) * k])
        sv = singular_values(block)
        if sv[-1] < 1e-12:
            raise DegenerateInstanceError(f"block {j} is rank deficient")
        K_j.append(bodies.LinearImage(block, w))
        D_j.append(bodies.EllipsoidImage(block))
        E_j.append(Subspace.from_span(block.entries))
    return LocalInstance(cfg=cfg, G=g, W=w, K_j=K_j,
                         K_p=bodies.PConvexHull(p, K_j),
                         D_j=D_j, D_p=bodies.PConvexHull(p, D_j), E_j=E_j)


# ---------------------------------------------------------------------------
# trial machinery

@dataclass
class TrialOutcome:
    """Per-seed record of which events held, with measured margins."""

    seed: int
    q_digest: str
    spill_flags: list[bool]           # projection of the complementary hull <= kappa
    window_flags: list[bool]          # singular-value window on the block disc
    spill_sup: list[float]            # measured sup of the spill on the block plane
    window_low: list[float]           # s_min / (sqrt(m/n)/2)
    window_high: list[float]          # s_max / (2 sqrt(m/n))
    swallow_certified: list[float]    # certified ratio of the driving inclusion
    winner_j: Optional[int]
    theta1: bool                      # diameter cap failed (D_p not inside 2B)
    thetabar1: bool                   # mean width above twice its predicted level
    mstar_dp: float
    thetabar_threshold: float

    def to_dict(self):
        return {"seed": self.seed, "q_digest": self.q_digest,
                "spill_flags": [bool(x) for x in self.spill_flags],
                "window_flags": [bool(x) for x in self.window_flags],
                "spill_sup": [float(x) for x in self.spill_sup],
                "window_low": [float(x) for x in self.window_low],
                "window_high": [float(x) for x in self.window_high],
                "swallow_certified": [float(x) for x in self.swallow_certified],
                "winner_j": self.winner_j,
                "theta1": bool(self.theta1), "thetabar1": bool(self.thetabar1),
                "mstar_dp": float(self.mstar_dp),
                "thetabar_threshold": float(self.thetabar_threshold)}


def subspace_digest(s: Subspace) -> str:
    return hashlib.sha256(np.ascontiguousarray(s.frame).tobytes()).hexdigest()[:16]


def _block_mats(gt: np.ndarray, k: int, n_blocks: int) -> list[np.ndarray]:
    return [gt[:, j * k:(j + 1) * k] for j in range(n_blocks)]


def _lq_excluding(s_vals: np.ndarray, j: int, q: float) -> np.ndarray:
    """l_q norm over blocks i != j of the per-block support values (N x M)."""
    if s_vals.shape[0] == 1:
        return np.zeros(s_vals.shape[1])
    if math.isinf(q):
        masked = s_vals.copy()
        masked[j, :] = -np.inf
        return masked.max(axis=0)
    powered = s_vals ** q
    total = powered.sum(axis=0) - powered[j, :]
    return np.maximum(total, 0.0) ** (1.0 / q)


def _spill_profile(gt_blocks, frame, j, q, dirs):
    """Support values, on the plane of block j, of the block disc and of
    the p-hull of the other discs.  dirs are unit vectors in plane coords."""
    Z = frame @ dirs  # m x M
    s_vals = np.stack([np.linalg.norm(b.T @ Z, axis=0) for b in gt_blocks])
    return s_vals[j, :], _lq_excluding(s_vals, j, q), Z, s_vals


def _frobenius_radii(gt_blocks, frame):
    return np.array([np.linalg.norm(b.T @ frame) for b in gt_blocks])


def run_trial(cfg: LocalConfig, g: LinearMap, q_sub: Subspace,
              budget: Budget = Budget(), winner_pitch: float = WINNER_PITCH,
              directions: int = 1024) -> TrialOutcome:
    """Evaluate every per-block event for the quotient G restricted to the
    range of the projection, pick the first certified winner block, and
    measure the global diameter/mean-width exceptional events.
    """
    if q_sub.ambient_dim != cfg.n:
        raise PreconditionError("projection ambient dimension mismatch")
    m = q_sub.dim
    if not (cfg.m0 <= m <= cfg.n):
        raise PreconditionError("projection rank outside [m0, n]")
    k, N, q = cfg.k, cfg.N, cfg.q
    gt = q_sub.frame.T @ g.entries
    blocks = _block_mats(gt, k, N)
    target_scale = (cfg.epsilon if cfg.epsilon is not None else 1.0) / math.sqrt(k)
    win_lo = 0.5 * math.sqrt(m / cfg.n)
    win_hi = 2.0 * math.sqrt(m / cfg.n)

    spill_flags, window_flags = [], []
    spill_sup, wlow, whigh, swallow = [], [], [], []
    candidates = []
    dirs_coarse, theta_coarse = _plane_directions(k, budget)
    for j in range(N):
        sv = singular_values(LinearMap.from_array(blocks[j]))
        wlow.append(float(sv[-1] / win_lo))
        whigh.append(float(sv[0] / win_hi))
        window_flags.append(bool(sv[-1] >= win_lo and sv[0] <= win_hi))
        frame = np.linalg.qr(blocks[j])[0]
        dj_vals, spill_vals, _, _ = _spill_profile(blocks, frame, j, q, dirs_coarse)
        sup = float(spill_vals.max())
        spill_sup.append(sup)
        spill_flags.append(bool(sup <= cfg.kappa))
        ratio = spill_vals / np.maximum(target_scale * dj_vals, 1e-300)
        raw = float(ratio.max())
        swallow.append(raw)
        if raw <= 1.05 or k > 3:
            candidates.append(j)

    winner = None
    for j in candidates:
        cert = _swallow_certified(cfg, blocks, j, winner_pitch, target_scale)
        swallow[j] = cert
        if cert <= 1.0 and winner is None:
            winner = j
            break

    inst = instance_from_matrix(cfg, g)
    rep = check_inclusion(inst.D_p, bodies.ball(cfg.n), scale=2.0,
                          budget=budget, tol=1e-9)
    theta1 = not (rep.holds if rep.certification == GRID_EXHAUSTIVE
                  else rep.measured_ratio <= 1.0)
    est = mstar(inst.D_p, directions=directions,
                seed=cfg.seed.substream(9000 + _digest_int(q_sub)))
    thr = thetabar_threshold(cfg)
    return TrialOutcome(
        seed=cfg.master_seed, q_digest=subspace_digest(q_sub),
        spill_flags=spill_flags, window_flags=window_flags,
        spill_sup=spill_sup, window_low=wlow, window_high=whigh,
        swallow_certified=swallow, winner_j=winner,
        theta1=theta1, thetabar1=bool(est.value > thr),
        mstar_dp=est.value, thetabar_threshold=thr)


def _digest_int(s: Subspace) -> int:
    return int(subspace_digest(s)[:8], 16)


def _plane_directions(k: int, budget: Budget):
    if k <= 3:
        return polar_grid(k, budget.grid_pitch)
    return quasirandom_directions(k, budget.points, SeedStream(budget.seed, 5)), math.nan


def _swallow_certified(cfg: LocalConfig, blocks, j: int, pitch: float,
                       target_scale: float) -> float:
    """Certified (for k <= 3) upper bound on the ratio driving the winner test:
    sup over the block plane of h_spill / (target_scale * h_disc)."""
    k, q = cfg.k, cfg.q
    frame = np.linalg.qr(blocks[j])[0]
    if k <= 3:
        dirs, theta = polar_grid(k, pitch)
    else:
        dirs = quasirandom_directions(k, 4096, SeedStream(17, j))
        theta = math.nan
    dj_vals, spill_vals, _, _ = _spill_profile(blocks, frame, j, q, dirs)
    rads = _frobenius_radii(blocks, frame)
    if k <= 3:
        others = np.delete(rads, j)
        if others.size == 0:
            r_spill = 0.0
        elif math.isinf(q):
            r_spill = float(others.max())
        else:
            r_spill = float((others ** q).sum() ** (1.0 / q))
        r_disc = target_scale * rads[j]
        denom = target_scale * dj_vals - r_disc * theta
        if np.any(denom <= 0):
            return math.inf
        return float(((spill_vals + r_spill * theta) / denom).max())
    return float((spill_vals / np.maximum(target_scale * dj_vals, 1e-300)).max())


_CP_CACHE: dict[tuple, float] = {}


def calibrated_cp(n_blocks: int, k: int, p: float) -> float:
    """Empirical C_p: the mean width of the l_p^N(l_2^k) ball rescaled by
    N^(1/2 - 1/q), from a fixed-seed Monte Carlo (cached)."""
    key = (n_blocks, k, round(p, 12))
    if key not in _CP_CACHE:
        q = dual_exponent(p)
        est = mstar(lp_sum_of_balls(n_blocks, k, p), directions=4096,
                    seed=SeedStream(424242)).value
        _CP_CACHE[key] = max(est * n_blocks ** (0.5 - 1.0 / q), 1.0)
    return _CP_CACHE[key]


def thetabar_threshold(cfg: LocalConfig) -> float:
    cp = calibrated_cp(cfg.N, cfg.k, cfg.p)
    return 2.0 * cp * math.sqrt(cfg.k / cfg.n) * cfg.N ** (1.0 / cfg.q)


# ---------------------------------------------------------------------------
# certification

@dataclass
class SaturationCertificate:
    j: int
    isomorphism_bound: float
    complementation_bound: float
    method: str

    def to_dict(self):
        return {"j": self.j, "isomorphism_bound": float(self.isomorphism_bound),
                "complementation_bound": float(self.complementation_bound),
                "method": self.method}


def certify(cfg: LocalConfig, g: LinearMap, q_sub: Subspace, j: int,
            tol: float = 1e-3, budget: Budget = Budget()) -> SaturationCertificate:
    """Verify the section sandwich and the projection bound for block j.

    The driving inclusion puts the projected complementary hull inside the
    block body, so the p-composition bounds both constants by 2^(1/q)
    (1 + epsilon in epsilon-mode).  Exceeding the bound raises, carrying
    the measured values.
    """
    k, N, p = cfg.k, cfg.N, cfg.p
    gt = q_sub.frame.T @ g.entries
    blocks = _block_mats(gt, k, N)
    w = cfg.W
    k_parts = [bodies.LinearImage(LinearMap.from_array(b), w) for b in blocks]
    k_p = bodies.PConvexHull(p, k_parts)
    e_j = Subspace.from_span(blocks[j])
    # the containment side of the sandwich is structural (the block body is
    # one part of the hull), so a light multistart is enough there
    fine = Budget(grid_pitch=tol, multistart=min(budget.multistart, 8),
                  iters=min(budget.iters, 80), points=max(budget.points, 4096),
                  seed=budget.seed)
    comp = check_inclusion(k_p, k_parts[j], restrict_to=e_j, scale=1.0,
                           budget=fine, tol=tol)
    comp_bound = comp.measured_ratio
    iso_lo, iso_hi = section_isomorphism_constant(k_p, e_j, k_parts[j],
                                                  budget=fine, tol=tol)
    if cfg.epsilon is not None:
        limit = 1.0 + cfg.epsilon + tol
    elif math.isinf(cfg.q):
        limit = 1.0 + tol
    else:
        limit = 2.0 ** (1.0 / cfg.q) + tol
    if comp_bound > limit or iso_hi > limit:
        raise CertificateRefusedError(
            f"certificate bound exceeded: iso {iso_hi:.6f}, comp {comp_bound:.6f}, "
            f"limit {limit:.6f}", isomorphism=iso_hi, complementation=comp_bound)
    return SaturationCertificate(
        j=j, isomorphism_bound=iso_hi, complementation_bound=comp_bound,
        method="grid" if k <= 3 else "heuristic")


# ---------------------------------------------------------------------------
# perturbation margins (step II arithmetic)

@dataclass
class PerturbationReport:
    delta: float
    conditions: list[tuple[str, float, float, bool]]
    net_log_cardinality: float
    crude_log_cardinality: float

    def to_dict(self):
        return {"delta": self.delta,
                "conditions": [{"name": n, "lhs": float(l), "rhs": float(r),
                                "satisfied": bool(s)}
                               for (n, l, r, s) in self.conditions],
                "net_log_cardinality": float(self.net_log_cardinality),
                "crude_log_cardinality": float(self.crude_log_cardinality)}


def perturbation_margin(cfg: LocalConfig,
                        constants: Constants = DEFAULTS) -> PerturbationReport:
    """delta = 1/(8 sqrt n) plus the checked chain of stability conditions and
    the projection-net cardinality arithmetic."""
    n, m = cfg.n, cfg.m
    delta = 1.0 / (8.0 * math.sqrt(n))
    delta1 = 4.0 * delta * math.sqrt(n / m)
    conds = [
        ("delta<=window_eighth", delta, 0.125 * math.sqrt(m / n),
         delta <= 0.125 * math.sqrt(m / n)),
        ("delta1<=kappa_quarter", delta1, cfg.kappa / 4.0,
         delta1 <= cfg.kappa / 4.0),
    ]
    net_log = m * (n - m) * math.log(constants.C2 / delta)
    crude = m * n * math.log(n)
    return PerturbationReport(delta, conds, net_log, crude)


# ---------------------------------------------------------------------------
# cotype estimation

def cotype_ratio(space: Body, q: float, vectors: np.ndarray,
                 sign_samples: int = 128, seed: SeedStream = SeedStream(5),
                 gauge_tol: float = 1e-6, budget: Budget = Budget()) -> float:
    """Lower estimate of (sum ||x_i||^q)^(1/q) / (avg over signs ||sum +-x_i||^2)^(1/2)
    for one tuple (columns of `vectors`), conservative in the gauge intervals."""
    d, count = vectors.shape
    norms_lo = np.empty(count)
    for i in range(count):
        gb = bodies.gauge(space, vectors[:, i], tol=gauge_tol, budget=budget)
        norms_lo[i] = gb.lower
    if count <= 12:
        signs = np.array(list(iter_product([-1.0, 1.0], repeat=count)))
    else:
        signs = seed.rng().choice([-1.0, 1.0], size=(sign_samples, count))
    sq = 0.0
    for srow in signs:
        v = vectors @ srow
        gb = bodies.gauge(space, v, tol=gauge_tol, budget=budget)
        sq += gb.upper ** 2
    denom = math.sqrt(sq / len(signs))
    if denom == 0.0:
        return math.inf
    if math.isinf(q):
        num = norms_lo.max()
    else:
        num = float((norms_lo ** q).sum() ** (1.0 / q))
    return num / denom


def estimate_cotype_lower(space: Body, q: float, vector_count: int, trials: int,
                          seed: SeedStream, gauge_tol: float = 1e-6,
                          budget: Budget = Budget()) -> float:
    """Monte Carlo lower bound for the cotype-q constant of the space whose
    unit ball is `space`: the best tuple ratio over sampled Gaussian tuples."""
    best = 0.0
    for t in range(trials):
        rng = seed.substream(t).rng()
        vecs = rng.standard_normal((space.dim, vector_count))
        best = max(best, cotype_ratio(space, q, vecs, seed=seed.substream(10_000 + t),
                                      gauge_tol=gauge_tol, budget=budget))
    return best


# ---------------------------------------------------------------------------
# decoupling integration

def extract_decoupling_witnesses(cfg: LocalConfig, g: LinearMap, q_sub: Subspace,
                                 budget: Budget = Budget()
                                 ) -> tuple[DecouplingInstance, list[np.ndarray]]:
    """When every spill event fails, the failing directions yield a valid
    column-stochastic dependency matrix: the spill maximizer z_j decomposes
    over the other blocks with non-negative weights summing to kappa_j."""
    k, N, q = cfg.k, cfg.N, cfg.q
    gt = q_sub.frame.T @ g.entries
    blocks = _block_mats(gt, k, N)
    dirs, _ = _plane_directions(k, budget)
    witnesses, z_list = [], []
    for j in range(N):
        frame = np.linalg.qr(blocks[j])[0]
        _, spill_vals, Z, s_vals = _spill_profile(blocks, frame, j, q, dirs)
        i_best = int(np.argmax(spill_vals))
        kappa_j = float(spill_vals[i_best])
        if kappa_j <= cfg.kappa:
            raise PreconditionError(
                f"block {j}: spill event held; witnesses exist only on failure")
        v = s_vals[:, i_best].copy()
        v[j] = 0.0
        if math.isinf(q):
            weights = np.zeros(N)
            weights[int(np.argmax(v))] = 1.0
        else:
            weights = (v / kappa_j) ** (q - 1.0)
        products = {i: float(weights[i] * v[i]) for i in range(N) if i != j}
        witnesses.append(ColumnWitness(j=j, kappa_j=kappa_j,
                                       inner_products=products))
        z_list.append(Z[:, i_best])
    return build_lambda_from_witnesses(witnesses, N), z_list
