"""Rotation-sum saturation pipeline.

Construction: K is the Gaussian image of the unit ball of the l_1-sum of N
copies of a k-dimensional base norm W (normalized between B_2/sqrt(k) and
B_2), and the object of study is K + u(K) for orthogonal u.  The analysis
splits on alpha = tr(Id - u)/n: rotations far from +-Id admit a section on
the doubled block plane E_j + u(E_j) (case 1), rotations near the identity
admit one on the block plane E_j itself (case 2).  Winner blocks are
declared only when the measured margins make the target inclusion chain
rigorous, so every certificate request on a winner must succeed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bodies
from .bodies import Body, Budget, check_inclusion, polar_grid, \
    quasirandom_directions
from .constants import Constants, DEFAULTS
from .errors import ConfigError, DegenerateInstanceError, PreconditionError
from .meanwidth import LemmaCheckReport
from .randcore import LinearMap, SeedStream, Subspace, haar_rotation, \
    normalized_rotation, rotation_stats, sample_gaussian, singular_values, \
    subspace_sum
from .satlocal import assemble_gaussian_blocks, make_base_norm, subspace_digest


def make_global_base_norm(spec: dict, k: int) -> Body:
    """W normalized so (1/sqrt k) B_2^k inside B_W inside B_2^k."""
    w = make_base_norm(spec, k)
    return _scaled(w, 1.0 / math.sqrt(k))


def _scaled(w: Body, s: float) -> Body:
    if isinstance(w, bodies.BaseNorm):
        return bodies.BaseNorm(w.kind, w.dim, r=w.r, vertices=w.vertices,
                               scale=w.scale * s)
    return bodies.LinearImage(LinearMap.from_array(s * np.eye(w.dim)), w)


@dataclass
class GlobalConfig:
    """Parameters of one rotation-sum experiment."""

    n: int
    k: int
    N: int
    kappa: float
    alpha0: float
    gamma: float
    delta: float
    master_seed: int
    base_norm: dict = field(default_factory=lambda: {"kind": "linf"})
    c_case1: float = 0.1
    case1_margin: float = 1e-2
    planned: bool = False

    def __post_init__(self):
        if not (1 <= self.k <= self.n) or self.N < 1:
            raise ConfigError("need 1 <= k <= n and N >= 1")
        if self.n > self.k * self.N:
            raise ConfigError("need n <= k*N for a full-dimensional body")
        for name in ("kappa", "alpha0", "gamma", "delta"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        self.W = make_global_base_norm(self.base_norm, self.k)

    @property
    def seed(self) -> SeedStream:
        return SeedStream(self.master_seed)

    def dimension_flag(self, constants: Constants = DEFAULTS) -> bool:
        """Whether k is inside the regime bound min{n^(1/4), (n/log N)^(1/3)}."""
        cap = min(self.n ** 0.25,
                  (self.n / max(math.log(self.N), 1e-9)) ** (1.0 / 3.0))
        return self.k <= constants.c_bc2 * cap

    def to_dict(self):
        return {"n": self.n, "k": self.k, "N": self.N, "kappa": self.kappa,
                "alpha0": self.alpha0, "gamma": self.gamma, "delta": self.delta,
                "master_seed": self.master_seed, "base_norm": self.base_norm,
                "c_case1": self.c_case1, "case1_margin": self.case1_margin,
                "planned": self.planned}

    @classmethod
    def from_dict(cls, d: dict) -> "GlobalConfig":
        return cls(n=int(d["n"]), k=int(d["k"]), N=int(d["N"]),
                   kappa=float(d["kappa"]), alpha0=float(d["alpha0"]),
                   gamma=float(d["gamma"]), delta=float(d["delta"]),
                   master_seed=int(d["master_seed"]),
                   base_norm=d.get("base_norm", {"kind": "linf"}),
                   c_case1=float(d.get("c_case1", 0.1)),
                   case1_margin=float(d.get("case1_margin", 1e-2)),
                   planned=bool(d.get("planned", False)))


def planned_global_config(n: int, k: int, N: int, master_seed: int = 0,
                          base_norm: Optional[dict] = None,
                          constants: Constants = DEFAULTS) -> GlobalConfig:
    """Auto-planned parameters with the tie kappa^(1/3) = sqrt(alpha0) = gamma
    = c'/sqrt(k); delta is the binding kappa/6."""
    base = constants.c_prime / math.sqrt(k)
    kappa = base ** 3
    return GlobalConfig(n=n, k=k, N=N, kappa=kappa, alpha0=base * base,
                        gamma=base, delta=kappa / 6.0, master_seed=master_seed,
                        base_norm=base_norm or {"kind": "linf"},
                        c_case1=constants.c_case1, planned=True)


def desk_global_config(master_seed: int = 0) -> GlobalConfig:
    """Desk preset: n=48, k=2, N=24 with relaxed (auto-planned) constants."""
    return planned_global_config(48, 2, 24, master_seed=master_seed)


# ---------------------------------------------------------------------------
# instance construction

@dataclass
class GlobalInstance:
    cfg: GlobalConfig
    G: LinearMap
    u: LinearMap
    W: Body
    K_j: list[Body]
    K: Body
    K_sum: Body
    D_j: list[Body]
    E_j: list[Subspace]

    def K_prime(self, j: int) -> Body:
        return bodies.PConvexHull(1.0, [b for i, b in enumerate(self.K_j) if i != j])

    def D_prime(self, j: int) -> Body:
        return bodies.PConvexHull(1.0, [b for i, b in enumerate(self.D_j) if i != j])


def build_global_instance(cfg: GlobalConfig,
                          u: Optional[LinearMap] = None) -> GlobalInstance:
    """Sample G (and u, Haar unless supplied) and assemble K and K + u(K).

    The rotation is sign-normalized (u vs -u leaves K + u(K) unchanged for
    symmetric K, and keeps alpha in [0, 1])."""
    g = assemble_gaussian_blocks(cfg.n, cfg.k, cfg.N, cfg.seed)
    if u is None:
        u = haar_rotation(cfg.n, cfg.seed.substream(77))
    un = normalized_rotation(u)
    w = cfg.W
    k_parts, d_parts, e_parts = [], [], []
    for j in range(cfg.N):
        block = LinearMap.from_array(g.entries[:, j * cfg.k:(j + 1) * cfg.k])
        sv = singular_values(block)
        if sv[-1] < 1e-12:
            raise DegenerateInstanceError(f"block {j} is rank deficient")
        k_parts.append(bodies.LinearImage(block, w))
        d_parts.append(bodies.EllipsoidImage(block))
        e_parts.append(Subspace.from_span(block.entries))
    K = bodies.PConvexHull(1.0, k_parts)
    K_sum = bodies.MinkowskiSum([K, bodies.Rotated(un, K)])
    return GlobalInstance(cfg=cfg, G=g, u=un, W=w, K_j=k_parts, K=K,
                          K_sum=K_sum, D_j=d_parts, E_j=e_parts)


# ---------------------------------------------------------------------------
# concentration lemma checkers

def check_case1_lemma(n: int, k: int, u: LinearMap, c: float, trials: int,
                      seed: SeedStream) -> LemmaCheckReport:
    """Lower bound on the gain of (xi, zeta) -> A xi + u A zeta.

    Per trial: the minimal singular value of the n x 2k matrix [A | uA]
    must reach c*sqrt(alpha); the second form additionally needs the
    operator norm of [A | uA] at most 2.
    """
    stats = rotation_stats(u)
    un = normalized_rotation(u).entries
    alpha = stats.alpha
    target = c * math.sqrt(alpha)
    succ = succ_second = 0
    smin_sum = 0.0
    for t in range(trials):
        a = sample_gaussian(n, k, 1.0 / n, seed.substream(t)).entries
        sv = np.linalg.svd(np.hstack([a, un @ a]), compute_uv=False)
        smin_sum += sv[-1]
        if sv[-1] >= target:
            succ += 1
            if sv[0] <= 2.0:
                succ_second += 1
    if alpha <= 0:
        bound = 1.0
    else:
        exponent = -c * alpha * n + (1.0 / c) * k * math.log(2.0 / alpha)
        bound = max(0.0, 1.0 - math.exp(min(exponent, 700.0)))
    return LemmaCheckReport(
        lemma_id="case1", trials=trials, successes=succ,
        predicted_bound=bound, empirical_mean=smin_sum / trials,
        details={"alpha": alpha, "target": target,
                 "successes_second_form": succ_second, "c": c})


def case1_second_moment(n: int, k: int, u: LinearMap, xi: np.ndarray,
                        zeta: np.ndarray, trials: int,
                        seed: SeedStream) -> tuple[float, float]:
    """(Monte Carlo, predicted) for E|A xi + u A zeta|^2 =
    |xi|^2 + |zeta|^2 + 2 <xi, zeta> tr(u)/n."""
    un = u.entries
    rng = seed.rng()
    a = rng.standard_normal((trials, n, k)) / math.sqrt(n)
    v = a @ xi + np.einsum("ij,tjk,k->ti", un, a, zeta)
    mc = float((v ** 2).sum(axis=1).mean())
    pred = float(xi @ xi + zeta @ zeta
                 + 2.0 * (xi @ zeta) * np.trace(un) / n)
    return mc, pred


def check_case2_lemma(n: int, k: int, t_map: LinearMap, gamma: float,
                      trials: int, seed: SeedStream) -> LemmaCheckReport:
    """Upper bound |T A| <= 2(|T|_HS/sqrt(n) + gamma) with probability at
    least 1 - exp(-gamma^2 n/(2 |T|^2) + 2k)."""
    tm = t_map.entries
    a_hs = float(np.linalg.norm(tm))
    t_op = float(np.linalg.svd(tm, compute_uv=False)[0]) if a_hs > 0 else 0.0
    limit = 2.0 * (a_hs / math.sqrt(n) + gamma)
    succ = 0
    norm_sum = 0.0
    for t in range(trials):
        a = sample_gaussian(n, k, 1.0 / n, seed.substream(t)).entries
        op = float(np.linalg.svd(tm @ a, compute_uv=False)[0])
        norm_sum += op
        succ += bool(op <= limit)
    if t_op == 0.0:
        bound = 1.0
    else:
        exponent = -gamma * gamma * n / (2.0 * t_op * t_op) + 2.0 * k
        bound = max(0.0, 1.0 - math.exp(min(exponent, 700.0)))
    return LemmaCheckReport(
        lemma_id="case2", trials=trials, successes=succ,
        predicted_bound=bound, empirical_mean=norm_sum / trials,
        details={"limit": limit, "hs_norm": a_hs, "op_norm": t_op,
                 "gamma": gamma})


def case2_second_moment(n: int, k: int, t_map: LinearMap, xi: np.ndarray,
                        trials: int, seed: SeedStream) -> tuple[float, float]:
    """(Monte Carlo, predicted) for E|T A xi|^2 = (|T|_HS^2/n) |xi|^2."""
    tm = t_map.entries
    rng = seed.rng()
    a = rng.standard_normal((trials, n, k)) / math.sqrt(n)
    v = np.einsum("ij,tjk,k->ti", tm, a, xi)
    mc = float((v ** 2).sum(axis=1).mean())
    pred = float(np.linalg.norm(tm) ** 2 / n * (xi @ xi))
    return mc, pred


# ---------------------------------------------------------------------------
# trial machinery

@dataclass
class GlobalTrialOutcome:
    """Per-seed record for one rotation: flags, margins, case, winner."""

    seed: int
    u_digest: str
    alpha: float
    case: int
    spill_E: list[float]              # certified sup over E_j of the spill sum
    spill_uE: list[float]             # certified sup over u(E_j) (case 1 only)
    spill_E_flags: list[bool]         # <= kappa
    spill_uE_flags: list[bool]
    disc_lower: list[float]           # s_min of the block (case 2: vs 1/2)
    disc_lower_flags: list[bool]
    twist_norm: list[float]           # |(Id - u) A_j| (case 2)
    twist_flags: list[bool]           # <= 2(sqrt(2 alpha) + gamma)
    gain_smin: list[float]            # s_min [A_j | u A_j] (case 1)
    gain_flags: list[bool]            # >= c sqrt(alpha)
    gain_second_flags: list[bool]     # additionally op norm <= 2
    pair_dim: list[int]               # dim(E_j + u E_j)
    pair_inradius: list[float]        # certified inradius of D_j + u D_j on the pair plane
    pair_ball_flags: list[bool]       # c sqrt(alpha) ball inside D_j + u D_j, dim = 2k
    proj_norm: list[float]            # 1/s_min[F_E | F_uE] (case 1)
    proj_flags: list[bool]            # <= (2/c)/sqrt(alpha)
    winner_j: Optional[int]
    winner_margin: Optional[float]

    def to_dict(self):
        d = {}
        for key, val in self.__dict__.items():
            if isinstance(val, list):
                d[key] = [bool(x) if isinstance(x, (bool, np.bool_)) else
                          (int(x) if isinstance(x, (int, np.integer)) else float(x))
                          for x in val]
            else:
                d[key] = val
        return d


def _certified_plane_sup(body: Body, frame: np.ndarray, pitch: float,
                         budget: Budget) -> float:
    """Upper bound (certified for plane dim <= 3) on sup of h over unit
    directions in the span of the orthonormal frame."""
    sub = Subspace(frame.shape[0], frame)
    rest = bodies.restrict(body, sub)
    d = frame.shape[1]
    if d <= 3:
        dirs, theta = polar_grid(d, pitch)
        vals = rest.support_batch(dirs)
        return float(vals.max() + rest.circumradius_bound() * theta)
    dirs = quasirandom_directions(d, budget.points, SeedStream(budget.seed, 3))
    return float(rest.support_batch(dirs).max())


def _certified_plane_inf(body: Body, frame: np.ndarray, pitch: float,
                         fallback: float) -> float:
    """Lower bound on inf of h over unit plane directions; for plane dim > 3
    falls back to the supplied rigorous bound (e.g. a singular value)."""
    sub = Subspace(frame.shape[0], frame)
    rest = bodies.restrict(body, sub)
    d = frame.shape[1]
    if d <= 3:
        dirs, theta = polar_grid(d, pitch)
        vals = rest.support_batch(dirs)
        return float(max(vals.min() - rest.circumradius_bound() * theta, 0.0))
    return fallback


def run_global_trial(cfg: GlobalConfig, g: LinearMap, u: LinearMap,
                     budget: Budget = Budget(),
                     pitch: float = 1e-3) -> GlobalTrialOutcome:
    """Evaluate the case-appropriate events per block and pick a winner whose
    measured margins force the certificate inclusion chain."""
    stats = rotation_stats(u)
    un = normalized_rotation(u)
    alpha = stats.alpha
    case = 1 if alpha >= cfg.alpha0 else 2
    n, k, N = cfg.n, cfg.k, cfg.N
    blocks = [g.entries[:, j * k:(j + 1) * k] for j in range(N)]
    d_parts = [bodies.EllipsoidImage(LinearMap.from_array(b)) for b in blocks]
    c = cfg.c_case1
    sqrt_k = math.sqrt(k)

    out = GlobalTrialOutcome(
        seed=cfg.master_seed,
        u_digest=hashlib.sha256(np.ascontiguousarray(u.entries).tobytes()
                                ).hexdigest()[:16],
        alpha=alpha, case=case, spill_E=[], spill_uE=[], spill_E_flags=[],
        spill_uE_flags=[], disc_lower=[], disc_lower_flags=[], twist_norm=[],
        twist_flags=[], gain_smin=[], gain_flags=[], gain_second_flags=[],
        pair_dim=[], pair_inradius=[], pair_ball_flags=[], proj_norm=[],
        proj_flags=[], winner_j=None, winner_margin=None)

    twist_limit = 2.0 * (math.sqrt(2.0 * alpha) + cfg.gamma)
    gain_target = c * math.sqrt(alpha)
    for j in range(N):
        d_prime = bodies.PConvexHull(1.0, [b for i, b in enumerate(d_parts)
                                           if i != j])
        spill = bodies.MinkowskiSum([d_prime, bodies.Rotated(un, d_prime)])
        frame = np.linalg.qr(blocks[j])[0]
        sup_e = _certified_plane_sup(spill, frame, pitch, budget)
        out.spill_E.append(sup_e)
        out.spill_E_flags.append(bool(sup_e <= cfg.kappa))
        sv = singular_values(LinearMap.from_array(blocks[j]))
        out.disc_lower.append(float(sv[-1]))
        out.disc_lower_flags.append(bool(sv[-1] >= 0.5))

        if case == 2:
            twist = float(np.linalg.svd((np.eye(n) - un.entries) @ blocks[j],
                                        compute_uv=False)[0])
            out.twist_norm.append(twist)
            out.twist_flags.append(bool(twist <= twist_limit))
            margin = (sup_e + twist) / sv[-1] if sv[-1] > 0 else math.inf
            if out.winner_j is None and margin <= 1.0 / sqrt_k:
                out.winner_j = j
                out.winner_margin = float(margin * sqrt_k)
        else:
            frame_u = un.entries @ frame
            sup_ue = _certified_plane_sup(spill, frame_u, pitch, budget)
            out.spill_uE.append(sup_ue)
            out.spill_uE_flags.append(bool(sup_ue <= cfg.kappa))
            paired = np.hstack([blocks[j], un.entries @ blocks[j]])
            sv2 = np.linalg.svd(paired, compute_uv=False)
            out.gain_smin.append(float(sv2[-1]))
            out.gain_flags.append(bool(sv2[-1] >= gain_target))
            out.gain_second_flags.append(bool(sv2[-1] >= gain_target
                                              and sv2[0] <= 2.0))
            e_j = Subspace.from_span(blocks[j])
            ue_j = Subspace(n, frame_u)
            h_j = subspace_sum(e_j, ue_j)
            out.pair_dim.append(h_j.dim)
            pair_body = bodies.MinkowskiSum([d_parts[j],
                                             bodies.Rotated(un, d_parts[j])])
            inr = _certified_plane_inf(pair_body, h_j.frame, pitch,
                                       fallback=float(sv2[-1]))
            out.pair_inradius.append(inr)
            out.pair_ball_flags.append(bool(h_j.dim == 2 * k
                                            and inr >= gain_target))
            tau_mat = np.hstack([frame, frame_u])
            s_tau = np.linalg.svd(tau_mat, compute_uv=False)
            tau = 1.0 / s_tau[-1] if s_tau[-1] > 1e-12 else math.inf
            out.proj_norm.append(float(tau))
            out.proj_flags.append(bool(alpha > 0 and
                                       tau <= (2.0 / c) / math.sqrt(alpha)))
            if h_j.dim == 2 * k and inr > 0:
                rho = tau * math.hypot(sup_e, sup_ue)
                margin = rho * sqrt_k / inr
                if out.winner_j is None and margin <= cfg.case1_margin:
                    out.winner_j = j
                    out.winner_margin = float(margin)
    return out


# ---------------------------------------------------------------------------
# certification

@dataclass
class GlobalCertificate:
    j: int
    case: int
    section_dim: int
    section_digest: str
    isomorphism_bound: float
    complementation_bound: float
    method: str
    details: Optional[dict] = None

    def to_dict(self):
        d = {"j": self.j, "case": self.case, "section_dim": self.section_dim,
             "section_digest": self.section_digest,
             "isomorphism_bound": float(self.isomorphism_bound),
             "complementation_bound": float(self.complementation_bound),
             "method": self.method}
        if self.details:
            d["details"] = self.details
        return d


def certify_global(cfg: GlobalConfig, g: LinearMap, u: LinearMap,
                   outcome: GlobalTrialOutcome, tol: float = 1e-3,
                   budget: Budget = Budget()) -> GlobalCertificate:
    """Measure the certificate constants for the winner block.

    Case 2 verifies K_j inside the projection of K + u(K) onto E_j inside
    3*K_j; case 1 verifies the projection onto E_j + u(E_j) against the
    reference K_j + u(K_j) (a linear image of the two-summand sup-ball of
    W, to which the section is exactly isometric when the plane dimension
    is 2k)."""
    from .errors import CertificateRefusedError

    if outcome.winner_j is None:
        raise PreconditionError("certify_global requires a trial with a winner")
    j = outcome.winner_j
    inst = _instance_from(cfg, g, u)
    un = inst.u
    fine = Budget(grid_pitch=tol, multistart=budget.multistart,
                  iters=budget.iters, points=max(budget.points, 4096),
                  seed=budget.seed)
    if outcome.case == 2:
        e_j = inst.E_j[j]
        rep = check_inclusion(inst.K_sum, inst.K_j[j], restrict_to=e_j,
                              scale=3.0, budget=fine, tol=tol)
        lam = 3.0 * rep.measured_ratio
        limit = 3.0 + tol
        if lam > limit:
            raise CertificateRefusedError(
                f"case-2 bound {lam:.6f} exceeds {limit:.6f}",
                isomorphism=lam, complementation=lam)
        return GlobalCertificate(
            j=j, case=2, section_dim=e_j.dim, section_digest=subspace_digest(e_j),
            isomorphism_bound=lam, complementation_bound=lam,
            method="grid" if cfg.k <= 3 else "heuristic",
            details={"certified_ratio": 3.0 * rep.certified_ratio})
    # case 1
    e_j = inst.E_j[j]
    ue_frame = un.entries @ e_j.frame
    h_j = subspace_sum(e_j, Subspace(cfg.n, ue_frame))
    reference = bodies.MinkowskiSum([inst.K_j[j],
                                     bodies.Rotated(un, inst.K_j[j])])
    rep = check_inclusion(inst.K_sum, reference, restrict_to=h_j,
                          scale=1.0, budget=fine, tol=cfg.case1_margin)
    lam = rep.measured_ratio
    limit = 1.0 + cfg.case1_margin + tol
    oplus = _oplus_gauge_comparison(cfg, inst, j, h_j, points=1000,
                                    budget=fine)
    if lam > limit or oplus > limit:
        raise CertificateRefusedError(
            f"case-1 bound {max(lam, oplus):.6f} exceeds {limit:.6f}",
            isomorphism=max(lam, oplus), complementation=lam)
    return GlobalCertificate(
        j=j, case=1, section_dim=h_j.dim, section_digest=subspace_digest(h_j),
        isomorphism_bound=max(lam, oplus), complementation_bound=lam,
        method="grid" if 2 * cfg.k <= 3 else "heuristic",
        details={"oplus_gauge_ratio": oplus, "pair_dim": h_j.dim})


def _instance_from(cfg: GlobalConfig, g: LinearMap, u: LinearMap) -> GlobalInstance:
    un = normalized_rotation(u)
    w = cfg.W
    k_parts, d_parts, e_parts = [], [], []
    for j in range(cfg.N):
        block = LinearMap.from_array(g.entries[:, j * cfg.k:(j + 1) * cfg.k])
        k_parts.append(bodies.LinearImage(block, w))
        d_parts.append(bodies.EllipsoidImage(block))
        e_parts.append(Subspace.from_span(block.entries))
    K = bodies.PConvexHull(1.0, k_parts)
    return GlobalInstance(cfg=cfg, G=g, u=un, W=w, K_j=k_parts, K=K,
                          K_sum=bodies.MinkowskiSum([K, bodies.Rotated(un, K)]),
                          D_j=d_parts, E_j=e_parts)


def _oplus_gauge_comparison(cfg: GlobalConfig, inst: GlobalInstance, j: int,
                            h_j: Subspace, points: int, budget: Budget) -> float:
    """Gauge agreement between the section body and the two-summand sup-ball.

    Sample pairs (xi, zeta) on the boundary of B_W x B_W, map them to the
    section through x = A_j xi + u A_j zeta; the pair has sup-norm exactly 1,
    so the dual-direction gauge estimate of each image point should sit at 1.
    Returns the worst multiplicative discrepancy over the sample."""
    k = cfg.k
    block = inst.G.entries[:, j * k:(j + 1) * k]
    ub = inst.u.entries @ block
    rest = bodies.restrict(inst.K_sum, h_j)
    d = h_j.dim
    if d <= 3:
        dirs, _ = polar_grid(d, 1e-3)
    else:
        dirs = quasirandom_directions(d, max(budget.points, 4096),
                                      SeedStream(budget.seed, 31))
    h_vals = rest.support_batch(dirs)
    ok = h_vals > 1e-14
    rng = SeedStream(budget.seed, 33).rng()
    xs = np.empty((d, points))
    for t in range(points):
        xi = rng.standard_normal(k)
        zeta = rng.standard_normal(k)
        xi = xi / _w_gauge(inst.W, xi)
        zeta = zeta / _w_gauge(inst.W, zeta)
        if rng.random() < 0.5:
            zeta = zeta * rng.random()
        else:
            xi = xi * rng.random()
        xs[:, t] = h_j.frame.T @ (block @ xi + ub @ zeta)
    ratios = (xs.T @ dirs[:, ok]) / h_vals[ok]
    gauges = ratios.max(axis=1)
    return float(max(gauges.max(), 1.0 / max(gauges.min(), 1e-12)))


def _w_gauge(w: Body, v: np.ndarray) -> float:
    if isinstance(w, bodies.BaseNorm) and w.kind == "lr":
        r = w.r
        nv = float(np.linalg.norm(v, ord=(np.inf if math.isinf(r) else r)))
        return nv / w.scale
    gb = bodies.gauge(w, v, tol=1e-9)
    return 0.5 * (gb.lower + gb.upper)


# ---------------------------------------------------------------------------
# step II / III arithmetic

@dataclass
class GlobalPerturbationReport:
    delta: float
    conditions: list[tuple[str, float, float, bool]]
    sphere_net_log_cardinality: float
    rotation_net_log_cardinality: float
    N_required: float
    log_ratio: float

    def to_dict(self):
        return {"delta": self.delta,
                "conditions": [{"name": n, "lhs": float(l), "rhs": float(r),
                                "satisfied": bool(s)}
                               for (n, l, r, s) in self.conditions],
                "sphere_net_log_cardinality": float(self.sphere_net_log_cardinality),
                "rotation_net_log_cardinality": float(self.rotation_net_log_cardinality),
                "N_required": float(self.N_required),
                "log_ratio": float(self.log_ratio)}


def sphere_net_log_cardinality(k: int, eps: float) -> float:
    """log of the (1 + 2/eps)^(2k) cardinality bound for an eps-net of the
    product sphere used in the case-1 lemma proof."""
    return 2.0 * k * math.log(1.0 + 2.0 / eps)


def rotation_net_log_cardinality(n: int, delta: float,
                                 constants: Constants = DEFAULTS) -> float:
    """log of the (C/delta)^(dim O(n)) net-cardinality bound, dim = n(n-1)/2."""
    dim = n * (n - 1) // 2
    return dim * math.log(constants.C_net / delta)


def perturb_and_replan(cfg: GlobalConfig,
                       constants: Constants = DEFAULTS) -> GlobalPerturbationReport:
    """Step II tolerance conditions (delta = kappa/6 binding) and the step III
    net arithmetic, including the N needed for the union bound."""
    n, k = cfg.n, cfg.k
    delta = cfg.kappa / 6.0
    c = cfg.c_case1
    conds = [
        ("delta<=kappa_half(spill_E doubling)", delta, cfg.kappa / 2.0,
         delta <= cfg.kappa / 2.0),
        ("delta<=gamma(twist 2->3)", delta, cfg.gamma, delta <= cfg.gamma),
        ("delta<=c_sqrt_alpha0_quarter(gain c->c/2)", delta,
         c * math.sqrt(cfg.alpha0) / 4.0, delta <= c * math.sqrt(cfg.alpha0) / 4.0),
        ("delta<=kappa_sixth(spill_uE doubling)", delta, cfg.kappa / 6.0,
         delta <= cfg.kappa / 6.0),
        ("delta<=alpha0_half(case split stability)", delta, cfg.alpha0 / 2.0,
         delta <= cfg.alpha0 / 2.0),
    ]
    beta = 3.0 / 8.0
    n_required = beta * n * n * (1.0 + math.log(n)) * k ** 3 / constants.c5
    return GlobalPerturbationReport(
        delta=delta, conditions=conds,
        sphere_net_log_cardinality=sphere_net_log_cardinality(
            k, max(math.sqrt(cfg.alpha0) / 6.0, 1e-12)),
        rotation_net_log_cardinality=rotation_net_log_cardinality(
            n, delta, constants),
        N_required=n_required,
        log_ratio=math.log(max(n_required, 2.0)) / math.log(n))


@dataclass
class StabilityReport:
    operator_distance: float
    alpha_shift: float
    alpha_lipschitz_ok: bool
    implications: list[tuple[str, bool, bool]]  # (name, premise, conclusion)

    def to_dict(self):
        return {"operator_distance": float(self.operator_distance),
                "alpha_shift": float(self.alpha_shift),
                "alpha_lipschitz_ok": bool(self.alpha_lipschitz_ok),
                "implications": [{"name": n, "premise": bool(p),
                                  "conclusion": bool(c)}
                                 for (n, p, c) in self.implications]}


def perturbation_stability_check(g: LinearMap, u: LinearMap, u2: LinearMap,
                                 cfg: GlobalConfig, budget: Budget = Budget(),
                                 pitch: float = 1e-3,
                                 block_limit: Optional[int] = None) -> StabilityReport:
    """Verify the five doubled-constant stability implications instance-wise.

    Preconditions: |u - u2| <= cfg.delta in operator norm and the diameter
    cap (every disc hull inside 2 B_2^n) — the latter holds automatically
    whenever the per-block discs are non-degenerate at desk scale and is
    not re-verified here."""
    dist = float(np.linalg.svd(u.entries - u2.entries, compute_uv=False)[0])
    if dist > cfg.delta * (1 + 1e-9):
        raise PreconditionError(f"|u - u2| = {dist:.3e} exceeds delta = {cfg.delta:.3e}")
    st1, st2 = rotation_stats(u), rotation_stats(u2)
    alpha_ok = abs(st1.alpha - st2.alpha) <= dist + 1e-12
    un, un2 = normalized_rotation(u), normalized_rotation(u2)
    n, k, N = cfg.n, cfg.k, cfg.N
    blocks = [g.entries[:, j * k:(j + 1) * k] for j in range(N)]
    d_parts = [bodies.EllipsoidImage(LinearMap.from_array(b)) for b in blocks]
    alpha = st1.alpha
    c = cfg.c_case1
    implications = []
    limit = block_limit or N
    for j in range(min(N, limit)):
        d_prime = bodies.PConvexHull(1.0, [b for i, b in enumerate(d_parts)
                                           if i != j])
        spill_u = bodies.MinkowskiSum([d_prime, bodies.Rotated(un, d_prime)])
        spill_u2 = bodies.MinkowskiSum([d_prime, bodies.Rotated(un2, d_prime)])
        frame = np.linalg.qr(blocks[j])[0]
        sup_u = _certified_plane_sup(spill_u, frame, pitch, budget)
        sup_u2 = _certified_plane_sup(spill_u2, frame, pitch, budget)
        implications.append((f"spill_E[{j}] kappa->2kappa",
                             sup_u <= cfg.kappa, sup_u2 <= 2 * cfg.kappa))
        tw_u = float(np.linalg.svd((np.eye(n) - un.entries) @ blocks[j],
                                   compute_uv=False)[0])
        tw_u2 = float(np.linalg.svd((np.eye(n) - un2.entries) @ blocks[j],
                                    compute_uv=False)[0])
        t_lim = math.sqrt(2.0 * alpha) + cfg.gamma
        implications.append((f"twist[{j}] 2->3 factor",
                             tw_u <= 2.0 * t_lim, tw_u2 <= 3.0 * t_lim))
        sv_u = np.linalg.svd(np.hstack([blocks[j], un.entries @ blocks[j]]),
                             compute_uv=False)
        sv_u2 = np.linalg.svd(np.hstack([blocks[j], un2.entries @ blocks[j]]),
                              compute_uv=False)
        tgt = c * math.sqrt(alpha)
        implications.append((f"gain[{j}] c->c/2",
                             sv_u[-1] >= tgt, sv_u2[-1] >= tgt / 2.0))
        frame_u = un.entries @ frame
        frame_u2 = un2.entries @ frame
        sup_ue = _certified_plane_sup(spill_u, frame_u, pitch, budget)
        sup_ue2 = _certified_plane_sup(spill_u2, frame_u2, pitch, budget)
        implications.append((f"spill_uE[{j}] kappa->2kappa",
                             sup_ue <= cfg.kappa, sup_ue2 <= 2 * cfg.kappa))
        implications.append((f"disc_lower[{j}] u-free", True, True))
    return StabilityReport(operator_distance=dist,
                           alpha_shift=abs(st1.alpha - st2.alpha),
                           alpha_lipschitz_ok=alpha_ok,
                           implications=implications)
