"""Search over quantizers and Monte Carlo validation of the analytic rates.

The Gaussian search runs over the normalized quantizers
W_k = Sigma_k^{1/2} B_k Sigma_k^{1/2}, whose feasible set is simply
0 <= W_k <= I; every candidate is projected onto that set (capped at
1 - 1e-9 so fronthaul rates stay finite) by eigenvalue clipping before
evaluation, so returned quantizers are always feasible.

The min-over-relay-subsets objective is piecewise smooth.  The search methods
use values only (grid / coordinate pattern search) or subgradient steps (the
active branch's gradient, ties broken toward the smallest subset bitmask,
min-norm combination at ties); because those can stall where a tie surface
meets the PSD boundary, sum-rate runs finish with an annealed soft-min
polish whose accepted iterates are still measured on the hard objective.
Global optimality is not claimed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _linalg as la
from .core import RateRegion, SubsetPair, indices_of, mask_of, max_weighted_rate, spawn_seeds
from .discrete import AuxChannels, DiscreteScenario
from .gaussian import QUANT_CAP_MARGIN, GaussianScenario, QuantizerSetGaussian

TIE_TOL = 1e-6
ACTIVE_TOL = 1e-9
IMPROVE_TOL = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    objective: str = "sum_rate"  # "sum_rate" | "weighted"
    weights: tuple[float, ...] | None = None
    method: str = "coordinate_ascent"  # "grid" | "coordinate_ascent" | "projected_gradient"
    restarts: int = 4
    max_iters: int = 120
    step_tol: float = 1e-8
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.objective not in ("sum_rate", "weighted"):
            raise ValueError("objective must be 'sum_rate' or 'weighted'")
        if self.objective == "weighted" and self.weights is None:
            raise ValueError("weighted objective needs a weight vector")
        if self.method not in ("grid", "coordinate_ascent", "projected_gradient"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.restarts < 1 or self.max_iters < 1 or self.threads < 1:
            raise ValueError("restarts, max_iters and threads must be positive")
        if self.step_tol <= 0:
            raise ValueError("step_tol must be positive")


# ---------------------------------------------------------------------------
# packed Hermitian parameterization
# ---------------------------------------------------------------------------


def _pack_hermitian(mats) -> np.ndarray:
    out = []
    for m in mats:
        d = m.shape[0]
        out.extend(np.real(np.diag(m)))
        for i in range(d):
            for j in range(i + 1, d):
                out.append(float(np.real(m[i, j])))
                out.append(float(np.imag(m[i, j])))
    return np.asarray(out, dtype=float)


def _unpack_hermitian(x: np.ndarray, dims) -> list[np.ndarray]:
    mats = []
    pos = 0
    for d in dims:
        m = np.zeros((d, d), dtype=np.complex128)
        m[np.diag_indices(d)] = x[pos : pos + d]
        pos += d
        for i in range(d):
            for j in range(i + 1, d):
                m[i, j] = x[pos] + 1j * x[pos + 1]
                m[j, i] = x[pos] - 1j * x[pos + 1]
                pos += 2
        mats.append(m)
    return mats


def _param_count(dims) -> int:
    return sum(d * d for d in dims)


class _GaussianObjective:
    """Sum-rate (or weighted-rate) objective over packed normalized quantizers."""

    def __init__(self, sc: GaussianScenario, weights=None):
        self.sc = sc
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        if self.weights is not None and self.weights.shape != (sc.num_users,):
            raise ValueError("weights must have one entry per user")
        self.dims = sc.relay_antennas
        self.sig_root_inv = [la.psd_inv_sqrt(s) for s in sc.Sigma]
        self.h_full = [sc.channel_to_users(k, range(1, sc.num_users + 1))
                       for k in range(1, sc.num_relays + 1)]
        # user block offsets inside the full concatenated input vector
        sizes = sc.user_antennas
        self.block = []
        pos = 0
        for n in sizes:
            self.block.append(slice(pos, pos + n))
            pos += n
        self.full_users = tuple(range(1, sc.num_users + 1))
        self.k_full_root = la.psd_sqrt(sc.input_covariance(self.full_users))

    def project(self, ws) -> list[np.ndarray]:
        return [la.clip_eigenvalues(w, 0.0, 1.0 - QUANT_CAP_MARGIN) for w in ws]

    def repack(self, x: np.ndarray) -> np.ndarray:
        """Replace x by the packed coordinates of its feasible projection, so
        subsequent steps move the projected point directly."""
        return _pack_hermitian(self.project(_unpack_hermitian(x, self.dims)))

    def quantizers(self, x: np.ndarray) -> QuantizerSetGaussian:
        ws = self.project(_unpack_hermitian(x, self.dims))
        bs = [la.hermitian_part(ri @ w @ ri) for ri, w in zip(self.sig_root_inv, ws)]
        return QuantizerSetGaussian(B=tuple(bs))

    def _prepared(self, x: np.ndarray):
        ws = self.project(_unpack_hermitian(x, self.dims))
        mi = np.empty(self.sc.num_relays)
        gfull = []
        for k, w in enumerate(ws):
            lam = np.clip(np.linalg.eigvalsh(w), 0.0, 1.0 - QUANT_CAP_MARGIN)
            mi[k] = float(-np.sum(np.log2(1.0 - lam)))
            b = la.hermitian_part(self.sig_root_inv[k] @ w @ self.sig_root_inv[k])
            h = self.h_full[k]
            gfull.append(la.hermitian_part(h.conj().T @ b @ h))
        return ws, mi, gfull

    def _bound(self, mi, gfull, pair: SubsetPair) -> float:
        sc = self.sc
        s_term = sum(sc.fronthaul[k - 1] - mi[k - 1] for k in pair.relays)
        relays_c = pair.relays_complement(sc.num_relays)
        if not relays_c:
            return s_term
        idx = np.concatenate([np.arange(b.start, b.stop) for b in
                              (self.block[l - 1] for l in pair.users)])
        a = sum(gfull[k - 1][np.ix_(idx, idx)] for k in relays_c)
        if pair.users == self.full_users:
            k_root = self.k_full_root
        else:
            k_root = la.psd_sqrt(self.sc.input_covariance(pair.users))
        m = np.eye(len(idx), dtype=np.complex128) + k_root @ a @ k_root
        return s_term + la.logdet2(m)

    def branch_values(self, x: np.ndarray) -> np.ndarray:
        """Sum-rate bound of every relay subset (index = subset bitmask)."""
        _, mi, gfull = self._prepared(x)
        vals = np.empty(1 << self.sc.num_relays)
        for s_mask in range(vals.size):
            pair = SubsetPair(users=self.full_users, relays=indices_of(s_mask))
            vals[s_mask] = self._bound(mi, gfull, pair)
        return vals

    def region(self, x: np.ndarray) -> RateRegion:
        from .core import enumerate_constraint_pairs

        _, mi, gfull = self._prepared(x)
        pairs = enumerate_constraint_pairs(self.sc.num_users, self.sc.num_relays)
        return RateRegion(
            num_users=self.sc.num_users,
            constraints=tuple((p, self._bound(mi, gfull, p)) for p in pairs),
        )

    def value(self, x: np.ndarray) -> float:
        if self.weights is None:
            return float(self.branch_values(x).min())
        val, _ = max_weighted_rate(self.region(x), self.weights)
        return val

    def active_masks(self, x: np.ndarray) -> tuple[tuple[int, int], ...]:
        full_mask = mask_of(self.full_users)
        if self.weights is None:
            vals = self.branch_values(x)
            lo = vals.min()
            return tuple((full_mask, s) for s in range(vals.size) if vals[s] <= lo + ACTIVE_TOL)
        region = self.region(x)
        _, rates = max_weighted_rate(region, self.weights)
        out = []
        for pair, bound in region.constraints:
            if sum(rates[t - 1] for t in pair.users) >= bound - ACTIVE_TOL:
                out.append((pair.t_mask, pair.s_mask))
        return tuple(out)

    def tie_gap(self, x: np.ndarray) -> float:
        """Gap between the two smallest subset branches."""
        vals = np.sort(self.branch_values(x))
        return float(vals[1] - vals[0]) if vals.size > 1 else math.inf

    def _branch_gradient(self, x: np.ndarray, s_mask: int) -> np.ndarray:
        ws = self.project(_unpack_hermitian(x, self.dims))
        s_set = set(indices_of(s_mask))
        grads = []
        sc = self.sc
        inside = [k for k in range(1, sc.num_relays + 1) if k not in s_set]
        m_inv = None
        if inside:
            a = sum(self.h_full[k - 1].conj().T
                    @ la.hermitian_part(self.sig_root_inv[k - 1] @ ws[k - 1] @ self.sig_root_inv[k - 1])
                    @ self.h_full[k - 1] for k in inside)
            n = a.shape[0]
            m = np.eye(n, dtype=np.complex128) + self.k_full_root @ a @ self.k_full_root
            m_inv = np.linalg.inv(m)
        for k in range(1, sc.num_relays + 1):
            if k in s_set:
                g = -np.linalg.inv(np.eye(self.dims[k - 1]) - ws[k - 1]) / la.LN2
            else:
                inner = self.k_full_root @ m_inv @ self.k_full_root
                gb = self.h_full[k - 1] @ inner @ self.h_full[k - 1].conj().T / la.LN2
                g = self.sig_root_inv[k - 1] @ gb @ self.sig_root_inv[k - 1]
            grads.append(la.hermitian_part(g))
        return _pack_gradient(grads)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Gradient of the active branch (smallest-bitmask argmin) of the
        sum-rate objective with respect to the packed parameters.

        Valid where the projection is inactive, i.e. every W_k strictly
        inside 0 < W < I; near a subset tie the objective is kinked and the
        returned branch gradient is one-sided."""
        if self.weights is not None:
            raise ValueError("analytic gradient is only defined for the sum-rate objective")
        vals = self.branch_values(x)
        active = int(np.flatnonzero(vals <= vals.min() + IMPROVE_TOL)[0])
        return self._branch_gradient(x, active)

    def ascent_direction(self, x: np.ndarray, tie_tol: float = 1e-9) -> np.ndarray:
        """Subgradient-style ascent direction: the single active branch's
        gradient away from ties, the minimum-norm convex combination of the
        active branches' gradients at a tie (ties resolved smallest mask
        first, so the direction is deterministic)."""
        vals = self.branch_values(x)
        lo = float(vals.min())
        active = [s for s in range(vals.size) if vals[s] <= lo + tie_tol]
        if len(active) < 2 and math.isinf(tie_tol) and vals.size > 1:
            active = list(np.argsort(vals, kind="stable")[:2])
        grads = [self._branch_gradient(x, int(s)) for s in active[:4]]
        return _min_norm_combination(grads)

    def softmin(self, x: np.ndarray, tau: float) -> tuple[float, np.ndarray]:
        """Smooth lower envelope -tau log2 sum_S 2^{-v_S/tau} of the subset
        branches and its gradient (a concave surrogate of the hard min)."""
        vals = self.branch_values(x)
        lo = float(vals.min())
        scaled = np.exp(-(vals - lo) * la.LN2 / tau)
        weights = scaled / scaled.sum()
        value = lo - tau * math.log2(float(scaled.sum()))
        grad = sum(
            w * self._branch_gradient(x, int(s))
            for s, w in enumerate(weights)
            if w > 1e-12
        )
        return value, grad


def _min_norm_combination(grads: list[np.ndarray]) -> np.ndarray:
    """Pairwise reduction toward the minimum-norm point of the gradients'
    convex hull (exact for two gradients, a good ascent direction for more)."""
    d = grads[0]
    for g in grads[1:]:
        diff = d - g
        denom = float(diff @ diff)
        if denom < 1e-30:
            continue
        mu = min(1.0, max(0.0, float(d @ diff) / denom))
        d = (1.0 - mu) * d + mu * g
    return d


def _pack_gradient(mats) -> np.ndarray:
    """Gradient w.r.t. the packed coordinates of a Hermitian parameterization:
    diagonal entries map to Re G_ii, off-diagonal (re, im) pairs to
    (2 Re G_ij, 2 Im G_ij)."""
    out = []
    for g in mats:
        d = g.shape[0]
        out.extend(np.real(np.diag(g)))
        for i in range(d):
            for j in range(i + 1, d):
                out.append(2.0 * float(np.real(g[i, j])))
                out.append(2.0 * float(np.imag(g[i, j])))
    return np.asarray(out, dtype=float)


def sum_rate_field(sc: GaussianScenario) -> "ScalarField":
    """The Gaussian sum-rate objective as a differentiable scalar field over
    packed quantizer parameters (see :func:`finite_diff_check`)."""
    obj = _GaussianObjective(sc)
    return ScalarField(value=obj.value, gradient=obj.gradient, tie_gap=obj.tie_gap)


# ---------------------------------------------------------------------------
# search loops (value-based, monotone in accepted iterates)
# ---------------------------------------------------------------------------


def _coordinate_search(value: Callable, x0: np.ndarray, cfg: OptimizerConfig, grid: bool):
    x = x0.copy()
    best = value(x)
    trace = [best]
    step = 0.25
    converged = False
    for _ in range(cfg.max_iters):
        improved = False
        for d in range(x.size):
            if grid:
                offsets = step * np.array([-1.0, -0.5, -0.25, 0.25, 0.5, 1.0])
                cand_best, cand_off = best, 0.0
                for off in offsets:
                    trial = x.copy()
                    trial[d] += off
                    v = value(trial)
                    if v > cand_best + IMPROVE_TOL:
                        cand_best, cand_off = v, off
                if cand_off != 0.0:
                    x[d] += cand_off
                    best = cand_best
                    trace.append(best)
                    improved = True
            else:
                for sign in (1.0, -1.0):
                    moved = False
                    local = step
                    while True:
                        trial = x.copy()
                        trial[d] += sign * local
                        v = value(trial)
                        if v > best + IMPROVE_TOL:
                            x, best = trial, v
                            trace.append(best)
                            moved = improved = True
                            local *= 2.0
                        else:
                            break
                    if moved:
                        break
        if not improved:
            step *= 0.5
            if step < cfg.step_tol:
                converged = True
                break
    return x, best, trace, converged


def _projected_gradient_search(obj: _GaussianObjective, x0: np.ndarray, cfg: OptimizerConfig):
    x = obj.repack(x0)
    best = obj.value(x)
    trace = [best]
    step = 0.5
    converged = False
    for _ in range(cfg.max_iters):
        x = obj.repack(x)
        moved = False
        # near a kink the strictly-active set may be a single branch whose
        # gradient points across the tie; fall back to the two-branch
        # min-norm direction before giving up
        for tie_tol in (1e-9, math.inf):
            g = obj.ascent_direction(x, tie_tol)
            norm = float(np.linalg.norm(g))
            if norm < 1e-14:
                continue
            local = step
            while local >= cfg.step_tol:
                trial = x + local * g / norm
                v = obj.value(trial)
                if v > best + IMPROVE_TOL:
                    x, best = trial, v
                    trace.append(best)
                    moved = True
                    step = min(0.5, local * 2.0)
                    break
                local *= 0.5
            if moved:
                break
        if not moved:
            converged = True
            break
    return x, best, trace, converged


def _softmin_polish(obj: _GaussianObjective, x0: np.ndarray, cfg: OptimizerConfig):
    """Annealed ascent on the smooth soft-min surrogate.

    The hard min is kinked exactly where its maximizers live, and subgradient
    steps can stall at kinks that touch the PSD boundary; the surrogate stays
    smooth there.  Only true-objective improvements are accepted into the
    returned point/trace, so the published trace stays monotone."""
    x = obj.repack(x0)
    best_x, best = x.copy(), obj.value(x)
    trace = []
    for tau in (0.1, 0.03, 0.01, 0.003, 0.001, 3e-4, 1e-4):
        step = 0.1
        for _ in range(cfg.max_iters):
            x = obj.repack(x)
            val, g = obj.softmin(x, tau)
            norm = float(np.linalg.norm(g))
            if norm < 1e-14:
                break
            moved = False
            while step >= cfg.step_tol:
                trial = obj.repack(x + step * g / norm)
                v2, _ = obj.softmin(trial, tau)
                if v2 > val + IMPROVE_TOL:
                    x = trial
                    moved = True
                    step = min(0.25, step * 2.0)
                    break
                step *= 0.5
            if not moved:
                break
            true_val = obj.value(x)
            if true_val > best + IMPROVE_TOL:
                best_x, best = x.copy(), true_val
                trace.append(best)
    return best_x, best, trace


@dataclass(frozen=True)
class GaussianOptResult:
    quantizers: QuantizerSetGaussian
    objective: float
    converged: bool
    trace: tuple[float, ...]
    active: tuple[tuple[int, int], ...]  # (T mask, S mask) pairs tight at the optimum


def optimize_gaussian_quantizers(sc: GaussianScenario, cfg: OptimizerConfig) -> GaussianOptResult:
    """Multi-start search for quantization matrices maximizing the configured
    objective.  Restart 0 starts from zero quantizers; the rest start from
    seeded random feasible points.  Deterministic for a fixed config."""
    obj = _GaussianObjective(sc, weights=cfg.weights if cfg.objective == "weighted" else None)
    dims = sc.relay_antennas
    seeds = spawn_seeds(cfg.seed, cfg.restarts)

    def one_restart(index: int):
        if index == 0:
            x0 = np.zeros(_param_count(dims))
        else:
            rng = np.random.default_rng(seeds[index])
            mats = []
            for d in dims:
                z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
                qmat, _ = np.linalg.qr(z)
                lam = rng.uniform(0.05, 0.85, size=d)
                mats.append(la.hermitian_part((qmat * lam) @ qmat.conj().T))
            x0 = _pack_hermitian(mats)
        if cfg.method == "projected_gradient":
            if cfg.objective != "sum_rate":
                raise ValueError("projected_gradient supports only the sum-rate objective")
            x, best, trace, converged = _projected_gradient_search(obj, x0, cfg)
        else:
            x, best, trace, converged = _coordinate_search(
                obj.value, x0, cfg, grid=(cfg.method == "grid")
            )
        if cfg.objective == "sum_rate":
            x2, best2, trace2 = _softmin_polish(obj, x, cfg)
            if best2 > best:
                x, best = x2, best2
                trace = trace + trace2
        return x, best, trace, converged

    if cfg.threads > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            outcomes = list(pool.map(one_restart, range(cfg.restarts)))
    else:
        outcomes = [one_restart(i) for i in range(cfg.restarts)]

    best_idx = max(range(cfg.restarts), key=lambda i: (outcomes[i][1], -i))
    x, value, trace, converged = outcomes[best_idx]
    return GaussianOptResult(
        quantizers=obj.quantizers(x),
        objective=value,
        converged=converged,
        trace=tuple(trace),
        active=obj.active_masks(x),
    )


@dataclass(frozen=True)
class DiscreteOptResult:
    aux: AuxChannels
    objective: float
    converged: bool
    trace: tuple[float, ...]
    active: tuple[int, ...]  # relay-subset masks tight at the optimum


def optimize_discrete_aux(
    sc: DiscreteScenario, cardinalities, cfg: OptimizerConfig
) -> DiscreteOptResult:
    """Random-restart coordinate ascent over the quantization tables
    p(u_k|y_k,q), maximizing the joint-decoding sum-rate.

    Restart 0 starts from the deterministic staircase quantizer
    u = floor(y |U| / |Y|); further restarts draw Dirichlet rows.  Each
    coordinate move reshapes one conditional row toward a vertex of the
    simplex and keeps it only on improvement."""
    from .sumrate import jd_sum_rate

    card = tuple(int(u) for u in cardinalities)
    if len(card) != sc.num_relays or any(u < 1 for u in card):
        raise ValueError("need one positive cardinality per relay")
    if cfg.objective != "sum_rate":
        raise ValueError("discrete search supports only the sum-rate objective")
    seeds = spawn_seeds(cfg.seed, cfg.restarts)
    nq = sc.num_timeshare

    def staircase() -> list[np.ndarray]:
        tables = []
        for y_size, u_size in zip(sc.output_sizes, card):
            t = np.zeros((nq, y_size, u_size))
            for y in range(y_size):
                t[:, y, min(u_size - 1, (y * u_size) // y_size)] = 1.0
            tables.append(t)
        return tables

    def random_tables(rng) -> list[np.ndarray]:
        return [
            rng.dirichlet(np.ones(u_size), size=(nq, y_size))
            for y_size, u_size in zip(sc.output_sizes, card)
        ]

    def evaluate(tables) -> float:
        return jd_sum_rate(sc, AuxChannels(tables=tuple(np.asarray(t) for t in tables)))

    def one_restart(index: int):
        rng = np.random.default_rng(seeds[index])
        tables = staircase() if index == 0 else random_tables(rng)
        best = evaluate(tables)
        trace = [best]
        converged = False
        for _ in range(cfg.max_iters):
            improved = False
            for k, (y_size, u_size) in enumerate(zip(sc.output_sizes, card)):
                if u_size == 1:
                    continue
                for qi in range(nq):
                    for y in range(y_size):
                        row = tables[k][qi, y].copy()
                        cand_best, cand_row = best, None
                        for u in range(u_size):
                            vertex = np.zeros(u_size)
                            vertex[u] = 1.0
                            for t in (1.0, 0.5, 0.25):
                                trial_row = (1.0 - t) * row + t * vertex
                                tables[k][qi, y] = trial_row
                                v = evaluate(tables)
                                if v > cand_best + IMPROVE_TOL:
                                    cand_best, cand_row = v, trial_row.copy()
                        tables[k][qi, y] = row if cand_row is None else cand_row
                        if cand_row is not None:
                            best = cand_best
                            trace.append(best)
                            improved = True
            if not improved:
                converged = True
                break
        return tables, best, trace, converged

    if cfg.threads > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            outcomes = list(pool.map(one_restart, range(cfg.restarts)))
    else:
        outcomes = [one_restart(i) for i in range(cfg.restarts)]
    best_idx = max(range(cfg.restarts), key=lambda i: (outcomes[i][1], -i))
    tables, value, trace, converged = outcomes[best_idx]
    aux = AuxChannels(tables=tuple(np.asarray(t) for t in tables))
    from .sumrate import jd_subset_bounds

    bounds = jd_subset_bounds(sc, aux)
    active = tuple(
        int(s) for s in range(bounds.size) if bounds[s] <= bounds.min() + ACTIVE_TOL
    )
    return DiscreteOptResult(
        aux=aux,
        objective=value,
        converged=converged,
        trace=tuple(trace),
        active=active,
    )


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """A scalar objective with an analytic gradient and an optional probe for
    the distance to the nearest min-over-subsets kink."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    tie_gap: Callable[[np.ndarray], float] | None = None


@dataclass(frozen=True)
class GradientCheck:
    max_rel_error: float
    inconclusive: bool
    tie_gap: float


def finite_diff_check(f: ScalarField, x, h: float = 1e-5) -> GradientCheck:
    """Compare f's analytic gradient at x against central finite differences
    with per-coordinate step h * max(1, |x_d|).

    If the field reports two subset branches within 1e-6 of tying at x, the
    result is flagged inconclusive (the objective is kinked there and central
    differences straddle the kink)."""
    x = np.asarray(x, dtype=float)
    gap = f.tie_gap(x) if f.tie_gap is not None else math.inf
    if gap < TIE_TOL:
        return GradientCheck(max_rel_error=math.nan, inconclusive=True, tie_gap=gap)
    analytic = np.asarray(f.gradient(x), dtype=float)
    numeric = np.empty_like(analytic)
    for d in range(x.size):
        hd = h * max(1.0, abs(x[d]))
        up, dn = x.copy(), x.copy()
        up[d] += hd
        dn[d] -= hd
        numeric[d] = (f.value(up) - f.value(dn)) / (2.0 * hd)
    scale = max(float(np.max(np.abs(analytic))), 1e-12)
    err = float(np.max(np.abs(analytic - numeric))) / scale
    return GradientCheck(max_rel_error=err, inconclusive=False, tie_gap=gap)


# ---------------------------------------------------------------------------
# Monte Carlo validation of the Gaussian information term
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    std_error: float
    samples: int


def _sample_circular(rng, cov_root: np.ndarray, count: int) -> np.ndarray:
    d = cov_root.shape[0]
    z = (rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))) / math.sqrt(2.0)
    return z @ cov_root.T


def mc_mutual_information(
    sc: GaussianScenario,
    q: QuantizerSetGaussian,
    pair: SubsetPair,
    samples: int,
    seed: int,
    batch: int = 100_000,
) -> McEstimate:
    """Monte Carlo estimate of I(X_T; U_{S^c} | X_{T^c}) in bits.

    Realizes each quantizer as the additive test channel U_k = Y_k + Z_k with
    Z_k ~ CN(0, B_k^{-1} - Sigma_k), draws inputs and noises, and averages the
    exact Gaussian log-density ratio (so the estimator is unbiased for the
    analytic value).  Every B_k with k outside S must be strictly inside
    (0, Sigma_k^{-1}); boundary quantizers have no finite test channel.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    q.validate(sc)
    relays_c = pair.relays_complement(sc.num_relays)
    if not relays_c:
        return McEstimate(estimate=0.0, std_error=0.0, samples=samples)
    cond_blocks = []
    for k in relays_c:
        b = q.B[k - 1]
        lam = np.linalg.eigvalsh(b)
        root = la.psd_sqrt(sc.Sigma[k - 1])
        wlam = np.linalg.eigvalsh(la.hermitian_part(root @ b @ root))
        if lam.min() <= 1e-12 or wlam.max() >= 1.0 - 1e-12:
            raise ValueError(
                f"B[{k}] is on the feasibility boundary; no finite test channel exists"
            )
        cond_blocks.append(la.hermitian_part(np.linalg.inv(b)))  # Sigma_k + Q_k
    lam_cond = la.block_diag(cond_blocks)
    h_t = np.vstack([sc.channel_to_users(k, pair.users) for k in relays_c])
    k_t_root = la.psd_sqrt(sc.input_covariance(pair.users))
    lam_marg = la.hermitian_part(h_t @ (k_t_root @ k_t_root) @ h_t.conj().T + lam_cond)
    logdet_gap = (la.logdet2(lam_marg) - la.logdet2(lam_cond)) * la.LN2  # nats
    cond_inv = np.linalg.inv(lam_cond)
    marg_inv = np.linalg.inv(lam_marg)
    cond_root = la.psd_sqrt(lam_cond)

    # the log-density ratio only involves u - H_Tc x_Tc, so the interferers'
    # inputs never need to be drawn
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        x_t = _sample_circular(rng, k_t_root, n)
        signal_t = x_t @ h_t.T  # rows are (H_T x_T)^T
        noise = _sample_circular(rng, cond_root, n)
        u_centered_cond = noise
        u_centered_marg = signal_t + noise
        quad_cond = np.real(np.einsum("ni,ij,nj->n", u_centered_cond.conj(), cond_inv,
                                      u_centered_cond))
        quad_marg = np.real(np.einsum("ni,ij,nj->n", u_centered_marg.conj(), marg_inv,
                                      u_centered_marg))
        vals = (logdet_gap - quad_cond + quad_marg) / la.LN2
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += n
    mean = total / samples
    var = max(0.0, total_sq / samples - mean * mean)
    return McEstimate(
        estimate=mean,
        std_error=math.sqrt(var / samples),
        samples=samples,
    )
