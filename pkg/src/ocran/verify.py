"""Randomized cross-module property suites.

Each suite draws seeded random instances, checks a property that ties two
independent computations together (two constraint families, a construction
against its target, a sampler against an analytic value), and reports a
machine-readable summary.  A failure in any suite is a bug somewhere: the
properties hold exactly in infinite precision.

The ``inject_fault`` flag perturbs one comparison inside a suite by 1e-3; it
exists so the failure path of the ``verify`` command can itself be tested.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _linalg as la
from .core import CodebookEnsemble, SubsetPair, indices_of, sample_codebook_marginal, spawn_seeds
from .discrete import AuxChannels, DiscreteScenario, region_discrete
from .gaussian import (
    GaussianScenario,
    QuantizerSetGaussian,
    fronthaul_mi,
    matrix_lemma_check,
    rate_constraint_gaussian,
    weighted_arithmetic_mean,
    weighted_harmonic_mean,
)
from .optimize import mc_mutual_information
from .sumrate import swz_equals_jd

SUITE_NAMES = ("class_equivalence", "swz", "mc", "codebook", "matrix_lemmas")
FAULT_BUMP = 1e-3


@dataclass(frozen=True)
class SuiteReport:
    suite: str
    cases: int
    failures: int
    worst_gap: float
    messages: tuple[str, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return self.failures == 0


# ---------------------------------------------------------------------------
# random instance generators (also used by the test suite)
# ---------------------------------------------------------------------------


def random_factorizing_scenario(
    rng: np.random.Generator,
    num_users: int,
    num_relays: int,
    input_sizes=None,
    output_sizes=None,
    num_timeshare: int = 1,
    fronthaul_range=(0.1, 1.5),
) -> DiscreteScenario:
    """Random scenario whose relay outputs are independent given the inputs."""
    input_sizes = input_sizes or (2,) * num_users
    output_sizes = output_sizes or (2,) * num_relays
    px = tuple(rng.dirichlet(np.ones(n), size=num_timeshare) for n in input_sizes)
    channel = np.ones(tuple(input_sizes) + tuple(output_sizes))
    for k, y_size in enumerate(output_sizes):
        marg = rng.dirichlet(np.ones(y_size), size=tuple(input_sizes))
        shape = tuple(input_sizes) + tuple(
            y_size if i == k else 1 for i in range(num_relays)
        )
        channel = channel * marg.reshape(shape)
    ts = rng.dirichlet(np.ones(num_timeshare)) if num_timeshare > 1 else np.array([1.0])
    return DiscreteScenario(
        num_users=num_users,
        num_relays=num_relays,
        fronthaul=tuple(rng.uniform(*fronthaul_range, size=num_relays)),
        time_share=tuple(ts),
        px=px,
        channel=channel,
    )


def random_correlated_scenario(
    rng: np.random.Generator,
    num_users: int,
    num_relays: int,
    input_sizes=None,
    output_sizes=None,
    num_timeshare: int = 1,
    fronthaul_range=(0.1, 1.5),
) -> DiscreteScenario:
    """Random scenario with an arbitrary (generally non-factorizing) channel."""
    input_sizes = input_sizes or (2,) * num_users
    output_sizes = output_sizes or (2,) * num_relays
    px = tuple(rng.dirichlet(np.ones(n), size=num_timeshare) for n in input_sizes)
    y_total = int(np.prod(output_sizes))
    flat = rng.dirichlet(np.ones(y_total), size=tuple(input_sizes))
    channel = flat.reshape(tuple(input_sizes) + tuple(output_sizes))
    ts = rng.dirichlet(np.ones(num_timeshare)) if num_timeshare > 1 else np.array([1.0])
    return DiscreteScenario(
        num_users=num_users,
        num_relays=num_relays,
        fronthaul=tuple(rng.uniform(*fronthaul_range, size=num_relays)),
        time_share=tuple(ts),
        px=px,
        channel=channel,
    )


def random_aux(rng: np.random.Generator, sc: DiscreteScenario, aux_sizes=None) -> AuxChannels:
    aux_sizes = aux_sizes or tuple(n + 1 for n in sc.output_sizes)
    return AuxChannels(
        tables=tuple(
            rng.dirichlet(np.ones(u), size=(sc.num_timeshare, y))
            for y, u in zip(sc.output_sizes, aux_sizes)
        )
    )


def random_pd(rng: np.random.Generator, dim: int, complex_entries: bool = True) -> np.ndarray:
    z = rng.normal(size=(dim, dim))
    if complex_entries:
        z = z + 1j * rng.normal(size=(dim, dim))
    return la.hermitian_part(z @ z.conj().T + 0.05 * np.eye(dim))


def random_gaussian_scenario(
    rng: np.random.Generator,
    num_users: int,
    num_relays: int,
    max_antennas: int = 2,
    fronthaul_range=(0.5, 3.0),
) -> GaussianScenario:
    relay_dims = rng.integers(1, max_antennas + 1, size=num_relays)
    user_dims = rng.integers(1, max_antennas + 1, size=num_users)
    h_grid = tuple(
        tuple(
            (rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))) / math.sqrt(2.0)
            for n in user_dims
        )
        for m in relay_dims
    )
    sigma = tuple(random_pd(rng, int(m)) for m in relay_dims)
    kin = tuple(random_pd(rng, int(n)) for n in user_dims)
    power = tuple(float(np.real(np.trace(m))) + 0.1 for m in kin)
    return GaussianScenario(
        num_users=num_users,
        num_relays=num_relays,
        fronthaul=tuple(rng.uniform(*fronthaul_range, size=num_relays)),
        time_share=(1.0,),
        H=h_grid,
        Sigma=sigma,
        Kin=kin,
        power=power,
    )


def random_quantizers(
    rng: np.random.Generator, sc: GaussianScenario, lo: float = 0.2, hi: float = 0.8
) -> QuantizerSetGaussian:
    """Feasible quantizers strictly inside the boundary: the normalized
    eigenvalues of Sigma^{1/2} B Sigma^{1/2} fall in [lo, hi]."""
    mats = []
    for s in sc.Sigma:
        d = s.shape[0]
        z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        qmat, _ = np.linalg.qr(z)
        lam = rng.uniform(lo, hi, size=d)
        w = la.hermitian_part((qmat * lam) @ qmat.conj().T)
        inv_root = la.psd_inv_sqrt(s)
        mats.append(la.hermitian_part(inv_root @ w @ inv_root))
    return QuantizerSetGaussian(B=tuple(mats))


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def _map_indexed(fn, count: int, threads: int) -> list:
    if threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(count)))
    return [fn(i) for i in range(count)]


def suite_class_equivalence(
    instances: int = 100, seed: int = 0, threads: int = 1, inject_fault: bool = False
) -> SuiteReport:
    """On factorizing channels the exact-region and general inner-bound
    formulas must agree constraint by constraint (tolerance 1e-9)."""
    seeds = spawn_seeds(seed, instances)

    def one(i: int) -> float:
        rng = np.random.default_rng(seeds[i])
        num_users = int(rng.integers(1, 3))
        num_relays = int(rng.integers(1, 3))
        nq = int(rng.integers(1, 3))
        sc = random_factorizing_scenario(rng, num_users, num_relays, num_timeshare=nq)
        aux = random_aux(rng, sc, tuple(int(rng.integers(2, 4)) for _ in range(num_relays)))
        exact = region_discrete(sc, aux, "thm1")
        general = region_discrete(sc, aux, "thm3")
        gap = max(
            abs(b1 - b2)
            for (_, b1), (_, b2) in zip(exact.constraints, general.constraints)
        )
        return gap + (FAULT_BUMP if inject_fault else 0.0)

    gaps = _map_indexed(one, instances, threads)
    failures = sum(1 for g in gaps if g > 1e-9)
    return SuiteReport(
        suite="class_equivalence",
        cases=instances,
        failures=failures,
        worst_gap=max(gaps),
    )


def suite_swz(
    instances: int = 50, seed: int = 0, threads: int = 1, inject_fault: bool = False
) -> SuiteReport:
    """The time-shared successive scheme must reach the joint-decoding
    sum-rate on every instance (construction invariants raise on their own)."""
    seeds = spawn_seeds(seed, instances)

    def one(i: int):
        rng = np.random.default_rng(seeds[i])
        factorizing = bool(rng.integers(2))
        make = random_factorizing_scenario if factorizing else random_correlated_scenario
        sc = make(rng, int(rng.integers(1, 3)), 2)
        aux = random_aux(rng, sc, tuple(int(rng.integers(2, 4)) for _ in range(2)))
        try:
            cmp_res = swz_equals_jd(sc, aux)
        except ArithmeticError as exc:
            return math.inf, str(exc)
        gap = cmp_res.gap + (FAULT_BUMP if inject_fault else 0.0)
        return gap, ""

    results = _map_indexed(one, instances, threads)
    gaps = [g for g, _ in results]
    messages = tuple(m for _, m in results if m)
    failures = sum(1 for g in gaps if g > 1e-9)
    return SuiteReport(
        suite="swz",
        cases=instances,
        failures=failures,
        worst_gap=max(gaps),
        messages=messages[:5],
    )


def suite_mc(
    instances: int = 10,
    seed: int = 0,
    threads: int = 1,
    inject_fault: bool = False,
    samples: int = 1_000_000,
) -> SuiteReport:
    """Monte Carlo estimates of the recovered-information term must agree with
    the log-det value within 3 standard errors and 2% relative."""
    seeds = spawn_seeds(seed, instances)

    def one(i: int):
        rng = np.random.default_rng(seeds[i])
        # resample until the analytic term is large enough for the 2%-relative
        # criterion to sit outside Monte Carlo noise at the default sample size
        for _ in range(50):
            num_users = int(rng.integers(1, 3))
            num_relays = int(rng.integers(1, 3))
            sc = random_gaussian_scenario(rng, num_users, num_relays)
            q = random_quantizers(rng, sc)
            users = tuple(range(1, num_users + 1))
            # relay subset leaves at least one relay contributing information
            s_masks = [m for m in range(1 << num_relays) if m != (1 << num_relays) - 1]
            s_mask = int(rng.choice(s_masks))
            pair = SubsetPair(users=users, relays=indices_of(s_mask))
            analytic = rate_constraint_gaussian(sc, q, pair) - sum(
                sc.fronthaul[k - 1] - fronthaul_mi(sc.Sigma[k - 1], q.B[k - 1])
                for k in pair.relays
            )
            if analytic >= 0.7:
                break
        est = mc_mutual_information(sc, q, pair, samples=samples, seed=seeds[i])
        estimate = est.estimate + (FAULT_BUMP * 100 if inject_fault else 0.0)
        z = abs(estimate - analytic) / max(est.std_error, 1e-12)
        rel = abs(estimate - analytic) / max(abs(analytic), 1e-12)
        ok = z <= 3.0 and rel <= 0.02
        return ok, max(z - 3.0, rel - 0.02)

    results = _map_indexed(one, instances, threads)
    failures = sum(1 for ok, _ in results if not ok)
    return SuiteReport(
        suite="mc",
        cases=instances,
        failures=failures,
        worst_gap=max(g for _, g in results),
    )


def suite_codebook(
    trials: int = 100_000, seed: int = 0, threads: int = 1, inject_fault: bool = False
) -> SuiteReport:
    """Randomized-codebook marginals: per-position total variation against the
    memoryless law within 0.02 for binary inputs, exactly 0 for point masses."""
    checks = []
    uniform = CodebookEnsemble(
        rate=1.0,
        blocklength=4,
        input_pmf=np.array([[0.5, 0.5]]),
        time_seq=np.zeros(4, dtype=int),
        seed=seed,
    )
    res = sample_codebook_marginal(uniform, trials)
    checks.append(float(res.tv.max()) - 0.02)
    biased = CodebookEnsemble(
        rate=1.0,
        blocklength=2,
        input_pmf=np.array([[0.7, 0.3]]),
        time_seq=np.zeros(2, dtype=int),
        seed=seed + 1,
    )
    res = sample_codebook_marginal(biased, trials)
    checks.append(float(np.abs(res.empirical[:, 1] - 0.3).max()) - 0.01)
    point = CodebookEnsemble(
        rate=0.5,
        blocklength=3,
        input_pmf=np.array([[1.0, 0.0]]),
        time_seq=np.zeros(3, dtype=int),
        seed=seed + 2,
    )
    res = sample_codebook_marginal(point, trials // 10)
    checks.append(float(res.tv.max()))  # must be exactly 0
    if inject_fault:
        checks[0] += FAULT_BUMP * 100
    failures = sum(1 for c in checks if c > 0)
    return SuiteReport(
        suite="codebook", cases=len(checks), failures=failures, worst_gap=max(checks)
    )


def suite_matrix_lemmas(
    instances: int = 10_000, seed: int = 0, threads: int = 1, inject_fault: bool = False
) -> SuiteReport:
    """Determinant monotonicity |I + BC| >= |I + AC| for B >= A, and the
    arithmetic-harmonic matrix mean ordering, on random PD inputs up to 4x4."""
    seeds = spawn_seeds(seed, instances)

    def one(i: int):
        rng = np.random.default_rng(seeds[i])
        dim = int(rng.integers(1, 5))
        a = random_pd(rng, dim)
        w = rng.normal(size=(dim, 1)) + 1j * rng.normal(size=(dim, 1))
        b = la.hermitian_part(a + w @ w.conj().T)
        c = random_pd(rng, dim)
        lemma_ok = matrix_lemma_check(a, b, c)
        count = int(rng.integers(2, 5))
        mats = [random_pd(rng, dim) for _ in range(count)]
        weights = rng.dirichlet(np.ones(count))
        diff = weighted_arithmetic_mean(mats, weights) - weighted_harmonic_mean(mats, weights)
        gap = -la.min_eig(diff)
        if inject_fault:
            gap += FAULT_BUMP
        return lemma_ok, gap

    results = _map_indexed(one, instances, threads)
    failures = sum(1 for ok, gap in results if not ok or gap > 1e-10)
    return SuiteReport(
        suite="matrix_lemmas",
        cases=instances,
        failures=failures,
        worst_gap=max(g for _, g in results),
    )


def run_suites(
    names=None,
    seed: int = 0,
    threads: int = 1,
    instances: int | None = None,
    inject_fault: str | None = None,
) -> list[SuiteReport]:
    """Run the named suites (all by default) and return their reports.

    ``instances`` overrides each suite's case count; ``inject_fault`` names a
    suite whose comparison is perturbed (test hook for the failure path)."""
    names = tuple(names) if names else SUITE_NAMES
    runners = {
        "class_equivalence": lambda fault: suite_class_equivalence(
            instances or 100, seed, threads, fault
        ),
        "swz": lambda fault: suite_swz(instances or 50, seed, threads, fault),
        "mc": lambda fault: suite_mc(instances or 10, seed, threads, fault),
        "codebook": lambda fault: suite_codebook(instances or 100_000, seed, threads, fault),
        "matrix_lemmas": lambda fault: suite_matrix_lemmas(
            instances or 10_000, seed, threads, fault
        ),
    }
    reports = []
    for name in names:
        if name not in runners:
            raise ValueError(f"unknown suite {name!r}; choose from {SUITE_NAMES}")
        reports.append(runners[name](inject_fault == name))
    return reports
