"""Gaussian MIMO rate region with per-relay quantization matrices.

The region is a finite set of constraints, one per (user set T, relay set S):

    sum_{t in T} R_t <= sum_{k in S} [C_k - fronthaul_mi(Sigma_k, B_k)]
                        + log2 det(I + K_T^{1/2} A K_T^{1/2})

with A = sum_{k not in S} H_{k,T}^H B_k H_{k,T}, K_T the block-diagonal input
covariance of the users in T, and fronthaul_mi the rate spent describing
relay k's observation to the processor.  Each B_k is Hermitian with
0 <= B_k <= Sigma_k^{-1}; B_k = (Sigma_k + Q_k)^{-1} corresponds to an
additive Gaussian test channel with noise covariance Q_k.

Everything here is over complex matrices; real inputs are embedded with zero
imaginary part.  Time-sharing is intentionally not exposed: with Gaussian
inputs it adds nothing, so scenarios with |Q| > 1 are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _linalg as la
from .core import (
    RateRegion,
    Scenario,
    ScenarioError,
    SubsetPair,
    _complex_matrix_from_json,
    _complex_matrix_to_json,
    enumerate_constraint_pairs,
)

# feasibility margin: eigenvalues of Sigma^{1/2} B Sigma^{1/2} live in [0, 1];
# at 1 the fronthaul rate diverges, so projections cap at 1 - QUANT_CAP_MARGIN.
QUANT_CAP_MARGIN = 1e-9
QUANT_EIG_TOL = 1e-10


@dataclass(frozen=True)
class GaussianScenario(Scenario):
    """Memoryless Gaussian MIMO uplink: Y_k = sum_l H[k][l] X_l + N_k.

    H[k][l] is M_k x N_l, Sigma[k] the Hermitian PD noise covariance at relay
    k, Kin[l] the Hermitian PSD input covariance of user l with
    trace(Kin[l]) <= power[l].
    """

    H: tuple[tuple[np.ndarray, ...], ...]
    Sigma: tuple[np.ndarray, ...]
    Kin: tuple[np.ndarray, ...]
    power: tuple[float, ...]

    def __post_init__(self):
        super().__post_init__()
        if self.num_timeshare != 1:
            raise ScenarioError(
                "gaussian scenarios do not support time-sharing (|Q| must be 1)"
            )
        if len(self.Sigma) != self.num_relays:
            raise ScenarioError("Sigma must have one matrix per relay")
        if len(self.Kin) != self.num_users or len(self.power) != self.num_users:
            raise ScenarioError("Kin and power must have one entry per user")
        if len(self.H) != self.num_relays or any(len(row) != self.num_users for row in self.H):
            raise ScenarioError("H must be a K x L grid of matrices")

        sigma = []
        for k, s in enumerate(self.Sigma, start=1):
            s = la.require_hermitian(s, name=f"Sigma[{k}]")
            if la.min_eig(s) <= 1e-12:
                raise ScenarioError(f"Sigma[{k}] is not positive definite")
            s.setflags(write=False)
            sigma.append(s)
        kin = []
        for l, (m, p) in enumerate(zip(self.Kin, self.power), start=1):
            m = la.require_hermitian(m, name=f"Kin[{l}]")
            if la.min_eig(m) < -la.HERM_TOL:
                raise ScenarioError(f"Kin[{l}] is not positive semidefinite")
            if float(np.real(np.trace(m))) > float(p) + 1e-9:
                raise ScenarioError(f"Kin[{l}] violates the power budget power[{l}]")
            m.setflags(write=False)
            kin.append(m)
        grid = []
        for k, row in enumerate(self.H, start=1):
            fixed = []
            for l, h in enumerate(row, start=1):
                h = np.array(np.atleast_2d(h), dtype=np.complex128, order="C")
                if h.shape != (sigma[k - 1].shape[0], kin[l - 1].shape[0]):
                    raise ScenarioError(
                        f"H[{k}][{l}] has shape {h.shape}, expected "
                        f"({sigma[k - 1].shape[0]}, {kin[l - 1].shape[0]})"
                    )
                h.setflags(write=False)
                fixed.append(h)
            grid.append(tuple(fixed))
        object.__setattr__(self, "Sigma", tuple(sigma))
        object.__setattr__(self, "Kin", tuple(kin))
        object.__setattr__(self, "H", tuple(grid))
        object.__setattr__(self, "power", tuple(float(p) for p in self.power))

    @property
    def relay_antennas(self) -> tuple[int, ...]:
        return tuple(s.shape[0] for s in self.Sigma)

    @property
    def user_antennas(self) -> tuple[int, ...]:
        return tuple(m.shape[0] for m in self.Kin)

    def channel_to_users(self, relay: int, users) -> np.ndarray:
        """H_{relay,T}: horizontal concatenation of H[relay][l] over l in users."""
        return np.hstack([self.H[relay - 1][l - 1] for l in sorted(users)])

    def input_covariance(self, users) -> np.ndarray:
        return la.block_diag([self.Kin[l - 1] for l in sorted(users)])

    def drop_relay(self, relay: int) -> "GaussianScenario":
        """Scenario with one relay (and its fronthaul link) removed."""
        if self.num_relays < 2:
            raise ScenarioError("cannot drop the only relay")
        keep = [k for k in range(1, self.num_relays + 1) if k != relay]
        return GaussianScenario(
            num_users=self.num_users,
            num_relays=self.num_relays - 1,
            fronthaul=tuple(self.fronthaul[k - 1] for k in keep),
            time_share=self.time_share,
            H=tuple(self.H[k - 1] for k in keep),
            Sigma=tuple(self.Sigma[k - 1] for k in keep),
            Kin=self.Kin,
            power=self.power,
        )

    @classmethod
    def from_payload(cls, payload: dict, **common) -> "GaussianScenario":
        for key in ("H", "Sigma", "Kin", "power"):
            if key not in payload:
                raise ScenarioError(f"channel.{key}: missing required field")
        try:
            h_grid = tuple(
                tuple(_complex_matrix_from_json(m, f"channel.H[{k}][{l}]")
                      for l, m in enumerate(row, start=1))
                for k, row in enumerate(payload["H"], start=1)
            )
            sigma = tuple(
                _complex_matrix_from_json(m, f"channel.Sigma[{k}]")
                for k, m in enumerate(payload["Sigma"], start=1)
            )
            kin = tuple(
                _complex_matrix_from_json(m, f"channel.Kin[{l}]")
                for l, m in enumerate(payload["Kin"], start=1)
            )
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
        return cls(H=h_grid, Sigma=sigma, Kin=kin, power=tuple(payload["power"]), **common)

    def channel_payload(self) -> dict:
        return {
            "kind": "gaussian",
            "H": [[_complex_matrix_to_json(h) for h in row] for row in self.H],
            "Sigma": [_complex_matrix_to_json(s) for s in self.Sigma],
            "Kin": [_complex_matrix_to_json(m) for m in self.Kin],
            "power": list(self.power),
        }


@dataclass(frozen=True)
class QuantizerSetGaussian:
    """One Hermitian quantization matrix B_k per relay."""

    B: tuple[np.ndarray, ...]

    def __post_init__(self):
        fixed = []
        for k, b in enumerate(self.B, start=1):
            b = la.require_hermitian(b, name=f"B[{k}]")
            b.setflags(write=False)
            fixed.append(b)
        object.__setattr__(self, "B", tuple(fixed))

    def validate(self, sc: GaussianScenario, tol: float = QUANT_EIG_TOL) -> None:
        """Check 0 <= B_k <= Sigma_k^{-1} via eigenvalues of Sigma^{1/2} B Sigma^{1/2}."""
        if len(self.B) != sc.num_relays:
            raise ValueError("quantizer count must equal the number of relays")
        for k, (b, s) in enumerate(zip(self.B, sc.Sigma), start=1):
            if b.shape != s.shape:
                raise ValueError(f"B[{k}] has shape {b.shape}, expected {s.shape}")
            root = la.psd_sqrt(s)
            lam = np.linalg.eigvalsh(la.hermitian_part(root @ b @ root))
            if lam.min() < -tol or lam.max() > 1.0 + tol:
                raise ValueError(
                    f"B[{k}] violates 0 <= B <= Sigma^-1 "
                    f"(normalized eigenvalues in [{lam.min():.3e}, {lam.max():.3e}])"
                )


def fronthaul_mi(sigma, b) -> float:
    """Bits per use spent quantizing one relay's observation:
    -log2 det(I - Sigma^{1/2} B Sigma^{1/2}).

    Returns +inf when B touches Sigma^{-1} (the test channel becomes
    noiseless and the description rate diverges).
    """
    sigma = la.require_pd(sigma, name="Sigma")
    b = la.require_hermitian(b, name="B")
    root = la.psd_sqrt(sigma)
    lam = np.linalg.eigvalsh(la.hermitian_part(root @ b @ root))
    if lam.min() < -QUANT_EIG_TOL:
        raise ValueError(f"B is not positive semidefinite (min normalized eig {lam.min():.3e})")
    lam = np.clip(lam, 0.0, None)
    if lam.max() > 1.0 - 1e-12:
        return math.inf
    return float(-np.sum(np.log2(1.0 - lam))) + 0.0


def b_from_test_channel(sigma, qn) -> tuple[np.ndarray, np.ndarray]:
    """Quantization matrix and residual error of the additive test channel
    U = Y + Z, Z ~ CN(0, Q): B = (Sigma + Q)^{-1}, mmse = Sigma - Sigma B Sigma."""
    sigma = la.require_pd(sigma, name="Sigma")
    qn = la.require_pd(qn, name="Q")
    total = sigma + qn
    try:
        b = np.linalg.inv(total)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Sigma + Q is singular") from exc
    b = la.hermitian_part(b)
    mmse = la.hermitian_part(sigma - sigma @ b @ sigma)
    return b, mmse


def rate_constraint_gaussian(
    sc: GaussianScenario, q: QuantizerSetGaussian, pair: SubsetPair
) -> float:
    """One constraint bound of the Gaussian region, in bits (may be -inf)."""
    s_term = 0.0
    for k in pair.relays:
        mi = fronthaul_mi(sc.Sigma[k - 1], q.B[k - 1])
        if math.isinf(mi):
            return -math.inf
        s_term += sc.fronthaul[k - 1] - mi
    relays_c = pair.relays_complement(sc.num_relays)
    if not relays_c:
        return s_term
    n_t = sum(sc.user_antennas[l - 1] for l in pair.users)
    a = np.zeros((n_t, n_t), dtype=np.complex128)
    for k in relays_c:
        h = sc.channel_to_users(k, pair.users)
        a += h.conj().T @ q.B[k - 1] @ h
    k_root = la.psd_sqrt(sc.input_covariance(pair.users))
    m = np.eye(n_t, dtype=np.complex128) + k_root @ la.hermitian_part(a) @ k_root
    return s_term + la.logdet2(m)


def region_gaussian(sc: GaussianScenario, q: QuantizerSetGaussian) -> RateRegion:
    """Evaluate every (T, S) constraint; negative bounds are kept as-is."""
    q.validate(sc)
    pairs = enumerate_constraint_pairs(sc.num_users, sc.num_relays)
    constraints = tuple((p, rate_constraint_gaussian(sc, q, p)) for p in pairs)
    return RateRegion(num_users=sc.num_users, constraints=constraints)


def point_in_region(region: RateRegion, rates) -> bool:
    """True iff the rate vector satisfies every constraint (tolerance 1e-9)."""
    return region.contains(rates)


def matrix_lemma_check(a, b, c, tol: float = 1e-10) -> bool:
    """For Hermitian PD A, B, C with B >= A: check |I + BC| >= |I + AC|.

    Determinants are compared through log2 det of the symmetrized products
    I + C^{1/2} M C^{1/2}; the comparison allows slack ``tol``.
    """
    a = la.require_pd(a, name="A")
    b = la.require_pd(b, name="B")
    c = la.require_pd(c, name="C")
    if la.min_eig(b - a) < -la.HERM_TOL:
        raise ValueError("precondition B >= A violated")
    c_root = la.psd_sqrt(c)
    lhs = la.logdet2(np.eye(c.shape[0]) + c_root @ b @ c_root)
    rhs = la.logdet2(np.eye(c.shape[0]) + c_root @ a @ c_root)
    return lhs >= rhs - tol


def weighted_arithmetic_mean(mats, weights) -> np.ndarray:
    """sum_i w_i A_i for PD matrices A_i and nonnegative weights summing to 1."""
    w = _check_weights(weights, len(mats))
    out = sum(wi * la.require_pd(m, name="A_i") for wi, m in zip(w, mats))
    return la.hermitian_part(out)


def weighted_harmonic_mean(mats, weights) -> np.ndarray:
    """(sum_i w_i A_i^{-1})^{-1} for PD matrices A_i."""
    w = _check_weights(weights, len(mats))
    acc = sum(wi * np.linalg.inv(la.require_pd(m, name="A_i")) for wi, m in zip(w, mats))
    return la.hermitian_part(np.linalg.inv(acc))


def _check_weights(weights, count: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (count,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to 1, one per matrix")
    return w
