"""Exact finite-alphabet evaluation of the rate-region formulas on dense
joint probability tensors.

The joint law used everywhere is

    p(q) * prod_l p(x_l|q) * p(y_1..y_K | x_1..x_L) * prod_k p(u_k|y_k,q)

stored as one dense tensor with labeled axes ('Q', 'X1'.., 'Y1'.., 'U1'..).
Tensors are capped at MAX_JOINT_ENTRIES entries; within that budget every
information quantity is an exact sum (0 log 0 = 0), so the only error is
float rounding.

Three constraint families are evaluated:

* ``thm1_constraint`` - the exact region for channels whose relay outputs are
  conditionally independent given the user inputs,
* ``thm3_constraint`` - the general inner bound (no independence needed),
* ``thm4_constraint`` - the outer bound, whose auxiliaries are deterministic
  functions of (W, Y_k, Q) for a shared randomizer W.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from string import ascii_lowercase, ascii_uppercase

import numpy as np

from .core import (
    CapacityError,
    PMF_TOL,
    RateRegion,
    Scenario,
    ScenarioError,
    SubsetPair,
    enumerate_constraint_pairs,
)

MAX_JOINT_ENTRIES = 10_000_000


def user_axis(l: int) -> str:
    return f"X{l}"


def relay_axis(k: int) -> str:
    return f"Y{k}"


def aux_axis(k: int) -> str:
    return f"U{k}"


@dataclass(frozen=True)
class DiscreteScenario(Scenario):
    """Finite-alphabet scenario: per-user input tables p(x_l|q) of shape
    (|Q|, |X_l|) and the channel tensor p(y_1..y_K|x_1..x_L) with axes
    (X_1, ..., X_L, Y_1, ..., Y_K), normalized over the Y axes."""

    px: tuple[np.ndarray, ...]
    channel: np.ndarray

    def __post_init__(self):
        super().__post_init__()
        if len(self.px) != self.num_users:
            raise ScenarioError("px must have one table per user")
        tables = []
        for l, t in enumerate(self.px, start=1):
            t = np.array(t, dtype=float, order="C")
            if t.ndim != 2 or t.shape[0] != self.num_timeshare or t.shape[1] < 1:
                raise ScenarioError(f"px[{l}] must have shape (|Q|, |X_{l}|)")
            _check_pmf_axis(t, -1, f"px[{l}]")
            t.setflags(write=False)
            tables.append(t)
        ch = np.array(self.channel, dtype=float, order="C")
        x_sizes = tuple(t.shape[1] for t in tables)
        if ch.ndim != self.num_users + self.num_relays or ch.shape[: self.num_users] != x_sizes:
            raise ScenarioError(
                f"channel tensor must have axes (X_1..X_{self.num_users}, "
                f"Y_1..Y_{self.num_relays}); got shape {ch.shape}"
            )
        y_total = ch[(0,) * self.num_users].size
        if self.num_timeshare * int(np.prod(x_sizes)) * y_total > MAX_JOINT_ENTRIES:
            raise CapacityError("scenario tensor exceeds the dense-size guard")
        flat = ch.reshape(int(np.prod(x_sizes)), y_total)
        if np.any(flat < 0) or np.max(np.abs(flat.sum(axis=1) - 1.0)) > PMF_TOL:
            raise ScenarioError("channel tensor rows p(.|x) must be pmfs")
        ch.setflags(write=False)
        object.__setattr__(self, "px", tuple(tables))
        object.__setattr__(self, "channel", ch)

    @property
    def input_sizes(self) -> tuple[int, ...]:
        return tuple(t.shape[1] for t in self.px)

    @property
    def output_sizes(self) -> tuple[int, ...]:
        return self.channel.shape[self.num_users:]

    @classmethod
    def from_payload(cls, payload: dict, **common) -> "DiscreteScenario":
        for key in ("alphabets", "px", "channel"):
            if key not in payload:
                raise ScenarioError(f"channel.{key}: missing required field")
        alphabets = payload["alphabets"]
        try:
            x_sizes = tuple(int(v) for v in alphabets["X"])
            y_sizes = tuple(int(v) for v in alphabets["Y"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError("channel.alphabets: needs integer lists 'X' and 'Y'") from exc
        try:
            flat = np.asarray(payload["channel"], dtype=float)
        except ValueError as exc:
            raise ScenarioError("channel.channel: malformed tensor") from exc
        if flat.size != int(np.prod(y_sizes)) * int(np.prod(x_sizes)):
            raise ScenarioError("channel.channel: length does not match alphabets")
        # wire order is (Y_1..Y_K, X_1..X_L) row-major; internal order puts X first
        tensor = flat.reshape(y_sizes + x_sizes)
        tensor = np.moveaxis(
            tensor,
            list(range(len(y_sizes))),
            list(range(len(x_sizes), len(x_sizes) + len(y_sizes))),
        )
        px = tuple(np.asarray(t, dtype=float) for t in payload["px"])
        return cls(px=px, channel=np.ascontiguousarray(tensor), **common)

    def channel_payload(self, aux: "AuxChannels | None" = None) -> dict:
        k, l = self.num_relays, self.num_users
        wire = np.moveaxis(self.channel, list(range(l, l + k)), list(range(k)))
        payload = {
            "kind": "discrete",
            "alphabets": {"X": list(self.input_sizes), "Y": list(self.output_sizes)},
            "px": [t.tolist() for t in self.px],
            "channel": np.ascontiguousarray(wire).ravel().tolist(),
        }
        if aux is not None:
            payload["aux"] = [t.tolist() for t in aux.tables]
        return payload


@dataclass(frozen=True)
class AuxChannels:
    """Per-relay quantization channels p(u_k|y_k,q), each a table of shape
    (|Q|, |Y_k|, |U_k|)."""

    tables: tuple[np.ndarray, ...]

    def __post_init__(self):
        fixed = []
        for k, t in enumerate(self.tables, start=1):
            t = np.array(t, dtype=float, order="C")
            if t.ndim != 3 or t.shape[2] < 1:
                raise ValueError(f"aux[{k}] must have shape (|Q|, |Y_{k}|, |U_{k}|)")
            _check_pmf_axis(t, -1, f"aux[{k}]")
            t.setflags(write=False)
            fixed.append(t)
        object.__setattr__(self, "tables", tuple(fixed))

    @property
    def aux_sizes(self) -> tuple[int, ...]:
        return tuple(t.shape[2] for t in self.tables)

    def check_compatible(self, sc: DiscreteScenario) -> None:
        if len(self.tables) != sc.num_relays:
            raise ValueError("need one aux channel per relay")
        for k, t in enumerate(self.tables, start=1):
            if t.shape[0] != sc.num_timeshare or t.shape[1] != sc.output_sizes[k - 1]:
                raise ValueError(f"aux[{k}] does not match the scenario alphabets")


def identity_aux(sc: DiscreteScenario) -> AuxChannels:
    """Copy channels U_k = Y_k (no quantization)."""
    tables = []
    for size in sc.output_sizes:
        eye = np.broadcast_to(np.eye(size), (sc.num_timeshare, size, size))
        tables.append(np.ascontiguousarray(eye))
    return AuxChannels(tables=tuple(tables))


@dataclass(frozen=True)
class OuterBoundWitness:
    """Shared randomizer W ~ p(w|q) plus deterministic maps u_k = f_k(w, y_k, q).

    ``maps[k-1]`` has shape (|Q|, |W|, |Y_k|) with integer entries in
    [0, u_sizes[k-1]).
    """

    pw: np.ndarray
    maps: tuple[np.ndarray, ...]
    u_sizes: tuple[int, ...]

    def __post_init__(self):
        pw = np.array(self.pw, dtype=float, order="C")
        if pw.ndim != 2:
            raise ValueError("pw must have shape (|Q|, |W|)")
        _check_pmf_axis(pw, -1, "pw")
        pw.setflags(write=False)
        fixed = []
        for k, (m, u) in enumerate(zip(self.maps, self.u_sizes), start=1):
            m = np.array(m, dtype=np.int64, order="C")
            if m.ndim != 3 or m.shape[:2] != pw.shape:
                raise ValueError(f"maps[{k}] must have shape (|Q|, |W|, |Y_{k}|)")
            if u < 1 or np.any(m < 0) or np.any(m >= u):
                raise ValueError(f"maps[{k}] entries must lie in [0, {u})")
            m.setflags(write=False)
            fixed.append(m)
        object.__setattr__(self, "pw", pw)
        object.__setattr__(self, "maps", tuple(fixed))
        object.__setattr__(self, "u_sizes", tuple(int(u) for u in self.u_sizes))


class JointPmf:
    """Dense joint pmf with labeled axes and cached subset entropies."""

    def __init__(self, tensor: np.ndarray, axes: tuple[str, ...]):
        tensor = np.asarray(tensor, dtype=float)
        if tensor.ndim != len(axes) or len(set(axes)) != len(axes):
            raise ValueError("axis labels must be unique and match tensor rank")
        if np.any(tensor < -1e-15):
            raise ValueError("joint tensor has negative entries")
        total = tensor.sum()
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"joint tensor sums to {total!r}, not 1")
        tensor = np.clip(tensor, 0.0, None)
        tensor.setflags(write=False)
        self.tensor = tensor
        self.axes = tuple(axes)
        self._entropy_cache: dict[frozenset, float] = {}

    def axis_index(self, label: str) -> int:
        try:
            return self.axes.index(label)
        except ValueError:
            raise KeyError(f"no axis labeled {label!r}") from None

    def marginal(self, labels) -> np.ndarray:
        keep = set(labels)
        unknown = keep - set(self.axes)
        if unknown:
            raise KeyError(f"unknown axes {sorted(unknown)}")
        drop = tuple(i for i, ax in enumerate(self.axes) if ax not in keep)
        return self.tensor.sum(axis=drop) if drop else self.tensor

    def entropy(self, labels) -> float:
        """H of the marginal on ``labels``, in bits."""
        key = frozenset(labels)
        if key not in self._entropy_cache:
            p = self.marginal(key)
            nz = p[p > 0]
            self._entropy_cache[key] = float(-(nz * np.log2(nz)).sum())
        return self._entropy_cache[key]


def cmi(j: JointPmf, a, b, c=()) -> float:
    """Conditional mutual information I(A; B | C) in bits, clipped at 0.

    A, B, C are disjoint collections of axis labels; empty A or B gives 0.
    """
    a, b, c = set(a), set(b), set(c)
    if (a & b) or (a & c) or (b & c):
        raise ValueError("axis sets must be disjoint")
    if not a or not b:
        return 0.0
    val = j.entropy(a | c) + j.entropy(b | c) - j.entropy(a | b | c) - j.entropy(c)
    return max(0.0, val)


def _check_pmf_axis(table: np.ndarray, axis: int, name: str) -> None:
    if np.any(table < 0):
        raise ScenarioError(f"{name} has negative entries")
    sums = table.sum(axis=axis)
    if sums.size and np.max(np.abs(sums - 1.0)) > PMF_TOL:
        raise ScenarioError(f"{name} is not normalized along its distribution axis")


def _letters(n: int) -> str:
    pool = ascii_lowercase + ascii_uppercase
    if n > len(pool):
        raise CapacityError("too many tensor axes for einsum construction")
    return pool[:n]


def check_conditional_independence(sc: DiscreteScenario, tol: float = 1e-9) -> bool:
    """True iff p(y_1..y_K|x) factorizes into prod_k p(y_k|x) within tol."""
    l, k = sc.num_users, sc.num_relays
    if k == 1:
        return True
    letters = _letters(l + k)
    xs, ys = letters[:l], letters[l:]
    marginals = []
    for i in range(k):
        keep = tuple(range(l)) + (l + i,)
        marginals.append(sc.channel.sum(axis=tuple(j for j in range(l + k) if j not in keep)))
    subscripts = ",".join(xs + ys[i] for i in range(k)) + "->" + xs + ys
    product = np.einsum(subscripts, *marginals, optimize=True)
    return float(np.max(np.abs(sc.channel - product))) <= tol


def build_joint(sc: DiscreteScenario, aux: AuxChannels) -> JointPmf:
    """Dense joint p(q, x_1..x_L, y_1..y_K, u_1..u_K) from the product form."""
    aux.check_compatible(sc)
    l, k = sc.num_users, sc.num_relays
    size = (
        sc.num_timeshare
        * int(np.prod(sc.input_sizes))
        * int(np.prod(sc.output_sizes))
        * int(np.prod(aux.aux_sizes))
    )
    if size > MAX_JOINT_ENTRIES:
        raise CapacityError(f"joint tensor would have {size} entries")
    letters = _letters(1 + l + 2 * k)
    q = letters[0]
    xs = letters[1 : 1 + l]
    ys = letters[1 + l : 1 + l + k]
    us = letters[1 + l + k :]
    operands = [np.asarray(sc.time_share)]
    operand_axes = [q]
    for i in range(l):
        operands.append(sc.px[i])
        operand_axes.append(q + xs[i])
    operands.append(sc.channel)
    operand_axes.append(xs + ys)
    for i in range(k):
        operands.append(aux.tables[i])
        operand_axes.append(q + ys[i] + us[i])
    out = q + xs + ys + us
    tensor = np.einsum(",".join(operand_axes) + "->" + out, *operands, optimize=True)
    axes = (
        ("Q",)
        + tuple(user_axis(i) for i in range(1, l + 1))
        + tuple(relay_axis(i) for i in range(1, k + 1))
        + tuple(aux_axis(i) for i in range(1, k + 1))
    )
    return JointPmf(tensor, axes)


def build_joint_from_witness(sc: DiscreteScenario, witness: OuterBoundWitness) -> JointPmf:
    """Joint law induced by u_k = f_k(w, y_k, q), with W marginalized out."""
    l, k = sc.num_users, sc.num_relays
    if witness.pw.shape[0] != sc.num_timeshare or len(witness.maps) != k:
        raise ValueError("witness does not match the scenario")
    for i, m in enumerate(witness.maps):
        if m.shape[2] != sc.output_sizes[i]:
            raise ValueError(f"maps[{i + 1}] does not match |Y_{i + 1}|")
    num_w = witness.pw.shape[1]
    size = (
        sc.num_timeshare * num_w
        * int(np.prod(sc.input_sizes))
        * int(np.prod(sc.output_sizes))
        * int(np.prod(witness.u_sizes))
    )
    if size > MAX_JOINT_ENTRIES:
        raise CapacityError(f"witness joint tensor would have {size} entries")
    letters = _letters(2 + l + 2 * k)
    q, w = letters[0], letters[1]
    xs = letters[2 : 2 + l]
    ys = letters[2 + l : 2 + l + k]
    us = letters[2 + l + k :]
    operands = [np.asarray(sc.time_share), witness.pw]
    operand_axes = [q, q + w]
    for i in range(l):
        operands.append(sc.px[i])
        operand_axes.append(q + xs[i])
    operands.append(sc.channel)
    operand_axes.append(xs + ys)
    for i in range(k):
        onehot = (
            witness.maps[i][..., None] == np.arange(witness.u_sizes[i])
        ).astype(float)
        operands.append(onehot)
        operand_axes.append(q + w + ys[i] + us[i])
    out = q + xs + ys + us  # w is contracted away
    tensor = np.einsum(",".join(operand_axes) + "->" + out, *operands, optimize=True)
    axes = (
        ("Q",)
        + tuple(user_axis(i) for i in range(1, l + 1))
        + tuple(relay_axis(i) for i in range(1, k + 1))
        + tuple(aux_axis(i) for i in range(1, k + 1))
    )
    return JointPmf(tensor, axes)


def witness_induced_aux(sc: DiscreteScenario, witness: OuterBoundWitness) -> AuxChannels:
    """Marginal per-relay channels p(u_k|y_k,q) = sum_w p(w|q) 1[f_k(w,y_k,q)=u].

    For |W| = 1 the witness joint and the product joint built from these
    tables coincide; for |W| > 1 they differ (the U's stay coupled through W).
    """
    tables = []
    for m, u in zip(witness.maps, witness.u_sizes):
        onehot = (m[..., None] == np.arange(u)).astype(float)
        tables.append(np.einsum("qw,qwyu->qyu", witness.pw, onehot))
    return AuxChannels(tables=tuple(tables))


def _constraint_from_joint(
    j: JointPmf, fronthaul, pair: SubsetPair, num_users: int, num_relays: int, which: str
) -> float:
    x_all = {user_axis(i) for i in range(1, num_users + 1)}
    x_t = {user_axis(i) for i in pair.users}
    x_tc = x_all - x_t
    u_s = {aux_axis(i) for i in pair.relays}
    y_s = {relay_axis(i) for i in pair.relays}
    u_sc = {aux_axis(i) for i in pair.relays_complement(num_relays)}
    common = cmi(j, x_t, u_sc, x_tc | {"Q"})
    if which == "thm1":
        s_term = sum(
            fronthaul[k - 1] - cmi(j, {relay_axis(k)}, {aux_axis(k)}, x_all | {"Q"})
            for k in pair.relays
        )
        return s_term + common
    if which == "thm3":
        c_sum = sum(fronthaul[k - 1] for k in pair.relays)
        return c_sum - cmi(j, y_s, u_s, x_all | u_sc | {"Q"}) + common
    raise ValueError(f"unknown constraint family {which!r}")


def _warn_if_not_factorizing(sc: DiscreteScenario) -> None:
    if not check_conditional_independence(sc):
        warnings.warn(
            "relay outputs are not conditionally independent given the inputs; "
            "the exact-region formula is evaluated anyway and is only an "
            "achievability expression here",
            RuntimeWarning,
            stacklevel=3,
        )


def thm1_constraint(
    sc: DiscreteScenario, aux: AuxChannels, pair: SubsetPair, *, _joint=None, _warn=True
) -> float:
    """Bound for one (T, S) pair in the exact region of conditionally
    independent relay outputs:
    sum_{s in S} [C_s - I(Y_s;U_s|X_all,Q)] + I(X_T;U_{S^c}|X_{T^c},Q)."""
    if _warn:
        _warn_if_not_factorizing(sc)
    j = _joint if _joint is not None else build_joint(sc, aux)
    return _constraint_from_joint(j, sc.fronthaul, pair, sc.num_users, sc.num_relays, "thm1")


def thm3_constraint(
    sc: DiscreteScenario, aux: AuxChannels, pair: SubsetPair, *, _joint=None
) -> float:
    """General inner-bound constraint:
    sum_{s in S} C_s - I(Y_S;U_S|X_all,U_{S^c},Q) + I(X_T;U_{S^c}|X_{T^c},Q)."""
    j = _joint if _joint is not None else build_joint(sc, aux)
    return _constraint_from_joint(j, sc.fronthaul, pair, sc.num_users, sc.num_relays, "thm3")


def thm4_constraint(
    sc: DiscreteScenario, witness: OuterBoundWitness, pair: SubsetPair, *, _joint=None
) -> float:
    """Outer-bound constraint: the inner-bound expression evaluated on the
    joint induced by u_k = f_k(w, y_k, q), with W marginalized out."""
    j = _joint if _joint is not None else build_joint_from_witness(sc, witness)
    return _constraint_from_joint(j, sc.fronthaul, pair, sc.num_users, sc.num_relays, "thm3")


def region_discrete(sc: DiscreteScenario, aux: AuxChannels, which: str = "thm1") -> RateRegion:
    """Evaluate all (T, S) constraints of one family ('thm1' or 'thm3')."""
    if which not in ("thm1", "thm3"):
        raise ValueError("which must be 'thm1' or 'thm3'")
    if which == "thm1":
        _warn_if_not_factorizing(sc)
    j = build_joint(sc, aux)
    pairs = enumerate_constraint_pairs(sc.num_users, sc.num_relays)
    constraints = tuple(
        (p, _constraint_from_joint(j, sc.fronthaul, p, sc.num_users, sc.num_relays, which))
        for p in pairs
    )
    return RateRegion(num_users=sc.num_users, constraints=constraints)


def region_outer(sc: DiscreteScenario, witness: OuterBoundWitness) -> RateRegion:
    """All outer-bound constraints for one witness."""
    j = build_joint_from_witness(sc, witness)
    pairs = enumerate_constraint_pairs(sc.num_users, sc.num_relays)
    constraints = tuple(
        (p, _constraint_from_joint(j, sc.fronthaul, p, sc.num_users, sc.num_relays, "thm3"))
        for p in pairs
    )
    return RateRegion(num_users=sc.num_users, constraints=constraints)
