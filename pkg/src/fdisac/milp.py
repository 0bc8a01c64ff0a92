"""Exact MILP form of the joint timeslot/beam selection problem.

Products of binaries are linearized with the usual three-inequality
encoding (delta = chi AND kappa, pi = chi AND rho, gamma = kappa OR zeta).
Because at most one codeword is active per slot, squared magnitudes of
codeword sums collapse to sums of squared magnitudes, so every nonlinear
term becomes a precomputed scalar times a binary.

Row families and counts for S slots, L_tx transmit and L_rx receive codewords::

    D1-D4   4 L_tx S        delta linearization
    F1-F4   4 S             gamma = kappa OR zeta
    G2-G5   4 L_tx L_rx S   pi linearization
    G1, G6  S each          sensing gain >= z >= worst-case interference + noise
    E1      S               z >= 0
    C6, C9  S each          one transmit / receive codeword per active / sensing slot
    C4, C13 1 each          horizon and minimum sensing slots
"""

from __future__ import annotations

import io
import os
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from fdisac.beams import Codebook
from fdisac.channels import ChannelSet, SiUncertainty
from fdisac.metrics import SlotAssignment

TAGS = ("C4", "C6", "C9", "C13", "D1", "D2", "D3", "D4", "E1",
        "F1", "F2", "F3", "F4", "G1", "G2", "G3", "G4", "G5", "G6")


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """Scalar constants of the MILP; matrices are indexed ``[b, c]``."""

    rate_per_tx: np.ndarray
    comm_gain: np.ndarray
    sense_gain: np.ndarray
    si_leak: np.ndarray
    rx_noise: np.ndarray
    robust_scale: float
    noise_scale: float
    reflection_coeff: float
    sinr_threshold: float
    worst_upsilon: float
    bandwidth_hz: float = 200e6
    slot_s: float = 1e-3

    @property
    def n_tx(self) -> int:
        return len(self.rate_per_tx)

    @property
    def n_rx(self) -> int:
        return len(self.rx_noise)

    def pair_feasible(self) -> np.ndarray:
        """Boolean (L_tx, L_rx): pair meets the SINR threshold at the worst-case SI factor."""
        return self.sense_gain >= self.robust_scale * self.si_leak + self.noise_scale * self.rx_noise[None, :]

    def worst_sinr(self, b: int, c: int) -> float:
        denom = self.worst_upsilon**2 * self.si_leak[b, c] + self.rx_noise[c]
        return float(self.reflection_coeff**2 * self.sense_gain[b, c] / denom)

    def with_scenario(
        self, *, si: SiUncertainty | None = None, sinr_threshold: float | None = None,
        reflection_coeff: float | None = None,
    ) -> CoefficientTable:
        """Same beams and channels under a different threshold, reflection or SI interval."""
        lam = self.sinr_threshold if sinr_threshold is None else sinr_threshold
        psi = self.reflection_coeff if reflection_coeff is None else reflection_coeff
        ups = self.worst_upsilon if si is None else si.worst_case
        return replace(
            self, sinr_threshold=lam, reflection_coeff=psi, worst_upsilon=ups,
            noise_scale=lam / psi**2, robust_scale=lam / psi**2 * ups**2,
        )


def precompute(
    channels: ChannelSet, tx_cb: Codebook, rx_cb: Codebook, bandwidth_hz: float, slot_s: float
) -> CoefficientTable:
    if len(tx_cb) == 0 or len(rx_cb) == 0:
        raise ValueError("codebooks must be nonempty")
    B = tx_cb.matrix
    C = rx_cb.matrix
    n_rx, n_tx = channels.steering_outer.shape
    if B.shape[1] != n_tx or channels.h_bar.shape != (n_tx,) or channels.si_matrix.shape != (n_rx, n_tx):
        raise ValueError("transmit codebook does not match the channel dimensions")
    if C.shape[1] != n_rx:
        raise ValueError("receive codebook does not match the channel dimensions")

    comm_gain = np.abs(B @ channels.h_bar.conj()) ** 2
    rate = bandwidth_hz * slot_s * np.log2(1.0 + comm_gain)
    sense_gain = (np.abs(C.conj() @ channels.steering_outer @ B.T) ** 2).T
    si_leak = (np.abs(C.conj() @ channels.si_matrix @ B.T) ** 2).T
    rx_noise = channels.sensing.noise_power_w * np.sum(np.abs(C) ** 2, axis=1)

    s = channels.sensing
    noise_scale = s.sinr_threshold / s.reflection_coeff**2
    return CoefficientTable(
        rate_per_tx=rate,
        comm_gain=comm_gain,
        sense_gain=sense_gain,
        si_leak=si_leak,
        rx_noise=rx_noise,
        robust_scale=noise_scale * channels.si.worst_case**2,
        noise_scale=noise_scale,
        reflection_coeff=s.reflection_coeff,
        sinr_threshold=s.sinr_threshold,
        worst_upsilon=channels.si.worst_case,
        bandwidth_hz=bandwidth_hz,
        slot_s=slot_s,
    )


@dataclass(frozen=True)
class VarIndex:
    """Column layout: kappa, zeta, gamma, chi, rho, delta, pi, z (slot-major inside each family)."""

    n_slots: int
    n_tx: int
    n_rx: int

    @property
    def _offsets(self):
        S, T, R = self.n_slots, self.n_tx, self.n_rx
        kappa = 0
        zeta = kappa + S
        gamma = zeta + S
        chi = gamma + S
        rho = chi + S * T
        delta = rho + S * R
        pi = delta + S * T
        z = pi + S * T * R
        return kappa, zeta, gamma, chi, rho, delta, pi, z, z + S

    @property
    def n_vars(self) -> int:
        return self._offsets[-1]

    @property
    def n_binary(self) -> int:
        return self._offsets[7]

    def kappa(self, s):
        return self._offsets[0] + np.asarray(s)

    def zeta(self, s):
        return self._offsets[1] + np.asarray(s)

    def gamma(self, s):
        return self._offsets[2] + np.asarray(s)

    def chi(self, b, s):
        return self._offsets[3] + np.asarray(s) * self.n_tx + np.asarray(b)

    def rho(self, c, s):
        return self._offsets[4] + np.asarray(s) * self.n_rx + np.asarray(c)

    def delta(self, b, s):
        return self._offsets[5] + np.asarray(s) * self.n_tx + np.asarray(b)

    def pi(self, b, c, s):
        return self._offsets[6] + (np.asarray(s) * self.n_tx + np.asarray(b)) * self.n_rx + np.asarray(c)

    def z(self, s):
        return self._offsets[7] + np.asarray(s)

    def names(self) -> list[str]:
        S, T, R = self.n_slots, self.n_tx, self.n_rx
        out = [f"kappa_s{s}" for s in range(S)]
        out += [f"zeta_s{s}" for s in range(S)]
        out += [f"gamma_s{s}" for s in range(S)]
        out += [f"chi_b{b}_s{s}" for s in range(S) for b in range(T)]
        out += [f"rho_c{c}_s{s}" for s in range(S) for c in range(R)]
        out += [f"delta_b{b}_s{s}" for s in range(S) for b in range(T)]
        out += [f"pi_b{b}_c{c}_s{s}" for s in range(S) for b in range(T) for c in range(R)]
        out += [f"z_s{s}" for s in range(S)]
        return out


@dataclass(frozen=True, eq=False)
class MilpModel:
    coeffs: CoefficientTable
    n_slots: int
    min_sensing: int
    index: VarIndex
    objective: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray  # '<', '>' or '='
    rhs: np.ndarray
    row_names: list[str]
    row_tags: np.ndarray
    row_slot: np.ndarray  # -1 for rows spanning the whole horizon
    binary: np.ndarray = field(repr=False)

    @property
    def n_vars(self) -> int:
        return self.index.n_vars

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def var_names(self) -> list[str]:
        return self.index.names()

    def row_counts(self) -> Counter:
        return Counter(self.row_tags.tolist())

    def row_id(self, name: str) -> int:
        return self.row_names.index(name)

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective @ x)

    @cached_property
    def row_scale(self) -> np.ndarray:
        return 1.0 + abs(self.A).max(axis=1).toarray().ravel() + np.abs(self.rhs)

    @cached_property
    def rows_by_slot(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.row_slot == s) for s in range(self.n_slots)]

    def violated_rows(self, x: np.ndarray, rows=None, tol: float = 1e-9) -> list[str]:
        """Names of rows not satisfied by ``x``; ``tol`` is relative to each row's coefficient scale."""
        rows = np.arange(self.n_rows) if rows is None else np.asarray(rows)
        lhs = self.A[rows] @ x
        rhs, sense = self.rhs[rows], self.sense[rows]
        slack = tol * self.row_scale[rows]
        bad = np.where(sense == "<", lhs > rhs + slack,
                       np.where(sense == ">", lhs < rhs - slack, np.abs(lhs - rhs) > slack))
        return [self.row_names[i] for i in rows[bad]]

    def is_feasible(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        """All rows hold and every binary column is 0 or 1."""
        xb = x[self.binary]
        if np.any((xb != 0) & (xb != 1)) or np.any(x[~self.binary] < -tol):
            return False
        return not self.violated_rows(x, tol=tol)


class _Rows:
    def __init__(self):
        self.r, self.c, self.v = [], [], []
        self.sense, self.rhs, self.names, self.tags, self.slots = [], [], [], [], []
        self.n = 0

    def add(self, tag, names, slots, terms, sense, rhs):
        """Append a batch of rows; each term is (columns, values) with one row of columns per name."""
        names = list(names)
        k = len(names)
        ids = self.n + np.arange(k)
        for cols, vals in terms:
            cols = np.asarray(cols)
            if cols.ndim == 1:
                cols = cols[:, None]
            vals = np.broadcast_to(np.asarray(vals, dtype=float), cols.shape)
            self.r.append(np.repeat(ids, cols.shape[1]))
            self.c.append(cols.ravel())
            self.v.append(vals.ravel())
        self.sense += [sense] * k
        self.rhs.append(np.broadcast_to(np.asarray(rhs, dtype=float), (k,)))
        self.names += names
        self.tags += [tag] * k
        self.slots.append(np.broadcast_to(np.asarray(slots), (k,)))
        self.n += k


def build_milp(coeffs: CoefficientTable, n_slots: int, min_sensing: int) -> MilpModel:
    S, M = int(n_slots), int(min_sensing)
    if S < 1:
        raise ValueError(f"need at least one slot, got {S}")
    if not 0 <= M <= S:
        raise ValueError(f"min_sensing must lie in [0, {S}], got {M} (infeasible)")

    T, R = coeffs.n_tx, coeffs.n_rx
    ix = VarIndex(S, T, R)
    rows = _Rows()
    slots = np.arange(S)

    # per-(s, b) grids
    s_b, b_s = np.meshgrid(slots, np.arange(T), indexing="ij")
    s_b, b_s = s_b.ravel(), b_s.ravel()
    sb_names = [f"_s{s}_b{b}" for s, b in zip(s_b, b_s)]
    delta, chi, kap = ix.delta(b_s, s_b), ix.chi(b_s, s_b), ix.kappa(s_b)
    rows.add("D1", ("D1" + n for n in sb_names), s_b, [(delta, 1), (chi, -1)], "<", 0)
    rows.add("D2", ("D2" + n for n in sb_names), s_b, [(delta, 1), (kap, -1)], "<", 0)
    rows.add("D3", ("D3" + n for n in sb_names), s_b, [(delta, 1), (chi, -1), (kap, -1)], ">", -1)
    rows.add("D4", ("D4" + n for n in sb_names), s_b, [(delta, 1)], ">", 0)

    gam, kp, zt = ix.gamma(slots), ix.kappa(slots), ix.zeta(slots)
    s_names = [f"_s{s}" for s in slots]
    rows.add("F1", ("F1" + n for n in s_names), slots, [(gam, 1), (kp, -1), (zt, -1)], "<", 0)
    rows.add("F2", ("F2" + n for n in s_names), slots, [(gam, 1), (kp, -1)], ">", 0)
    rows.add("F3", ("F3" + n for n in s_names), slots, [(gam, 1), (zt, -1)], ">", 0)
    rows.add("F4", ("F4" + n for n in s_names), slots, [(gam, 1)], "<", 1)

    # per-(s, b, c) grids
    s3, b3, c3 = (a.ravel() for a in np.meshgrid(slots, np.arange(T), np.arange(R), indexing="ij"))
    sbc_names = [f"_s{s}_b{b}_c{c}" for s, b, c in zip(s3, b3, c3)]
    pi, chi3, rho3 = ix.pi(b3, c3, s3), ix.chi(b3, s3), ix.rho(c3, s3)
    rows.add("G2", ("G2" + n for n in sbc_names), s3, [(pi, 1), (chi3, -1)], "<", 0)
    rows.add("G3", ("G3" + n for n in sbc_names), s3, [(pi, 1), (rho3, -1)], "<", 0)
    rows.add("G4", ("G4" + n for n in sbc_names), s3, [(pi, 1), (chi3, -1), (rho3, -1)], ">", -1)
    rows.add("G5", ("G5" + n for n in sbc_names), s3, [(pi, 1)], ">", 0)

    pi_grid = ix.pi(np.arange(T)[None, :, None], np.arange(R)[None, None, :], slots[:, None, None]).reshape(S, -1)
    rho_grid = ix.rho(np.arange(R)[None, :], slots[:, None])
    chi_grid = ix.chi(np.arange(T)[None, :], slots[:, None])
    z = ix.z(slots)
    gain = coeffs.sense_gain.ravel()[None, :]
    leak = (coeffs.robust_scale * coeffs.si_leak).ravel()[None, :]
    noise = (coeffs.noise_scale * coeffs.rx_noise)[None, :]
    rows.add("G1", ("G1" + n for n in s_names), slots, [(pi_grid, gain), (z[:, None], -1)], ">", 0)
    rows.add("G6", ("G6" + n for n in s_names), slots,
             [(z[:, None], 1), (pi_grid, -leak), (rho_grid, -noise)], ">", 0)
    rows.add("E1", ("E1" + n for n in s_names), slots, [(z[:, None], 1)], ">", 0)

    rows.add("C6", ("C6" + n for n in s_names), slots, [(chi_grid, 1), (gam[:, None], -1)], "=", 0)
    rows.add("C9", ("C9" + n for n in s_names), slots, [(rho_grid, 1), (zt[:, None], -1)], "=", 0)
    rows.add("C4", ["C4"], -1, [(gam[None, :], 1)], "<", S)
    rows.add("C13", ["C13"], -1, [(zt[None, :], 1)], ">", M)

    A = sp.csr_matrix(
        (np.concatenate(rows.v), (np.concatenate(rows.r), np.concatenate(rows.c))),
        shape=(rows.n, ix.n_vars),
    )
    objective = np.zeros(ix.n_vars)
    objective[ix.delta(b_s, s_b)] = coeffs.rate_per_tx[b_s]
    binary = np.zeros(ix.n_vars, dtype=bool)
    binary[: ix.n_binary] = True

    model = MilpModel(
        coeffs=coeffs, n_slots=S, min_sensing=M, index=ix, objective=objective, A=A,
        sense=np.array(rows.sense), rhs=np.concatenate(rows.rhs), row_names=rows.names,
        row_tags=np.array(rows.tags), row_slot=np.concatenate(rows.slots).astype(int), binary=binary,
    )
    expected = {
        "D1": T * S, "D2": T * S, "D3": T * S, "D4": T * S,
        "F1": S, "F2": S, "F3": S, "F4": S,
        "G2": T * R * S, "G3": T * R * S, "G4": T * R * S, "G5": T * R * S,
        "G1": S, "G6": S, "E1": S, "C6": S, "C9": S, "C4": 1, "C13": 1,
    }
    assert dict(model.row_counts()) == expected, model.row_counts()
    return model


def assignment_to_point(schedule: list[SlotAssignment], coeffs: CoefficientTable) -> np.ndarray:
    """Valuation of every MILP column implied by a per-slot assignment.

    delta and pi are the products of their factors, gamma = kappa OR zeta and
    z takes the largest value allowed by G1. Slots whose indices disagree with
    their mode are mapped as written, so the corresponding rows are violated.
    """
    S, T, R = len(schedule), coeffs.n_tx, coeffs.n_rx
    ix = VarIndex(S, T, R)
    x = np.zeros(ix.n_vars)
    for s, a in enumerate(schedule):
        if a.tx_index is not None and not 0 <= a.tx_index < T:
            raise ValueError(f"slot {s}: transmit index {a.tx_index} outside codebook of size {T}")
        if a.rx_index is not None and not 0 <= a.rx_index < R:
            raise ValueError(f"slot {s}: receive index {a.rx_index} outside codebook of size {R}")
        kappa, zeta = float(a.comm_on), float(a.sense_on)
        x[ix.kappa(s)] = kappa
        x[ix.zeta(s)] = zeta
        x[ix.gamma(s)] = max(kappa, zeta)
        if a.tx_index is not None:
            x[ix.chi(a.tx_index, s)] = 1.0
            x[ix.delta(a.tx_index, s)] = kappa
        if a.rx_index is not None:
            x[ix.rho(a.rx_index, s)] = 1.0
        if a.tx_index is not None and a.rx_index is not None:
            x[ix.pi(a.tx_index, a.rx_index, s)] = 1.0
            x[ix.z(s)] = coeffs.sense_gain[a.tx_index, a.rx_index]
    return x


def _fmt(v: float) -> str:
    # shortest repr that round-trips exactly
    r = repr(float(v))
    return r[:-2] if r.endswith(".0") else r


def _expr(terms, per_line: int = 6) -> str:
    parts = []
    for i, (name, v) in enumerate(terms):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(v))} {name}")
    lines = [" ".join(parts[i:i + per_line]) for i in range(0, len(parts), per_line)]
    return "\n   ".join(lines)


def export_lp(model: MilpModel, destination=None) -> str:
    """Write the model in CPLEX LP format and return the text.

    ``destination`` may be a path, a text file object or None (text only).
    Rows are emitted in natural units: sensing gains, worst-case leakage and
    noise terms are already folded into O(1) coefficients.
    """
    names = model.var_names()
    c = model.coeffs
    buf = io.StringIO()
    buf.write("\\ full-duplex ISAC timeslot allocation and beam selection\n")
    buf.write(f"\\ slots={model.n_slots} min_sensing={model.min_sensing} L_tx={c.n_tx} L_rx={c.n_rx}\n")
    buf.write(f"\\ sinr_threshold={_fmt(c.sinr_threshold)} reflection_coeff={_fmt(c.reflection_coeff)} "
              f"worst_upsilon={_fmt(c.worst_upsilon)}\n")
    buf.write("\\ rows G1/G6 unscaled: coefficients are |c^H A b|^2, (Lambda/psi^2)(ups+eps)^2 |c^H Q b|^2 "
              "and (Lambda/psi^2) sigma^2 ||c||^2\n")
    buf.write("Maximize\n")
    first = model.index.delta(0, 0)
    obj_terms = [(names[j], model.objective[j]) for j in range(first, first + model.n_slots * c.n_tx)]
    buf.write(" obj: " + _expr(obj_terms) + "\n")
    buf.write("Subject To\n")
    A = model.A.tocsr()
    A.sort_indices()
    ops = {"<": "<=", ">": ">=", "=": "="}
    for i, rname in enumerate(model.row_names):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        terms = [(names[j], v) for j, v in zip(A.indices[lo:hi], A.data[lo:hi]) if v != 0]
        buf.write(f" {rname}: {_expr(terms)} {ops[model.sense[i]]} {_fmt(model.rhs[i])}\n")
    buf.write("Bounds\n")
    for j in np.flatnonzero(~model.binary):
        buf.write(f" {names[j]} >= 0\n")
    buf.write("Binaries\n")
    bin_names = [names[j] for j in np.flatnonzero(model.binary)]
    for i in range(0, len(bin_names), 8):
        buf.write(" " + " ".join(bin_names[i:i + 8]) + "\n")
    buf.write("End\n")
    text = buf.getvalue()

    if destination is None:
        return text
    if isinstance(destination, (str, os.PathLike)):
        Path(destination).write_text(text, encoding="utf-8")
    else:
        destination.write(text)
    return text
