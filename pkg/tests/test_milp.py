import math
import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdisac.channels import SiUncertainty
from fdisac.metrics import SlotAssignment, evaluate_schedule
from fdisac.milp import TAGS, CoefficientTable, assignment_to_point, build_milp, export_lp, precompute
from fdisac.solver import solve_structured
from fdisac.synthetic import random_instance, random_schedule


def _tiny_table(T=4, R=4, seed=0):
    rng = np.random.default_rng(seed)
    return CoefficientTable(
        rate_per_tx=rng.uniform(1e5, 2e6, T), comm_gain=rng.random(T), sense_gain=rng.random((T, R)),
        si_leak=rng.random((T, R)) * 0.1, rx_noise=rng.random(R) * 0.1, robust_scale=2.0, noise_scale=3.0,
        reflection_coeff=6e-4, sinr_threshold=3.0, worst_upsilon=0.5,
    )


# ---------------------------------------------------------------------------
# coefficient table


def test_precompute_matches_direct_products():
    rng = np.random.default_rng(4)
    inst = random_instance(rng)
    ch, tcb, rcb, c = inst.channels, inst.tx_cb, inst.rx_cb, inst.coeffs
    psi, lam = ch.sensing.reflection_coeff, ch.sensing.sinr_threshold
    for b, t in enumerate(tcb):
        g = abs(np.vdot(ch.h_bar, t.weights)) ** 2
        assert c.comm_gain[b] == pytest.approx(g, rel=1e-12)
        assert c.rate_per_tx[b] == pytest.approx(200e6 * 1e-3 * math.log2(1 + g), rel=1e-12)
        for j, r in enumerate(rcb):
            assert c.sense_gain[b, j] == pytest.approx(abs(np.vdot(r.weights, ch.steering_outer @ t.weights)) ** 2, rel=1e-12)
            assert c.si_leak[b, j] == pytest.approx(abs(np.vdot(r.weights, ch.si_matrix @ t.weights)) ** 2, rel=1e-12)
    assert c.rx_noise == pytest.approx(ch.sensing.noise_power_w * np.array([r.power for r in rcb]), rel=1e-12)
    assert c.noise_scale == pytest.approx(lam / psi**2, rel=1e-12)
    assert c.robust_scale == pytest.approx(lam / psi**2 * ch.si.worst_case**2, rel=1e-12)


def test_matched_peak_gain(tx_geom, rx_geom, tx_cb, rx_cb):
    from fdisac.channels import CommChannelParams, SensingParams, build_channel_set

    ch = build_channel_set(tx_geom, rx_geom, CommChannelParams(), SensingParams(), SiUncertainty(), np.ones(8))
    c = precompute(ch, tx_cb, rx_cb, 200e6, 1e-3)
    b, r = tx_cb.position(90.0, 13.0), rx_cb.position(90.0, 6.0)
    assert c.sense_gain[b, r] == pytest.approx(1.0 * 0.25, rel=1e-12)
    assert c.sense_gain.max() == pytest.approx(0.25, rel=1e-12)


def test_comm_gain_ignores_si():
    inst = random_instance(np.random.default_rng(8))
    ch = inst.channels
    from dataclasses import replace

    perturbed = replace(ch, si_matrix=ch.si_matrix * 7 + 1)
    a = precompute(ch, inst.tx_cb, inst.rx_cb, 200e6, 1e-3)
    b = precompute(perturbed, inst.tx_cb, inst.rx_cb, 200e6, 1e-3)
    assert np.array_equal(a.comm_gain, b.comm_gain) and not np.array_equal(a.si_leak, b.si_leak)


def test_precompute_rejects_mismatched_codebooks(tx_cb, rx_cb):
    inst = random_instance(np.random.default_rng(2))
    with pytest.raises(ValueError):
        precompute(inst.channels, rx_cb, tx_cb, 200e6, 1e-3)


def test_table_feasibility_matches_metrics():
    from fdisac.metrics import robust_sinr_feasible

    rng = np.random.default_rng(9)
    for _ in range(20):
        inst = random_instance(rng)
        feas = inst.coeffs.pair_feasible()
        for b in range(len(inst.tx_cb)):
            for c in range(len(inst.rx_cb)):
                ref = robust_sinr_feasible(inst.channels, SlotAssignment.sense(b, c), inst.tx_cb, inst.rx_cb)
                assert feas[b, c] == ref


def test_with_scenario_rescales():
    c = _tiny_table()
    d = c.with_scenario(si=SiUncertainty(0.2, 0.1), sinr_threshold=6.0, reflection_coeff=1e-3)
    assert d.noise_scale == pytest.approx(6.0 / 1e-6)
    assert d.robust_scale == pytest.approx(6.0 / 1e-6 * 0.09)
    assert d.worst_upsilon == pytest.approx(0.3)
    assert c.sinr_threshold == 3.0


# ---------------------------------------------------------------------------
# model structure


def test_variable_and_row_counts():
    m = build_milp(_tiny_table(4, 4), 2, 1)
    assert m.binary.sum() == 62 and (~m.binary).sum() == 2 and m.n_vars == 64
    counts = m.row_counts()
    assert set(counts) == set(TAGS)
    assert counts["D1"] + counts["D2"] + counts["D3"] + counts["D4"] == 4 * 4 * 2
    assert sum(counts[f"G{i}"] for i in range(2, 6)) == 4 * 16 * 2
    assert counts["C4"] == counts["C13"] == 1
    assert all(counts[t] == 2 for t in ("G1", "G6", "E1", "C6", "C9"))


@given(T=st.integers(1, 5), R=st.integers(1, 5), S=st.integers(1, 4))
def test_binary_count_formula(T, R, S):
    m = build_milp(_tiny_table(T, R), S, 0)
    assert m.binary.sum() == S * (3 + T + R + T + T * R)
    used = (abs(m.A).sum(axis=0).A1 > 0) | (m.objective != 0)
    assert used.all()


@pytest.mark.parametrize("S, M", [(0, 0), (2, 3), (2, -1)])
def test_build_rejects_bad_horizon(S, M):
    with pytest.raises(ValueError):
        build_milp(_tiny_table(), S, M)


def test_zero_point_feasible_without_sensing():
    m = build_milp(_tiny_table(), 3, 0)
    x = np.zeros(m.n_vars)
    assert m.is_feasible(x) and m.objective_value(x) == 0
    assert not build_milp(_tiny_table(), 3, 1).is_feasible(x)


def test_row_names():
    m = build_milp(_tiny_table(2, 3), 2, 1)
    for name in ("G6_s0", "G1_s1", "D3_s1_b1", "G4_s0_b1_c2", "C13", "C4", "E1_s1"):
        assert name in m.row_names
    assert all(re.fullmatch(r"(C4|C13|[A-Z]\d+_s\d+(_b\d+)?(_c\d+)?)", n) for n in m.row_names)


# ---------------------------------------------------------------------------
# logic exactness: enumerate every binary valuation of one slot's logic rows


def test_delta_pi_gamma_logic_is_exact():
    m = build_milp(_tiny_table(1, 1), 1, 0)
    ix = m.index
    logic = [i for i, t in enumerate(m.row_tags) if t[0] in "DFG" and t not in ("G1", "G6")]
    cols = [ix.kappa(0), ix.zeta(0), ix.gamma(0), ix.chi(0, 0), ix.rho(0, 0), ix.delta(0, 0), ix.pi(0, 0, 0)]
    for bits in range(2**7):
        x = np.zeros(m.n_vars)
        v = [(bits >> k) & 1 for k in range(7)]
        x[cols] = v
        kap, zet, gam, chi, rho, dlt, pi = v
        ok = not m.violated_rows(x, rows=logic)
        assert ok == (dlt == chi * kap and pi == chi * rho and gam == (kap | zet))


def test_jensen_identity_on_one_hot():
    rng = np.random.default_rng(3)
    for _ in range(50):
        inst = random_instance(rng)
        B = inst.tx_cb.matrix
        for b in range(len(B)):
            chi = np.zeros(len(B))
            chi[b] = 1
            lhs = abs(np.vdot(inst.channels.h_bar, chi @ B)) ** 2
            rhs = float(np.abs(B @ inst.channels.h_bar.conj()) ** 2 @ chi)
            assert lhs == pytest.approx(rhs, rel=1e-13)


# ---------------------------------------------------------------------------
# assignment mapping


def test_point_for_idle_comm_and_shared_slots():
    c = _tiny_table()
    sched = [SlotAssignment.idle(), SlotAssignment.comm(2), SlotAssignment.shared(1, 3)]
    m = build_milp(c, 3, 1)
    x = assignment_to_point(sched, c)
    ix = m.index
    names = m.var_names()
    on = {names[j] for j in np.flatnonzero(x)}
    assert not any(n.endswith("_s0") for n in on)
    assert {"kappa_s1", "gamma_s1", "chi_b2_s1", "delta_b2_s1"} == {n for n in on if n.endswith("_s1")}
    assert x[ix.pi(1, 3, 2)] == 1 and x[ix.pi(np.arange(4), 0, 2)].sum() == 0
    assert x[ix.delta(1, 2)] == 1 and x[ix.z(2)] == c.sense_gain[1, 3] and x[ix.z(1)] == 0


def test_point_rejects_out_of_range():
    with pytest.raises(ValueError):
        assignment_to_point([SlotAssignment.comm(9)], _tiny_table())


def test_reformulation_equivalence_on_physical_instances():
    rng = np.random.default_rng(17)
    agree = 0
    for _ in range(30):
        inst = random_instance(rng)
        m = build_milp(inst.coeffs, inst.n_slots, inst.min_sensing)
        for _ in range(200):
            sched = random_schedule(rng, inst, p_malformed=0.15)
            x = assignment_to_point(sched, inst.coeffs)
            rep = evaluate_schedule(inst.channels, sched, inst.tx_cb, inst.rx_cb, 200e6, 1e-3,
                                    inst.min_sensing, inst.n_slots)
            assert m.is_feasible(x) == rep.feasible, (rep.violation, m.violated_rows(x))
            if rep.feasible:
                assert m.objective_value(x) == pytest.approx(rep.total_bits, rel=1e-9, abs=1e-9)
                agree += 1
    assert agree > 100


# ---------------------------------------------------------------------------
# LP export


_NUM = r"[0-9.]+(?:e[+-]?\d+)?"
_NAME = r"[A-Za-z_][A-Za-z0-9_]*"


def _parse_expr(text):
    terms = {}
    for sign, coef, name in re.findall(rf"([+-])\s*({_NUM})\s+({_NAME})", text):
        terms[name] = terms.get(name, 0.0) + (1 if sign == "+" else -1) * float(coef)
    rest = re.sub(rf"([+-])\s*({_NUM})\s+({_NAME})", "", text).strip()
    assert rest == "", f"unparsed: {rest!r}"
    return terms


def parse_lp(text):
    """Reference reader for the LP subset we emit; asserts on anything unexpected."""
    lines = [l for l in text.splitlines() if not l.startswith("\\")]
    sections = {}
    current = None
    for line in lines:
        head = line.strip()
        if head in ("Maximize", "Subject To", "Bounds", "Binaries", "End"):
            current = head
            sections[current] = []
        else:
            assert current is not None and line.startswith(" "), line
            sections[current].append(head)
    assert list(sections) == ["Maximize", "Subject To", "Bounds", "Binaries", "End"]

    obj_text = " ".join(sections["Maximize"])
    assert obj_text.startswith("obj:")
    objective = _parse_expr(obj_text[4:])

    rows, name = {}, None
    for line in sections["Subject To"]:
        m = re.match(rf"({_NAME}):\s*(.*)$", line)
        if m:
            name, body = m.group(1), m.group(2)
            assert name not in rows
            rows[name] = body
        else:
            rows[name] += " " + line
    parsed = {}
    for name, body in rows.items():
        m = re.fullmatch(rf"(.*)\s(<=|>=|=)\s(-?{_NUM})", body)
        assert m, body
        parsed[name] = (_parse_expr(m.group(1)), m.group(2), float(m.group(3)))
    bounds = [re.fullmatch(rf"({_NAME}) >= 0", b).group(1) for b in sections["Bounds"]]
    binaries = [n for line in sections["Binaries"] for n in line.split()]
    return objective, parsed, bounds, binaries


def test_lp_minimal_model():
    c = CoefficientTable(np.array([1e6]), np.array([1.0]), np.ones((1, 1)), np.zeros((1, 1)), np.ones(1),
                         0.0, 1.0, 6e-4, 3.0, 0.0)
    text = export_lp(build_milp(c, 1, 0))
    objective, rows, bounds, binaries = parse_lp(text)
    assert len(binaries) == 7 and bounds == ["z_s0"]
    assert objective == {"delta_b0_s0": 1e6}


def test_lp_round_trips_model(tmp_path):
    inst = random_instance(np.random.default_rng(21), max_slots=2)
    m = build_milp(inst.coeffs, 2, 1)
    path = tmp_path / "model.lp"
    text = export_lp(m, path)
    assert path.read_text() == text
    objective, rows, bounds, binaries = parse_lp(text)
    names = m.var_names()
    assert set(binaries) == {names[j] for j in np.flatnonzero(m.binary)}
    assert set(rows) == set(m.row_names)
    A = m.A.toarray()
    ops = {"<": "<=", ">": ">=", "=": "="}
    for i, rname in enumerate(m.row_names):
        terms, op, rhs = rows[rname]
        assert op == ops[m.sense[i]] and rhs == m.rhs[i]
        dense = {names[j]: A[i, j] for j in np.flatnonzero(A[i])}
        assert terms == dense  # exact: shortest repr round-trips
    for b in range(inst.coeffs.n_tx):
        assert objective[f"delta_b{b}_s0"] == inst.coeffs.rate_per_tx[b]


def test_lp_accepts_file_objects():
    import io

    m = build_milp(_tiny_table(2, 2), 1, 1)
    buf = io.StringIO()
    assert export_lp(m, buf) == buf.getvalue()


@pytest.mark.parametrize("seed", range(6))
def test_external_solver_matches(tmp_path, seed):
    highspy = pytest.importorskip("highspy")
    rng = np.random.default_rng(100 + seed)
    inst = random_instance(rng, max_tx=4, max_rx=4)
    m = build_milp(inst.coeffs, inst.n_slots, inst.min_sensing)
    path = tmp_path / "m.lp"
    export_lp(m, path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.readModel(str(path))
    h.run()
    ours = solve_structured(inst.coeffs, inst.n_slots, inst.min_sensing)
    status = h.modelStatusToString(h.getModelStatus())
    if ours.optimal:
        assert status == "Optimal"
        assert h.getInfo().objective_function_value == pytest.approx(ours.objective_bits, rel=1e-9)
    else:
        assert status == "Infeasible"
