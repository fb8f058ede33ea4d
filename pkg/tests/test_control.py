"""Decoupling and synthesis tests.

Oracles: closed-form block dynamics of the exchange+ZZ coupling for idle
trajectories, matrix-unit construction of the traced channel for process
tomography, and the analytic unitarity of the target family.
"""

import numpy as np
import pytest

from proctensor.basis import generate_haar_basis, haar_unitary
from proctensor.control import (
    DECOUPLING_IDLE_NS,
    XY4_CYCLE,
    apply_periodic_decoupling,
    build_decoupling_tensor,
    build_synthesis_tensor,
    decoupling_model,
    decoupling_objective,
    measure_joint_state,
    nonunitary_target,
    optimize_decoupling,
    pair_counts_to_correlations,
    qpt,
    restoration_error,
    simulate_trajectory,
    synthesis_model,
    synthesis_sweep,
    synthesize_gate,
    synthesis_loss,
    two_qubit_mle,
    with_trajectories,
)
from proctensor.qcore import (
    PAULIS,
    channel_from_unitary,
    check_density_matrix,
    fidelity,
    partial_trace,
    process_fidelity,
    purity,
    rotation_gate,
    u3_matrix,
    unitarity,
)
from proctensor.simulator import (
    ControlSequence,
    khz_to_rad_per_ns,
    prep_step,
    rng_stream,
    run_sequence,
    two_qubit_probe,
    unitary_step,
)
from proctensor.tomography import contract_fast, mle_project

from helpers import exact_states  # noqa: F401  (shared conftest path setup)
from test_qcore import random_density_matrix


@pytest.fixture(scope="module")
def basis24():
    return generate_haar_basis(24, seed=7)


@pytest.fixture(scope="module")
def dec_pt(basis24):
    return build_decoupling_tensor(decoupling_model(), basis24)


@pytest.fixture(scope="module")
def dec_result(dec_pt):
    return optimize_decoupling(dec_pt, restarts=20, seed=0)


@pytest.fixture(scope="module")
def syn_model():
    return synthesis_model()


@pytest.fixture(scope="module")
def syn_pt(syn_model, basis24):
    return build_synthesis_tensor(syn_model, basis24)


@pytest.fixture(scope="module")
def free_model():
    return synthesis_model(exchange_khz=0.0, zz_khz=0.0)


@pytest.fixture(scope="module")
def free_pt(free_model, basis24):
    return build_synthesis_tensor(free_model, basis24)


# ---------------------------------------------------------------------------
# Two-qubit readout
# ---------------------------------------------------------------------------

def exact_pair_probabilities(rho, a, b):
    pa, pb = PAULIS[a], PAULIS[b]
    ea = np.real(np.trace(np.kron(pa, np.eye(2)) @ rho))
    eb = np.real(np.trace(np.kron(np.eye(2), pb) @ rho))
    eab = np.real(np.trace(np.kron(pa, pb) @ rho))
    return np.array([(1 + s1 * ea + s2 * eb + s1 * s2 * eab) / 4.0
                     for s1 in (1, -1) for s2 in (1, -1)])


def test_two_qubit_mle_exact_roundtrip():
    rng = np.random.default_rng(3)
    for _ in range(5):
        rho = random_density_matrix(rng, dim=4)
        counts = {(a, b): exact_pair_probabilities(rho, a, b)
                  for a in "XYZ" for b in "XYZ"}
        rec = two_qubit_mle(pair_counts_to_correlations(counts))
        assert np.allclose(rec, rho, atol=1e-9)


def test_two_qubit_mle_sampled_converges():
    rng = np.random.default_rng(5)
    rho = random_density_matrix(rng, dim=4)
    joint = measure_joint_state(rho, shots=200_000, master_seed=4)
    check_density_matrix(joint)
    assert np.abs(joint - rho).max() < 5e-3


def test_measure_joint_state_exact_passthrough():
    rho = random_density_matrix(np.random.default_rng(0), dim=4)
    assert measure_joint_state(rho, None, 0) is rho


def test_pair_counts_reject_empty_setting():
    counts = {("X", "X"): np.zeros(4)}
    with pytest.raises(ValueError, match="empty counts"):
        pair_counts_to_correlations(counts)


# ---------------------------------------------------------------------------
# Decoupling probe and objective
# ---------------------------------------------------------------------------

def test_decoupling_tensor_predicts_probe(dec_pt, basis24):
    # held-out gate: tensor prediction equals the simulated joint state
    model = decoupling_model()
    g = haar_unitary(2, np.random.default_rng(9))
    want = two_qubit_probe(model, ControlSequence(steps=(unitary_step(g),)))
    got = contract_fast(dec_pt, [unitary_step(g)])
    assert np.allclose(got, want, atol=1e-9)


def test_objective_range_and_phase_invariance(dec_pt):
    rng = np.random.default_rng(11)
    for _ in range(5):
        g = haar_unitary(2, rng)
        val = decoupling_objective(dec_pt, g)
        assert 0.0 <= val <= 1.0
        spun = decoupling_objective(dec_pt, np.exp(1.2j) * g)
        assert spun == pytest.approx(val, abs=1e-12)


def test_no_coupling_probe_degenerate():
    basis = generate_haar_basis(24, seed=7)
    pt = build_decoupling_tensor(decoupling_model(exchange_khz=0.0, zz_khz=0.0),
                                 basis)
    res = optimize_decoupling(pt, restarts=3, seed=0)
    assert res.objective <= 1e-9
    assert res.identity_objective <= 1e-9
    assert res.degenerate


def test_optimized_gate_beats_identity(dec_result):
    assert not dec_result.degenerate
    assert dec_result.identity_objective > 1e-3
    assert dec_result.objective < dec_result.identity_objective - 1e-3


def test_optimum_is_pi_rotation_in_plane(dec_result):
    # the coupling commutes with XX, so the echo about X refocuses exactly
    assert dec_result.objective < 1e-9
    assert dec_result.angle == pytest.approx(np.pi, abs=0.02)
    assert abs(dec_result.axis[2]) < 0.02
    assert abs(dec_result.axis[0]) > 0.95


def test_optimizer_deterministic(dec_pt, dec_result):
    again = optimize_decoupling(dec_pt, restarts=20, seed=0)
    assert again.params == dec_result.params
    assert again.objective == dec_result.objective


def test_restoration_error_separates_refocusers(dec_pt):
    env_ref = dec_pt.provenance["env_marginal"]
    pi_x = rotation_gate("X", np.pi)
    assert decoupling_objective(dec_pt, pi_x) < 1e-9
    assert restoration_error(dec_pt, pi_x, env_ref) < 1e-9
    # a gate that refocuses this input without restoring the neighbor
    drift = u3_matrix(1.3845, 4.0329, 5.3501)
    assert restoration_error(dec_pt, drift, env_ref) > 1e-4


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def test_idle_negativity_matches_block_oracle():
    # {|++>,|-->} block evolution: negativity(t) = |sin((zeta - g) t)| / 2
    traj = apply_periodic_decoupling(None, period_ns=500.0, horizon_ns=10_000.0)
    delta = khz_to_rad_per_ns(30.0) - khz_to_rad_per_ns(50.0)
    want = np.abs(np.sin(delta * traj.times_ns)) / 2.0
    assert np.allclose(traj.negativity, want, atol=1e-9)
    assert traj.negativity[5] > 0.1


def test_zero_coupling_trajectories_identical():
    idle = apply_periodic_decoupling(None, exchange_khz=0.0, zz_khz=0.0)
    kicked = apply_periodic_decoupling(rotation_gate("X", np.pi),
                                       exchange_khz=0.0, zz_khz=0.0)
    for attr in ("negativity", "mutual_info_bits", "purity_q1", "purity_q2"):
        assert np.allclose(getattr(idle, attr), getattr(kicked, attr), atol=1e-12)


def test_decoupled_trajectory_beats_idle(dec_result):
    res = with_trajectories(dec_result)
    idle, dec = res.idle_trajectory, res.decoupled_trajectory
    assert idle.min_purity() == pytest.approx(0.5, abs=1e-6)
    assert dec.min_purity() >= idle.min_purity() + 0.1
    assert dec.peak_negativity() <= 0.5 * idle.peak_negativity()


def test_xy4_reference_decouples():
    idle = apply_periodic_decoupling(None)
    xy4 = simulate_trajectory(XY4_CYCLE, label="xy4")
    assert xy4.min_purity() > idle.min_purity() + 0.3
    assert xy4.label == "xy4"


def test_trajectory_validation():
    with pytest.raises(ValueError, match="positive"):
        simulate_trajectory(None, period_ns=0.0)


# ---------------------------------------------------------------------------
# Targets and process tomography
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("eta", [0.0, 0.1, 0.25, 0.4, 0.5])
def test_target_cptp_and_unitarity(eta):
    ch = nonunitary_target(0.9, eta)
    evals = np.linalg.eigvalsh(ch.choi)
    assert evals.min() > -1e-12
    want = (1.0 + 2.0 * (1.0 - 2.0 * eta) ** 2) / 3.0
    assert unitarity(ch) == pytest.approx(want, abs=1e-10)
    assert 1.0 / 3.0 - 1e-12 <= unitarity(ch) <= 1.0 + 1e-12


def test_target_unitarity_monotone_in_eta():
    vals = [unitarity(nonunitary_target(1.1, e)) for e in np.linspace(0, 0.5, 11)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_target_eta_validation():
    with pytest.raises(ValueError, match="eta"):
        nonunitary_target(1.0, 0.6)


def test_qpt_identity_no_coupling(free_model):
    ch = qpt(free_model, np.eye(2, dtype=complex))
    assert np.allclose(ch.choi, channel_from_unitary(np.eye(2)).choi, atol=1e-9)


def test_qpt_known_unitary(free_model):
    g = haar_unitary(2, np.random.default_rng(21))
    ch = qpt(free_model, g)
    assert np.allclose(ch.choi, channel_from_unitary(g).choi, atol=1e-9)


def traced_channel_choi(model, gate):
    v1, v2 = model.intervals
    w = v2 @ np.kron(gate, np.eye(2, dtype=complex)) @ v1
    env = partial_trace(model.initial_se, 1, (2, 2))
    choi = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            unit = np.zeros((2, 2), dtype=complex)
            unit[i, j] = 1.0
            out = partial_trace(w @ np.kron(unit, env) @ w.conj().T, 0, (2, 2))
            choi += np.kron(unit, out)
    return choi


def test_qpt_matches_traced_channel(syn_model):
    g = u3_matrix(0.8, 1.9, 4.2)
    ch = qpt(syn_model, g)
    assert np.allclose(ch.choi, traced_channel_choi(syn_model, g), atol=1e-7)


def test_qpt_sampled_is_physical_and_deterministic(syn_model):
    a = qpt(syn_model, rotation_gate("Y", 1.0), shots=2000, master_seed=5)
    b = qpt(syn_model, rotation_gate("Y", 1.0), shots=2000, master_seed=5)
    assert np.array_equal(a.choi, b.choi)
    evals = np.linalg.eigvalsh(a.choi)
    assert evals.min() > -1e-8


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

def test_synthesis_tensor_predicts_held_out(syn_model, syn_pt):
    rng = np.random.default_rng(31)
    prep = prep_step(haar_unitary(2, rng), "p")
    gate = unitary_step(haar_unitary(2, rng), "g")
    want = run_sequence(syn_model, ControlSequence(steps=(prep, gate)))
    got = contract_fast(syn_pt, [prep, gate])
    assert np.allclose(got, want, atol=1e-9)


def test_synthesis_layout_guard(basis24):
    from proctensor.simulator import make_model
    with pytest.raises(ValueError, match="two control slots"):
        build_synthesis_tensor(make_model(steps=3), basis24)
    with pytest.raises(ValueError, match="two control slots"):
        qpt(make_model(steps=3), np.eye(2))


def test_loss_zero_for_realizable_target(free_pt):
    # no coupling: the layout realizes exactly the unitaries
    target = nonunitary_target(0.7, 0.0)
    res = synthesize_gate(free_pt, target, restarts=4, seed=0)
    assert res.loss < 1e-6


def test_loss_positive_for_unrealizable_target(free_pt):
    target = nonunitary_target(0.7, 0.3)
    res = synthesize_gate(free_pt, target, restarts=4, seed=0)
    assert res.loss > 0.1


def test_synthesize_unitary_no_coupling_fidelity(free_model, free_pt):
    target = nonunitary_target(1.3, 0.0)
    res = synthesize_gate(free_pt, target, restarts=6, seed=0)
    realized = qpt(free_model, res.gate)
    assert process_fidelity(realized, target) >= 1.0 - 1e-6


def test_synthesis_loss_matches_manual(syn_pt):
    x = np.array([0.4, 1.1, 2.7])
    target = nonunitary_target(0.5, 0.2)
    val = synthesis_loss(syn_pt, x, target)
    assert val > 0.0
    assert synthesis_loss(syn_pt, x, target) == val


def test_synthesis_sweep_records(syn_model, syn_pt):
    etas = np.array([0.05, 0.25, 0.5])
    pts = synthesis_sweep(syn_pt, syn_model, alpha=0.4, etas=etas,
                          restarts=3, seed=0, maxiter=200)
    assert [p.eta for p in pts] == list(etas)
    for p in pts:
        want_u = (1.0 + 2.0 * (1.0 - 2.0 * p.eta) ** 2) / 3.0
        assert p.target_unitarity == pytest.approx(want_u, abs=1e-10)
        assert 0.0 <= p.process_fidelity <= 1.0
        assert p.loss >= 0.0
    # far-from-realizable targets score worse
    assert pts[0].process_fidelity > pts[-1].process_fidelity
