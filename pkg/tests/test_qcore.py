import numpy as np
import pytest

from proctensor.qcore import (
    HADAMARD,
    ID2,
    KET0,
    KET1,
    PAULI_SETTINGS,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    PAULIS,
    QuantumChannel,
    UnitaryParams,
    apply_channel,
    channel_from_kraus,
    channel_from_unitary,
    check_density_matrix,
    choi_to_superop,
    compose_channels,
    fidelity,
    identity_channel,
    ket_dm,
    mutual_information_state,
    negativity,
    partial_trace,
    pauli_setting,
    pauli_transfer_matrix,
    preparation_channel,
    process_fidelity,
    purity,
    rotation_axis_angle,
    rotation_gate,
    superop_to_choi,
    trace_distance,
    u3_matrix,
    unitarity,
    von_neumann_entropy,
)


def random_density_matrix(rng, dim=2):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / rho.trace()


def random_pure_state(rng, dim=2):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v = v / np.linalg.norm(v)
    return ket_dm(v)


# ---------------------------------------------------------------------------
# scalar metrics
# ---------------------------------------------------------------------------

def test_purity_example():
    assert purity(np.diag([0.75, 0.25])) == pytest.approx(0.625, abs=1e-12)


def test_fidelity_pure_vs_maximally_mixed():
    assert fidelity(ket_dm(KET0), ID2 / 2) == pytest.approx(0.5, abs=1e-12)


def test_trace_distance_pure_vs_maximally_mixed():
    assert trace_distance(ket_dm(KET0), ID2 / 2) == pytest.approx(0.5, abs=1e-12)


def test_fidelity_symmetric_and_unit_on_equal():
    rng = np.random.default_rng(11)
    for _ in range(20):
        a = random_density_matrix(rng)
        b = random_density_matrix(rng)
        assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-10)
        assert fidelity(a, a) == pytest.approx(1.0, abs=1e-10)


def test_fidelity_dimension_mismatch():
    with pytest.raises(ValueError):
        fidelity(ID2 / 2, np.eye(4) / 4)


def test_fuchs_van_de_graaf_bounds():
    # 1 - sqrt(F) <= D <= sqrt(1 - F) for all state pairs
    rng = np.random.default_rng(5)
    for _ in range(200):
        a = random_density_matrix(rng)
        b = random_pure_state(rng) if rng.random() < 0.5 else random_density_matrix(rng)
        f = fidelity(a, b)
        d = trace_distance(a, b)
        assert 1.0 - np.sqrt(f) <= d + 1e-9
        assert d <= np.sqrt(1.0 - f) + 1e-9


def test_fidelity_rejects_materially_negative_input():
    bad = np.diag([1.2, -0.2])
    with pytest.raises(ValueError):
        fidelity(bad, ID2 / 2)


def test_entropy_and_mutual_information_classically_correlated():
    # (|00><00| + |11><11|)/2 carries exactly one bit of correlation
    rho = (np.kron(ket_dm(KET0), ket_dm(KET0)) + np.kron(ket_dm(KET1), ket_dm(KET1))) / 2
    assert von_neumann_entropy(rho) == pytest.approx(1.0, abs=1e-12)
    assert mutual_information_state(rho, (2, 2)) == pytest.approx(1.0, abs=1e-10)


def test_mutual_information_rejects_unphysical():
    with pytest.raises(ValueError):
        mutual_information_state(np.diag([0.8, 0.4, -0.1, -0.1]), (2, 2))


def test_negativity_bell_pair():
    bell = ket_dm(np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert negativity(bell) == pytest.approx(0.5, abs=1e-12)


def test_negativity_werner_boundary():
    # Oracle: partial transpose of W(p) = p|Phi+><Phi+| + (1-p) I/4 has
    # eigenvalues (1+p)/4 (x3) and (1-3p)/4, so negativity vanishes at p=1/3.
    bell = ket_dm(np.array([1, 0, 0, 1]) / np.sqrt(2))
    for p in (1 / 3, 0.2, 0.8):
        w = p * bell + (1 - p) * np.eye(4) / 4
        expected = max(0.0, -(1 - 3 * p) / 4)
        assert negativity(w) == pytest.approx(expected, abs=1e-12)


def test_negativity_requires_two_qubits():
    with pytest.raises(ValueError):
        negativity(ID2 / 2)


def test_partial_trace_product_and_entangled():
    rng = np.random.default_rng(3)
    a = random_density_matrix(rng)
    b = random_density_matrix(rng)
    joint = np.kron(a, b)
    assert np.allclose(partial_trace(joint, 0, (2, 2)), a)
    assert np.allclose(partial_trace(joint, 1, (2, 2)), b)
    bell = ket_dm(np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert np.allclose(partial_trace(bell, 0, (2, 2)), ID2 / 2)


def test_partial_trace_three_subsystems():
    rng = np.random.default_rng(7)
    parts = [random_density_matrix(rng) for _ in range(3)]
    joint = np.kron(np.kron(parts[0], parts[1]), parts[2])
    for k in range(3):
        assert np.allclose(partial_trace(joint, k, (2, 2, 2)), parts[k])


def test_partial_trace_dimension_errors():
    with pytest.raises(ValueError):
        partial_trace(np.eye(4) / 4, 2, (2, 2))
    with pytest.raises(ValueError):
        partial_trace(np.eye(4) / 4, 0, (2, 3))


# ---------------------------------------------------------------------------
# gates
# ---------------------------------------------------------------------------

def test_u3_special_points():
    assert np.allclose(u3_matrix(0, 0, 0), ID2)
    assert np.allclose(u3_matrix(np.pi, 0, np.pi), PAULI_X)
    assert np.allclose(u3_matrix(np.pi / 2, 0, np.pi), HADAMARD)


def test_u3_always_unitary():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        t, p, l = rng.uniform(0, 2 * np.pi, size=3)
        u = UnitaryParams(t, p, l).matrix()
        assert np.max(np.abs(u.conj().T @ u - ID2)) < 1e-12


def test_rotation_gate_matches_expm():
    from scipy.linalg import expm

    for axis in ("X", "Y", "Z"):
        for angle in (0.3, 1.7, np.pi):
            direct = rotation_gate(axis, angle)
            ref = expm(-1j * angle * PAULIS[axis] / 2)
            assert np.allclose(direct, ref, atol=1e-12)


def test_rotation_axis_angle_roundtrip():
    n, a = rotation_axis_angle(rotation_gate("X", 1.2))
    assert a == pytest.approx(1.2, abs=1e-10)
    assert np.allclose(n, [1, 0, 0], atol=1e-10)
    n, a = rotation_axis_angle(PAULI_Y)
    assert a == pytest.approx(np.pi, abs=1e-10)
    assert np.allclose(np.abs(n), [0, 1, 0], atol=1e-10)


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------

def test_unitary_channel_application_is_conjugation():
    rng = np.random.default_rng(23)
    for _ in range(10):
        t, p, l = rng.uniform(0, 2 * np.pi, size=3)
        u = u3_matrix(t, p, l)
        ch = channel_from_unitary(u)
        rho = random_density_matrix(rng)
        assert np.allclose(apply_channel(ch, rho), u @ rho @ u.conj().T, atol=1e-12)


def test_identity_channel_choi_trace():
    ch = identity_channel(2)
    assert ch.choi.trace() == pytest.approx(2.0)
    rho = random_density_matrix(np.random.default_rng(1))
    assert np.allclose(apply_channel(ch, rho), rho)


def test_choi_superop_roundtrip():
    rng = np.random.default_rng(29)
    for _ in range(5):
        ch = channel_from_unitary(u3_matrix(*rng.uniform(0, 2 * np.pi, size=3)))
        s = choi_to_superop(ch.choi, 2, 2)
        back = superop_to_choi(s, 2, 2)
        assert np.allclose(back, ch.choi, atol=1e-12)
        rho = random_density_matrix(rng)
        via_s = (s @ rho.reshape(4)).reshape(2, 2)
        assert np.allclose(via_s, apply_channel(ch, rho), atol=1e-12)


def test_compose_matches_sequential_application():
    rng = np.random.default_rng(31)
    f = channel_from_unitary(u3_matrix(*rng.uniform(0, 2 * np.pi, size=3)))
    g = channel_from_unitary(u3_matrix(*rng.uniform(0, 2 * np.pi, size=3)))
    combined = compose_channels(g, f)
    rho = random_density_matrix(rng)
    assert np.allclose(apply_channel(combined, rho),
                       apply_channel(g, apply_channel(f, rho)), atol=1e-12)


def test_kraus_channel_depolarizing():
    kraus = [PAULIS[p] / 2 for p in ("I", "X", "Y", "Z")]
    ch = channel_from_kraus(kraus, label="depolarizing")
    rng = np.random.default_rng(37)
    for _ in range(5):
        rho = random_density_matrix(rng)
        assert np.allclose(apply_channel(ch, rho), ID2 / 2, atol=1e-12)
    assert np.allclose(ch.choi, np.eye(4) / 2, atol=1e-12)


def test_preparation_channel_replaces_input():
    target = ket_dm((KET0 + 1j * KET1) / np.sqrt(2))
    ch = preparation_channel(target)
    rng = np.random.default_rng(41)
    for _ in range(5):
        assert np.allclose(apply_channel(ch, random_density_matrix(rng)), target)


def test_channel_validation_rejects_non_tp():
    with pytest.raises(ValueError):
        QuantumChannel(choi=np.eye(4), dim_in=2, dim_out=2)  # trace 4, blocks 2I
    # but the same choi is fine when declared non-increasing after scaling down
    QuantumChannel(choi=np.eye(4) / 4, dim_in=2, dim_out=2, trace_class="non-increasing")


def test_channel_validation_rejects_non_cp():
    choi = channel_from_unitary(PAULI_X).choi - 0.5 * np.eye(4)
    with pytest.raises(ValueError):
        QuantumChannel(choi=choi, dim_in=2, dim_out=2)


# ---------------------------------------------------------------------------
# Pauli transfer matrix and unitarity
# ---------------------------------------------------------------------------

def test_ptm_identity():
    assert np.allclose(pauli_transfer_matrix(identity_channel(2)), np.eye(4), atol=1e-12)


def test_unitarity_unitary_channel_is_one():
    rng = np.random.default_rng(43)
    for _ in range(5):
        ch = channel_from_unitary(u3_matrix(*rng.uniform(0, 2 * np.pi, size=3)))
        assert unitarity(ch) == pytest.approx(1.0, abs=1e-10)


def test_unitarity_depolarizing_is_zero():
    ch = channel_from_kraus([PAULIS[p] / 2 for p in ("I", "X", "Y", "Z")])
    assert unitarity(ch) == pytest.approx(0.0, abs=1e-12)


def test_unitarity_pauli_mixture_one_third():
    # Oracle: for L = (E . E' + YE . E'Y)/2 the unital PTM block is
    # diag(0,1,0) @ R_E, whose squared Frobenius norm is a single unit row
    # of the rotation R_E, hence unitarity = 1/3 for every unitary E.
    rng = np.random.default_rng(47)
    for _ in range(5):
        e = u3_matrix(*rng.uniform(0, 2 * np.pi, size=3))
        ch = channel_from_kraus([e / np.sqrt(2), (PAULI_Y @ e) / np.sqrt(2)])
        assert unitarity(ch) == pytest.approx(1 / 3, abs=1e-10)


def test_process_fidelity_identity_and_orthogonal():
    ident = identity_channel(2)
    assert process_fidelity(ident, ident) == pytest.approx(1.0, abs=1e-12)
    x = channel_from_unitary(PAULI_X)
    assert process_fidelity(ident, x) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# measurement settings and validators
# ---------------------------------------------------------------------------

def test_pauli_settings_project_correctly():
    for ax, p in PAULIS.items():
        if ax == "I":
            continue
        setting = pauli_setting(ax)
        assert np.allclose(setting.plus + setting.minus, ID2)
        assert np.allclose(setting.plus - setting.minus, p)


def test_pauli_setting_rejects_bad_axis():
    with pytest.raises(ValueError):
        pauli_setting("Q")


def test_check_density_matrix_accepts_subnormalized():
    check_density_matrix(np.diag([0.3, 0.3]), subnormalized=True)
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([0.3, 0.3]))


def test_check_density_matrix_rejects_non_hermitian():
    with pytest.raises(ValueError):
        check_density_matrix(np.array([[0.5, 0.1], [0.3, 0.5]]))
