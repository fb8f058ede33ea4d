"""Memory bounds: probe construction, mutual information, bootstrap."""

import numpy as np
import pytest

from proctensor.basis import generate_haar_basis
from proctensor.memory import (
    CANONICAL_START,
    MemoryInterval,
    ProbeParams,
    binary_channel_mi,
    bootstrap_cmi,
    cmi_value,
    maximize_cmi,
    memory_bound,
    probe_steps,
    unpack_params,
)
from proctensor.qcore import UnitaryParams
from proctensor.simulator import SWAP2, make_model, rng_stream
from proctensor.tomography import build_standard_tensor

from helpers import exact_states, sampled_records


CANON = ProbeParams(enc0=CANONICAL_START["enc0"], enc1=CANONICAL_START["enc1"],
                    decoder=CANONICAL_START["decoder"])


@pytest.fixture(scope="module")
def basis():
    return generate_haar_basis(12, seed=17)


@pytest.fixture(scope="module")
def swap_tensor(basis):
    # swap in, swap back, idle readout: one bit rides the environment
    model = make_model(intervals=(SWAP2, SWAP2, np.eye(4, dtype=complex)))
    return build_standard_tensor(exact_states(model, basis), basis, n=10,
                                 build_matrix=False)


@pytest.fixture(scope="module")
def reset_tensor(basis):
    model = make_model(steps=3, env_reset=True)
    return build_standard_tensor(exact_states(model, basis), basis, n=10,
                                 build_matrix=False)


def _h2(p):
    return -p * np.log2(p) - (1 - p) * np.log2(1 - p)


def test_binary_channel_mi_table():
    # the probability floor shaves ~1e-11 off the noiseless identity table
    assert binary_channel_mi(np.eye(2)) == pytest.approx(1.0, abs=1e-9)
    assert binary_channel_mi(np.full((2, 2), 0.5)) == pytest.approx(0.0, abs=1e-12)
    # symmetric bit flip: I = 1 - h2(p)
    for p in (0.1, 0.25, 0.4):
        table = np.array([[1 - p, p], [p, 1 - p]])
        assert binary_channel_mi(table) == pytest.approx(1.0 - _h2(p), abs=1e-12)


def test_binary_channel_mi_bounds_random():
    rng = rng_stream(51, 0)
    for _ in range(200):
        cond = rng.uniform(0.0, 1.0, size=(2, 2))
        v = binary_channel_mi(cond)
        assert 0.0 <= v <= 1.0


def test_pack_unpack_roundtrip():
    p = ProbeParams(enc0=UnitaryParams(0.1, 0.2, 0.3),
                    enc1=UnitaryParams(0.4, 0.5, 0.6),
                    decoder=UnitaryParams(0.7, 0.8, 0.9),
                    filler=UnitaryParams(1.0, 1.1, 1.2))
    got = unpack_params(p.pack(), has_filler=True)
    assert got == p
    q = ProbeParams(enc0=p.enc0, enc1=p.enc1, decoder=p.decoder)
    assert unpack_params(q.pack(), has_filler=False) == q
    with pytest.raises(ValueError):
        unpack_params(np.zeros(9), has_filler=True)


def test_probe_steps_layout(swap_tensor):
    steps = probe_steps(3, CANON, (1,), which=0)
    assert [s.kind for s in steps] == ["prep", "barrier", "unitary"]
    steps = probe_steps(3, CANON, (1, 2), which=1)
    assert [s.kind for s in steps] == ["prep", "barrier", "barrier"]


def test_placement_validation(swap_tensor):
    with pytest.raises(ValueError):
        cmi_value(swap_tensor, CANON, ())
    with pytest.raises(ValueError):
        cmi_value(swap_tensor, CANON, (0,))
    with pytest.raises(ValueError):
        cmi_value(swap_tensor, CANON, (3,))


def test_swap_chain_carries_one_bit_past_first_barrier(swap_tensor):
    # computational-basis probe: the bit swaps into the environment before
    # the barrier and swaps back after it, so it survives untouched
    assert cmi_value(swap_tensor, CANON, (1,)) > 1.0 - 1e-9
    # past the second barrier nothing survives: the wire is erased after
    # the bit has returned to the system
    assert cmi_value(swap_tensor, CANON, (2,)) < 1e-12
    assert cmi_value(swap_tensor, CANON, (1, 2)) < 1e-12


def test_maximize_cmi_swap_chain(swap_tensor):
    res = maximize_cmi(swap_tensor, (1,), restarts=2, seed=0, maxiter=150)
    assert res.bits > 1.0 - 1e-9
    assert res.placements == (1,)
    res2 = maximize_cmi(swap_tensor, (2,), restarts=2, seed=0, maxiter=150)
    assert res2.bits < 1e-8


def test_markovian_surrogate_has_no_memory(reset_tensor):
    results = memory_bound(reset_tensor, restarts=2, seed=0)
    assert [r.placements for r in results] == [(1,), (2,), (1, 2)]
    for r in results:
        assert r.bits < 1e-8


def test_memory_grows_with_initial_env_coherence(basis):
    # same couplings and timing, environment started in |0> versus |+>;
    # the coherent start strictly helps the exchange write-out channel
    bounds = {}
    for env_init in ("zero", "plus"):
        model = make_model(steps=3, env_init=env_init, duration_ns=2500.0)
        pt = build_standard_tensor(exact_states(model, basis), basis, n=10,
                                   build_matrix=False)
        bounds[env_init] = maximize_cmi(pt, (1,), restarts=6, seed=0,
                                        maxiter=300).bits
    assert bounds["zero"] > 0.28
    assert bounds["plus"] > bounds["zero"] + 0.05


def test_cmi_deterministic(swap_tensor):
    a = maximize_cmi(swap_tensor, (1,), restarts=3, seed=4, maxiter=100)
    b = maximize_cmi(swap_tensor, (1,), restarts=3, seed=4, maxiter=100)
    assert a.bits == b.bits
    assert a.params == b.params


def test_bootstrap_cmi_exact_records(basis):
    model = make_model(intervals=(SWAP2, SWAP2, np.eye(4, dtype=complex)))
    records = sampled_records(model, basis, shots=None, master_seed=9)
    iv = bootstrap_cmi(records, basis, n=10, placements=(1,), params=CANON,
                       resamples=20, seed=2)
    assert isinstance(iv, MemoryInterval)
    assert iv.point == pytest.approx(1.0, abs=1e-9)
    assert iv.hi - iv.lo < 1e-9
    assert iv.lo <= iv.point <= iv.hi + 1e-12


def test_bootstrap_cmi_markovian_contains_zero(basis):
    # reconstruct from the full pool: the overdetermined duals keep the
    # shot-noise amplification small enough for a tight zero interval
    model = make_model(steps=3, env_reset=True)
    records = sampled_records(model, basis, shots=2000, master_seed=9)
    iv = bootstrap_cmi(records, basis, n=12, placements=(1,), params=CANON,
                       resamples=50, seed=2)
    assert iv.lo == 0.0
    assert iv.point <= 0.01
    assert iv.hi <= 0.05
    iv2 = bootstrap_cmi(records, basis, n=12, placements=(1,), params=CANON,
                        resamples=50, seed=2)
    assert (iv2.lo, iv2.hi, iv2.point) == (iv.lo, iv.hi, iv.point)


def test_bootstrap_cmi_validates(basis):
    model = make_model(steps=3, env_reset=True)
    records = sampled_records(model, basis, shots=None, master_seed=9)
    records.pop((0, 0, 0))
    with pytest.raises(ValueError, match="missing"):
        bootstrap_cmi(records, basis, n=10, placements=(1,), params=CANON,
                      resamples=5, seed=0)
