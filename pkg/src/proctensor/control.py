"""Decoupling-pulse search and non-unitary gate synthesis.

Both tasks run entirely through reconstructed one-step process tensors,
so the optimizer only ever sees quantities an experiment could produce.

Decoupling: the probe sandwiches one gate slot between two idle windows
and reads out the system together with its coupled neighbor. Minimizing
2 - purity(system) - purity(neighbor) over the gate drives both marginals
pure, which forces the joint state toward a product of pure states and
thereby strips the system-neighbor correlations the idles build up.

Synthesis: the probe is (preparation slot, gate slot) with an idle window
after each, and the target is a non-unitary map. The gate angles are
tuned so the tensor's predicted outputs match the target's outputs on
four informationally complete preparations; the surrounding idles supply
the non-unitarity that a bare unitary gate cannot.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .basis import ControlBasis, standard_preparations
from .qcore import (
    NumericalError,
    PAULI_X,
    PAULI_Y,
    PAULIS,
    QuantumChannel,
    UnitaryParams,
    apply_channel,
    channel_from_kraus,
    fidelity,
    mutual_information_state,
    negativity,
    partial_trace,
    process_fidelity,
    purity,
    rotation_axis_angle,
    rotation_gate,
    superop_to_choi,
    trace_distance,
    u3_matrix,
    unitarity,
)
from .simulator import (
    AXES,
    ControlSequence,
    PAIR_SETTINGS,
    SEModel,
    exchange_zz_hamiltonian,
    initial_joint_state,
    interval_propagator,
    prep_step,
    rng_stream,
    run_sequence,
    sample_pair_counts,
    simulate_experiment,
    two_qubit_probe,
    unitary_step,
)
from .tomography import (
    ProcessTensor,
    assemble,
    contract_fast,
    mle_project,
    prep_slot,
    project_to_cptp,
    qst_mle,
    unitary_slot,
)

DECOUPLING_IDLE_NS = 256.0
SYNTHESIS_IDLE_NS = 800.0


# ---------------------------------------------------------------------------
# Two-qubit state tomography (decoupling probe readout)
# ---------------------------------------------------------------------------

def pair_counts_to_correlations(counts: dict[tuple[str, str], np.ndarray]) -> np.ndarray:
    """Pauli correlation matrix c[a, b] from 9-setting pair counts.

    Index order (I, X, Y, Z); single-qubit terms are averaged over the
    three settings that measure them.
    """
    c = np.zeros((4, 4))
    c[0, 0] = 1.0
    singles_a = np.zeros((4, 2))  # accumulator, count
    singles_b = np.zeros((4, 2))
    for (a, b), n in counts.items():
        n = np.asarray(n, dtype=float)
        total = n.sum()
        if total <= 0:
            raise ValueError(f"empty counts for setting {(a, b)}")
        ia, ib = AXES.index(a) + 1, AXES.index(b) + 1
        pp, pm, mp, mm = n / total
        c[ia, ib] = pp - pm - mp + mm
        singles_a[ia] += (pp + pm - mp - mm, 1.0)
        singles_b[ib] += (pp - pm + mp - mm, 1.0)
    for i in range(1, 4):
        if singles_a[i, 1]:
            c[i, 0] = singles_a[i, 0] / singles_a[i, 1]
        if singles_b[i, 1]:
            c[0, i] = singles_b[i, 0] / singles_b[i, 1]
    return c


def two_qubit_mle(correlations: np.ndarray) -> np.ndarray:
    """Physical two-qubit state from a Pauli correlation matrix."""
    labels = ("I", "X", "Y", "Z")
    rho = np.zeros((4, 4), dtype=complex)
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            rho += correlations[i, j] * np.kron(PAULIS[a], PAULIS[b]) / 4.0
    return mle_project(rho)


def measure_joint_state(joint: np.ndarray, shots: int | None, master_seed: int,
                        record_index: int = 0) -> np.ndarray:
    """Exact pass-through, or 9-setting sampled QST of a two-qubit state."""
    if shots is None:
        return joint
    counts = {}
    for s, axes in enumerate(PAIR_SETTINGS):
        rng = rng_stream(master_seed, record_index, s)
        counts[axes] = sample_pair_counts(joint, axes, shots, rng)
    return two_qubit_mle(pair_counts_to_correlations(counts))


# ---------------------------------------------------------------------------
# Decoupling
# ---------------------------------------------------------------------------

def decoupling_model(exchange_khz: float = 50.0, zz_khz: float = 30.0,
                     idle_ns: float = DECOUPLING_IDLE_NS,
                     env_init: str = "plus_plus") -> SEModel:
    """One-slot probe layout: idle, gate, idle (pre-idle folded into the
    initial joint state so the model carries a single interval)."""
    h = exchange_zz_hamiltonian(exchange_khz, zz_khz)
    pre = interval_propagator(h, idle_ns)
    init = pre @ initial_joint_state(2, env_init) @ pre.conj().T
    return SEModel(sys_dim=2, env_dim=2,
                   intervals=(interval_propagator(h, idle_ns),),
                   initial_se=init, env_reset=False, env_init=env_init,
                   meas_channel=None, label="decoupling probe")


def build_decoupling_tensor(model: SEModel, basis: ControlBasis,
                            shots: int | None = None,
                            master_seed: int = 0) -> ProcessTensor:
    """One-slot tensor mapping the gate to the joint two-qubit output.

    The provenance records the neighbor's preparation marginal; the
    optimizer uses it to break ties between gates that refocus equally
    well after a single application.
    """
    states = np.empty((basis.size, 4, 4), dtype=complex)
    for nu, u in enumerate(basis.unitaries):
        joint = two_qubit_probe(model, ControlSequence(
            steps=(unitary_step(u, f"U{nu}"),), name=f"probe{nu}"))
        states[nu] = measure_joint_state(joint, shots, master_seed, nu)
    slots = [unitary_slot(basis.unitaries, [f"U{nu}" for nu in range(basis.size)])]
    env_marginal = partial_trace(initial_joint_state(2, model.env_init), 1, (2, 2))
    return assemble(slots, states, out_dim=4, build_matrix=False,
                    provenance={"kind": "decoupling", "shots": shots,
                                "seed": master_seed,
                                "env_marginal": env_marginal})


def decoupling_objective(pt: ProcessTensor, gate: np.ndarray) -> float:
    """2 - purity(q1) - purity(q2) of the predicted joint output."""
    joint = mle_project(contract_fast(pt, [unitary_step(gate)]))
    g1 = purity(partial_trace(joint, 0, (2, 2)))
    g2 = purity(partial_trace(joint, 1, (2, 2)))
    return float(max(0.0, 2.0 - g1 - g2))


def restoration_error(pt: ProcessTensor, gate: np.ndarray,
                      env_ref: np.ndarray) -> float:
    """1 - fidelity between the predicted neighbor marginal and its
    preparation state.

    A single probe application cannot distinguish gates whose idle-gate-idle
    block acts locally from gates that merely steer this one input back to
    a product state. A block that also hands the neighbor back unchanged
    repeats cleanly period after period, so this is the tensor-predictable
    proxy for periodic performance.
    """
    pred = mle_project(contract_fast(pt, [unitary_step(gate)]))
    return float(max(0.0, 1.0 - fidelity(partial_trace(pred, 1, (2, 2)), env_ref)))


@dataclass(frozen=True)
class DecouplingResult:
    params: UnitaryParams
    objective: float
    axis: tuple[float, float, float]
    angle: float
    identity_objective: float
    degenerate: bool
    restarts: int
    # filled in by with_trajectories once the gate is taken back to the model
    idle_trajectory: "Trajectory | None" = None
    decoupled_trajectory: "Trajectory | None" = None

    @property
    def gate(self) -> np.ndarray:
        return self.params.matrix()


def optimize_decoupling(pt: ProcessTensor, restarts: int = 20, seed: int = 0,
                        maxiter: int = 400, env_ref: np.ndarray | None = None,
                        tie_tol: float = 1e-6) -> DecouplingResult:
    """Derivative-free search for the purity-restoring gate.

    Stage one minimizes the purity objective from ``restarts`` starting
    points. Minima frequently tie: many gates refocus the single probed
    input equally well. Stage two re-polishes the tied candidates with a
    heavy objective penalty plus the neighbor restoration error and keeps
    the candidate that restores best without giving up the objective, so
    the returned argmin is the one expected to hold up under repetition.
    Deterministic for a fixed seed.
    """
    if env_ref is None and pt.provenance:
        env_ref = pt.provenance.get("env_marginal")

    def objective(x: np.ndarray) -> float:
        return decoupling_objective(pt, u3_matrix(*x))

    rng = rng_stream(seed, 303)
    candidates: list[tuple[float, np.ndarray]] = []
    any_success = False
    for r in range(max(1, int(restarts))):
        x0 = np.zeros(3) if r == 0 else rng.uniform(0.0, 2.0 * np.pi, size=3)
        res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"maxiter": maxiter, "xatol": 1e-6,
                                         "fatol": 1e-8})
        any_success = any_success or bool(res.success)
        candidates.append((float(res.fun), res.x))
    if not any_success and not candidates:
        raise NumericalError("decoupling search failed on every restart")
    best_f = min(f for f, _ in candidates)
    best_x = next(x for f, x in candidates if f == best_f)

    if env_ref is not None:
        ref = np.asarray(env_ref, dtype=complex)

        def polish(x: np.ndarray) -> float:
            g = u3_matrix(*x)
            return 1e3 * decoupling_objective(pt, g) + restoration_error(pt, g, ref)

        scored: list[tuple[float, float, np.ndarray]] = []
        for f, x in candidates:
            if f > best_f + tie_tol:
                continue
            res = optimize.minimize(polish, x, method="Nelder-Mead",
                                    options={"maxiter": maxiter, "xatol": 1e-6,
                                             "fatol": 1e-10})
            g = u3_matrix(*res.x)
            scored.append((decoupling_objective(pt, g),
                           restoration_error(pt, g, ref), res.x))
        admissible = [s for s in scored if s[0] <= best_f + tie_tol]
        if admissible:
            pick = min(range(len(admissible)), key=lambda i: admissible[i][1])
            best_f, _, best_x = admissible[pick]

    params = UnitaryParams(*best_x)
    axis, angle = rotation_axis_angle(params.matrix())
    identity_obj = decoupling_objective(pt, np.eye(2, dtype=complex))
    return DecouplingResult(params=params, objective=float(best_f),
                            axis=tuple(float(v) for v in axis), angle=float(angle),
                            identity_objective=float(identity_obj),
                            degenerate=bool(identity_obj - best_f < 1e-9),
                            restarts=max(1, int(restarts)))


@dataclass(frozen=True)
class Trajectory:
    """Joint-evolution time series sampled at period boundaries."""

    times_ns: np.ndarray = field(repr=False)
    negativity: np.ndarray = field(repr=False)
    mutual_info_bits: np.ndarray = field(repr=False)
    purity_q1: np.ndarray = field(repr=False)
    purity_q2: np.ndarray = field(repr=False)
    label: str = ""

    def min_purity(self) -> float:
        return float(self.purity_q1.min())

    def peak_negativity(self) -> float:
        return float(self.negativity.max())


XY4_CYCLE = (PAULI_X, PAULI_Y, PAULI_X, PAULI_Y)


def simulate_trajectory(gates_cycle: tuple[np.ndarray, ...] | None,
                        period_ns: float = 500.0, horizon_ns: float = 25_000.0,
                        exchange_khz: float = 50.0, zz_khz: float = 30.0,
                        env_init: str = "plus_plus", label: str = "") -> Trajectory:
    """Evolve the joint pair, applying the gate cycle once per period.

    ``gates_cycle=None`` is idle evolution. The recorded metrics are all
    invariant under the local gate itself, so sampling at the period
    boundary captures the physics of interest.
    """
    if period_ns <= 0 or horizon_ns <= 0:
        raise ValueError("period and horizon must be positive")
    h = exchange_zz_hamiltonian(exchange_khz, zz_khz)
    v = interval_propagator(h, period_ns)
    steps = int(np.floor(horizon_ns / period_ns + 1e-9))
    state = initial_joint_state(2, env_init)
    times = [0.0]
    series = [state]
    for s in range(steps):
        state = v @ state @ v.conj().T
        if gates_cycle is not None:
            g = np.kron(gates_cycle[s % len(gates_cycle)], np.eye(2, dtype=complex))
            state = g @ state @ g.conj().T
        times.append((s + 1) * period_ns)
        series.append(state)
    neg = np.array([negativity(r) for r in series])
    mi = np.array([mutual_information_state(r) for r in series])
    p1 = np.array([purity(partial_trace(r, 0, (2, 2))) for r in series])
    p2 = np.array([purity(partial_trace(r, 1, (2, 2))) for r in series])
    return Trajectory(times_ns=np.array(times), negativity=neg,
                      mutual_info_bits=mi, purity_q1=p1, purity_q2=p2,
                      label=label)


def apply_periodic_decoupling(gate: np.ndarray | None, period_ns: float = 500.0,
                              horizon_ns: float = 25_000.0,
                              exchange_khz: float = 50.0, zz_khz: float = 30.0,
                              env_init: str = "plus_plus") -> Trajectory:
    cycle = None if gate is None else (np.asarray(gate, dtype=complex),)
    label = "idle" if gate is None else "decoupled"
    return simulate_trajectory(cycle, period_ns, horizon_ns, exchange_khz,
                               zz_khz, env_init, label=label)


def with_trajectories(result: DecouplingResult, period_ns: float = 500.0,
                      horizon_ns: float = 25_000.0, exchange_khz: float = 50.0,
                      zz_khz: float = 30.0,
                      env_init: str = "plus_plus") -> DecouplingResult:
    """Attach the idle and decoupled time series to an optimizer result."""
    idle = apply_periodic_decoupling(None, period_ns, horizon_ns,
                                     exchange_khz, zz_khz, env_init)
    dec = apply_periodic_decoupling(result.gate, period_ns, horizon_ns,
                                    exchange_khz, zz_khz, env_init)
    return replace(result, idle_trajectory=idle, decoupled_trajectory=dec)


# ---------------------------------------------------------------------------
# Non-unitary gate synthesis
# ---------------------------------------------------------------------------

def nonunitary_target(alpha: float, eta: float) -> QuantumChannel:
    """Target map with operator elements sqrt(eta) E and sqrt(1-eta) Y E,
    E = R_X(alpha) R_Y(alpha) R_Z(alpha); unitarity (1 + 2(1-2 eta)^2)/3."""
    if not 0.0 <= eta <= 0.5:
        raise ValueError(f"eta {eta} outside [0, 0.5]")
    e = rotation_gate("X", alpha) @ rotation_gate("Y", alpha) @ rotation_gate("Z", alpha)
    kraus = [np.sqrt(eta) * e, np.sqrt(1.0 - eta) * (PAULI_Y @ e)]
    return channel_from_kraus(kraus, 2, 2,
                              label=f"N(alpha={alpha:.4f},eta={eta:.4f})")


def synthesis_model(exchange_khz: float = 50.0, zz_khz: float = 30.0,
                    idle_ns: float = SYNTHESIS_IDLE_NS,
                    env_init: str = "zero") -> SEModel:
    """Two-slot layout: preparation, idle, gate, idle, readout."""
    h = exchange_zz_hamiltonian(exchange_khz, zz_khz)
    v = interval_propagator(h, idle_ns)
    return SEModel(sys_dim=2, env_dim=2, intervals=(v, v),
                   initial_se=initial_joint_state(2, env_init),
                   env_reset=False, env_init=env_init, meas_channel=None,
                   label="synthesis probe")


def build_synthesis_tensor(model: SEModel, basis: ControlBasis,
                           shots: int | None = None,
                           master_seed: int = 0) -> ProcessTensor:
    """(preparation, gate) tensor over the pool, system readout."""
    if model.steps != 2:
        raise ValueError("synthesis layout has exactly two control slots")
    preps = basis.preparations
    states = np.empty((len(preps), basis.size, 2, 2), dtype=complex)
    rec = 0
    for i, p in enumerate(preps):
        for nu, u in enumerate(basis.unitaries):
            seq = ControlSequence(steps=(prep_step(p.gate, p.label),
                                         unitary_step(u, f"U{nu}")),
                                  name=f"syn_p{i}_u{nu}")
            if shots is None:
                states[i, nu] = run_sequence(model, seq)
            else:
                states[i, nu] = qst_mle(simulate_experiment(
                    model, seq, shots, master_seed, record_index=rec))
            rec += 1
    slots = [prep_slot(preps),
             unitary_slot(basis.unitaries, [f"U{nu}" for nu in range(basis.size)])]
    return assemble(slots, states, out_dim=2, build_matrix=False,
                    provenance={"kind": "synthesis", "shots": shots,
                                "seed": master_seed})


def synthesis_loss(pt: ProcessTensor, x: np.ndarray,
                   target: QuantumChannel) -> float:
    """Summed trace distance between tensor predictions and target outputs
    over the four standard preparations."""
    gate = u3_matrix(*x)
    loss = 0.0
    for i, prep in enumerate(standard_preparations()):
        pred = contract_fast(pt, [prep_step(prep.gate, prep.label),
                                  unitary_step(gate)])
        want = apply_channel(target, prep.state)
        loss += trace_distance(mle_project(pred), want)
    return float(loss)


@dataclass(frozen=True)
class SynthesisResult:
    params: UnitaryParams
    loss: float
    target_label: str
    restarts: int

    @property
    def gate(self) -> np.ndarray:
        return self.params.matrix()


def synthesize_gate(pt: ProcessTensor, target: QuantumChannel,
                    restarts: int = 20, seed: int = 0,
                    maxiter: int = 400) -> SynthesisResult:
    """Tune the gate so the tensor's predictions reproduce the target."""

    def objective(x: np.ndarray) -> float:
        return synthesis_loss(pt, x, target)

    rng = rng_stream(seed, 505)
    best_x, best_f = None, np.inf
    any_success = False
    for r in range(max(1, int(restarts))):
        x0 = np.zeros(3) if r == 0 else rng.uniform(0.0, 2.0 * np.pi, size=3)
        res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"maxiter": maxiter, "xatol": 1e-6,
                                         "fatol": 1e-8})
        any_success = any_success or bool(res.success)
        if res.fun < best_f:
            best_f, best_x = res.fun, res.x
    if not any_success and best_x is None:
        raise NumericalError("synthesis search failed on every restart")
    return SynthesisResult(params=UnitaryParams(*best_x), loss=float(best_f),
                           target_label=target.label,
                           restarts=max(1, int(restarts)))


def qpt(model: SEModel, gate: np.ndarray, shots: int | None = None,
        master_seed: int = 0) -> QuantumChannel:
    """Process tomography of the embedded gate layout.

    Runs the four standard preparations through the model with the gate in
    the second slot, tomographs the outputs, solves for the linear map and
    projects it onto the CPTP set.
    """
    if model.steps != 2:
        raise ValueError("qpt layout has exactly two control slots")
    preps = standard_preparations()
    inputs = np.empty((4, 4), dtype=complex)
    outputs = np.empty((4, 4), dtype=complex)
    for i, prep in enumerate(preps):
        seq = ControlSequence(steps=(prep_step(prep.gate, prep.label),
                                     unitary_step(gate, "G")),
                              name=f"qpt_{prep.label}")
        if shots is None:
            out = run_sequence(model, seq)
        else:
            out = qst_mle(simulate_experiment(model, seq, shots, master_seed,
                                              record_index=i))
        inputs[:, i] = prep.state.reshape(-1)
        outputs[:, i] = out.reshape(-1)
    superop = outputs @ np.linalg.inv(inputs)
    choi = project_to_cptp(superop_to_choi(superop, 2, 2))
    return QuantumChannel(choi=choi, dim_in=2, dim_out=2, label="qpt")


@dataclass(frozen=True)
class SweepPoint:
    eta: float
    target_unitarity: float
    loss: float
    params: UnitaryParams
    process_fidelity: float
    realized_unitarity: float


def synthesis_sweep(pt: ProcessTensor, model: SEModel, alpha: float,
                    etas: np.ndarray | None = None, restarts: int = 20,
                    seed: int = 0, maxiter: int = 400) -> list[SweepPoint]:
    """Synthesize across the eta grid and score each realized channel."""
    if etas is None:
        etas = np.linspace(0.0, 0.5, 11)
    points = []
    for idx, eta in enumerate(etas):
        target = nonunitary_target(alpha, float(eta))
        res = synthesize_gate(pt, target, restarts=restarts, seed=seed + idx,
                              maxiter=maxiter)
        realized = qpt(model, res.gate)
        points.append(SweepPoint(
            eta=float(eta), target_unitarity=float(unitarity(target)),
            loss=res.loss, params=res.params,
            process_fidelity=float(process_fidelity(realized, target)),
            realized_unitarity=float(unitarity(realized))))
    return points
