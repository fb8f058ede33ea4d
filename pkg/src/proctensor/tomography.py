"""State tomography, process tensor assembly, contraction and evaluation.

The matrix form of a k-step restricted process tensor is

    T = sum_nu (D_0^{nu_0} (x) ... (x) D_{k-1}^{nu_{k-1}})^T (x) rho^nu

where the D are the dual matrices of each slot's basis (trace-normalized
Choi forms, see basis module) and rho^nu is the measured output state for
the basis sequence nu. Contracting a sequence of operations A with joint
matrix form A_hat = A_0 (x) ... (x) A_{k-1} is

    T[A] = tr_in[(A_hat (x) I_out)^T T] = sum_nu prod_s tr[A_s D_s^{nu_s}] rho^nu

so the expansion coefficients tr[A_s D_s^{nu_s}] are computed slot by
slot; the right-hand route is used as a fast path and is algebraically
identical to the defining trace.

Slot 0 is a preparation slot: any operation contracted there is first
converted to the preparation it induces on the slot's reference input
|0><0|. Unitary slots accept anything whose Choi form lies in the span of
unitary channels; the depolarizing barrier is carried together with its
explicit decomposition as an equal mixture of the four Pauli gates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .basis import (
    ControlBasis,
    DualSet,
    PrepOp,
    RESTRICTED_SPAN_DIM,
    build_duals,
    prep_matrix_form,
    unitary_matrix_form,
)
from .qcore import (
    ID2,
    KET0,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    PAULIS,
    QuantumChannel,
    apply_channel,
    channel_from_unitary,
    check_density_matrix,
    fidelity,
    ket_dm,
)
from .simulator import (
    AXES,
    ControlSequence,
    ControlStep,
    ExperimentRecord,
    prep_step,
    rng_stream,
    unitary_step,
)

PREP_SPAN_DIM = 4


# ---------------------------------------------------------------------------
# Single-qubit state tomography
# ---------------------------------------------------------------------------

def linear_inversion_qubit(x: float, y: float, z: float) -> np.ndarray:
    return 0.5 * (ID2 + x * PAULI_X + y * PAULI_Y + z * PAULI_Z)


def mle_project(rho: np.ndarray) -> np.ndarray:
    """Nearest physical state by eigenvalue truncation.

    Rescales the trace to one, then walks the spectrum from the smallest
    eigenvalue: negative eigenvalues are zeroed and their weight spread
    uniformly over the rest, which reproduces the trace-constrained
    least-squares projection.
    """
    rho = np.asarray(rho, dtype=complex)
    tr = rho.trace()
    if abs(tr) < 1e-12:
        raise ValueError("cannot project a traceless matrix")
    rho = rho / tr
    evals, vecs = np.linalg.eigh(rho)
    order = np.argsort(evals)[::-1]
    mu = evals[order].astype(float)
    vecs = vecs[:, order]
    acc = 0.0
    for i in range(len(mu) - 1, -1, -1):
        if mu[i] + acc / (i + 1) < 0:
            acc += mu[i]
            mu[i] = 0.0
        else:
            mu[: i + 1] += acc / (i + 1)
            break
    return (vecs * mu) @ vecs.conj().T


def qst_mle(record: ExperimentRecord) -> np.ndarray:
    """Physical state estimate from a three-axis record."""
    ex = record.expectations()
    return mle_project(linear_inversion_qubit(ex["X"], ex["Y"], ex["Z"]))


def qubit_states_from_expectations(xs: np.ndarray, ys: np.ndarray,
                                   zs: np.ndarray) -> np.ndarray:
    """Vectorized qubit MLE: for 2x2 estimates the eigenvalue truncation
    is exactly a radial clip of the Bloch vector to the unit ball."""
    r = np.sqrt(xs * xs + ys * ys + zs * zs)
    scale = np.where(r > 1.0, 1.0 / np.maximum(r, 1e-300), 1.0)
    x, y, z = xs * scale, ys * scale, zs * scale
    out = np.empty(xs.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = 0.5 * (1.0 + z)
    out[..., 1, 1] = 0.5 * (1.0 - z)
    out[..., 0, 1] = 0.5 * (x - 1j * y)
    out[..., 1, 0] = 0.5 * (x + 1j * y)
    return out


def qubit_bloch(rho: np.ndarray) -> np.ndarray:
    """Bloch vector(s) of qubit state(s), shape (..., 3)."""
    rho = np.asarray(rho, dtype=complex)
    x = 2.0 * rho[..., 1, 0].real
    y = 2.0 * rho[..., 1, 0].imag
    z = (rho[..., 0, 0] - rho[..., 1, 1]).real
    return np.stack([x, y, z], axis=-1)


def qubit_fidelity_vectorized(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Closed-form Uhlmann fidelity for batches of qubit states:
    F = tr(ab) + 2 sqrt(det a det b)."""
    va = qubit_bloch(a)
    vb = qubit_bloch(b)
    ra2 = np.minimum(np.sum(va * va, axis=-1), 1.0)
    rb2 = np.minimum(np.sum(vb * vb, axis=-1), 1.0)
    dot = np.sum(va * vb, axis=-1)
    f = 0.5 * (1.0 + dot + np.sqrt((1.0 - ra2) * (1.0 - rb2)))
    return np.clip(f, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Process tensor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlotBasis:
    """The operations spanning one slot, as trace-normalized Choi forms."""

    kind: str  # "prep" | "unitary"
    forms: tuple[np.ndarray, ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("prep", "unitary"):
            raise ValueError(f"unknown slot kind {self.kind!r}")
        if len(self.forms) != len(self.labels):
            raise ValueError("labels and forms length mismatch")

    @property
    def size(self) -> int:
        return len(self.forms)

    @property
    def required_rank(self) -> int:
        return PREP_SPAN_DIM if self.kind == "prep" else RESTRICTED_SPAN_DIM


@dataclass(frozen=True)
class ProcessTensor:
    """Assembled restricted process tensor (fields per module docstring)."""

    slots: tuple[SlotBasis, ...]
    duals: tuple[DualSet, ...]
    states: np.ndarray = field(repr=False)
    matrix: np.ndarray | None = field(repr=False)
    out_dim: int
    provenance: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.slots)

    @property
    def in_dim(self) -> int:
        return int(np.prod([s.forms[0].shape[0] for s in self.slots]))


def prep_slot(preps: Iterable[PrepOp]) -> SlotBasis:
    preps = tuple(preps)
    return SlotBasis(kind="prep",
                     forms=tuple(prep_matrix_form(p) for p in preps),
                     labels=tuple(p.label for p in preps))


def unitary_slot(unitaries: Iterable[np.ndarray],
                 labels: Iterable[str] | None = None) -> SlotBasis:
    mats = tuple(unitaries)
    labels = tuple(labels) if labels is not None else tuple(
        f"U{i}" for i in range(len(mats)))
    return SlotBasis(kind="unitary",
                     forms=tuple(unitary_matrix_form(u) for u in mats),
                     labels=labels)


def assemble(slots: list[SlotBasis], states: np.ndarray, out_dim: int = 2,
             provenance: dict | None = None, build_matrix: bool = True,
             duals: tuple[DualSet, ...] | None = None) -> ProcessTensor:
    """Build the tensor from slot bases and measured basis-sequence states."""
    slots = tuple(slots)
    sizes = tuple(s.size for s in slots)
    states = np.asarray(states, dtype=complex)
    if states.shape != sizes + (out_dim, out_dim):
        raise ValueError(
            f"states shape {states.shape} != {sizes + (out_dim, out_dim)}")
    if duals is None:
        duals = tuple(build_duals(list(s.forms), required_rank=s.required_rank)
                      for s in slots)
    matrix = None
    if build_matrix:
        in_dim = int(np.prod([s.forms[0].shape[0] for s in slots]))
        matrix = np.zeros((in_dim * out_dim, in_dim * out_dim), dtype=complex)
        for idx in np.ndindex(*sizes):
            dual_full = duals[0].duals[idx[0]].T
            for s in range(1, len(slots)):
                dual_full = np.kron(dual_full, duals[s].duals[idx[s]].T)
            matrix += np.kron(dual_full, states[idx])
    return ProcessTensor(slots=slots, duals=duals, states=states, matrix=matrix,
                         out_dim=out_dim, provenance=provenance or {})


def step_matrix_form(step: ControlStep, slot_kind: str) -> np.ndarray:
    """Matrix form of an operation as seen by a slot.

    Preparation slots convert the operation to the preparation it induces
    on the reference input |0><0|.
    """
    if slot_kind == "prep":
        sigma = apply_channel(step.channel, ket_dm(KET0))
        return np.kron(ID2, sigma) / 2.0
    return step.channel.choi / step.channel.dim_in


def slot_coefficients(slot: SlotBasis, duals: DualSet, step: ControlStep) -> np.ndarray:
    """Expansion coefficients tr[A D^nu] of a step against one slot."""
    if step.span_weights is not None and slot.kind == "unitary":
        coeffs = np.zeros(len(duals.duals))
        for w, ch in step.span_weights:
            form = ch.choi / ch.dim_in
            coeffs += w * np.array(
                [np.einsum("ij,ji->", form, d).real for d in duals.duals])
        return coeffs
    form = step_matrix_form(step, slot.kind)
    return np.array([np.einsum("ij,ji->", form, d).real for d in duals.duals])


def _steps_of(seq: ControlSequence | Iterable[ControlStep]) -> tuple[ControlStep, ...]:
    if isinstance(seq, ControlSequence):
        return seq.steps
    return tuple(seq)


def contract(pt: ProcessTensor, seq: ControlSequence | Iterable[ControlStep]) -> np.ndarray:
    """Defining contraction through the assembled matrix form."""
    steps = _steps_of(seq)
    if len(steps) != pt.steps:
        raise ValueError(f"sequence has {len(steps)} steps, tensor has {pt.steps}")
    if pt.matrix is None:
        return contract_fast(pt, steps)
    a_full = step_matrix_form(steps[0], pt.slots[0].kind)
    for s in range(1, pt.steps):
        a_full = np.kron(a_full, step_matrix_form(steps[s], pt.slots[s].kind))
    t4 = pt.matrix.reshape(pt.in_dim, pt.out_dim, pt.in_dim, pt.out_dim)
    return np.einsum("pm,pamb->ab", a_full, t4)


def contract_fast(pt: ProcessTensor,
                  seq: ControlSequence | Iterable[ControlStep]) -> np.ndarray:
    """Coefficient-route contraction; equal to ``contract`` by linearity."""
    steps = _steps_of(seq)
    if len(steps) != pt.steps:
        raise ValueError(f"sequence has {len(steps)} steps, tensor has {pt.steps}")
    coeffs = [slot_coefficients(pt.slots[s], pt.duals[s], steps[s])
              for s in range(pt.steps)]
    letters = "ijklmn"[: pt.steps]
    spec = ",".join(letters) + f",{letters}ab->ab"
    return np.einsum(spec, *coeffs, pt.states)


def depolarizing_in_span() -> ControlStep:
    """The single-qubit depolarizing channel as a contractable step.

    Its Choi matrix is I/4 (normalized), inside the span of unitary
    channels; the step carries the explicit equal-weight Pauli
    decomposition R = (1/4) sum_P P . P so contraction can use it.
    """
    ch = QuantumChannel(choi=np.eye(4, dtype=complex) / 2.0, dim_in=2, dim_out=2,
                        label="depolarizing")
    weights = tuple((0.25, channel_from_unitary(PAULIS[p], label=p))
                    for p in ("I", "X", "Y", "Z"))
    return ControlStep(kind="barrier", channel=ch, label="barrier",
                       span_weights=weights)


# ---------------------------------------------------------------------------
# Standard three-step experiment enumeration
# ---------------------------------------------------------------------------

def standard_sequence(basis: ControlBasis, i: int, j: int, k: int) -> ControlSequence:
    p = basis.preparations[i]
    return ControlSequence(
        steps=(prep_step(p.gate, p.label),
               unitary_step(basis.unitaries[j], f"U{j}"),
               unitary_step(basis.unitaries[k], f"U{k}")),
        name=f"p{i}_u{j}_u{k}")


def enumerate_standard_keys(n_prep: int, pool: int) -> list[tuple[int, int, int]]:
    return [(i, j, k) for i in range(n_prep) for j in range(pool) for k in range(pool)]


def build_standard_tensor(states: np.ndarray, basis: ControlBasis, n: int,
                          provenance: dict | None = None,
                          build_matrix: bool = True) -> ProcessTensor:
    """Three-step tensor (prep slot + two unitary slots) from pool states."""
    if n > basis.size:
        raise ValueError(f"basis subset {n} exceeds pool size {basis.size}")
    slots = [prep_slot(basis.preparations),
             unitary_slot(basis.unitaries[:n], [f"U{j}" for j in range(n)]),
             unitary_slot(basis.unitaries[:n], [f"U{k}" for k in range(n)])]
    return assemble(slots, states[:, :n, :n], out_dim=2, provenance=provenance,
                    build_matrix=build_matrix)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def reconstruction_fidelity(prediction: np.ndarray, measured: np.ndarray) -> float:
    """Uhlmann fidelity between the projected prediction and the estimate."""
    pred = mle_project(prediction)
    meas = check_density_matrix(measured, name="measured state")
    return fidelity(pred, meas)


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    mean: float
    count: int


def box_stats(values: np.ndarray) -> BoxStats:
    """Median, quartiles and 1.5 IQR whiskers clipped to the data range."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("no values to summarize")
    q1, med, q3 = np.percentile(v, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    in_lo = v[v >= q1 - 1.5 * iqr]
    in_hi = v[v <= q3 + 1.5 * iqr]
    return BoxStats(median=float(med), q1=float(q1), q3=float(q3),
                    whisker_lo=float(in_lo[0]), whisker_hi=float(in_hi[-1]),
                    mean=float(v.mean()), count=int(v.size))


@dataclass(frozen=True)
class EvalResult:
    n: int
    fidelities: dict[tuple[int, int, int], float]
    stats: BoxStats

    @property
    def mean_infidelity(self) -> float:
        return 1.0 - self.stats.mean


def held_out_coefficient_tables(pt: ProcessTensor, basis: ControlBasis,
                                keys: list[tuple[int, int, int]]) -> tuple[np.ndarray, ...]:
    """Per-slot coefficient matrices for a list of (i, j, k) sequences."""
    n = pt.slots[1].size
    prep_eye = np.eye(len(basis.preparations))
    # coefficients of every pool element against the slot duals, computed once
    pool_coeffs = np.array([
        slot_coefficients(pt.slots[1], pt.duals[1],
                          unitary_step(basis.unitaries[j]))
        for j in range(basis.size)])
    a0 = np.array([prep_eye[i] for i, _, _ in keys])
    a1 = np.array([pool_coeffs[j] for _, j, _ in keys])
    a2 = np.array([pool_coeffs[k] for _, _, k in keys])
    assert a1.shape[1] == n
    return a0, a1, a2


def predict_batch(pt: ProcessTensor, tables: tuple[np.ndarray, ...]) -> np.ndarray:
    a0, a1, a2 = tables
    return np.einsum("si,sj,sk,ijkab->sab", a0, a1, a2, pt.states)


def evaluate_split(states: np.ndarray, basis: ControlBasis, n: int,
                   provenance: dict | None = None) -> EvalResult:
    """Reconstruct from the first n pool elements, verify on the rest.

    ``states`` holds the measured output state of every standard sequence,
    shape (4, pool, pool, 2, 2). The held-out set is every sequence whose
    two unitary slots both index past n.
    """
    pool = basis.size
    if not 1 <= n < pool:
        raise ValueError(f"need 1 <= n < pool={pool} for a held-out split, got {n}")
    pt = build_standard_tensor(states, basis, n, provenance, build_matrix=False)
    keys = [(i, j, k) for i in range(len(basis.preparations))
            for j in range(n, pool) for k in range(n, pool)]
    tables = held_out_coefficient_tables(pt, basis, keys)
    preds = predict_batch(pt, tables)
    fid = {}
    for s, key in enumerate(keys):
        fid[key] = reconstruction_fidelity(preds[s], states[key])
    return EvalResult(n=n, fidelities=fid,
                      stats=box_stats(np.array(list(fid.values()))))


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------

def resample_record(record: ExperimentRecord, rng: np.random.Generator) -> ExperimentRecord:
    """Multinomial (binomial per axis) resample; exact records are fixed points."""
    if record.shots is None:
        return record
    counts = {}
    for ax in AXES:
        plus, _ = record.counts[ax]
        new_plus = int(rng.binomial(record.shots, plus / record.shots))
        counts[ax] = (new_plus, record.shots - new_plus)
    return ExperimentRecord(sequence_id=record.sequence_id, counts=counts,
                            shots=record.shots, seed=record.seed)


def _record_arrays(records: dict[tuple[int, int, int], ExperimentRecord],
                   keys: list[tuple[int, int, int]]) -> tuple[np.ndarray, np.ndarray]:
    """(plus-probability array, shots array) over keys x axes; shots 0 = exact."""
    probs = np.empty((len(keys), 3))
    shots = np.zeros(len(keys), dtype=int)
    for r, key in enumerate(keys):
        rec = records[key]
        for a, ax in enumerate(AXES):
            plus, _ = rec.counts[ax]
            probs[r, a] = plus / (rec.shots if rec.shots else 1.0)
        shots[r] = rec.shots or 0
    return probs, shots


def _states_from_probs(probs: np.ndarray) -> np.ndarray:
    ex = 2.0 * probs - 1.0
    return qubit_states_from_expectations(ex[:, 0], ex[:, 1], ex[:, 2])


def bootstrap_ci(records: dict[tuple[int, int, int], ExperimentRecord],
                 basis: ControlBasis, n: int, resamples: int = 1000,
                 seed: int = 0, alpha: float = 0.05,
                 ) -> tuple[float, float]:
    """Percentile bootstrap interval for the held-out mean infidelity.

    Every record (basis and verification sequences alike) is resampled
    from its own counts, the tensor is rebuilt and re-evaluated, and the
    (alpha/2, 1-alpha/2) percentiles of the resampled means are returned.
    """
    lo, hi, _ = bootstrap_samples(records, basis, n, resamples, seed, alpha)
    return lo, hi


def bootstrap_samples(records: dict[tuple[int, int, int], ExperimentRecord],
                      basis: ControlBasis, n: int, resamples: int = 1000,
                      seed: int = 0, alpha: float = 0.05,
                      ) -> tuple[float, float, np.ndarray]:
    if resamples < 2:
        raise ValueError("need at least two resamples")
    pool = basis.size
    all_keys = enumerate_standard_keys(len(basis.preparations), pool)
    missing = [k for k in all_keys if k not in records]
    if missing:
        raise ValueError(f"records missing for {len(missing)} sequences, e.g. {missing[0]}")
    probs, shots = _record_arrays(records, all_keys)
    key_pos = {key: r for r, key in enumerate(all_keys)}
    held = [(i, j, k) for (i, j, k) in all_keys if j >= n and k >= n]
    held_idx = np.array([key_pos[key] for key in held])
    sizes = (len(basis.preparations), pool, pool)

    # duals and coefficient tables never change under resampling
    base_states = _states_from_probs(probs).reshape(sizes + (2, 2))
    pt0 = build_standard_tensor(base_states, basis, n, build_matrix=False)
    tables = held_out_coefficient_tables(pt0, basis, held)

    rng = rng_stream(seed, 777)
    sampled = np.empty(resamples)
    shot_mat = shots[:, None].astype(float)
    for b in range(resamples):
        if shots.max() == 0:
            re_probs = probs
        else:
            draws = rng.binomial(np.maximum(shot_mat, 1).astype(int), probs)
            re_probs = np.where(shot_mat > 0, draws / np.maximum(shot_mat, 1.0), probs)
        re_states = _states_from_probs(re_probs).reshape(sizes + (2, 2))
        pt = ProcessTensor(slots=pt0.slots, duals=pt0.duals,
                           states=re_states[:, :n, :n], matrix=None,
                           out_dim=2, provenance={})
        preds = predict_batch(pt, tables)
        meas = re_states.reshape(-1, 2, 2)[held_idx]
        fids = qubit_fidelity_vectorized(
            _states_from_probs(qubit_probs_of(preds)), meas)
        sampled[b] = 1.0 - fids.mean()
    lo, hi = np.percentile(sampled, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi), sampled


def qubit_probs_of(states: np.ndarray) -> np.ndarray:
    """Plus-outcome probabilities along X, Y, Z for a batch of states."""
    bloch = qubit_bloch(states)
    return (1.0 + bloch) / 2.0


# ---------------------------------------------------------------------------
# CPTP projection
# ---------------------------------------------------------------------------

def _project_tp(choi: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    c4 = choi.reshape(dim_in, dim_out, dim_in, dim_out)
    block_tr = np.einsum("iaja->ij", c4)
    corr = np.eye(dim_in, dtype=complex) - block_tr
    return choi + np.kron(corr, np.eye(dim_out, dtype=complex)) / dim_out


def _project_psd(mat: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh((mat + mat.conj().T) / 2.0)
    evals = np.clip(evals, 0.0, None)
    return (vecs * evals) @ vecs.conj().T


def project_to_cptp(choi: np.ndarray, dim_in: int = 2, dim_out: int = 2,
                    tol: float = 1e-10, max_iter: int = 5000) -> np.ndarray:
    """Closest CPTP Choi matrix by Dykstra alternating projections."""
    y = (np.asarray(choi, dtype=complex) + np.asarray(choi).conj().T) / 2.0
    p = np.zeros_like(y)
    for _ in range(max_iter):
        z = _project_tp(y, dim_in, dim_out)
        w = _project_psd(z + p)
        p = z + p - w
        y = w
        c4 = y.reshape(dim_in, dim_out, dim_in, dim_out)
        tp_defect = np.max(np.abs(np.einsum("iaja->ij", c4) - np.eye(dim_in)))
        min_eval = np.linalg.eigvalsh(y).min()
        if tp_defect < tol and min_eval > -tol:
            break
    return _project_tp(y, dim_in, dim_out)
