"""Environmental memory bounds from conditional mutual information.

A classical bit is encoded in the choice between two preparations, the
reconstructed tensor is contracted with depolarizing barriers inserted at
chosen slots, and a decoding rotation plus computational-basis readout
turns the two outputs into a binary channel. The mutual information
I(E:D) of that channel, maximized over encodings, decoder and the gates
on unbarred slots, lower-bounds the information the environment carries
past the barriers; it can never exceed one bit.

Because the barrier erases the system wire completely, any nonzero
maximized value witnesses a path through the environment. Confidence
intervals use the basic (reflected percentile) bootstrap so that a
surrogate with no memory yields intervals containing zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .qcore import ID2, UnitaryParams
from .simulator import ControlStep, prep_step, rng_stream, unitary_step
from .tomography import (
    ProcessTensor,
    _record_arrays,
    _states_from_probs,
    build_standard_tensor,
    contract_fast,
    depolarizing_in_span,
    enumerate_standard_keys,
)

ENTROPY_FLOOR = 1e-12
CANONICAL_START = {
    "enc0": UnitaryParams(0.0, 0.0, 0.0),           # |0>
    "enc1": UnitaryParams(np.pi, 0.0, np.pi),       # |1>
    "decoder": UnitaryParams(0.0, 0.0, 0.0),
    "filler": UnitaryParams(0.0, 0.0, 0.0),
}


@dataclass(frozen=True)
class ProbeParams:
    """Variational parameters of one memory probe."""

    enc0: UnitaryParams
    enc1: UnitaryParams
    decoder: UnitaryParams
    filler: UnitaryParams | None = None

    def pack(self) -> np.ndarray:
        blocks = [self.enc0.as_tuple(), self.enc1.as_tuple(), self.decoder.as_tuple()]
        if self.filler is not None:
            blocks.append(self.filler.as_tuple())
        return np.concatenate([np.asarray(b, dtype=float) for b in blocks])


def unpack_params(x: np.ndarray, has_filler: bool) -> ProbeParams:
    x = np.asarray(x, dtype=float)
    expect = 12 if has_filler else 9
    if x.shape != (expect,):
        raise ValueError(f"parameter vector must have shape ({expect},)")
    mk = lambda i: UnitaryParams(*x[3 * i: 3 * i + 3])
    return ProbeParams(enc0=mk(0), enc1=mk(1), decoder=mk(2),
                       filler=mk(3) if has_filler else None)


def _check_placements(placements: tuple[int, ...], steps: int) -> tuple[int, ...]:
    placements = tuple(sorted(set(int(p) for p in placements)))
    if not placements:
        raise ValueError("need at least one barrier placement")
    for p in placements:
        if not 1 <= p < steps:
            raise ValueError(f"barrier slot {p} outside [1, {steps - 1}]")
    return placements


def probe_steps(steps: int, params: ProbeParams, placements: tuple[int, ...],
                which: int) -> list[ControlStep]:
    """Step list for encoding bit ``which`` with barriers at ``placements``."""
    enc = params.enc0 if which == 0 else params.enc1
    row: list[ControlStep] = [prep_step(enc.matrix(), f"enc{which}")]
    for s in range(1, steps):
        if s in placements:
            row.append(depolarizing_in_span())
        elif params.filler is not None:
            row.append(unitary_step(params.filler.matrix(), "filler"))
        else:
            row.append(unitary_step(ID2, "wait"))
    return row


def binary_channel_mi(cond: np.ndarray) -> float:
    """I(E:D) in bits of a 2x2 conditional table p(d|e) under p(e) = 1/2.

    Rows are clamped to [floor, 1] and renormalized before use, which
    absorbs the slight unphysicality of shot-noise reconstructions.
    """
    cond = np.clip(np.asarray(cond, dtype=float), ENTROPY_FLOOR, 1.0)
    cond = cond / cond.sum(axis=1, keepdims=True)
    joint = 0.5 * cond
    pd = joint.sum(axis=0)
    mi = 0.0
    for e in range(2):
        for d in range(2):
            pj = joint[e, d]
            if pj > ENTROPY_FLOOR:
                mi += pj * np.log2(pj / (0.5 * pd[d]))
    return float(min(max(mi, 0.0), 1.0))


def cmi_value(pt: ProcessTensor, params: ProbeParams,
              placements: tuple[int, ...]) -> float:
    """Mutual information of one probe configuration."""
    placements = _check_placements(placements, pt.steps)
    dec = params.decoder.matrix()
    cond = np.empty((2, 2))
    for e in (0, 1):
        rho = contract_fast(pt, probe_steps(pt.steps, params, placements, e))
        rotated = dec @ rho @ dec.conj().T
        cond[e, 0] = rotated[0, 0].real
        cond[e, 1] = rotated[1, 1].real
    return binary_channel_mi(cond)


@dataclass(frozen=True)
class CMIResult:
    bits: float
    params: ProbeParams
    placements: tuple[int, ...]
    restarts: int


def maximize_cmi(pt: ProcessTensor, placements: tuple[int, ...],
                 restarts: int = 20, seed: int = 0,
                 include_filler: bool | None = None,
                 maxiter: int = 400) -> CMIResult:
    """Best probe over encodings, decoder and free-slot gates.

    Multistart Nelder-Mead: the first start is the computational-basis
    probe, the rest draw all angles uniformly from [0, 2pi).
    """
    placements = _check_placements(placements, pt.steps)
    if include_filler is None:
        include_filler = len(placements) < pt.steps - 1
    dim = 12 if include_filler else 9
    start = ProbeParams(
        enc0=CANONICAL_START["enc0"], enc1=CANONICAL_START["enc1"],
        decoder=CANONICAL_START["decoder"],
        filler=CANONICAL_START["filler"] if include_filler else None)

    def objective(x: np.ndarray) -> float:
        return -cmi_value(pt, unpack_params(x, include_filler), placements)

    rng = rng_stream(seed, 101, *placements)
    best_x, best_f = start.pack(), objective(start.pack())
    for r in range(max(1, int(restarts))):
        x0 = start.pack() if r == 0 else rng.uniform(0.0, 2.0 * np.pi, size=dim)
        res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"maxiter": maxiter, "xatol": 1e-4,
                                         "fatol": 1e-8})
        if res.fun < best_f:
            best_f, best_x = res.fun, res.x
    return CMIResult(bits=float(-best_f), params=unpack_params(best_x, include_filler),
                     placements=placements, restarts=max(1, int(restarts)))


def memory_bound(pt: ProcessTensor,
                 placements_list: tuple[tuple[int, ...], ...] | None = None,
                 restarts: int = 20, seed: int = 0) -> tuple[CMIResult, ...]:
    """CMI bound for every barrier placement (defaults to all of them)."""
    if placements_list is None:
        singles = [(s,) for s in range(1, pt.steps)]
        placements_list = tuple(singles) + ((tuple(range(1, pt.steps)),)
                                            if pt.steps > 2 else ())
    return tuple(maximize_cmi(pt, pl, restarts=restarts, seed=seed)
                 for pl in placements_list)


# ---------------------------------------------------------------------------
# Uncertainty
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MemoryInterval:
    point: float
    lo: float
    hi: float
    placements: tuple[int, ...]


def bootstrap_cmi(records: dict, basis, n: int, placements: tuple[int, ...],
                  params: ProbeParams, resamples: int = 200, seed: int = 0,
                  alpha: float = 0.05) -> MemoryInterval:
    """Basic-bootstrap interval for the CMI at fixed probe parameters.

    Each resample redraws every record from its own counts, rebuilds the
    tensor and re-evaluates the probe. The reflected percentile interval
    [2t - q_hi, 2t - q_lo] keeps zero inside the interval when the point
    estimate sits at the zero floor, at the cost of clipping to [0, 1].
    """
    if resamples < 2:
        raise ValueError("need at least two resamples")
    all_keys = enumerate_standard_keys(len(basis.preparations), basis.size)
    missing = [k for k in all_keys if k not in records]
    if missing:
        raise ValueError(f"records missing for {len(missing)} sequences")
    probs, shots = _record_arrays(records, all_keys)
    sizes = (len(basis.preparations), basis.size, basis.size)

    def tensor_of(p: np.ndarray) -> ProcessTensor:
        states = _states_from_probs(p).reshape(sizes + (2, 2))
        return build_standard_tensor(states, basis, n, build_matrix=False)

    point_pt = tensor_of(probs)
    placements = _check_placements(placements, point_pt.steps)
    point = cmi_value(point_pt, params, placements)

    rng = rng_stream(seed, 202, *placements)
    shot_mat = shots[:, None].astype(float)
    samples = np.empty(resamples)
    for b in range(resamples):
        if shots.max() == 0:
            re_probs = probs
        else:
            draws = rng.binomial(np.maximum(shot_mat, 1).astype(int), probs)
            re_probs = np.where(shot_mat > 0, draws / np.maximum(shot_mat, 1.0), probs)
        samples[b] = cmi_value(tensor_of(re_probs), params, placements)
    q_lo, q_hi = np.percentile(samples, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    lo = min(max(2.0 * point - q_hi, 0.0), 1.0)
    hi = min(max(2.0 * point - q_lo, 0.0), 1.0)
    return MemoryInterval(point=point, lo=lo, hi=hi, placements=placements)
