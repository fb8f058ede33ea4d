"""Qubit-oriented quantum primitives: states, channels, and scalar metrics.

Conventions used throughout the package:

* Density matrices are plain complex ndarrays. The validators below define
  what "physical" means numerically; tolerance constants are module level
  and shared by every caller.
* The Choi matrix of a channel ``ch`` is assembled block-wise from matrix
  units, ``choi = sum_ij |i><j| (x) ch(|i><j|)``, so a trace-preserving
  map has ``tr(choi) = dim_in``. Superoperators act on row-major
  vectorized matrices, ``vec(rho)[i*d + j] = rho[i, j]``.
* Entropies, mutual information and memory bounds are base 2 (bits).
* Eigenvalue clamp policy: negative eigenvalues with magnitude at most
  ``EIG_CLAMP_TOL`` are treated as zero; anything more negative raises.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Shared numerical tolerances. Fixed here, not per call site.
HERMITIAN_TOL = 1e-9
TRACE_TOL = 1e-9
EIG_CLAMP_TOL = 1e-9
UNITARY_TOL = 1e-12
CHANNEL_TP_TOL = 1e-8
ENTROPY_CUTOFF = 1e-12

ID2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULIS = {"I": ID2, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
S_GATE = np.array([[1.0, 0.0], [0.0, 1.0j]], dtype=complex)


class NumericalError(RuntimeError):
    """An iterative numerical routine failed to produce a usable result."""


def ket_dm(vec: np.ndarray) -> np.ndarray:
    """Density matrix of a (normalized) pure state vector."""
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def check_density_matrix(rho: np.ndarray, subnormalized: bool = False,
                         name: str = "state") -> np.ndarray:
    """Validate a density matrix and return it as a complex ndarray.

    Requires a square Hermitian matrix, positive semidefinite within
    ``EIG_CLAMP_TOL``, with unit trace (or trace in (0, 1] when
    ``subnormalized`` is set). Raises ValueError on violation.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise ValueError(f"{name} is not Hermitian within {HERMITIAN_TOL}")
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -EIG_CLAMP_TOL:
        raise ValueError(f"{name} has negative eigenvalue {evals.min():.3e}")
    tr = float(rho.trace().real)
    if subnormalized:
        if not (-TRACE_TOL < tr <= 1.0 + TRACE_TOL):
            raise ValueError(f"{name} trace {tr} outside (0, 1]")
    elif abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"{name} trace {tr} != 1")
    return rho


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL, name: str = "matrix") -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"{name} must be square, got shape {u.shape}")
    d = u.shape[0]
    if np.max(np.abs(u.conj().T @ u - np.eye(d))) > tol:
        raise ValueError(f"{name} is not unitary within {tol}")
    return u


def clamp_spectrum(evals: np.ndarray, tol: float = EIG_CLAMP_TOL,
                   name: str = "matrix") -> np.ndarray:
    """Zero out tiny negative eigenvalues; raise if any are materially negative."""
    evals = np.asarray(evals, dtype=float)
    if evals.min() < -tol:
        raise ValueError(f"{name} eigenvalue {evals.min():.3e} below -{tol}")
    return np.clip(evals, 0.0, None)


def psd_sqrt(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Hermitian square root of a PSD matrix via eigendecomposition."""
    evals, vecs = np.linalg.eigh(mat)
    evals = clamp_spectrum(evals, name=name)
    return (vecs * np.sqrt(evals)) @ vecs.conj().T


# ---------------------------------------------------------------------------
# Parametrized gates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitaryParams:
    """Three-angle single-qubit gate parametrization.

    ``matrix()`` returns
    ``[[cos(t/2), -e^{i lam} sin(t/2)], [e^{i phi} sin(t/2), e^{i(lam+phi)} cos(t/2)]]``
    so (0,0,0) is the identity, (pi,0,pi) is X and (pi/2,0,pi) is the Hadamard.
    """

    theta: float
    phi: float
    lam: float

    def matrix(self) -> np.ndarray:
        return u3_matrix(self.theta, self.phi, self.lam)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta, self.phi, self.lam)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    return np.array(
        [[c, -np.exp(1j * lam) * s],
         [np.exp(1j * phi) * s, np.exp(1j * (lam + phi)) * c]],
        dtype=complex,
    )


def rotation_gate(axis: str, angle: float) -> np.ndarray:
    """exp(-i * angle * P / 2) for a Pauli axis."""
    if axis not in ("X", "Y", "Z"):
        raise ValueError(f"axis must be X, Y or Z, got {axis!r}")
    p = PAULIS[axis]
    return np.cos(angle / 2.0) * ID2 - 1j * np.sin(angle / 2.0) * p


def rotation_axis_angle(u: np.ndarray) -> tuple[np.ndarray, float]:
    """Rotation axis (unit Bloch vector) and angle of a single-qubit unitary.

    The global phase is fixed so the angle lies in [0, pi]. For angles near
    zero the axis is ill-conditioned; the zero vector is returned then.
    """
    u = check_unitary(u, name="gate")
    if u.shape != (2, 2):
        raise ValueError("rotation_axis_angle expects a 2x2 unitary")
    # u = e^{i g} (cos(a/2) I - i sin(a/2) n.sigma)
    det = np.linalg.det(u)
    u0 = u / np.sqrt(det)
    c = np.clip(u0.trace().real / 2.0, -1.0, 1.0)
    angle = 2.0 * np.arccos(abs(c))
    sign = 1.0 if c >= 0 else -1.0
    comps = np.array([
        (u0[0, 1] + u0[1, 0]) * 0.5j,
        (u0[0, 1] - u0[1, 0]) * 0.5,
        (u0[0, 0] - u0[1, 1]) * 0.5j,
    ]) * sign
    n = comps.real
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        return np.zeros(3), float(angle)
    return n / norm, float(angle)


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantumChannel:
    """A CP map stored as its Choi matrix (block convention in module docstring).

    ``trace_class`` is either "preserving" or "non-increasing"; validation
    checks the partial trace over the output accordingly.
    """

    choi: np.ndarray
    dim_in: int
    dim_out: int
    trace_class: str = "preserving"
    label: str = ""

    def __post_init__(self) -> None:
        choi = np.asarray(self.choi, dtype=complex)
        d = self.dim_in * self.dim_out
        if choi.shape != (d, d):
            raise ValueError(f"choi shape {choi.shape} != ({d}, {d})")
        if np.max(np.abs(choi - choi.conj().T)) > HERMITIAN_TOL:
            raise ValueError("choi matrix is not Hermitian")
        evals = np.linalg.eigvalsh(choi)
        if evals.min() < -CHANNEL_TP_TOL:
            raise ValueError(f"choi matrix not PSD, eigenvalue {evals.min():.3e}")
        red = choi_input_marginal(choi, self.dim_in, self.dim_out)
        eye = np.eye(self.dim_in)
        if self.trace_class == "preserving":
            if np.max(np.abs(red - eye)) > CHANNEL_TP_TOL:
                raise ValueError("channel is not trace preserving within tolerance")
        elif self.trace_class == "non-increasing":
            gap = np.linalg.eigvalsh(eye - red)
            if gap.min() < -CHANNEL_TP_TOL:
                raise ValueError("channel increases trace")
        else:
            raise ValueError(f"unknown trace_class {self.trace_class!r}")
        object.__setattr__(self, "choi", choi)


def choi_input_marginal(choi: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    """Matrix of block traces, equals the identity for a TP map."""
    c4 = choi.reshape(dim_in, dim_out, dim_in, dim_out)
    return np.einsum("iaja->ij", c4)


def channel_from_unitary(u: np.ndarray, label: str = "") -> QuantumChannel:
    u = check_unitary(u, tol=1e-9, name="gate")
    d = u.shape[0]
    vecs = u.T.reshape(d * d)  # (I (x) u) sum_i |i>|i>
    choi = np.outer(vecs, vecs.conj())
    return QuantumChannel(choi=choi, dim_in=d, dim_out=d, label=label)


def channel_from_kraus(kraus: list[np.ndarray], dim_in: int | None = None,
                       dim_out: int | None = None, label: str = "",
                       trace_class: str = "preserving") -> QuantumChannel:
    mats = [np.asarray(k, dtype=complex) for k in kraus]
    if not mats:
        raise ValueError("need at least one Kraus operator")
    dout, din = mats[0].shape
    dim_in = dim_in or din
    dim_out = dim_out or dout
    choi = np.zeros((dim_in * dim_out, dim_in * dim_out), dtype=complex)
    for k in mats:
        w = k.T.reshape(dim_in * dim_out)
        choi += np.outer(w, w.conj())
    return QuantumChannel(choi=choi, dim_in=dim_in, dim_out=dim_out,
                          trace_class=trace_class, label=label)


def identity_channel(dim: int) -> QuantumChannel:
    return channel_from_unitary(np.eye(dim, dtype=complex), label="identity")


def apply_channel(ch: QuantumChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ch.dim_in, ch.dim_in):
        raise ValueError(f"state shape {rho.shape} incompatible with dim_in {ch.dim_in}")
    c4 = ch.choi.reshape(ch.dim_in, ch.dim_out, ch.dim_in, ch.dim_out)
    return np.einsum("satb,st->ab", c4, rho)


def choi_to_superop(choi: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    c4 = choi.reshape(dim_in, dim_out, dim_in, dim_out)
    return c4.transpose(1, 3, 0, 2).reshape(dim_out * dim_out, dim_in * dim_in)


def superop_to_choi(superop: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    s4 = superop.reshape(dim_out, dim_out, dim_in, dim_in)
    return s4.transpose(2, 0, 3, 1).reshape(dim_in * dim_out, dim_in * dim_out)


def compose_channels(second: QuantumChannel, first: QuantumChannel) -> QuantumChannel:
    """Channel equal to ``second`` after ``first`` (apply ``first`` first)."""
    if first.dim_out != second.dim_in:
        raise ValueError("channel dimensions do not compose")
    s = choi_to_superop(second.choi, second.dim_in, second.dim_out) @ \
        choi_to_superop(first.choi, first.dim_in, first.dim_out)
    choi = superop_to_choi(s, first.dim_in, second.dim_out)
    cls = "preserving"
    if "non-increasing" in (first.trace_class, second.trace_class):
        cls = "non-increasing"
    return QuantumChannel(choi=choi, dim_in=first.dim_in, dim_out=second.dim_out,
                          trace_class=cls)


def preparation_channel(state: np.ndarray, dim_in: int = 2, label: str = "") -> QuantumChannel:
    """Trace-and-replace map sending every input to ``state``."""
    state = check_density_matrix(state, name="prepared state")
    choi = np.kron(np.eye(dim_in, dtype=complex), state)
    return QuantumChannel(choi=choi, dim_in=dim_in, dim_out=state.shape[0], label=label)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def purity(rho: np.ndarray) -> float:
    """tr(rho^2), in (0, 1] for a physical state.

    Examples
    --------
    >>> purity(np.diag([0.75, 0.25]))
    0.625
    """
    rho = np.asarray(rho, dtype=complex)
    return float(np.einsum("ij,ji->", rho, rho).real)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Uhlmann fidelity ``[tr sqrt(sqrt(a) b sqrt(a))]^2``.

    Symmetric in its arguments and 1 iff the states are equal. Tiny negative
    eigenvalues of the inner product (within EIG_CLAMP_TOL) are clamped to
    zero; anything more negative raises.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"state dimensions differ: {a.shape} vs {b.shape}")
    sa = psd_sqrt(a, name="state a")
    inner = sa @ b @ sa
    evals = clamp_spectrum(np.linalg.eigvalsh(inner), name="fidelity inner product")
    f = float(np.sum(np.sqrt(evals)) ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of a - b."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"state dimensions differ: {a.shape} vs {b.shape}")
    sv = np.linalg.svd(a - b, compute_uv=False)
    return float(0.5 * np.sum(sv))


def partial_trace(rho: np.ndarray, keep: int, dims: tuple[int, ...]) -> np.ndarray:
    """Reduce a multipartite state to the subsystem at index ``keep``."""
    rho = np.asarray(rho, dtype=complex)
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise ValueError(f"state shape {rho.shape} inconsistent with dims {dims}")
    if not 0 <= keep < len(dims):
        raise ValueError(f"keep index {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    r = rho.reshape(dims + dims)
    # einsum labels: traced subsystems share a letter on bra and ket sides
    letters = "abcdefghijkl"
    row = [letters[i] for i in range(n)]
    col = list(row)
    col[keep] = letters[n]
    spec = "".join(row) + "".join(col) + "->" + row[keep] + col[keep]
    return np.einsum(spec, r)


def negativity(rho: np.ndarray) -> float:
    """Entanglement negativity of a two-qubit state (partial transpose)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("negativity is implemented for two-qubit states only")
    r = rho.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)
    evals = np.linalg.eigvalsh(r)
    return float(-np.sum(evals[evals < 0.0]))


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy in bits; eigenvalues below ENTROPY_CUTOFF contribute zero."""
    evals = clamp_spectrum(np.linalg.eigvalsh(np.asarray(rho, dtype=complex)),
                           name="entropy input")
    evals = evals[evals > ENTROPY_CUTOFF]
    return float(-np.sum(evals * np.log2(evals)))


def mutual_information_state(rho: np.ndarray, dims: tuple[int, int] = (2, 2)) -> float:
    """S(A) + S(B) - S(AB) in bits for a bipartite state."""
    rho = check_density_matrix(rho, name="bipartite state")
    if rho.shape[0] != dims[0] * dims[1]:
        raise ValueError(f"state dimension {rho.shape[0]} != prod{dims}")
    ra = partial_trace(rho, 0, dims)
    rb = partial_trace(rho, 1, dims)
    return von_neumann_entropy(ra) + von_neumann_entropy(rb) - von_neumann_entropy(rho)


PAULI_ORDER = ("I", "X", "Y", "Z")


def pauli_transfer_matrix(ch: QuantumChannel) -> np.ndarray:
    """R[a, b] = tr[P_a ch(P_b)] / d for a qubit channel."""
    if ch.dim_in != 2 or ch.dim_out != 2:
        raise ValueError("Pauli transfer matrix is implemented for qubit channels")
    r = np.zeros((4, 4))
    for a, pa in enumerate(PAULI_ORDER):
        for b, pb in enumerate(PAULI_ORDER):
            op = np.kron(PAULIS[pb].T, PAULIS[pa])
            r[a, b] = float(np.einsum("ij,ji->", op, ch.choi).real) / 2.0
    return r


def unitarity(ch: QuantumChannel) -> float:
    """Average output purity proxy: tr(Eu^T Eu) / (d^2 - 1).

    ``Eu`` is the unital (traceless-to-traceless) block of the Pauli
    transfer matrix. Equals 1 exactly for unitary channels and 0 for the
    completely depolarizing channel.
    """
    r = pauli_transfer_matrix(ch)
    block = r[1:, 1:]
    return float(np.sum(block * block) / 3.0)


def process_fidelity(a: QuantumChannel, b: QuantumChannel) -> float:
    """Uhlmann fidelity between the trace-normalized Choi states."""
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        raise ValueError("channel dimensions differ")
    return fidelity(a.choi / a.dim_in, b.choi / b.dim_in)


# ---------------------------------------------------------------------------
# Measurement settings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PauliBasisSetting:
    """A projective single-qubit measurement along a Pauli axis."""

    axis: str
    plus: np.ndarray = field(repr=False)
    minus: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.axis not in ("X", "Y", "Z"):
            raise ValueError(f"axis must be X, Y or Z, got {self.axis!r}")
        ident = self.plus + self.minus
        if np.max(np.abs(ident - ID2)) > 1e-12:
            raise ValueError("projectors do not sum to the identity")


def pauli_setting(axis: str) -> PauliBasisSetting:
    if axis not in ("X", "Y", "Z"):
        raise ValueError(f"axis must be X, Y or Z, got {axis!r}")
    p = PAULIS[axis]
    return PauliBasisSetting(axis=axis, plus=(ID2 + p) / 2.0, minus=(ID2 - p) / 2.0)


PAULI_SETTINGS = {ax: pauli_setting(ax) for ax in ("X", "Y", "Z")}
