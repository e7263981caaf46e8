"""Hamiltonian models with multiplicative uncertainties and the benchmark problems.

A model is ``H = sum_i (1 + eps[a_i]) c_i H_i + sum_t (1 + eps[b_t]) u[ch_t] H_t``:
drift terms carry a fixed coefficient, control terms are driven by one pulse
channel, and either kind may be scaled by one uncertainty component.

Units: time in microseconds, every Hamiltonian coefficient and control
amplitude in rad/us.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .quantum import (
    batch_infidelity,
    check_hermitian,
    ordered_product,
    propagate_with_sensitivity,
    slice_propagators,
    tensor_operator,
)

log = logging.getLogger(__name__)

CHUNK = 256


@dataclass(frozen=True)
class DriftTerm:
    coefficient: float
    operator: np.ndarray
    uncertainty: int | None = None


@dataclass(frozen=True)
class ControlTerm:
    channel: int
    operator: np.ndarray
    uncertainty: int | None = None


@dataclass(frozen=True)
class UncertaintyDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError(f"bounds shape mismatch: {lower.shape} vs {upper.shape}")
        if np.any(lower > upper):
            raise ValueError("uncertainty domain needs lower <= upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def box(cls, dim, bound=0.2):
        return cls(-bound * np.ones(dim), bound * np.ones(dim))

    @property
    def dim(self):
        return self.lower.size

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, eps):
        eps = np.asarray(eps, dtype=float)
        return bool(np.all(eps >= self.lower) and np.all(eps <= self.upper))

    def clip(self, eps):
        return np.clip(eps, self.lower, self.upper)


def sample_uniform(domain, rng, size=None):
    """Draw uncertainty vector(s) uniformly from the box.

    With ``size=n`` an ``(n, d)`` array is returned; rows are drawn in order
    so the first ``n'`` rows equal a ``size=n'`` draw from the same stream.
    """
    shape = (domain.dim,) if size is None else (size, domain.dim)
    return rng.uniform(domain.lower, domain.upper, size=shape)


@dataclass(frozen=True)
class ControlPulse:
    """Piecewise-constant control: ``values[k, j]`` is channel ``j`` on slice ``k``."""

    values: np.ndarray
    total_time: float

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"pulse values must be a non-empty K x m matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("pulse values must be finite")
        if not self.total_time > 0:
            raise ValueError(f"total_time must be positive, got {self.total_time}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "total_time", float(self.total_time))

    @property
    def slice_count(self):
        return self.values.shape[0]

    @property
    def channels(self):
        return self.values.shape[1]

    @property
    def dt(self):
        return self.total_time / self.slice_count

    def with_values(self, values):
        return ControlPulse(values, self.total_time)


class HamiltonianModel:
    """Drift plus control terms on an ``N``-dimensional Hilbert space."""

    def __init__(self, drift_terms, control_terms, n_channels=None, n_uncertain=None):
        self.drift_terms = tuple(drift_terms)
        self.control_terms = tuple(control_terms)
        ops = [t.operator for t in self.drift_terms + self.control_terms]
        if not ops:
            raise ValueError("model needs at least one term")
        self.dim = np.asarray(ops[0]).shape[0]
        for op in ops:
            op = check_hermitian(op)
            if op.shape != (self.dim, self.dim):
                raise ValueError(f"operator shape {op.shape} does not match dimension {self.dim}")

        used_channels = [t.channel for t in self.control_terms]
        self.n_channels = n_channels if n_channels is not None else max(used_channels, default=-1) + 1
        unc = [t.uncertainty for t in self.drift_terms + self.control_terms if t.uncertainty is not None]
        self.n_uncertain = n_uncertain if n_uncertain is not None else max(unc, default=-1) + 1
        if any(c < 0 or c >= self.n_channels for c in used_channels):
            raise ValueError(f"control channel index out of range [0, {self.n_channels})")
        if any(a < 0 or a >= self.n_uncertain for a in unc):
            raise ValueError(f"uncertainty index out of range [0, {self.n_uncertain})")

        N, d, m = self.dim, self.n_uncertain, self.n_channels
        # dense coefficient tables so slice Hamiltonians are one einsum away
        self._drift_ops = np.array([t.operator for t in self.drift_terms], dtype=complex).reshape(-1, N, N)
        self._drift_coef = np.array([t.coefficient for t in self.drift_terms], dtype=float)
        self._drift_sel = np.zeros((len(self.drift_terms), d))
        for i, t in enumerate(self.drift_terms):
            if t.uncertainty is not None:
                self._drift_sel[i, t.uncertainty] = 1.0
        self._ctrl_ops = np.array([t.operator for t in self.control_terms], dtype=complex).reshape(-1, N, N)
        self._ctrl_chan = np.zeros((len(self.control_terms), m))
        self._ctrl_sel = np.zeros((len(self.control_terms), d))
        for i, t in enumerate(self.control_terms):
            self._ctrl_chan[i, t.channel] = 1.0
            if t.uncertainty is not None:
                self._ctrl_sel[i, t.uncertainty] = 1.0

    def _check(self, u=None, eps=None):
        if u is not None and np.shape(u)[-1] != self.n_channels:
            raise ValueError(f"pulse has {np.shape(u)[-1]} channels, model expects {self.n_channels}")
        if eps is not None and np.shape(eps)[-1] != self.n_uncertain:
            raise ValueError(f"uncertainty vector has length {np.shape(eps)[-1]}, model expects {self.n_uncertain}")

    def drift_operator(self, eps):
        """``sum_i (1 + eps[a_i]) c_i H_i`` for a ``(S, d)`` batch, shape ``(S, N, N)``."""
        scale = self._drift_coef * (1.0 + eps @ self._drift_sel.T)
        return np.einsum("si,iab->sab", scale, self._drift_ops)

    def channel_operators(self, eps):
        """Per-channel control generators ``(S, m, N, N)`` including uncertainty scaling."""
        scale = 1.0 + eps @ self._ctrl_sel.T
        return np.einsum("st,tj,tab->sjab", scale, self._ctrl_chan, self._ctrl_ops)

    def slice_hamiltonians(self, u, eps):
        """All slice Hamiltonians for pulse values ``(K, m)`` and a batch ``(S, d)``: ``(S, K, N, N)``."""
        u = np.asarray(u, dtype=float)
        eps = np.atleast_2d(np.asarray(eps, dtype=float))
        self._check(u, eps)
        drift = self.drift_operator(eps)
        ctrl = self.channel_operators(eps)
        return drift[:, None] + np.einsum("kj,sjab->skab", u, ctrl)

    def uncertainty_generators(self, u):
        """``dH_k / d eps_a`` for every slice: shape ``(K, d, N, N)`` (independent of eps)."""
        u = np.asarray(u, dtype=float)
        drift = np.einsum("i,ia,ibc->abc", self._drift_coef, self._drift_sel, self._drift_ops)
        ctrl = np.einsum("kj,tj,ta,tbc->kabc", u, self._ctrl_chan, self._ctrl_sel, self._ctrl_ops)
        return drift[None] + ctrl


def hamiltonian_slice(model, u_k, eps):
    """Hamiltonian of one slice with control values ``u_k`` and uncertainty ``eps``."""
    u_k = np.atleast_1d(np.asarray(u_k, dtype=float))
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    return model.slice_hamiltonians(u_k[None, :], eps[None, :])[0, 0]


@dataclass(frozen=True)
class GateSynthesisProblem:
    model: HamiltonianModel
    target: np.ndarray
    domain: UncertaintyDomain
    slice_count: int
    total_time: float
    u_max: float | None = None
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        target = np.asarray(self.target, dtype=complex)
        if target.shape != (self.model.dim, self.model.dim):
            raise ValueError(f"target shape {target.shape} does not match model dimension {self.model.dim}")
        if np.linalg.norm(target.conj().T @ target - np.eye(self.model.dim)) > 1e-10:
            raise ValueError("target gate is not unitary")
        if self.domain.dim != self.model.n_uncertain:
            raise ValueError(f"domain has {self.domain.dim} components, model uses {self.model.n_uncertain}")
        if self.slice_count < 1 or not self.total_time > 0:
            raise ValueError("need slice_count >= 1 and total_time > 0")
        object.__setattr__(self, "target", target)

    @property
    def dim(self):
        return self.model.dim

    @property
    def n_channels(self):
        return self.model.n_channels

    @property
    def n_uncertain(self):
        return self.model.n_uncertain

    @property
    def dt(self):
        return self.total_time / self.slice_count

    def zero_eps(self):
        return np.zeros(self.n_uncertain)

    def random_pulse(self, rng, scale=5.0):
        """Uniform random pulse in ``[-scale, scale]`` rad/us (clipped to ``u_max`` if set)."""
        values = rng.uniform(-scale, scale, size=(self.slice_count, self.n_channels))
        return ControlPulse(self.project(values), self.total_time)

    def project(self, values):
        if self.u_max is None:
            return values
        return np.clip(values, -self.u_max, self.u_max)

    def check_pulse(self, u):
        if u.values.shape != (self.slice_count, self.n_channels):
            raise ValueError(
                f"pulse shape {u.values.shape} does not match problem ({self.slice_count}, {self.n_channels})"
            )
        if not np.isclose(u.total_time, self.total_time):
            raise ValueError(f"pulse duration {u.total_time} does not match problem {self.total_time}")

    # -- evaluation -------------------------------------------------------

    def unitaries(self, u, eps):
        """Final gates ``U(T)`` for a batch of uncertainty vectors, shape ``(S, N, N)``."""
        eps = np.atleast_2d(np.asarray(eps, dtype=float))
        values = u.values if isinstance(u, ControlPulse) else np.asarray(u)
        out = []
        for start in range(0, len(eps), CHUNK):
            H = self.model.slice_hamiltonians(values, eps[start : start + CHUNK])
            w, V = np.linalg.eigh(H)
            out.append(ordered_product(slice_propagators(w, V, self.dt)))
        return np.concatenate(out) if out else np.empty((0, self.dim, self.dim), dtype=complex)

    def infidelities(self, u, eps):
        """Infidelity ``L[u, eps]`` for each row of an ``(S, d)`` batch."""
        return batch_infidelity(self.unitaries(u, eps), self.target)

    def infidelities_and_gradients(self, u, eps):
        """Infidelities ``(S,)`` and exact control gradients ``(S, K, m)``."""
        eps = np.atleast_2d(np.asarray(eps, dtype=float))
        values = u.values if isinstance(u, ControlPulse) else np.asarray(u)
        n = self.dim
        Ls, grads = [], []
        for start in range(0, len(eps), CHUNK):
            batch = eps[start : start + CHUNK]
            H = self.model.slice_hamiltonians(values, batch)
            L, Z = propagate_with_sensitivity(H, self.dt, self.target)
            C = self.model.channel_operators(batch)
            g = -2.0 / n**2 * np.einsum("skab,sjba->skj", Z, C).real
            Ls.append(L)
            grads.append(g)
        return np.concatenate(Ls), np.concatenate(grads)

    def infidelities_and_eps_gradients(self, u, eps):
        """Infidelities ``(S,)`` and gradients with respect to the uncertainty ``(S, d)``."""
        eps = np.atleast_2d(np.asarray(eps, dtype=float))
        values = u.values if isinstance(u, ControlPulse) else np.asarray(u)
        n = self.dim
        G = self.model.uncertainty_generators(values)
        Ls, grads = [], []
        for start in range(0, len(eps), CHUNK):
            H = self.model.slice_hamiltonians(values, eps[start : start + CHUNK])
            L, Z = propagate_with_sensitivity(H, self.dt, self.target)
            Ls.append(L)
            grads.append(-2.0 / n**2 * np.einsum("skab,kdba->sd", Z, G).real)
        return np.concatenate(Ls), np.concatenate(grads)


def _single(problem, u, eps):
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if eps.shape != (problem.n_uncertain,):
        raise ValueError(f"uncertainty vector has shape {eps.shape}, expected ({problem.n_uncertain},)")
    if u.values.shape[1] != problem.n_channels:
        raise ValueError(f"pulse has {u.values.shape[1]} channels, model has {problem.n_channels}")
    if not problem.domain.contains(eps):
        log.warning("uncertainty %s lies outside the domain [%s, %s]", eps, problem.domain.lower,
                    problem.domain.upper)
    return eps[None, :]


def propagate(problem, u, eps):
    """Final gate ``U(T) = U_K ... U_1`` of pulse ``u`` under uncertainty ``eps``.

    The slice width is taken from the pulse, so pulses with a different slice
    count than the problem template are allowed.
    """
    eps = _single(problem, u, eps)
    H = problem.model.slice_hamiltonians(u.values, eps)
    w, V = np.linalg.eigh(H)
    return ordered_product(slice_propagators(w, V, u.dt))[0]


def infidelity_and_gradient(problem, u, eps):
    """``L[u, eps]`` and ``dL/du[k, j]`` for a single uncertainty vector."""
    eps = _single(problem, u, eps)
    problem.check_pulse(u)
    L, g = problem.infidelities_and_gradients(u, eps)
    return float(L[0]), g[0]


# -- gates and presets ----------------------------------------------------


def cnot(control=0, target=1, n_qubits=2):
    return _controlled_x((control,), target, n_qubits)


def toffoli(controls=(0, 1), target=2, n_qubits=3):
    return _controlled_x(tuple(controls), target, n_qubits)


def _controlled_x(controls, target, n_qubits):
    """Permutation matrix flipping ``target`` when all ``controls`` are 1 (qubit 0 most significant)."""
    dim = 2**n_qubits
    U = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        bits = [(i >> (n_qubits - 1 - q)) & 1 for q in range(n_qubits)]
        if all(bits[c] for c in controls):
            bits[target] ^= 1
        j = sum(b << (n_qubits - 1 - q) for q, b in enumerate(bits))
        U[j, i] = 1.0
    return U


NAMED_GATES = {"cnot": cnot, "toffoli": toffoli}


def special_unitary_phase(U):
    """Rescale ``U`` by a global phase so that ``det U = 1``.

    Traceless Hamiltonians only generate special unitaries, so with a
    phase-sensitive infidelity this representative is the one that can
    actually be reached. Of the N admissible phases the one closest to 1 is
    taken (``CNOT -> exp(-i pi/4) CNOT``).
    """
    n = U.shape[0]
    phase = np.angle(np.linalg.det(U)) / n
    return np.exp(-1j * phase) * U


def gate_target(U, phase="special"):
    if phase == "special":
        return special_unitary_phase(U)
    if phase == "literal":
        return U
    raise ValueError(f"target phase convention must be 'special' or 'literal', got {phase!r}")


def local_operator(label, qubit, n_qubits):
    factors = ["I"] * n_qubits
    factors[qubit] = label
    return tensor_operator(factors)


def two_qubit_problem(coupling=10.0, bound=0.2, total_time=0.3, slice_count=100, frequency_scale=1.0,
                      cnot_control=0, u_max=None, target_phase="special"):
    """Two coupled qubits, ZZ drift with uncertain strength and per-qubit control-amplitude errors; target CNOT."""
    drift = [DriftTerm(frequency_scale * coupling, tensor_operator("ZZ"), uncertainty=0)]
    controls = []
    for q in range(2):
        for axis in "XY":
            controls.append(ControlTerm(len(controls), local_operator(axis, q, 2), uncertainty=q + 1))
    model = HamiltonianModel(drift, controls, n_channels=4, n_uncertain=3)
    target = gate_target(cnot(control=cnot_control, target=1 - cnot_control), target_phase)
    return GateSynthesisProblem(model, target, UncertaintyDomain.box(3, bound), slice_count, total_time,
                                u_max=u_max, name="two_qubit_cnot")


def three_qubit_problem(coupling=10.0, bound=0.2, total_time=1.0, slice_count=100, frequency_scale=1.0,
                        u_max=None, target_phase="special"):
    """Three-qubit chain with two uncertain ZZ couplings and exact local controls; target Toffoli."""
    drift = [
        DriftTerm(frequency_scale * coupling, tensor_operator("ZZI"), uncertainty=0),
        DriftTerm(frequency_scale * coupling, tensor_operator("IZZ"), uncertainty=1),
    ]
    controls = []
    for q in range(3):
        for axis in "XY":
            controls.append(ControlTerm(len(controls), local_operator(axis, q, 3)))
    model = HamiltonianModel(drift, controls, n_channels=6, n_uncertain=2)
    target = gate_target(toffoli(), target_phase)
    return GateSynthesisProblem(model, target, UncertaintyDomain.box(2, bound), slice_count, total_time,
                                u_max=u_max, name="three_qubit_toffoli")


PRESETS = {
    "two_qubit_cnot": two_qubit_problem,
    "three_qubit_toffoli": three_qubit_problem,
}


def problem_from_dict(spec):
    """Build a problem from a declarative mapping.

    Either ``{"preset": name, ...preset kwargs}`` or a custom model::

        {"n_qubits": 2,
         "drift": [{"pauli": "ZZ", "coefficient": 10.0, "uncertainty": 0}],
         "controls": [{"pauli": "XI", "channel": 0, "uncertainty": 1}, ...],
         "bounds": 0.2,            # or [[lo, hi], ...] per component
         "slice_count": 100, "total_time": 0.3,
         "target": "cnot",         # or {"real": [[...]], "imag": [[...]]}
         "target_phase": "special"}  # named gates only; "literal" keeps the permutation matrix
    """
    spec = dict(spec)
    if "preset" in spec:
        name = spec.pop("preset")
        if name not in PRESETS:
            raise ValueError(f"unknown problem preset {name!r}; choose from {sorted(PRESETS)}")
        return PRESETS[name](**spec)

    scale = float(spec.get("frequency_scale", 1.0))
    drift = [
        DriftTerm(scale * float(t["coefficient"]), tensor_operator(t["pauli"]), t.get("uncertainty"))
        for t in spec.get("drift", [])
    ]
    controls = [
        ControlTerm(int(t["channel"]), tensor_operator(t["pauli"]), t.get("uncertainty"))
        for t in spec.get("controls", [])
    ]
    labels = [t["pauli"] for t in spec.get("drift", []) + spec.get("controls", [])]
    n_qubits = int(spec.get("n_qubits", len(labels[0]) if labels else 1))
    unc = [t.uncertainty for t in drift + controls if t.uncertainty is not None]
    n_uncertain = int(spec.get("n_uncertain", max(unc, default=-1) + 1))
    model = HamiltonianModel(drift, controls, n_channels=spec.get("n_channels"), n_uncertain=n_uncertain)

    bounds = spec.get("bounds", 0.2)
    if np.isscalar(bounds):
        domain = UncertaintyDomain.box(n_uncertain, float(bounds))
    else:
        bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        domain = UncertaintyDomain(bounds[:, 0], bounds[:, 1])

    target = spec.get("target")
    if isinstance(target, str):
        key = target.lower()
        if key not in NAMED_GATES:
            raise ValueError(f"unknown target gate {target!r}; choose from {sorted(NAMED_GATES)}")
        target = gate_target(NAMED_GATES[key](n_qubits=n_qubits), spec.get("target_phase", "special"))
    elif isinstance(target, dict):
        target = np.asarray(target["real"], dtype=float) + 1j * np.asarray(target.get("imag", 0.0), dtype=float)
    elif isinstance(target, list):
        target = np.asarray(target, dtype=float)  # real matrix given as nested lists
    else:
        raise ValueError("target must be a gate name, a real matrix or a {'real': ..., 'imag': ...} matrix")

    return GateSynthesisProblem(model, target, domain, int(spec["slice_count"]), float(spec["total_time"]),
                                u_max=spec.get("u_max"), name=spec.get("name", "custom"))
