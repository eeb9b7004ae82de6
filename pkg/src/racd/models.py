"""Benchmark Hamiltonian families, UA schedules, the smooth ramp and
random-instance generation.

Every model is a weighted sum of fixed term operators with affine-in-lambda
unassisted (UA) schedule functions.  The rotated-ansatz parametrization is
anchored to the *signed* term operators exactly as stored here: rotation
generator Q = gamma * (gamma-term op) [+ phi * (phi-term op)], auxiliary
potential K = beta * (beta-term op), so every RA control field is always
"UA field + parameter" (K terms) or "UA field + parameter time-derivative"
(Q terms), with no per-model sign exceptions.

Instances are drawn with numpy's PCG64 generator; identical (kind, size,
seed) triples reproduce identical coupling arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .operators import SpinOperator, sigma_x, sigma_z, z_word

PRNG_NAME = "numpy-PCG64"
LHZ_FINAL_CONSTRAINT_STRENGTH = 3.0

FieldSet = Dict[str, Tuple[float, float]]  # name -> (value, time derivative)


def ramp_eval(t: float, tau: float) -> Tuple[float, float]:
    """Smooth ramp lambda(t) = sin^2[(pi/2) sin^2(pi t / 2 tau)] and its
    analytic time derivative.  Both lambda' and lambda'' vanish at t = 0, tau.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    t = float(t)
    if t < -1e-9 * tau or t > tau * (1 + 1e-9):
        raise ValueError(f"t={t} outside [0, {tau}]")
    t = min(max(t, 0.0), tau)
    v = np.pi * t / (2.0 * tau)
    u = 0.5 * np.pi * np.sin(v) ** 2
    lam = np.sin(u) ** 2
    lam_dot = (np.pi**2 / (4.0 * tau)) * np.sin(2.0 * u) * np.sin(2.0 * v)
    return float(lam), float(lam_dot)


@dataclass(frozen=True)
class Ramp:
    """Total-duration wrapper around :func:`ramp_eval` (hbar = 1)."""

    tau: float

    def __call__(self, t: float) -> Tuple[float, float]:
        return ramp_eval(t, self.tau)

    def table(self, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        lams = np.empty(len(times))
        dots = np.empty(len(times))
        for i, t in enumerate(times):
            lams[i], dots[i] = ramp_eval(t, self.tau)
        return lams, dots


@dataclass(frozen=True)
class ModelTerm:
    """One Hamiltonian term: operator, affine UA schedule, ansatz role.

    UA field value at lambda is ``field0 + field1 * lambda``; its time
    derivative is ``field1 * lambda_dot`` exactly.  ``param`` tags which
    variational parameter rides on this term: 'gamma'/'phi' generate the
    rotation Q (term operator must be diagonal), 'beta' builds K.
    """

    name: str
    operator: SpinOperator
    field0: float
    field1: float
    param: str | None

    def ua_value(self, lam: float) -> float:
        return self.field0 + self.field1 * lam

    def ua_dot(self, lam_dot: float) -> float:
        return self.field1 * lam_dot


PARAM_ORDER = ("beta", "gamma", "phi")


class Model:
    """Base class: a parametric Hamiltonian H0 = sum_t field_t(lambda) * op_t."""

    kind: str = ""

    def __init__(self, n_qubits: int, terms: Sequence[ModelTerm], seed: int | None = None):
        self.n_qubits = n_qubits
        self.terms = tuple(terms)
        self.seed = seed
        for term in self.terms:
            if term.param in ("gamma", "phi") and not term.operator.is_diagonal():
                raise ValueError(f"rotation-generator term {term.name!r} must be diagonal")
            if not term.operator.is_hermitian():
                raise ValueError(f"term {term.name!r} is not Hermitian")

    @property
    def field_names(self) -> Tuple[str, ...]:
        return tuple(t.name for t in self.terms)

    @property
    def param_names(self) -> Tuple[str, ...]:
        present = {t.param for t in self.terms if t.param}
        return tuple(p for p in PARAM_ORDER if p in present)

    #: Exact periods of the scaled action in each rotation parameter
    #: (physics-equivalent minima); used to undo whole-period hops of the
    #: warm-started optimizer.  Empty for coupling-weighted generators.
    param_periods: Dict[str, float] = {}

    def term_by_param(self, param: str) -> ModelTerm:
        for t in self.terms:
            if t.param == param:
                return t
        raise KeyError(param)

    def hamiltonian(self, fields: Sequence[float]) -> SpinOperator:
        return build_hamiltonian(self, fields)

    def ua_fields(self, lam: float, lam_dot: float) -> FieldSet:
        """UA field values and time derivatives (chain rule through lambda_dot)."""
        if not 0.0 <= lam <= 1.0 + 1e-12:
            raise ValueError(f"lambda={lam} outside [0, 1]")
        return {t.name: (t.ua_value(lam), t.ua_dot(lam_dot)) for t in self.terms}

    def h0(self, lam: float) -> SpinOperator:
        return self.hamiltonian([t.ua_value(lam) for t in self.terms])

    def dh0_dt(self, lam: float, lam_dot: float) -> SpinOperator:
        return self.hamiltonian([t.ua_dot(lam_dot) for t in self.terms])

    def dh0_dlambda(self, lam: float) -> SpinOperator:
        return self.hamiltonian([t.field1 for t in self.terms])

    # -- serialization -------------------------------------------------------
    def to_json(self) -> dict:
        raise NotImplementedError

    def to_json_str(self) -> str:
        return json.dumps(self.to_json())

    @staticmethod
    def from_json(doc: dict) -> "Model":
        kind = doc["kind"]
        if kind == "two-spin":
            return TwoSpinModel()
        if kind == "chain":
            return ChainModel(int(doc["N"]))
        if kind == "qubo":
            return QuboModel(np.asarray(doc["couplings"], dtype=float), seed=doc.get("seed"))
        if kind == "lhz":
            constraints = [tuple(c) for c in doc["constraints"]]
            return LhzModel(
                int(doc["n"]),
                np.asarray(doc["couplings"], dtype=float),
                constraints=constraints,
                seed=doc.get("seed"),
            )
        raise ValueError(f"unknown model kind {kind!r}")


def build_hamiltonian(model: Model, fields: Sequence[float]) -> SpinOperator:
    """sum_i field_i * H_term_i; Hermitian by construction."""
    if len(fields) != len(model.terms):
        raise ValueError(f"expected {len(model.terms)} field values, got {len(fields)}")
    acc = SpinOperator.zero(model.n_qubits)
    for value, term in zip(fields, model.terms):
        acc = acc + float(value) * term.operator
    return acc


class TwoSpinModel(Model):
    """Two-spin Bell-state preparation problem.

    H_a = -(sz_1 + sz_2) with UA field h0 = 5(1-lambda), carries gamma;
    H_b = sx sx + sz sz with UA field J0 = -1, carries beta.
    """

    kind = "two-spin"
    param_periods = {"gamma": np.pi / 2.0}

    def __init__(self):
        n = 2
        h_a = -1.0 * sigma_z(n, 0) - 1.0 * sigma_z(n, 1)
        h_b = SpinOperator(n, {(0b11, 0): 1.0, (0, 0b11): 1.0})  # XX + ZZ
        super().__init__(
            n,
            [
                ModelTerm("h", h_a, 5.0, -5.0, "gamma"),
                ModelTerm("J", h_b, -1.0, 0.0, "beta"),
            ],
        )

    def to_json(self) -> dict:
        return {"kind": self.kind}


class ChainModel(Model):
    """Periodic transverse+longitudinal field Ising chain.

    H_a = -sum sz_j sz_{j+1} (J0 = lambda, gamma), H_b = -sum sx_j
    (h0 = 1 - lambda/2, beta), H_c = -sum sz_j (b0 = lambda/5, phi).
    """

    kind = "chain"
    param_periods = {"gamma": np.pi / 2.0, "phi": np.pi}

    def __init__(self, n_sites: int):
        if n_sites < 3:
            raise ValueError("periodic chain needs at least 3 sites")
        n = n_sites
        h_a = SpinOperator.zero(n)
        h_b = SpinOperator.zero(n)
        h_c = SpinOperator.zero(n)
        for j in range(n):
            h_a = h_a - z_word(n, (j, (j + 1) % n))
            h_b = h_b - sigma_x(n, j)
            h_c = h_c - sigma_z(n, j)
        super().__init__(
            n,
            [
                ModelTerm("J", h_a, 0.0, 1.0, "gamma"),
                ModelTerm("h", h_b, 1.0, -0.5, "beta"),
                ModelTerm("b", h_c, 0.0, 0.2, "phi"),
            ],
        )

    def to_json(self) -> dict:
        return {"kind": self.kind, "N": self.n_qubits}


class QuboModel(Model):
    """Transverse-field annealer for a QUBO instance.

    ``couplings`` is the symmetric (N+1)x(N+1) matrix J with zero diagonal;
    row/column 0 holds the local fields J_j0.  H_p = -1/2 sum J_jk sz_j sz_k
    - sum J_j0 sz_j (A0 = lambda, gamma); H_x = -sum sx_j (B0 = 1 - lambda,
    beta).
    """

    kind = "qubo"

    def __init__(self, couplings: np.ndarray, seed: int | None = None):
        J = np.asarray(couplings, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1] or J.shape[0] < 3:
            raise ValueError("couplings must be a square (N+1)x(N+1) matrix, N >= 2")
        if not np.allclose(J, J.T, atol=1e-12):
            raise ValueError("couplings must be symmetric")
        if not np.allclose(np.diag(J), 0.0, atol=1e-12):
            raise ValueError("couplings must have zero diagonal")
        n = J.shape[0] - 1
        p_terms = {}
        for j in range(1, n + 1):
            if J[j, 0]:
                p_terms[(0, 1 << (j - 1))] = -J[j, 0]
            for k in range(j + 1, n + 1):
                if J[j, k]:
                    p_terms[(0, (1 << (j - 1)) | (1 << (k - 1)))] = -J[j, k]
        h_p = SpinOperator(n, p_terms)
        h_x = SpinOperator(n, {(1 << j, 0): -1.0 for j in range(n)})
        self.couplings = J
        super().__init__(
            n,
            [
                ModelTerm("A", h_p, 0.0, 1.0, "gamma"),
                ModelTerm("B", h_x, 1.0, -1.0, "beta"),
            ],
            seed=seed,
        )

    def to_json(self) -> dict:
        return {"kind": self.kind, "N": self.n_qubits, "couplings": self.couplings.tolist(), "seed": self.seed}


class LhzModel(Model):
    """LHZ / parity annealing architecture for n logical spins.

    N = n(n-1)/2 physical qubits carry random local fields J_k; the
    L = (n-1)(n-2)/2 plaquette constraints are sigma-z products over 3 or 4
    qubits.  H_p = -sum J_k sz_k (A0 = lambda, gamma), H_x = -sum sx_k
    (B0 = 1 - lambda, beta), H_c = -sum_l prod_{q in l} sz_q
    (C0 = C_f * lambda with C_f = 3, phi).
    """

    kind = "lhz"
    param_periods = {"phi": np.pi}

    def __init__(
        self,
        n_logical: int,
        couplings: np.ndarray,
        constraints: Sequence[Tuple[int, ...]] | None = None,
        seed: int | None = None,
    ):
        if n_logical < 3:
            raise ValueError("LHZ needs at least 3 logical spins")
        n = n_logical * (n_logical - 1) // 2
        J = np.asarray(couplings, dtype=float)
        if J.shape != (n,):
            raise ValueError(f"expected {n} couplings for n_logical={n_logical}, got {J.shape}")
        if constraints is None:
            constraints = lhz_default_constraints(n_logical)
        constraints = [tuple(sorted(int(q) for q in c)) for c in constraints]
        for c in constraints:
            if not all(0 <= q < n for q in c):
                raise ValueError(f"constraint {c} has out-of-range qubit index")
            if len(c) not in (3, 4) or len(set(c)) != len(c):
                raise ValueError(f"constraint {c} must be 3 or 4 distinct qubits")
        h_p = SpinOperator.zero(n)
        for k in range(n):
            if J[k]:
                h_p = h_p - J[k] * sigma_z(n, k)
        h_x = SpinOperator.zero(n)
        for k in range(n):
            h_x = h_x - sigma_x(n, k)
        h_c = SpinOperator.zero(n)
        for c in constraints:
            h_c = h_c - z_word(n, c)
        self.n_logical = n_logical
        self.couplings = J
        self.constraints = list(constraints)
        super().__init__(
            n,
            [
                ModelTerm("A", h_p, 0.0, 1.0, "gamma"),
                ModelTerm("B", h_x, 1.0, -1.0, "beta"),
                ModelTerm("C", h_c, 0.0, LHZ_FINAL_CONSTRAINT_STRENGTH, "phi"),
            ],
            seed=seed,
        )

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n_logical,
            "couplings": self.couplings.tolist(),
            "constraints": [list(c) for c in self.constraints],
            "seed": self.seed,
        }


def _pair_index(i: int, j: int, n: int) -> int:
    """Linear index of logical pair (i, j), 1 <= i < j <= n, lexicographic."""
    return (i - 1) * n - i * (i + 1) // 2 + j - 1


def lhz_default_constraints(n: int) -> List[Tuple[int, ...]]:
    """Plaquette list of the standard triangular parity layout.

    Boundary triangles {(i,i+1),(i,i+2),(i+1,i+2)} are 3-body; the bulk
    squares {(i,j),(i,j-1),(i+1,j),(i+1,j-1)} (j >= i+3) are 4-body.  Each
    subset multiplies to an even power of every logical spin, and the list
    has exactly (n-1)(n-2)/2 entries.
    """
    if n < 3:
        raise ValueError("LHZ layout needs n >= 3")
    constraints: List[Tuple[int, ...]] = []
    for i in range(1, n - 1):
        constraints.append(
            tuple(sorted((_pair_index(i, i + 1, n), _pair_index(i, i + 2, n), _pair_index(i + 1, i + 2, n))))
        )
    for i in range(1, n - 2):
        for j in range(i + 3, n + 1):
            constraints.append(
                tuple(
                    sorted(
                        (
                            _pair_index(i, j, n),
                            _pair_index(i, j - 1, n),
                            _pair_index(i + 1, j, n),
                            _pair_index(i + 1, j - 1, n),
                        )
                    )
                )
            )
    assert len(constraints) == (n - 1) * (n - 2) // 2
    return constraints


def random_instance(kind: str, size: int, seed: int) -> Model:
    """Deterministic random instance; couplings are i.i.d. uniform on [-1, 1].

    The stream is numpy's PCG64 seeded with ``seed``; identical (kind, size,
    seed) gives bitwise-identical coupling arrays.
    """
    if size < 2:
        raise ValueError("size must be >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    if kind == "two-spin":
        return TwoSpinModel()
    if kind == "chain":
        return ChainModel(size)
    if kind == "qubo":
        m = size + 1
        J = np.zeros((m, m))
        for j in range(m):
            for k in range(j + 1, m):
                J[j, k] = J[k, j] = rng.uniform(-1.0, 1.0)
        return QuboModel(J, seed=seed)
    if kind == "lhz":
        n_phys = size * (size - 1) // 2
        J = rng.uniform(-1.0, 1.0, size=n_phys)
        return LhzModel(size, J, seed=seed)
    raise ValueError(f"unknown model kind {kind!r}")
