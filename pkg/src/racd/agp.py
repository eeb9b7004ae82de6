"""Adiabatic gauge potentials: exact (spectral), rotated-ansatz (dense), the
G operator, the dense trace action oracle, and the local-CD coefficient
solver.

Everything here works with the time-scaled quantities: the rotated ansatz
produces ``lambda_dot * A`` directly, and the scaled G operator is

    G_t = dH0/dt - i [H0, lambda_dot * A]        (hbar = 1)

whose squared trace is the scaled action ``S_bar = lambda_dot^2 * S``.  The
scaled form stays finite at lambda_dot = 0, where the trivial ansatz becomes
optimal and enforces the protocol's time boundary conditions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .models import Model
from .operators import (
    DENSE_MATRIX_MAX_QUBITS,
    SpinOperator,
    commutator,
    sigma_y,
    trace_product,
)


class UnsupportedAnsatzError(ValueError):
    """Rotation generator contains non-diagonal terms."""


@dataclass(frozen=True)
class RaParams:
    """Variational parameters: beta on the K term, gamma (and optionally phi)
    on the rotation-generator terms."""

    beta: float
    gamma: float
    phi: float | None = None

    def as_vector(self, names: Tuple[str, ...]) -> np.ndarray:
        vals = {"beta": self.beta, "gamma": self.gamma, "phi": self.phi}
        return np.array([vals[n] for n in names], dtype=float)

    @staticmethod
    def from_vector(x: Sequence[float], names: Tuple[str, ...]) -> "RaParams":
        d = dict(zip(names, (float(v) for v in x)))
        return RaParams(beta=d.get("beta", 0.0), gamma=d.get("gamma", 0.0), phi=d.get("phi"))

    @staticmethod
    def zero(names: Tuple[str, ...]) -> "RaParams":
        return RaParams.from_vector(np.zeros(len(names)), names)


@dataclass(frozen=True)
class GaugeContext:
    """Frozen snapshot of H0, dH0/dt and the ansatz term operators at one
    instant of the protocol."""

    h0: SpinOperator
    dh0_dt: SpinOperator
    q_ops: Tuple[Tuple[str, SpinOperator], ...]  # (param name, diagonal operator)
    k_ops: Tuple[Tuple[str, SpinOperator], ...]

    def __post_init__(self):
        if self.h0.n_qubits != self.dh0_dt.n_qubits:
            raise ValueError("H0 and dH0/dt act on different qubit counts")
        if not self.h0.is_hermitian() or not self.dh0_dt.is_hermitian():
            raise ValueError("H0 and dH0/dt must be Hermitian")

    @property
    def n_qubits(self) -> int:
        return self.h0.n_qubits

    @classmethod
    def from_model(cls, model: Model, lam: float, lam_dot: float) -> "GaugeContext":
        fields = model.ua_fields(lam, lam_dot)
        h0 = model.hamiltonian([fields[t.name][0] for t in model.terms])
        dh0 = model.hamiltonian([fields[t.name][1] for t in model.terms])
        q_ops = tuple((t.param, t.operator) for t in model.terms if t.param in ("gamma", "phi"))
        k_ops = tuple((t.param, t.operator) for t in model.terms if t.param == "beta")
        return cls(h0, dh0, q_ops, k_ops)


def exact_agp(h0: np.ndarray, dh0_dlambda: np.ndarray, gap_tol: float = 1e-10) -> np.ndarray:
    """Spectral adiabatic gauge potential.

    A = i * sum_{m != l} <m| dH0/dlambda |l> / (eps_l - eps_m) |m><l|,
    skipping pairs closer than ``gap_tol``.  Hermitian for Hermitian inputs.
    """
    if gap_tol <= 0:
        raise ValueError("gap_tol must be positive")
    if not np.allclose(h0, h0.conj().T, atol=1e-12):
        raise ValueError("H0 must be Hermitian")
    eps, vec = np.linalg.eigh(h0)
    num = vec.conj().T @ dh0_dlambda @ vec
    gaps = eps[None, :] - eps[:, None]  # eps_l - eps_m at [m, l]
    safe = np.abs(gaps) >= gap_tol
    denom = np.where(safe, gaps, 1.0)
    a_eig = np.where(safe, 1j * num / denom, 0.0)
    np.fill_diagonal(a_eig, 0.0)
    return vec @ a_eig @ vec.conj().T


def ra_agp(ctx: GaugeContext, params: RaParams) -> np.ndarray:
    """Time-scaled rotated-ansatz gauge potential, densely:

    lambda_dot * A = e^{iQ} (H0 + K) e^{-iQ} - H0

    with Q = gamma * Q_gamma [+ phi * Q_phi] and K = beta * K_beta.  Q is
    diagonal for every model here, so the conjugation is elementwise phases.
    """
    n = ctx.n_qubits
    values = {"beta": params.beta, "gamma": params.gamma, "phi": params.phi}
    q = SpinOperator.zero(n)
    for pname, op in ctx.q_ops:
        if not op.is_diagonal():
            raise UnsupportedAnsatzError(f"rotation term for {pname!r} is not diagonal")
        v = values[pname]
        if v is None:
            raise ValueError(f"model requires parameter {pname!r}")
        q = q + float(v) * op
    k = SpinOperator.zero(n)
    for pname, op in ctx.k_ops:
        k = k + float(values[pname]) * op

    h0 = ctx.h0.to_dense()
    hk = h0 + k.to_dense()
    phases = np.exp(1j * q.diag_vector().real)
    return phases[:, None] * hk * np.conj(phases)[None, :] - h0


def g_operator(ctx: GaugeContext, scaled_agp: np.ndarray) -> np.ndarray:
    """G_t = dH0/dt - i [H0, lambda_dot * A]; Hermitian."""
    h0 = ctx.h0.to_dense()
    if scaled_agp.shape != h0.shape:
        raise ValueError(f"shape mismatch: {scaled_agp.shape} vs {h0.shape}")
    return ctx.dh0_dt.to_dense() - 1j * (h0 @ scaled_agp - scaled_agp @ h0)


def action_oracle(ctx: GaugeContext, params: RaParams) -> float:
    """Scaled action Tr(G_t^2) >= 0, computed densely (exact reference)."""
    if ctx.n_qubits > DENSE_MATRIX_MAX_QUBITS:
        raise ValueError(f"{ctx.n_qubits} qubits exceeds the dense oracle cap")
    g = g_operator(ctx, ra_agp(ctx, params))
    return float(np.vdot(g, g).real)  # Tr(G^2) = ||G||_F^2 for Hermitian G


def oracle_objective(model: Model, lam: float, lam_dot: float):
    """Scaled action as a function of the stacked parameter vector."""
    ctx = GaugeContext.from_model(model, lam, lam_dot)
    names = model.param_names

    def objective(x: np.ndarray) -> float:
        return action_oracle(ctx, RaParams.from_vector(x, names))

    return objective


def _assert_real_symmetric(op: SpinOperator) -> None:
    """Time-reversal symmetry check: every word real-weighted with even Y
    count (then the dense matrix is real symmetric)."""
    from .operators import _parity  # even/odd Y-count via x&z mask

    for (x, z), w in op:
        y_odd = _parity(x & z)
        if y_odd or abs(w.imag) > 1e-12:
            raise ValueError("operator is not real-symmetric in the computational basis")


def local_cd_coeffs(h0: SpinOperator, dh0: SpinOperator) -> np.ndarray:
    """Per-site coefficients of the local CD ansatz A = sum_j alpha_j sy_j.

    The action is quadratic in alpha, so the minimizer solves the normal
    system  sum_k Tr(D_j D_k) alpha_k = -Tr(D_j dH0)  with
    D_j = -i [H0, sy_j], assembled from symbolic trace products.  Passing the
    lambda-derivative of H0 yields alpha(lambda); passing dH0/dt yields the
    time-scaled coefficients lambda_dot * alpha.  Rank deficiency falls back
    to the least-norm solution.
    """
    _assert_real_symmetric(h0)
    n = h0.n_qubits
    d_ops = [(-1j) * commutator(h0, sigma_y(n, j)) for j in range(n)]
    m = np.empty((n, n))
    r = np.empty(n)
    for j in range(n):
        r[j] = -trace_product(d_ops[j], dh0).real
        for k in range(j, n):
            m[j, k] = m[k, j] = trace_product(d_ops[j], d_ops[k]).real
    alpha, residual, rank, sv = np.linalg.lstsq(m, r, rcond=None)
    if not np.allclose(m @ alpha, r, atol=1e-8 * max(1.0, float(np.linalg.norm(r)))):
        cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
        raise ArithmeticError(f"local-CD normal system inconsistent (cond={cond:.3e})")
    return alpha


class LocalCdSolver:
    """Precomputed-tensor version of :func:`local_cd_coeffs` for one model.

    D_j(fields) = sum_t field_t * D_{j,t} with D_{j,t} = -i [op_t, sy_j], so
    the normal matrix and right-hand side are bilinear in the UA fields.  The
    Gram tensors are assembled once; each time point is then an einsum plus
    an N x N solve.
    """

    def __init__(self, model: Model):
        _assert_real_symmetric(model.h0(0.0))
        n = model.n_qubits
        n_terms = len(model.terms)
        d = [[(-1j) * commutator(t.operator, sigma_y(n, j)) for t in model.terms] for j in range(n)]
        gram = np.zeros((n_terms, n_terms, n, n))
        rhs = np.zeros((n_terms, n_terms, n))
        for j in range(n):
            for t in range(n_terms):
                for tp in range(n_terms):
                    rhs[tp, t, j] = trace_product(model.terms[tp].operator, d[j][t]).real
            for k in range(j, n):
                for t in range(n_terms):
                    for tp in range(n_terms):
                        val = trace_product(d[j][t], d[k][tp]).real
                        gram[t, tp, j, k] = val
                        gram[tp, t, k, j] = val
        self.model = model
        self._gram = gram
        self._rhs = rhs

    def solve(self, lam: float) -> np.ndarray:
        """alpha(lambda): minimizer of the lambda-form action."""
        return self.solve_batch(np.array([lam]))[0]

    def solve_batch(self, lams: np.ndarray) -> np.ndarray:
        """alpha(lambda) for a whole grid at once (rows = grid points)."""
        lams = np.asarray(lams, dtype=float)
        f = np.array([[t.ua_value(l) for t in self.model.terms] for l in lams])
        fp = np.array([t.field1 for t in self.model.terms])
        m = np.einsum("tp,tq,pqjk->tjk", f, f, self._gram)
        r = -np.einsum("p,tq,pqj->tj", fp, f, self._rhs)
        try:
            return np.linalg.solve(m, r[..., None])[..., 0]
        except np.linalg.LinAlgError:
            return np.stack([np.linalg.lstsq(mi, ri, rcond=None)[0] for mi, ri in zip(m, r)])

    def solve_scaled(self, lam: float, lam_dot: float) -> np.ndarray:
        """Time-scaled sigma-y field coefficients lambda_dot * alpha(lambda)."""
        return lam_dot * self.solve(lam)

    def solve_scaled_batch(self, lams: np.ndarray, lam_dots: np.ndarray) -> np.ndarray:
        return np.asarray(lam_dots)[:, None] * self.solve_batch(lams)
