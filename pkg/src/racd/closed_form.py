"""Polynomial-cost evaluators of the time-scaled action for each benchmark
family, plus the two-level analytic optimum and LHZ layout combinatorics.

All evaluators use the dotted (time-scaled) action and one fixed ansatz
convention: Q = gamma * H_gamma-term [+ phi * H_phi-term], K = beta *
H_beta-term, against the signed term operators stored on the model.  Where
the derivation admits more than one printed grouping, the dense trace oracle
(:func:`racd.agp.action_oracle`) is the arbiter; every function here is
required to agree with it to relative 1e-8 at its model's smallest valid
size.

Normalization conventions (documented per function): the two-level action is
the raw 4-dimensional trace; the chain action is per-site, S / (N 2^N); the
QUBO and LHZ actions are S / 2^N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .models import ChainModel
from .operators import SpinOperator, commutator, sigma_x, sigma_y, trace_product, z_word

FieldDerivs = Dict[str, Tuple[float, float]]  # term name -> (value, time derivative)


class UndefinedAngleError(ValueError):
    """Two-level optimum is undefined when J0 and phi0 both vanish."""


# ---------------------------------------------------------------------------
# Two-level system
# ---------------------------------------------------------------------------

def _two_level_alphas(J0: float, beta: float, gamma: float) -> Tuple[float, float]:
    # lambda_dot*A = beta*o + alpha_xx (XX - YY) + alpha_xy (XY + YX)
    r = beta + J0
    axx = 0.5 * (r * math.cos(4.0 * gamma) - J0)
    axy = 0.5 * r * math.sin(4.0 * gamma)
    return axx, axy


def action_two_level(fd: FieldDerivs, beta: float, gamma: float) -> float:
    """Scaled action of the two-spin system (raw 4-dim trace).

    S_bar = 6 dJ0^2 + 2 (dJ0 + 8 h0 a_xy)^2 + 2^7 h0^2 a_xx^2
            + 2^3 (2 J0 a_xy - dh0)^2
    """
    h0, dh0 = fd["h"]
    J0, dJ0 = fd["J"]
    axx, axy = _two_level_alphas(J0, beta, gamma)
    return (
        6.0 * dJ0**2
        + 2.0 * (dJ0 + 8.0 * h0 * axy) ** 2
        + 128.0 * h0**2 * axx**2
        + 8.0 * (2.0 * J0 * axy - dh0) ** 2
    )


def two_level_phi0(fd: FieldDerivs) -> float:
    """phi0 = (dJ0 h0 - J0 dh0) / (4 h0^2 + J0^2)."""
    h0, dh0 = fd["h"]
    J0, dJ0 = fd["J"]
    return (dJ0 * h0 - J0 * dh0) / (4.0 * h0**2 + J0**2)


def two_level_optimum(fd: FieldDerivs) -> Tuple[float, float]:
    """Analytic minimizer (beta, gamma) of the two-level scaled action.

    The optimality system fixes (beta + J0) cos 4g = J0 and
    (beta + J0) sin 4g = -phi0, which has two equal-action solution
    branches differing by the sign of beta + J0.  We return the branch
    continuously connected to (beta, gamma) = (0, 0) at phi0 = 0:

        beta = sign(J0) sqrt(J0^2 + phi0^2) - J0,
        4 gamma = atan2(-sign(J0) phi0, |J0|),

    which is the branch the warm-started sequential optimizer tracks and the
    only one whose parameters vanish at the protocol endpoints (where
    lambda_dot = 0 forces phi0 = 0).  The other branch, beta + J0 > 0, is an
    equally deep minimum but jumps discontinuously at the endpoints whenever
    J0 < 0.
    """
    J0, _ = fd["J"]
    phi0 = two_level_phi0(fd)
    if J0 == 0.0 and phi0 == 0.0:
        raise UndefinedAngleError("optimum angle undefined at J0 = phi0 = 0")
    s = 1.0 if J0 >= 0.0 else -1.0
    beta = s * math.hypot(J0, phi0) - J0
    gamma = 0.25 * math.atan2(-s * phi0, abs(J0))
    return beta, gamma


# ---------------------------------------------------------------------------
# Ising chain
# ---------------------------------------------------------------------------

_CHAIN_REFERENCE_SIZE = 4
_CHAIN_ALPHA_NAMES = ("x", "y", "xz", "yz", "zxz", "zyz")


def chain_basis_sums(n: int) -> List[SpinOperator]:
    """Translation-symmetric sums spanning the chain's rotated gauge
    potential: X, Y, XZ+ZX, YZ+ZY, ZXZ, ZYZ (periodic)."""
    if n < 4:
        raise ValueError("chain expansion needs N >= 4")
    x = SpinOperator.zero(n)
    y = SpinOperator.zero(n)
    xz = SpinOperator.zero(n)
    yz = SpinOperator.zero(n)
    zxz = SpinOperator.zero(n)
    zyz = SpinOperator.zero(n)
    for j in range(n):
        jp, jm = (j + 1) % n, (j - 1) % n
        x = x + sigma_x(n, j)
        y = y + sigma_y(n, j)
        xz = xz + z_word(n, (j,)) @ sigma_x(n, jp) + sigma_x(n, j) @ z_word(n, (jp,))
        yz = yz + z_word(n, (j,)) @ sigma_y(n, jp) + sigma_y(n, j) @ z_word(n, (jp,))
        zxz = zxz + z_word(n, (jm,)) @ sigma_x(n, j) @ z_word(n, (jp,))
        zyz = zyz + z_word(n, (jm,)) @ sigma_y(n, j) @ z_word(n, (jp,))
    return [x, y, xz, yz, zxz, zyz]


def chain_alpha_coefficients(fd: FieldDerivs, beta: float, gamma: float, phi: float) -> Dict[str, float]:
    """Coefficients of the chain's scaled gauge potential on the six basis
    sums, from conjugating the transverse term by Q = gamma H_J + phi H_b."""
    h0, _ = fd["h"]
    bt = h0 + beta
    c4g, s4g = math.cos(4.0 * gamma), math.sin(4.0 * gamma)
    c2p, s2p = math.cos(2.0 * phi), math.sin(2.0 * phi)
    return {
        "x": h0 - 0.5 * bt * (1.0 + c4g) * c2p,
        "y": -0.5 * bt * (1.0 + c4g) * s2p,
        "xz": 0.5 * bt * s4g * s2p,
        "yz": -0.5 * bt * s4g * c2p,
        "zxz": 0.5 * bt * (1.0 - c4g) * c2p,
        "zyz": 0.5 * bt * (1.0 - c4g) * s2p,
    }


@lru_cache(maxsize=None)
def _chain_gram(n: int = _CHAIN_REFERENCE_SIZE) -> np.ndarray:
    """Per-site Gram matrix of the operators entering G_t for the chain.

    G_t is linear in (dJ0, dh0, db0) and in the six alpha coefficients times
    the three fields, so S_bar / (N 2^N) is an exact quadratic form.  The
    21 x 21 matrix of normalized trace products is computed symbolically once
    per size; entries are N-independent for N >= 4.
    """
    model = ChainModel(n)
    term_ops = [t.operator for t in model.terms]  # J, h, b
    basis = chain_basis_sums(n)
    ops = list(term_ops)
    for b in basis:
        for t in term_ops:
            ops.append((-1j) * commutator(t, b))
    dim = len(ops)
    gram = np.zeros((dim, dim))
    norm = n * (1 << n)
    for p in range(dim):
        for q in range(p, dim):
            val = trace_product(ops[p], ops[q]).real / norm
            gram[p, q] = gram[q, p] = val
    return gram


def action_chain(fd: FieldDerivs, beta: float, gamma: float, phi: float) -> float:
    """Per-site scaled action of the chain, S_bar / (N 2^N); N-independent
    for N >= 4 by translation symmetry and locality."""
    J0, dJ0 = fd["J"]
    h0, dh0 = fd["h"]
    b0, db0 = fd["b"]
    alphas = chain_alpha_coefficients(fd, beta, gamma, phi)
    fields = (J0, h0, b0)
    coeff = np.empty(3 + 18)
    coeff[0:3] = (dJ0, dh0, db0)
    i = 3
    for name in _CHAIN_ALPHA_NAMES:
        for f in fields:
            coeff[i] = alphas[name] * f
            i += 1
    gram = _chain_gram()
    return float(coeff @ gram @ coeff)


# ---------------------------------------------------------------------------
# QUBO annealer
# ---------------------------------------------------------------------------

def _hole_sums(cos_rows: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row full products and one/two-hole weighted sums.

    Returns (f, e1, cross) with
      f_j     = prod_m C[j,m]
      e1_j    = sum_k  W[j,k]           * prod_{m != k}     C[j,m]
      cross_j = sum_{k != l} W[j,k] W[j,l] * prod_{m not in {k,l}} C[j,m]
    Division-free handling of exact cosine zeros (0, 1 or 2 zeros per row).
    """
    z = cos_rows == 0.0
    zc = z.sum(axis=1)
    chat = np.where(z, 1.0, cos_rows)
    p = chat.prod(axis=1)  # product over nonzero entries
    q = np.where(z, 0.0, weights / chat)
    sq = q.sum(axis=1)
    sq2 = (q**2).sum(axis=1)
    wz = np.where(z, weights, 1.0).prod(axis=1)  # product of W over zero positions

    f = np.where(zc == 0, p, 0.0)
    e1 = np.where(zc == 0, p * sq, np.where(zc == 1, wz * p, 0.0))
    cross = np.where(
        zc == 0,
        p * (sq**2 - sq2),
        np.where(zc == 1, 2.0 * wz * p * sq, np.where(zc == 2, 2.0 * wz * p, 0.0)),
    )
    return f, e1, cross


def action_qubo(J: np.ndarray, fd: FieldDerivs, beta: float, gamma: float) -> float:
    """Scaled QUBO action, normalized as S_bar / 2^N; cost O(N^3).

    ``J`` is the symmetric (N+1)x(N+1) coupling matrix with zero diagonal and
    the local fields in row/column 0.  All trigonometric products are
    evaluated in hole-product form, so exact cosine zeros are safe.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError("J must be square")
    if not np.allclose(J, J.T, atol=1e-12):
        raise ValueError("J must be symmetric")
    n = J.shape[0] - 1
    A0, dA0 = fd["A"]
    B0, dB0 = fd["B"]
    bt = B0 + beta

    theta = 2.0 * gamma * J
    cos_rows = np.cos(theta)[1:, :]  # rows j = 1..N, columns m = 0..N
    sin_rows = np.sin(theta)[1:, :]
    w = J[1:, :] * sin_rows
    f1, e1, cross = _hole_sums(cos_rows, w)
    f2, _, _ = _hole_sums(np.cos(2.0 * theta)[1:, :], w)

    t_row = (J[1:, :] ** 2).sum(axis=1)
    e2 = t_row * f1 - cross  # Re tau(R_j^2 e^{2 i gamma R_j})

    # pair tensors over m excluding j and k (no divisions)
    jp = J[:, None, :] + J[None, :, :]
    jm = J[:, None, :] - J[None, :, :]
    mp = np.cos(2.0 * gamma * jp)
    mm = np.cos(2.0 * gamma * jm)
    idx = np.arange(n + 1)
    mp[idx, :, idx] = 1.0
    mp[:, idx, idx] = 1.0
    mm[idx, :, idx] = 1.0
    mm[:, idx, idx] = 1.0
    pp = mp.prod(axis=2)
    pm = mm.prod(axis=2)
    sin_sq = np.sin(theta) ** 2
    pair_sum = float((sin_sq * (pp + pm))[1:, 1:].sum())
    sin2_sum = float(sin_sq[1:, 1:].sum())

    tau_hp2 = 0.5 * float((J[1:, 1:] ** 2).sum()) + float((J[1:, 0] ** 2).sum())
    s = dA0**2 * tau_hp2 + n * dB0**2
    s += 4.0 * A0**2 * (B0**2 + bt**2) * float(t_row.sum())
    s -= 8.0 * A0**2 * B0 * bt * float(e2.sum())
    s -= 4.0 * bt * (B0 * dA0 - dB0 * A0) * float(e1.sum())
    s += 2.0 * B0**2 * bt**2 * float((1.0 - f2).sum())
    s += 4.0 * B0**2 * bt**2 * sin2_sum
    s += 4.0 * B0**2 * bt**2 * pair_sum
    return float(s)


# ---------------------------------------------------------------------------
# LHZ annealer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LhzCounts:
    """Architecture-only constraint combinatorics.

    L is the total constraint count; L_mu[m] counts constraints containing
    qubit m; L_mu_nu[m, n] counts constraints containing both; L_mu_not_nu
    is L_mu[:, None] - L_mu_nu; pairs lists the (mu < nu) pairs sharing at
    least one constraint.
    """

    L: int
    L_mu: np.ndarray
    L_mu_nu: np.ndarray
    L_mu_not_nu: np.ndarray
    pairs: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        if self.L_mu_nu.shape != (len(self.L_mu), len(self.L_mu)):
            raise ValueError("inconsistent counts: L_mu_nu shape")
        if not np.array_equal(self.L_mu_nu, self.L_mu_nu.T):
            raise ValueError("inconsistent counts: L_mu_nu must be symmetric")
        if not np.array_equal(self.L_mu_not_nu, self.L_mu[:, None] - self.L_mu_nu):
            raise ValueError("inconsistent counts: L_mu_not_nu identity violated")
        if np.any(self.L_mu < 0) or np.any(self.L_mu_nu < 0) or np.any(self.L_mu_not_nu < 0):
            raise ValueError("inconsistent counts: negative entry")


def lhz_counts(constraints: Sequence[Sequence[int]], n_qubits: int) -> LhzCounts:
    """Exact combinatorial counts for an explicit constraint list."""
    sets = []
    for c in constraints:
        cs = frozenset(int(q) for q in c)
        if any(not 0 <= q < n_qubits for q in cs):
            raise ValueError(f"constraint {sorted(cs)} has out-of-range index")
        sets.append(cs)
    l_mu = np.zeros(n_qubits, dtype=int)
    l_mu_nu = np.zeros((n_qubits, n_qubits), dtype=int)
    for cs in sets:
        for mu in cs:
            l_mu[mu] += 1
            for nu in cs:
                if nu != mu:
                    l_mu_nu[mu, nu] += 1
    pairs = tuple(
        (mu, nu) for mu in range(n_qubits) for nu in range(mu + 1, n_qubits) if l_mu_nu[mu, nu] > 0
    )
    return LhzCounts(
        L=len(sets),
        L_mu=l_mu,
        L_mu_nu=l_mu_nu,
        L_mu_not_nu=l_mu[:, None] - l_mu_nu,
        pairs=pairs,
    )


def action_lhz(
    counts: LhzCounts,
    J: np.ndarray,
    fd: FieldDerivs,
    beta: float,
    gamma: float,
    phi: float,
) -> float:
    """Scaled LHZ action, normalized as S_bar / 2^N; cost O(N + #pairs).

    Valid for constraint lists whose plaquette words are independent (no
    nonempty subset multiplies to identity), which holds for the standard
    triangular layout; the dense oracle test is the arbiter.
    """
    J = np.asarray(J, dtype=float)
    n = len(J)
    if len(counts.L_mu) != n:
        raise ValueError("inconsistent counts: size mismatch with couplings")
    A0, dA0 = fd["A"]
    B0, dB0 = fd["B"]
    C0, dC0 = fd["C"]
    bt = B0 + beta

    c2, s2 = math.cos(2.0 * phi), math.sin(2.0 * phi)
    c4 = math.cos(4.0 * phi)
    cg = np.cos(2.0 * gamma * J)
    sg = np.sin(2.0 * gamma * J)
    cg4 = np.cos(4.0 * gamma * J)
    lm = counts.L_mu.astype(float)
    c2_l = c2 ** counts.L_mu
    c2_lm1 = c2 ** np.maximum(counts.L_mu - 1, 0)
    c2_lm2 = c2 ** np.maximum(counts.L_mu - 2, 0)
    c4_l = c4 ** counts.L_mu

    s = dA0**2 * float((J**2).sum()) + n * dB0**2 + counts.L * dC0**2
    s += 4.0 * (B0**2 + bt**2) * float((A0**2 * J**2 + C0**2 * lm).sum())
    bracket = (
        A0**2 * J**2 * cg * c2_l
        - 2.0 * A0 * C0 * J * lm * sg * s2 * c2_lm1
        + C0**2 * cg * (lm * c2_l - lm * (lm - 1.0) * s2**2 * c2_lm2)
    )
    s -= 8.0 * B0 * bt * float(bracket.sum())
    s -= 4.0 * bt * float(
        ((B0 * dA0 - dB0 * A0) * J * sg * c2_l + (B0 * dC0 - dB0 * C0) * lm * cg * s2 * c2_lm1).sum()
    )
    s += 2.0 * B0**2 * bt**2 * float((1.0 - cg4 * c4_l).sum())
    for mu, nu in counts.pairs:
        lmn = int(counts.L_mu_nu[mu, nu])
        expo = int(counts.L_mu_not_nu[mu, nu] + counts.L_mu_not_nu[nu, mu])
        shared = 1.0 - c4**lmn
        s += 4.0 * B0**2 * bt**2 * shared
        s += 8.0 * B0**2 * bt**2 * shared * (c2**expo) * cg[mu] * cg[nu]
    return float(s)


# ---------------------------------------------------------------------------
# Two-operator variational CD (no rotation): the triviality result
# ---------------------------------------------------------------------------

def action_cd_two_param(
    h_a: SpinOperator,
    h_b: SpinOperator,
    A0: float,
    B0: float,
    dA0: float,
    dB0: float,
    alpha_a: float,
    alpha_b: float,
) -> float:
    """Action of the unrotated two-operator CD ansatz A = a_a H_a + a_b H_b.

    S = Tr((dA0 H_a + dB0 H_b)^2) + c (A0 a_b - B0 a_a)^2 with
    c = Tr((i [H_a, H_b])^2) >= 0, so the trivial point a = 0 is a global
    minimum: without a frame rotation the variational CD cannot improve on
    the bare schedule.
    """
    comm = commutator(h_a, h_b)
    c = -trace_product(comm, comm).real  # Tr((iC)^2) = -Tr(C^2)
    quad = (
        dA0**2 * trace_product(h_a, h_a).real
        + 2.0 * dA0 * dB0 * trace_product(h_a, h_b).real
        + dB0**2 * trace_product(h_b, h_b).real
    )
    return float(quad + c * (A0 * alpha_b - B0 * alpha_a) ** 2)
