"""Self-check suites behind ``racd validate``: closed-form vs dense-oracle
agreement, diagonal-decomposition identities, the two-level analytic
benchmark, CD-limitations triviality, and boundary conditions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from . import closed_form
from .agp import GaugeContext, RaParams, action_oracle
from .models import ChainModel, Ramp, TwoSpinModel, random_instance, ramp_eval
from .operators import (
    SpinOperator,
    commutator,
    dense_diag_component,
    diag_component,
    sigma_x,
    sigma_y,
    sigma_z,
)
from .optimizer import bfgs_minimize, sequential_optimize, assemble_protocol


@dataclass
class SuiteResult:
    name: str
    passed: bool
    max_deviation: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: max deviation {self.max_deviation:.3e} (tol {self.tolerance:.1e}) {self.detail}"


def _random_field_derivs(model, rng) -> dict:
    return {t.name: (rng.uniform(-2.0, 2.0), rng.uniform(-3.0, 3.0)) for t in model.terms}


def _context_from_fd(model, fd) -> GaugeContext:
    h0 = model.hamiltonian([fd[t.name][0] for t in model.terms])
    dh0 = model.hamiltonian([fd[t.name][1] for t in model.terms])
    q_ops = tuple((t.param, t.operator) for t in model.terms if t.param in ("gamma", "phi"))
    k_ops = tuple((t.param, t.operator) for t in model.terms if t.param == "beta")
    return GaugeContext(h0, dh0, q_ops, k_ops)


def closed_form_deviation(model, evaluator: Callable, normalization: float, draws: int, seed: int) -> float:
    """Max relative deviation of a closed form from the dense oracle over
    random field and parameter draws."""
    rng = np.random.Generator(np.random.PCG64(seed))
    names = model.param_names
    worst = 0.0
    for _ in range(draws):
        fd = _random_field_derivs(model, rng)
        x = np.array(
            [rng.uniform(-2.0, 2.0) if n == "beta" else rng.uniform(-1.0, 1.0) for n in names]
        )
        ctx = _context_from_fd(model, fd)
        oracle = action_oracle(ctx, RaParams.from_vector(x, names)) / normalization
        closed = evaluator(fd, x)
        rel = abs(closed - oracle) / max(abs(oracle), 1e-12)
        worst = max(worst, rel)
    return worst


def suite_closed_form_vs_oracle(draws: int = 100, seed: int = 20240) -> SuiteResult:
    cases = []
    two = TwoSpinModel()
    cases.append(
        closed_form_deviation(
            two, lambda fd, x: closed_form.action_two_level(fd, x[0], x[1]), 1.0, draws, seed
        )
    )
    for n in (4, 5):
        chain = ChainModel(n)
        cases.append(
            closed_form_deviation(
                chain,
                lambda fd, x: closed_form.action_chain(fd, x[0], x[1], x[2]),
                n * 2.0**n,
                draws,
                seed + n,
            )
        )
    for n in (4, 5):
        qubo = random_instance("qubo", n, seed + 10 * n)
        cases.append(
            closed_form_deviation(
                qubo,
                lambda fd, x, J=qubo.couplings: closed_form.action_qubo(J, fd, x[0], x[1]),
                2.0**n,
                draws,
                seed + 2 + n,
            )
        )
    lhz = random_instance("lhz", 4, seed + 5)
    counts = closed_form.lhz_counts(lhz.constraints, lhz.n_qubits)
    cases.append(
        closed_form_deviation(
            lhz,
            lambda fd, x: closed_form.action_lhz(counts, lhz.couplings, fd, x[0], x[1], x[2]),
            2.0**lhz.n_qubits,
            draws,
            seed + 6,
        )
    )
    worst = max(cases)
    return SuiteResult("closed-form vs dense oracle", worst <= 1e-8, worst, 1e-8)


def suite_decomposition_identities(seed: int = 77, n_ops: int = 5) -> SuiteResult:
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = 0.0
    for n in range(2, 6):
        for _ in range(n_ops):
            terms = {}
            for _ in range(6):
                z = int(rng.integers(0, 1 << n))
                terms[(0, z)] = terms.get((0, z), 0.0) + rng.normal()
            d = SpinOperator(n, terms)
            dense = d.to_dense()
            for j in range(n):
                keep = diag_component(d, j, "keep_j")
                drop = diag_component(d, j, "drop_j")
                sz = sigma_z(n, j)
                # (i) reconstruction
                worst = max(worst, np.abs((keep @ sz + drop - d).to_dense()).max())
                # (ii) diagonality, (iii) independence of site j
                for comp in (keep, drop):
                    worst = max(worst, 0.0 if comp.is_diagonal() else 1.0)
                    worst = max(worst, np.abs(commutator(comp, sigma_x(n, j)).to_dense()).max())
                # (iv) commutator identity [D, x_j] = 2i D^[j] y_j
                lhs = commutator(d, sigma_x(n, j))
                rhs = 2j * (keep @ sigma_y(n, j))
                worst = max(worst, np.abs((lhs - rhs).to_dense()).max())
                # (v) trig splitting, dense helper
                eigs = np.diag(dense).real
                cos_d = np.diag(np.cos(eigs)).astype(complex)
                sin_d = np.diag(np.sin(eigs)).astype(complex)
                keep_m = keep.to_dense()
                drop_m = drop.to_dense()
                sin_keep = _matfun_diag(np.sin, keep_m)
                worst = max(
                    worst,
                    np.abs(
                        dense_diag_component(cos_d, n, j, "keep_j")
                        + sin_keep @ _matfun_diag(np.sin, drop_m)
                    ).max(),
                )
                worst = max(
                    worst,
                    np.abs(
                        dense_diag_component(sin_d, n, j, "keep_j")
                        - sin_keep @ _matfun_diag(np.cos, drop_m)
                    ).max(),
                )
                # (vi) symmetry and nilpotence
                worst = max(
                    worst,
                    0.0
                    if diag_component(keep, j, "keep_j").is_zero()
                    else diag_component(keep, j, "keep_j").norm(),
                )
                for k in range(n):
                    jk = diag_component(diag_component(d, j, "keep_j"), k, "keep_j")
                    kj = diag_component(diag_component(d, k, "keep_j"), j, "keep_j")
                    worst = max(worst, 0.0 if jk.equals(kj) else (jk - kj).norm())
    return SuiteResult("diagonal decomposition identities (i)-(vi)", worst <= 1e-12, worst, 1e-12)


def _matfun_diag(fn, mat: np.ndarray) -> np.ndarray:
    return np.diag(fn(np.diag(mat).real)).astype(complex)


def suite_two_level_analytic(M: int = 100, tau: float = 1.0) -> SuiteResult:
    model = TwoSpinModel()
    ramp = Ramp(tau)
    traj = sequential_optimize(model, ramp, M=M)
    worst = 0.0
    for m, t in enumerate(traj.times):
        lam, lam_dot = ramp(t)
        fd = model.ua_fields(lam, lam_dot)
        beta_a, gamma_a = closed_form.two_level_optimum(fd)
        worst = max(worst, abs(traj.values[m, 0] - beta_a), abs(traj.values[m, 1] - gamma_a))
    return SuiteResult("two-level sequential vs analytic optimum", worst <= 1e-3, worst, 1e-3)


def suite_cd_limitations(grid: int = 101) -> SuiteResult:
    model = TwoSpinModel()
    h_term = model.term_by_param("gamma").operator
    j_term = model.term_by_param("beta").operator
    lam = 0.3
    fd = model.ua_fields(lam, 1.0)
    A0, dA0 = fd["h"]
    B0, dB0 = fd["J"]

    def s_of(a):
        return closed_form.action_cd_two_param(h_term, j_term, A0, B0, dA0, dB0, a[0], a[1])

    s0 = s_of((0.0, 0.0))
    alphas = np.linspace(-1.0, 1.0, grid)
    worst = 0.0
    for aa in alphas:
        for ab in alphas:
            worst = max(worst, s0 - s_of((aa, ab)))  # positive => below the trivial point
    res = bfgs_minimize(s_of, np.zeros(2))
    alpha_norm = float(np.linalg.norm(res.x))
    passed = worst <= 1e-9 and alpha_norm <= 1e-6
    return SuiteResult(
        "CD-limitations triviality",
        passed,
        max(worst, alpha_norm),
        1e-6,
        detail=f"(grid excess {worst:.2e}, |alpha*| {alpha_norm:.2e})",
    )


def suite_boundary_conditions(tau: float = 1.0, M: int = 100) -> SuiteResult:
    worst = 0.0
    for t in (0.0, tau):
        _, lam_dot = ramp_eval(t, tau)
        worst = max(worst, abs(lam_dot))
    for model in (TwoSpinModel(), ChainModel(6)):
        ramp = Ramp(tau)
        traj = sequential_optimize(model, ramp, M=M)
        ra = assemble_protocol(model, traj, "ra", ramp)
        ua = assemble_protocol(model, None, "ua", ramp)
        ends = np.array([0.0, tau])
        worst = max(worst, float(np.abs(traj.values[0]).max()), float(np.abs(traj.values[-1]).max()))
        f_ra = ra.field_table(ends)
        f_ua = ua.field_table(ends)
        for name in f_ra:
            worst = max(worst, float(np.abs(f_ra[name] - f_ua[name]).max()))
    return SuiteResult("boundary conditions (ramp, params, RA fields)", worst <= 1e-6, worst, 1e-6)


def run_all_suites(draws: int = 100) -> List[SuiteResult]:
    return [
        suite_closed_form_vs_oracle(draws=draws),
        suite_decomposition_identities(),
        suite_two_level_analytic(),
        suite_cd_limitations(),
        suite_boundary_conditions(),
    ]
