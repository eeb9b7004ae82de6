import numpy as np
import pytest
from numpy.testing import assert_allclose

from racd.agp import (
    GaugeContext,
    LocalCdSolver,
    RaParams,
    UnsupportedAnsatzError,
    action_oracle,
    exact_agp,
    g_operator,
    local_cd_coeffs,
    ra_agp,
)
from racd.closed_form import two_level_phi0, two_level_optimum, chain_alpha_coefficients, chain_basis_sums
from racd.models import ChainModel, TwoSpinModel, random_instance
from racd.operators import SpinOperator, commutator, sigma_x, sigma_y, sigma_z


def ctx_for(model, lam, lam_dot):
    return GaugeContext.from_model(model, lam, lam_dot)


def random_hermitian(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


# -- exact AGP ---------------------------------------------------------------

def test_exact_agp_zero_for_commuting_derivative():
    h = np.diag([0.0, 1.0, 3.0]).astype(complex)
    assert_allclose(exact_agp(h, 2.0 * h), np.zeros((3, 3)), atol=1e-14)


def test_exact_agp_single_qubit_rotation():
    # H(theta) = cos(theta) Z + sin(theta) X  =>  AGP = Y/2
    sy = sigma_y(1, 0).to_dense()
    for theta in (0.3, 1.2, 2.5):
        h = np.cos(theta) * sigma_z(1, 0).to_dense() + np.sin(theta) * sigma_x(1, 0).to_dense()
        dh = -np.sin(theta) * sigma_z(1, 0).to_dense() + np.cos(theta) * sigma_x(1, 0).to_dense()
        assert_allclose(exact_agp(h, dh), 0.5 * sy, atol=1e-12)


def test_exact_agp_minimizes_action_densely():
    # G built from the exact AGP beats 100 random perturbations
    rng = np.random.Generator(np.random.PCG64(0))
    h = random_hermitian(8, rng)
    dh = random_hermitian(8, rng)
    a_star = exact_agp(h, dh)

    def action(a):
        g = dh - 1j * (h @ a - a @ h)
        return float(np.vdot(g, g).real)

    s_star = action(a_star)
    for _ in range(100):
        assert action(a_star + 0.1 * random_hermitian(8, rng)) >= s_star - 1e-9


def test_exact_agp_two_spin_analytic():
    # -(phi0/2)(XY + YX) in lambda-derivative form
    model = TwoSpinModel()
    lam = 0.4
    h0 = model.h0(lam).to_dense()
    dh0 = model.dh0_dlambda(lam).to_dense()
    agp = exact_agp(h0, dh0)
    fd = model.ua_fields(lam, 1.0)  # lambda_dot = 1 gives lambda-derivatives
    phi0 = two_level_phi0(fd)
    xy = (sigma_x(2, 0) @ sigma_y(2, 1) + sigma_y(2, 0) @ sigma_x(2, 1)).to_dense()
    assert_allclose(agp, -0.5 * phi0 * xy, atol=1e-12)


def test_exact_agp_hermitian_and_input_check():
    rng = np.random.Generator(np.random.PCG64(1))
    h = random_hermitian(6, rng)
    dh = random_hermitian(6, rng)
    a = exact_agp(h, dh)
    assert_allclose(a, a.conj().T, atol=1e-12)
    with pytest.raises(ValueError):
        exact_agp(h + 1j * np.eye(6), dh)


# -- rotated-ansatz AGP -------------------------------------------------------

def test_ra_agp_zero_params():
    ctx = ctx_for(TwoSpinModel(), 0.3, 0.8)
    assert_allclose(ra_agp(ctx, RaParams(0.0, 0.0)), np.zeros((4, 4)), atol=1e-14)


def test_ra_agp_two_spin_structure_at_optimum():
    model = TwoSpinModel()
    lam, lam_dot = 0.37, 1.21
    ctx = ctx_for(model, lam, lam_dot)
    fd = model.ua_fields(lam, lam_dot)
    beta, gamma = two_level_optimum(fd)
    a = ra_agp(ctx, RaParams(beta, gamma))
    # expansion: beta*o + a_xx (XX - YY) + a_xy (XY + YX) with a_xx = 0,
    # a_xy = -phi0/2
    phi0 = two_level_phi0(fd)
    o_op = 0.5 * (
        (sigma_x(2, 0) @ sigma_x(2, 1)) + (sigma_y(2, 0) @ sigma_y(2, 1))
    ) + (sigma_z(2, 0) @ sigma_z(2, 1))
    xy = (sigma_x(2, 0) @ sigma_y(2, 1)) + (sigma_y(2, 0) @ sigma_x(2, 1))
    want = beta * o_op.to_dense() + (-0.5 * phi0) * xy.to_dense()
    assert_allclose(a, want, atol=1e-10)


def test_ra_agp_chain_six_coefficient_expansion():
    # dense RA gauge potential equals the closed-form expansion on the basis sums
    rng = np.random.Generator(np.random.PCG64(2))
    model = ChainModel(4)
    basis = chain_basis_sums(4)
    names = ("x", "y", "xz", "yz", "zxz", "zyz")
    for _ in range(10):
        lam = rng.uniform(0, 1)
        lam_dot = rng.uniform(-2, 2)
        params = RaParams(rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(-1, 1))
        ctx = ctx_for(model, lam, lam_dot)
        fd = model.ua_fields(lam, lam_dot)
        alphas = chain_alpha_coefficients(fd, params.beta, params.gamma, params.phi)
        want = sum(alphas[n] * b.to_dense() for n, b in zip(names, basis))
        assert_allclose(ra_agp(ctx, params), want, atol=1e-10)


def test_ra_agp_rejects_non_diagonal_generator():
    model = TwoSpinModel()
    ctx = GaugeContext(
        model.h0(0.2),
        model.dh0_dt(0.2, 0.5),
        q_ops=(("gamma", sigma_x(2, 0)),),
        k_ops=(("beta", model.terms[1].operator),),
    )
    with pytest.raises(UnsupportedAnsatzError):
        ra_agp(ctx, RaParams(0.1, 0.2))


def test_ra_agp_continuous_to_zero():
    ctx = ctx_for(ChainModel(4), 0.5, 1.0)
    norms = []
    for eps in (1e-2, 1e-4, 1e-6):
        a = ra_agp(ctx, RaParams(eps, eps, eps))
        norms.append(np.abs(a).max())
    assert norms[0] > norms[1] > norms[2]
    assert norms[2] < 1e-4


# -- G operator and oracle ----------------------------------------------------

def test_g_operator_zero_agp():
    ctx = ctx_for(TwoSpinModel(), 0.6, 0.9)
    assert_allclose(g_operator(ctx, np.zeros((4, 4))), ctx.dh0_dt.to_dense(), atol=1e-14)


def test_g_operator_exact_agp_orthogonal_to_commutators():
    # with the exact AGP, Tr(G [H0, X]) = 0 for any Hermitian X
    rng = np.random.Generator(np.random.PCG64(3))
    model = ChainModel(4)
    lam, lam_dot = 0.45, 1.4
    ctx = ctx_for(model, lam, lam_dot)
    h0 = ctx.h0.to_dense()
    agp = exact_agp(h0, model.dh0_dlambda(lam).to_dense())
    g = g_operator(ctx, lam_dot * agp)
    for _ in range(20):
        x = random_hermitian(16, rng)
        comm = h0 @ x - x @ h0
        assert abs(np.trace(g @ comm)) < 1e-9


def test_g_operator_two_spin_optimum_commutes():
    # the optimal RA implements the exact two-level AGP: G has no component
    # off-diagonal in the instantaneous eigenbasis, i.e. [G, H0] = 0
    model = TwoSpinModel()
    lam, lam_dot = 0.52, 1.1
    ctx = ctx_for(model, lam, lam_dot)
    fd = model.ua_fields(lam, lam_dot)
    beta, gamma = two_level_optimum(fd)
    g = g_operator(ctx, ra_agp(ctx, RaParams(beta, gamma)))
    h0 = ctx.h0.to_dense()
    assert np.abs(h0 @ g - g @ h0).max() < 1e-10


def test_action_oracle_zero_ansatz_and_nonnegativity():
    rng = np.random.Generator(np.random.PCG64(4))
    model = ChainModel(4)
    for _ in range(10):
        ctx = ctx_for(model, rng.uniform(0, 1), rng.uniform(-2, 2))
        zero = action_oracle(ctx, RaParams(0.0, 0.0, 0.0))
        dh = ctx.dh0_dt.to_dense()
        assert zero == pytest.approx(float(np.vdot(dh, dh).real), rel=1e-12)
        s = action_oracle(
            ctx, RaParams(rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(-1, 1))
        )
        assert s >= 0.0


def test_action_oracle_exact_agp_is_global_minimum():
    rng = np.random.Generator(np.random.PCG64(5))
    model = TwoSpinModel()
    lam, lam_dot = 0.31, 0.7
    ctx = ctx_for(model, lam, lam_dot)
    h0 = ctx.h0.to_dense()
    agp = exact_agp(h0, model.dh0_dlambda(lam).to_dense())

    def action_of(a):
        g = ctx.dh0_dt.to_dense() - 1j * (h0 @ a - a @ h0)
        return float(np.vdot(g, g).real)

    s_star = action_of(lam_dot * agp)
    for _ in range(100):
        perturbed = lam_dot * agp + 0.05 * random_hermitian(4, rng)
        assert action_of(perturbed) >= s_star - 1e-10


# -- local CD ------------------------------------------------------------------

def test_local_cd_two_spin_symmetric():
    model = TwoSpinModel()
    alpha = local_cd_coeffs(model.h0(0.4), model.dh0_dlambda(0.4))
    assert alpha[0] == pytest.approx(alpha[1], abs=1e-12)


def test_local_cd_chain_translation_invariant():
    model = ChainModel(5)
    alpha = local_cd_coeffs(model.h0(0.7), model.dh0_dlambda(0.7))
    assert np.ptp(alpha) < 1e-10


def test_local_cd_matches_direct_minimization():
    from racd.optimizer import bfgs_minimize

    model = random_instance("qubo", 4, 17)
    lam = 0.56
    h0 = model.h0(lam)
    dh0 = model.dh0_dlambda(lam)
    alpha = local_cd_coeffs(h0, dh0)

    h0_m = h0.to_dense()
    dh_m = dh0.to_dense()
    ys = [sigma_y(4, j).to_dense() for j in range(4)]

    def action(a):
        op = sum(ai * y for ai, y in zip(a, ys))
        g = dh_m - 1j * (h0_m @ op - op @ h0_m)
        return float(np.vdot(g, g).real)

    res = bfgs_minimize(action, np.zeros(4), gtol=1e-12)
    assert_allclose(alpha, res.x, atol=1e-6)


def test_local_cd_solver_matches_function():
    model = ChainModel(6)
    solver = LocalCdSolver(model)
    for lam in (0.2, 0.5, 0.9):
        assert_allclose(
            solver.solve(lam), local_cd_coeffs(model.h0(lam), model.dh0_dlambda(lam)), atol=1e-10
        )


def test_local_cd_requires_real_symmetric():
    h = SpinOperator(2, {(0b01, 0b01): 1j})  # a sigma-y term
    with pytest.raises(ValueError):
        local_cd_coeffs(h, h)


# -- two-operator CD triviality -------------------------------------------------

def test_two_operator_cd_never_beats_trivial():
    from racd.closed_form import action_cd_two_param

    model = TwoSpinModel()
    h_q = model.term_by_param("gamma").operator
    h_k = model.term_by_param("beta").operator
    comm = commutator(h_q, h_k)
    from racd.operators import trace_product

    c = -trace_product(comm, comm).real
    assert c >= 0.0  # dense quadratic coefficient is nonnegative
    rng = np.random.Generator(np.random.PCG64(6))
    A0, B0, dA0, dB0 = 2.3, -1.0, -5.0, 0.0
    s0 = action_cd_two_param(h_q, h_k, A0, B0, dA0, dB0, 0.0, 0.0)
    for _ in range(200):
        aa, ab = rng.uniform(-3, 3, 2)
        assert action_cd_two_param(h_q, h_k, A0, B0, dA0, dB0, aa, ab) >= s0 - 1e-10
