import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from pdecoeff.basis import BoxDomain, build_basis
from pdecoeff.data_pipeline import from_callables
from pdecoeff.forward_solver import FluxSpec
from pdecoeff.quadrature import gauss_boundary, gauss_interior
from pdecoeff.recovery import (
    CoefficientSolution,
    GalerkinSystem,
    NonUniqueSolutionError,
    RecoveryConfig,
    _tables,
    assemble_A_block,
    assemble_b,
    assemble_K_block,
    build_system,
    evaluate_solution,
    load_solution,
    save_solution,
    solve_collocation,
    solve_galerkin,
)

DOM = BoxDomain((-1.0,), (1.0,))


def make_snapshots(u, u_t, grad_u, times=(0.0, 0.5), degree_quad=40, hess=None,
                   domain=DOM, boundary_pts=8):
    interior = gauss_interior(domain, degree_quad)
    boundary = gauss_boundary(domain, boundary_pts)
    return from_callables(np.asarray(times, dtype=float), interior, boundary,
                          u, u_t, grad_u, hess_diag=hess)


def config_for(degree, test_degree=None, flux=None, unknowns="both", domain=DOM,
               **kw):
    trial = build_basis(domain, degree)
    test = build_basis(domain, test_degree if test_degree is not None else degree)
    return RecoveryConfig(trial_basis=trial, test_basis=test,
                          flux=flux or FluxSpec.linear(), unknowns=unknowns, **kw)


def tables_for(cfg, snaps):
    return _tables(cfg, snaps)


# --- assembly oracles -------------------------------------------------------

def test_A_block_zero_state():
    snaps, derivs = make_snapshots(
        u=lambda t, x: np.zeros_like(x), u_t=lambda t, x: np.zeros_like(x),
        grad_u=lambda t, x: np.zeros_like(x))
    cfg = config_for(2)
    tab = tables_for(cfg, snaps)
    A = assemble_A_block(tab, 0, cfg.flux.F(snaps.interior_values[0]),
                         cfg.flux.F(snaps.boundary_values[0]))
    np.testing.assert_allclose(A, 0.0, atol=1e-15)


def test_A_block_constant_test_function_boundary_reduction():
    # constant test member: the interior term vanishes, leaving the boundary
    # difference  F(u(b)) phi_i(b) / sqrt|D| - F(u(a)) phi_i(a) / sqrt|D|
    snaps, _ = make_snapshots(
        u=lambda t, x: np.exp(x), u_t=lambda t, x: np.zeros_like(x),
        grad_u=lambda t, x: np.exp(x))
    cfg = config_for(3, test_degree=0)
    tab = tables_for(cfg, snaps)
    A = assemble_A_block(tab, 0, cfg.flux.F(snaps.interior_values[0]),
                         cfg.flux.F(snaps.boundary_values[0]))
    trial = cfg.trial_basis
    expected = (np.e * trial.eval(1.0) - np.exp(-1) * trial.eval(-1.0)) / np.sqrt(2.0)
    np.testing.assert_allclose(A[0], expected, atol=1e-12)


def test_A_block_hand_value_unit_state():
    # u == 1, linear flux: A_ji = integral of phi_i' psi_j after integration by
    # parts; for j = constant, i = linear this is sqrt(3)
    snaps, _ = make_snapshots(
        u=lambda t, x: np.ones_like(x), u_t=lambda t, x: np.zeros_like(x),
        grad_u=lambda t, x: np.zeros_like(x))
    cfg = config_for(1)
    tab = tables_for(cfg, snaps)
    A = assemble_A_block(tab, 0, cfg.flux.F(snaps.interior_values[0]),
                         cfg.flux.F(snaps.boundary_values[0]))

    def oracle(j_fn, dj_fn, i_fn):
        bnd = (1.0 * j_fn(1.0) * i_fn(1.0) * (+1) + 1.0 * j_fn(-1.0) * i_fn(-1.0) * (-1))
        intg, _ = scipy.integrate.quad(lambda x: dj_fn(x) * i_fn(x), -1, 1)
        return bnd - intg

    c0 = 1.0 / np.sqrt(2.0)
    c1 = np.sqrt(1.5)
    fns = [(lambda x: c0 + 0 * x, lambda x: 0.0 * x), (lambda x: c1 * x, lambda x: c1 + 0 * x)]
    for j, (jf, djf) in enumerate(fns):
        for i, (if_, _) in enumerate(fns):
            assert A[j, i] == pytest.approx(oracle(jf, djf, if_), abs=1e-12)
    assert A[0, 1] == pytest.approx(np.sqrt(3.0), abs=1e-12)


def test_K_block_zero_state():
    snaps, derivs = make_snapshots(
        u=lambda t, x: np.zeros_like(x), u_t=lambda t, x: np.zeros_like(x),
        grad_u=lambda t, x: np.zeros_like(x))
    cfg = config_for(2)
    tab = tables_for(cfg, snaps)
    K = assemble_K_block(tab, snaps.interior_values[0], snaps.boundary_values[0],
                         np.zeros(snaps.boundary_rule.n_points))
    np.testing.assert_allclose(K, 0.0, atol=1e-15)


@pytest.mark.parametrize("domain,degree", [(DOM, 4), (BoxDomain((-1.0, -1.0), (1.0, 1.0)), 3)])
def test_K_block_unit_state_divergence_identity(domain, degree):
    # u == 1 (grad u = 0): the remaining terms cancel by the divergence theorem
    dim = domain.dim
    if dim == 1:
        u = lambda t, x: np.ones_like(x)
        zero = lambda t, x: np.zeros_like(x)
        grad = zero
    else:
        u = lambda t, x, y: np.ones_like(x)
        zero = lambda t, x, y: np.zeros_like(x)
        grad = (zero, zero)
    snaps, derivs = make_snapshots(u=u, u_t=zero, grad_u=grad, domain=domain,
                                   degree_quad=degree + 2, boundary_pts=degree + 2)
    cfg = config_for(degree, domain=domain)
    tab = tables_for(cfg, snaps)
    normals = snaps.boundary_normals
    grad_n = np.einsum("bd,bd->b", derivs.grad_u_boundary[0], normals)
    K = assemble_K_block(tab, snaps.interior_values[0], snaps.boundary_values[0], grad_n)
    np.testing.assert_allclose(K, 0.0, atol=1e-10)


def test_K_block_linear_state_oracle():
    # u = x on [-1, 1], constant trial and test members; brute-force quadrature
    snaps, derivs = make_snapshots(
        u=lambda t, x: x, u_t=lambda t, x: np.zeros_like(x),
        grad_u=lambda t, x: np.ones_like(x))
    cfg = config_for(2)
    tab = tables_for(cfg, snaps)
    grad_n = np.einsum("bd,bd->b", derivs.grad_u_boundary[0], snaps.boundary_normals)
    K = assemble_K_block(tab, snaps.interior_values[0], snaps.boundary_values[0], grad_n)

    basis = cfg.trial_basis
    coef = np.array([1.0 / np.sqrt(2.0), np.sqrt(1.5), np.sqrt(2.5)])

    def phi(k, x):
        funcs = [lambda s: 1.0 + 0 * s, lambda s: s, lambda s: 1.5 * s**2 - 0.5]
        return coef[k] * funcs[k](x)

    def dphi(k, x):
        funcs = [lambda s: 0.0 * s, lambda s: 1.0 + 0 * s, lambda s: 3.0 * s]
        return coef[k] * funcs[k](x)

    def d2phi(k, x):
        funcs = [lambda s: 0.0 * s, lambda s: 0.0 * s, lambda s: 3.0 + 0 * s]
        return coef[k] * funcs[k](x)

    def oracle(j, i):
        t1 = phi(i, 1.0) * phi(j, 1.0) * 1.0 * (+1) + phi(i, -1.0) * phi(j, -1.0) * 1.0 * (-1)
        t2 = 1.0 * phi(i, 1.0) * dphi(j, 1.0) * (+1) + (-1.0) * phi(i, -1.0) * dphi(j, -1.0) * (-1)
        t3, _ = scipy.integrate.quad(
            lambda x: x * (dphi(i, x) * dphi(j, x) + phi(i, x) * d2phi(j, x)), -1, 1)
        return t1 - t2 + t3

    for j in range(3):
        for i in range(3):
            assert K[j, i] == pytest.approx(oracle(j, i), abs=1e-12)


def test_b_vector_cases():
    snaps, derivs = make_snapshots(
        u=lambda t, x: np.zeros_like(x), u_t=lambda t, x: np.zeros_like(x),
        grad_u=lambda t, x: np.zeros_like(x))
    cfg = config_for(2)
    tab = tables_for(cfg, snaps)
    np.testing.assert_allclose(assemble_b(tab, derivs.u_t_interior[0]), 0.0, atol=1e-15)

    # u_t == 1 against the constant member integrates to sqrt|D|
    b = assemble_b(tab, np.ones(snaps.interior_rule.n_points))
    assert b[0] == pytest.approx(np.sqrt(2.0), abs=1e-13)
    np.testing.assert_allclose(b[1:], 0.0, atol=1e-13)

    # u_t equal to a basis member projects onto the matching unit vector
    phi2 = cfg.test_basis.eval(snaps.interior_rule.points)[:, 1]
    b = assemble_b(tab, phi2)
    np.testing.assert_allclose(b, np.eye(3)[1], atol=1e-12)


# --- system assembly --------------------------------------------------------

# a state with three independent temporal modes: not weakly separable, so both
# coefficient fields are identifiable and the normal matrix is nonsingular
RICH_STATE = dict(
    u=lambda t, x: np.exp(x) + t * np.sin(2 * x) + t**2 * np.cos(3 * x),
    u_t=lambda t, x: np.sin(2 * x) + 2 * t * np.cos(3 * x),
    grad_u=lambda t, x: np.exp(x) + 2 * t * np.cos(2 * x) - 3 * t**2 * np.sin(3 * x),
)


def linear_state_system(unknowns="both", weights=None, degree=2, test_degree=None):
    snaps, derivs = make_snapshots(times=(0.0, 0.25, 0.5, 0.75), **RICH_STATE)
    cfg = config_for(degree, test_degree=test_degree, unknowns=unknowns, weights=weights)
    return build_system(cfg, snaps, derivs), snaps, derivs


def test_build_system_single_sample_outer_product():
    snaps, derivs = make_snapshots(
        u=lambda t, x: x, u_t=lambda t, x: np.zeros_like(x),
        grad_u=lambda t, x: np.ones_like(x), times=(0.0,))
    cfg = config_for(1, test_degree=3, unknowns="alpha", weights=np.array([1.0]))
    sys = build_system(cfg, snaps, derivs)
    np.testing.assert_allclose(sys.Xi, sys.E_blocks[0].T @ sys.E_blocks[0], atol=1e-12)


def test_build_system_weight_scaling_invariance():
    sys1, snaps, derivs = linear_state_system(weights=np.full(4, 0.25), degree=1)
    sys2 = build_system(
        RecoveryConfig(trial_basis=sys1.config.trial_basis,
                       test_basis=sys1.config.test_basis, flux=sys1.config.flux,
                       weights=np.full(4, 0.5)), snaps, derivs)
    np.testing.assert_allclose(sys2.Xi, 2.0 * sys1.Xi, atol=1e-12)
    np.testing.assert_allclose(sys2.rhs, 2.0 * sys1.rhs, atol=1e-12)
    c1 = solve_galerkin(sys1).active_vector()
    c2 = solve_galerkin(sys2).active_vector()
    np.testing.assert_allclose(c1, c2, atol=1e-10)


def test_build_system_scalar_hand_composition():
    # N = N_G = 1, u = x, velocity unknown only: E = -A with
    # A = [F(u) psi phi n] at the boundary = 1, so Xi = w * E^2 = 1
    snaps, derivs = make_snapshots(
        u=lambda t, x: x, u_t=lambda t, x: np.zeros_like(x),
        grad_u=lambda t, x: np.ones_like(x), times=(0.0,))
    cfg = config_for(0, unknowns="alpha", weights=np.array([1.0]))
    sys = build_system(cfg, snaps, derivs)
    assert sys.E_blocks[0][0, 0] == pytest.approx(-1.0, abs=1e-14)
    assert sys.Xi[0, 0] == pytest.approx(1.0, abs=1e-13)


def test_xi_symmetric_positive_semidefinite():
    sys, _, _ = linear_state_system(degree=4)
    np.testing.assert_allclose(sys.Xi, sys.Xi.T, atol=1e-12)
    eigvals = scipy.linalg.eigvalsh(sys.Xi)
    assert eigvals.min() >= -1e-10 * np.abs(eigvals).max()


def test_galerkin_never_reads_interior_derivatives():
    # weak-form assembly must work with the interior derivative fields absent
    snaps, derivs = make_snapshots(times=(0.0, 0.3, 0.6, 1.0), **RICH_STATE)
    assert derivs.grad_u_interior is None and derivs.hess_diag_interior is None
    cfg = config_for(2)
    sys = build_system(cfg, snaps, derivs)
    solve_galerkin(sys)


def test_underdetermined_system_rejected():
    snaps, derivs = make_snapshots(
        u=lambda t, x: x, u_t=lambda t, x: np.zeros_like(x),
        grad_u=lambda t, x: np.ones_like(x), times=(0.0,))
    cfg = config_for(8, test_degree=2)
    with pytest.raises(ValueError, match="underdetermined"):
        build_system(cfg, snaps, derivs)


# --- normal-equation solve --------------------------------------------------

def test_solve_identity_system():
    cfg = config_for(1, unknowns="kappa")
    sys = GalerkinSystem(config=cfg, E_blocks=[np.eye(2)], b_vecs=np.array([[1.0, 0.0]]),
                         weights=np.array([1.0]), Xi=np.eye(2), rhs=np.array([1.0, 0.0]))
    sol = solve_galerkin(sys)
    np.testing.assert_allclose(sol.active_vector(), [1.0, 0.0], atol=1e-14)
    assert sol.xi_min_eig == pytest.approx(1.0)


def stacked_lstsq_oracle(system):
    # independent orthogonal-factorization solve of the stacked problem
    A = np.vstack([np.sqrt(w) * E for w, E in zip(system.weights, system.E_blocks)])
    y = np.concatenate([np.sqrt(w) * b for w, b in zip(system.weights, system.b_vecs)])
    sol, _, _, _ = scipy.linalg.lstsq(A, y, lapack_driver="gelsy")
    return sol


def test_solve_matches_qr_oracle():
    for unknowns in ("both", "alpha", "kappa"):
        snaps, derivs = make_snapshots(times=np.linspace(0.0, 1.0, 6), **RICH_STATE)
        cfg = config_for(4, unknowns=unknowns)
        sys = build_system(cfg, snaps, derivs)
        cond = np.linalg.cond(sys.Xi)
        assert cond < 1e10
        sol = solve_galerkin(sys)
        oracle = stacked_lstsq_oracle(sys)
        np.testing.assert_allclose(sol.active_vector(), oracle,
                                   rtol=1e-10, atol=1e-10 * np.abs(oracle).max())


def test_normal_equation_consistency():
    snaps, derivs = make_snapshots(times=np.linspace(0.0, 1.0, 5), **RICH_STATE)
    cfg = config_for(3)
    sys = build_system(cfg, snaps, derivs)
    sol = solve_galerkin(sys)
    resid = sys.Xi @ sol.active_vector() - sys.rhs
    assert np.linalg.norm(resid) < 1e-10 * np.linalg.norm(sys.rhs)


def test_objective_local_optimality():
    snaps, derivs = make_snapshots(times=np.linspace(0.0, 1.0, 5), **RICH_STATE)
    cfg = config_for(3)
    sys = build_system(cfg, snaps, derivs)
    sol = solve_galerkin(sys)
    c = sol.active_vector()
    j0 = sys.objective(c)
    assert sol.residual == pytest.approx(j0, rel=1e-12, abs=1e-300)
    rng = np.random.default_rng(5)
    for _ in range(100):
        delta = rng.standard_normal(c.size)
        delta *= 1e-3 / np.linalg.norm(delta)
        assert sys.objective(c + delta) >= j0 - 1e-16


def test_separable_state_raises_non_unique():
    # u(t, x) = exp(-t): F(u) is x-independent, so adding any constant to the
    # velocity leaves the advection residual unchanged
    snaps, derivs = make_snapshots(
        u=lambda t, x: np.full_like(x, np.exp(-t)),
        u_t=lambda t, x: np.full_like(x, -np.exp(-t)),
        grad_u=lambda t, x: np.zeros_like(x),
        times=np.linspace(0.0, 1.0, 8))
    cfg = config_for(4, unknowns="alpha")
    sys = build_system(cfg, snaps, derivs)
    with pytest.raises(NonUniqueSolutionError) as exc:
        solve_galerkin(sys, rank_tol=1e-8)
    err = exc.value
    assert err.eig_ratio < 1e-8
    assert err.null_basis.shape[1] >= 1
    # the null direction is the constant member of the trial basis
    e_const = np.zeros(5)
    e_const[0] = 1.0
    overlap = np.abs(err.null_basis.T @ e_const).max()
    assert overlap > 0.999


# --- Theorem identity: weak form vs strong form -----------------------------

def strong_form_residual(cfg, x_pts, u, u_x, u_xx, u_t, alpha_c, kappa_c):
    basis = cfg.trial_basis
    vals = basis.eval(x_pts)
    grads = basis.eval_grad(x_pts)[:, :, 0]
    alpha = vals @ alpha_c
    dalpha = grads @ alpha_c
    kappa = vals @ kappa_c
    dkappa = grads @ kappa_c
    flux_u = cfg.flux.F(u)
    dflux_u = cfg.flux.dF(u)
    advection = dalpha * flux_u + alpha * dflux_u * u_x
    diffusion = dkappa * u_x + kappa * u_xx
    return u_t + advection - diffusion


@pytest.mark.parametrize("flux_kind", ["linear", "burgers"])
def test_weak_strong_identity_1d(flux_kind):
    # projection of the strong residual equals b_j - (E c)_j for any smooth
    # state and any coefficient pair drawn from the trial space
    flux = FluxSpec.linear() if flux_kind == "linear" else FluxSpec.burgers()
    poly = np.polynomial.Polynomial(np.array([0.3, -1.2, 0.8, 0.4, -0.5, 0.2, 0.05]))
    dpoly = poly.deriv()
    d2poly = poly.deriv(2)

    u = lambda t, x: (1 + 0.7 * t) * poly(x)
    u_t = lambda t, x: 0.7 * poly(x)
    u_x = lambda t, x: (1 + 0.7 * t) * dpoly(x)
    u_xx = lambda t, x: (1 + 0.7 * t) * d2poly(x)

    times = np.array([0.0, 0.4, 1.0])
    snaps, derivs = make_snapshots(u, u_t, grad_u=u_x, times=times, degree_quad=40)
    cfg = config_for(8, flux=flux)
    sys = build_system(cfg, snaps, derivs)

    rng = np.random.default_rng(17)
    n = cfg.trial_basis.size
    pts = snaps.interior_rule.points
    w = snaps.interior_rule.weights
    psi = cfg.test_basis.eval(pts)
    for _ in range(20):
        alpha_c = rng.standard_normal(n)
        kappa_c = rng.standard_normal(n)
        c = np.concatenate([alpha_c, kappa_c])
        for m, t in enumerate(times):
            resid = strong_form_residual(
                cfg, pts, snaps.interior_values[m], u_x(t, pts[:, 0]),
                u_xx(t, pts[:, 0]), derivs.u_t_interior[m], alpha_c, kappa_c)
            lhs = psi.T @ (w * resid)
            rhs = sys.b_vecs[m] - sys.E_blocks[m] @ c
            np.testing.assert_allclose(lhs, rhs, atol=1e-8)


def test_weak_strong_identity_2d():
    dom = BoxDomain((-1.0, -1.0), (1.0, 1.0))
    u = lambda t, x, y: (1 + 0.5 * t) * (x**2 * y + 0.3 * x * y**2 + 0.1 * x - 0.2 * y)
    u_t = lambda t, x, y: 0.5 * (x**2 * y + 0.3 * x * y**2 + 0.1 * x - 0.2 * y)
    u_x = lambda t, x, y: (1 + 0.5 * t) * (2 * x * y + 0.3 * y**2 + 0.1)
    u_y = lambda t, x, y: (1 + 0.5 * t) * (x**2 + 0.6 * x * y - 0.2)
    u_xx = lambda t, x, y: (1 + 0.5 * t) * (2 * y)
    u_yy = lambda t, x, y: (1 + 0.5 * t) * (0.6 * x)

    times = np.array([0.0, 0.5, 1.0])
    snaps, derivs = make_snapshots(u, u_t, grad_u=(u_x, u_y), times=times,
                                   degree_quad=12, domain=dom, boundary_pts=12)
    cfg = config_for(3, flux=FluxSpec.linear(), domain=dom)
    sys = build_system(cfg, snaps, derivs)

    basis = cfg.trial_basis
    pts = snaps.interior_rule.points
    w = snaps.interior_rule.weights
    psi = cfg.test_basis.eval(pts)
    vals = basis.eval(pts)
    grads = basis.eval_grad(pts)
    rng = np.random.default_rng(3)
    n = basis.size
    for _ in range(5):
        a1 = rng.standard_normal(n)
        a2 = rng.standard_normal(n)
        kc = rng.standard_normal(n)
        c = np.concatenate([a1, a2, kc])
        for m, t in enumerate(times):
            x, y = pts[:, 0], pts[:, 1]
            uu = snaps.interior_values[m]
            gx, gy = u_x(t, x, y), u_y(t, x, y)
            adv = ((grads[:, :, 0] @ a1) * uu + (vals @ a1) * gx
                   + (grads[:, :, 1] @ a2) * uu + (vals @ a2) * gy)
            diff = ((grads[:, :, 0] @ kc) * gx + (grads[:, :, 1] @ kc) * gy
                    + (vals @ kc) * (u_xx(t, x, y) + u_yy(t, x, y)))
            resid = derivs.u_t_interior[m] + adv - diff
            lhs = psi.T @ (w * resid)
            rhs = sys.b_vecs[m] - sys.E_blocks[m] @ c
            np.testing.assert_allclose(lhs, rhs, atol=1e-8)


# --- collocation ------------------------------------------------------------

def poly_advdiff_exact(alpha=(0.7, 0.3), kappa=(0.5, 0.1), c0=(0.2, -1.0, 0.5, 0.3, -0.4)):
    """Exact polynomial-in-x solution of u_t = -(alpha u)_x + (kappa u_x)_x
    for affine coefficients, via the triangular coefficient-evolution matrix."""
    a0, a1 = alpha
    k0, k1 = kappa
    p = len(c0)
    M = np.zeros((p, p))
    for n in range(p):
        M[n, n] += -a1 * (n + 1)
        if n >= 1:
            M[n - 1, n] += -a0 * n + k1 * n * n
        if n >= 2:
            M[n - 2, n] += k0 * n * (n - 1)
    c0 = np.asarray(c0, dtype=float)

    def coef(t):
        return scipy.linalg.expm(t * M) @ c0

    powers = np.arange(p)

    def u(t, x):
        return np.polynomial.polynomial.polyval(x, coef(t))

    def u_t(t, x):
        return np.polynomial.polynomial.polyval(x, M @ coef(t))

    def u_x(t, x):
        return np.polynomial.polynomial.polyval(x, (coef(t) * powers)[1:])

    def u_xx(t, x):
        d = (coef(t) * powers)[1:]
        return np.polynomial.polynomial.polyval(x, (d * np.arange(d.size))[1:])

    return u, u_t, u_x, u_xx


def test_collocation_recovers_manufactured_solution():
    u, u_t, u_x, u_xx = poly_advdiff_exact()
    times = np.linspace(0.0, 0.5, 6)
    snaps, derivs = make_snapshots(u, u_t, grad_u=u_x, hess=u_xx, times=times,
                                   degree_quad=30)
    cfg = config_for(1, method="collocation")
    sol = solve_collocation(cfg, snaps, derivs)
    x = np.linspace(-1, 1, 101)
    res = evaluate_solution(sol, x, truth_alpha=lambda x: 0.7 + 0.3 * x,
                            truth_kappa=lambda x: 0.5 + 0.1 * x)
    assert res["errors"]["alpha_1"] < 1e-8
    assert res["errors"]["kappa"] < 1e-8


def test_collocation_constant_state_rank_deficient():
    # grad u = 0 kills every diffusivity column
    times = np.linspace(0.0, 1.0, 4)
    snaps, derivs = make_snapshots(
        u=lambda t, x: np.full_like(x, np.exp(-t)),
        u_t=lambda t, x: np.full_like(x, -np.exp(-t)),
        grad_u=lambda t, x: np.zeros_like(x),
        hess=lambda t, x: np.zeros_like(x), times=times)
    cfg = config_for(2, method="collocation")
    with pytest.raises(NonUniqueSolutionError):
        solve_collocation(cfg, snaps, derivs)


def test_collocation_requires_interior_derivatives():
    snaps, derivs = make_snapshots(
        u=lambda t, x: x, u_t=lambda t, x: np.zeros_like(x),
        grad_u=lambda t, x: np.ones_like(x))
    cfg = config_for(1, method="collocation")
    with pytest.raises(ValueError, match="interior derivative"):
        solve_collocation(cfg, snaps, derivs)


def test_galerkin_collocation_agree_on_exact_data():
    u, u_t, u_x, u_xx = poly_advdiff_exact()
    times = np.linspace(0.0, 0.5, 6)
    snaps, derivs = make_snapshots(u, u_t, grad_u=u_x, hess=u_xx, times=times,
                                   degree_quad=30)
    cfg_g = config_for(1)
    sol_g = solve_galerkin(build_system(cfg_g, snaps, derivs))
    sol_c = solve_collocation(config_for(1, method="collocation"), snaps, derivs)
    np.testing.assert_allclose(sol_g.active_vector(), sol_c.active_vector(),
                               rtol=1e-6, atol=1e-8)


# --- evaluation and serialization -------------------------------------------

def test_evaluate_solution_exact_and_scaled():
    u, u_t, u_x, u_xx = poly_advdiff_exact()
    times = np.linspace(0.0, 0.5, 6)
    snaps, derivs = make_snapshots(u, u_t, grad_u=u_x, times=times)
    cfg = config_for(1)
    sol = solve_galerkin(build_system(cfg, snaps, derivs))
    x = np.linspace(-1, 1, 57)
    res = evaluate_solution(sol, x, truth_alpha=sol.alpha[0], truth_kappa=sol.kappa)
    assert res["errors"]["alpha_1"] == pytest.approx(0.0, abs=1e-12)
    assert res["errors"]["kappa"] == pytest.approx(0.0, abs=1e-12)

    scaled = evaluate_solution(sol, x, truth_kappa=lambda x: sol.kappa(x[:, None]) / 1.1)
    assert scaled["errors"]["kappa"] == pytest.approx(0.1, abs=1e-12)


def test_coefficient_round_trip_consistency():
    u, u_t, u_x, _ = poly_advdiff_exact()
    times = np.linspace(0.0, 0.5, 5)
    snaps, derivs = make_snapshots(u, u_t, grad_u=u_x, times=times)
    cfg = config_for(2)
    sol = solve_galerkin(build_system(cfg, snaps, derivs))
    x = np.linspace(-1, 1, 13)[:, None]
    n = sol.trial_basis.size
    vals = sol.trial_basis.eval(x)
    np.testing.assert_allclose(sol.alpha[0](x), vals @ sol.c[:n], atol=1e-12)
    np.testing.assert_allclose(sol.kappa(x), vals @ sol.c[n:], atol=1e-12)


def test_solution_file_round_trip(tmp_path):
    u, u_t, u_x, _ = poly_advdiff_exact()
    times = np.linspace(0.0, 0.5, 5)
    snaps, derivs = make_snapshots(u, u_t, grad_u=u_x, times=times)
    sol = solve_galerkin(build_system(config_for(3), snaps, derivs))
    path = tmp_path / "solution.txt"
    save_solution(sol, path)
    meta = load_solution(path)
    assert meta["method"] == "galerkin"
    assert int(meta["degree"]) == 3
    assert meta["residual"] == sol.residual
    assert meta["xi_min_eig"] == sol.xi_min_eig
    np.testing.assert_array_equal(meta["c"], sol.c)
