import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from liebrob import (
    EvolutionConvergenceWarning,
    GKSLModel,
    HamiltonianTerm,
    LindbladTerm,
    TimeProfile,
    build_adjoint_generator,
    build_generator,
    build_lattice,
    commutator_norm_curve,
    commutator_norm_curves,
    heisenberg_evolve,
    schrodinger_evolve,
)
from liebrob.operators import (
    LOWERING,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    embed,
    local_operator,
    operator_norm,
    unvec,
    vec,
)

from _helpers import (
    random_density_matrix,
    random_hermitian,
    random_matrix,
    random_model,
)


def single_qubit_model(**kwargs):
    return GKSLModel(lattice=build_lattice(1), **kwargs)


def dephasing_model(gamma=0.5):
    return single_qubit_model(
        lindblad_terms=(LindbladTerm(support=(0,), matrix=PAULI_Z, rate=gamma),)
    )


class TestTimeProfile:
    def test_constant(self):
        profile = TimeProfile(kind="constant", amplitude=0.7)
        assert profile.value(3.1) == 0.7
        assert profile.sup_abs == 0.7
        assert profile.min_value == 0.7
        assert profile.is_constant

    def test_sinusoidal_range(self):
        profile = TimeProfile(kind="sinusoidal", amplitude=2.0, omega=3.0, phase=0.4)
        ts = np.linspace(0, 20, 4001)
        values = np.array([profile.value(t) for t in ts])
        assert values.min() >= 0.0
        assert values.max() <= 2.0
        assert profile.sup_abs == 2.0
        assert profile.min_value == 0.0

    def test_interval_sup_matches_dense_sampling(self):
        profile = TimeProfile(kind="sinusoidal", amplitude=1.3, omega=2.1, phase=0.9)
        for lo, hi in ((0.0, 0.3), (0.5, 0.9), (0.0, 5.0), (1.2, 1.2001)):
            ts = np.linspace(lo, hi, 20001)
            sampled = max(abs(profile.value(t)) for t in ts)
            closed = profile.sup_abs_on(lo, hi)
            assert sampled <= closed + 1e-9
            assert closed <= sampled + 1e-4

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            TimeProfile(kind="square")


class TestModelValidation:
    def test_non_hermitian_hamiltonian_rejected(self):
        with pytest.raises(ValueError, match="Hermitian"):
            single_qubit_model(
                hamiltonian_terms=(HamiltonianTerm(support=(0,), matrix=LOWERING),)
            )

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            single_qubit_model(
                lindblad_terms=(LindbladTerm(support=(0,), matrix=PAULI_Z, rate=-1.0),)
            )

    def test_negative_rate_profile_rejected(self):
        profile = TimeProfile(kind="constant", amplitude=-1.0)
        with pytest.raises(ValueError, match="negative"):
            single_qubit_model(
                lindblad_terms=(
                    LindbladTerm(support=(0,), matrix=PAULI_Z, rate=1.0, profile=profile),
                )
            )

    def test_support_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            single_qubit_model(
                hamiltonian_terms=(HamiltonianTerm(support=(3,), matrix=PAULI_Z),)
            )

    def test_guard_dimension(self):
        model = GKSLModel(lattice=build_lattice(4), guard_dim=8)
        with pytest.raises(ValueError, match="guard"):
            build_generator(model)


class TestGenerators:
    def test_empty_model_gives_zero_matrix(self):
        gen = build_generator(single_qubit_model())
        assert gen.kind == "generator"
        np.testing.assert_array_equal(gen.matrix, np.zeros((4, 4)))

    def test_hamiltonian_action_is_commutator(self):
        model = single_qubit_model(
            hamiltonian_terms=(HamiltonianTerm(support=(0,), matrix=PAULI_Z),)
        )
        gen = build_generator(model)
        out = unvec(gen.matrix @ vec(PAULI_X), 2)
        oracle = -1j * (PAULI_Z @ PAULI_X - PAULI_X @ PAULI_Z)
        np.testing.assert_allclose(out, oracle, atol=1e-14)

    def test_amplitude_damping_action(self):
        model = single_qubit_model(
            lindblad_terms=(LindbladTerm(support=(0,), matrix=LOWERING, rate=1.0),)
        )
        gen = build_generator(model)
        excited = np.diag([0.0, 1.0]).astype(complex)
        out = unvec(gen.matrix @ vec(excited), 2)
        np.testing.assert_allclose(out, np.diag([1.0, -1.0]), atol=1e-14)

    def test_adjoint_annihilates_identity(self):
        rng = np.random.default_rng(31)
        model = random_model(rng, n_sites=2, time_dependent=True)
        adj = build_adjoint_generator(model, time=0.37)
        out = adj.matrix @ vec(np.eye(4, dtype=complex))
        assert np.abs(out).max() < 1e-10

    def test_generator_preserves_trace(self):
        rng = np.random.default_rng(32)
        model = random_model(rng, n_sites=2, time_dependent=True)
        gen = build_generator(model, time=0.81)
        for _ in range(5):
            rho = random_density_matrix(rng, 4)
            assert abs(np.trace(unvec(gen.matrix @ vec(rho), 4))) < 1e-10

    def test_qutrit_model_preserves_trace(self):
        rng = np.random.default_rng(30)
        lattice = build_lattice(2)
        h = random_hermitian(rng, 9)
        l0 = random_matrix(rng, 3)
        model = GKSLModel(
            lattice=lattice,
            dim_per_site=3,
            hamiltonian_terms=(HamiltonianTerm(support=(0, 1), matrix=h),),
            lindblad_terms=(LindbladTerm(support=(0,), matrix=l0, rate=0.4),),
        )
        gen = build_generator(model)
        rho = random_density_matrix(rng, 9)
        assert abs(np.trace(unvec(gen.matrix @ vec(rho), 9))) < 1e-10
        adj = build_adjoint_generator(model)
        assert np.abs(adj.matrix @ vec(np.eye(9, dtype=complex))).max() < 1e-10

    def test_dephasing_eigenaction(self):
        gamma = 0.8
        adj = build_adjoint_generator(dephasing_model(gamma))
        out = unvec(adj.matrix @ vec(PAULI_X), 2)
        np.testing.assert_allclose(out, -2.0 * gamma * PAULI_X, atol=1e-13)

    def test_hilbert_schmidt_duality(self):
        rng = np.random.default_rng(33)
        model = random_model(rng, n_sites=2)
        gen = build_generator(model).matrix
        adj = build_adjoint_generator(model).matrix
        np.testing.assert_allclose(adj, gen.conj().T, atol=1e-12)
        for _ in range(5):
            rho = random_density_matrix(rng, 4)
            a = random_matrix(rng, 4)
            lhs = np.trace(unvec(gen @ vec(rho), 4).conj().T @ a)
            rhs = np.trace(rho.conj().T @ unvec(adj @ vec(a), 4))
            assert abs(lhs - rhs) < 1e-10


class TestHeisenbergEvolve:
    def test_r_equals_t_is_identity(self):
        model = dephasing_model()
        a = embed(PAULI_X, (0,), model.lattice)
        out = heisenberg_evolve(model, a, r=1.0, t=1.0)
        np.testing.assert_array_equal(out.matrix, a.matrix)

    def test_dephasing_closed_form(self):
        gamma, r, t = 0.5, 0.3, 1.7
        model = dephasing_model(gamma)
        out = heisenberg_evolve(model, embed(PAULI_X, (0,), model.lattice), r, t)
        expected = np.exp(-2.0 * gamma * (t - r)) * PAULI_X
        np.testing.assert_allclose(out.matrix, expected, rtol=1e-12, atol=1e-15)

    def test_hamiltonian_only_matches_unitary_conjugation(self):
        rng = np.random.default_rng(34)
        lattice = build_lattice(2)
        h = random_hermitian(rng, 4)
        model = GKSLModel(
            lattice=lattice,
            hamiltonian_terms=(HamiltonianTerm(support=(0, 1), matrix=h),),
        )
        a = embed(PAULI_Z, (0,), lattice)
        out = heisenberg_evolve(model, a, r=0.2, t=1.4)
        u = expm(1j * h * 1.2)
        np.testing.assert_allclose(out.matrix, u @ a.matrix @ u.conj().T, atol=1e-9)

    def test_backward_composition_law(self):
        rng = np.random.default_rng(35)
        model = random_model(rng, n_sites=2, time_dependent=True)
        a = embed(random_matrix(rng, 2), (0,), model.lattice)
        r, s, t = 0.2, 0.7, 1.1
        steps = 1024  # unaligned partitions only agree to the midpoint-rule order
        direct = heisenberg_evolve(model, a, r, t, steps=2 * steps,
                                   check_convergence=False)
        stage = heisenberg_evolve(model, a, s, t, steps=steps,
                                  check_convergence=False)
        composed = heisenberg_evolve(model, stage, r, s, steps=steps,
                                     check_convergence=False)
        assert operator_norm(direct.matrix - composed.matrix) < 1e-8

    def test_hermiticity_preserved(self):
        rng = np.random.default_rng(36)
        model = random_model(rng, n_sites=2, time_dependent=True)
        a = embed(random_hermitian(rng, 2), (1,), model.lattice)
        out = heisenberg_evolve(model, a, 0.1, 0.9, steps=64, check_convergence=False)
        assert np.abs(out.matrix - out.matrix.conj().T).max() < 1e-10

    def test_contractivity_proxy(self):
        rng = np.random.default_rng(37)
        model = random_model(rng, n_sites=2)
        for _ in range(10):
            a = embed(random_matrix(rng, 4), (0, 1), model.lattice)
            out = heisenberg_evolve(model, a, 0.0, 1.0)
            assert operator_norm(out.matrix) <= operator_norm(a.matrix) * (1 + 1e-8)

    def test_r_after_t_rejected(self):
        model = dephasing_model()
        with pytest.raises(ValueError):
            heisenberg_evolve(model, embed(PAULI_X, (0,), model.lattice), 2.0, 1.0)

    def test_sinusoidal_dephasing_closed_form(self):
        # the modulated dephasing generator commutes with itself at all times,
        # so A(r) = exp(-2 int_r^t gamma(s) ds) pauli_x exactly; midpoint
        # stepping converges to the integral at second order
        rate, amp, omega, phase = 0.8, 1.0, 3.0, 0.7
        profile = TimeProfile(kind="sinusoidal", amplitude=amp, omega=omega,
                              phase=phase)
        model = single_qubit_model(
            lindblad_terms=(
                LindbladTerm(support=(0,), matrix=PAULI_Z, rate=rate,
                             profile=profile),
            ),
        )
        t = 1.4
        for r in (0.0, 0.5, 1.0):
            out = heisenberg_evolve(model, embed(PAULI_X, (0,), model.lattice),
                                    r, t, steps=2048, check_convergence=False)
            integral = rate * amp * 0.5 * (
                (t - r)
                - (np.cos(omega * t + phase) - np.cos(omega * r + phase)) / omega
            )
            expected = np.exp(-2.0 * integral)
            assert out.matrix[0, 1].real == pytest.approx(expected, rel=1e-6)

    def test_convergence_warning_on_coarse_steps(self):
        profile = TimeProfile(kind="sinusoidal", amplitude=4.0, omega=40.0)
        model = single_qubit_model(
            hamiltonian_terms=(
                HamiltonianTerm(support=(0,), matrix=PAULI_X, profile=profile),
            )
        )
        a = embed(PAULI_Z, (0,), model.lattice)
        with pytest.warns(EvolutionConvergenceWarning):
            heisenberg_evolve(model, a, 0.0, 2.0, steps=1)


class TestSchrodingerEvolve:
    def test_t_equals_s_is_identity(self):
        model = dephasing_model()
        rho = np.diag([0.25, 0.75]).astype(complex)
        np.testing.assert_array_equal(schrodinger_evolve(model, rho, 0.5, 0.5), rho)

    def test_amplitude_damping_population(self):
        model = single_qubit_model(
            lindblad_terms=(LindbladTerm(support=(0,), matrix=LOWERING, rate=1.0),)
        )
        rho = np.diag([0.0, 1.0]).astype(complex)
        out = schrodinger_evolve(model, rho, 0.0, 1.3)
        assert out[1, 1].real == pytest.approx(np.exp(-1.3), rel=1e-10)

    def test_invalid_states_rejected(self):
        model = dephasing_model()
        with pytest.raises(ValueError, match="Hermitian"):
            schrodinger_evolve(model, np.array([[0.5, 1.0], [0.0, 0.5]]), 0.0, 1.0)
        with pytest.raises(ValueError, match="trace"):
            schrodinger_evolve(model, np.diag([0.9, 0.9]).astype(complex), 0.0, 1.0)
        with pytest.raises(ValueError, match="positive"):
            schrodinger_evolve(model, np.diag([1.5, -0.5]).astype(complex), 0.0, 1.0)

    def test_heisenberg_schrodinger_duality(self):
        rng = np.random.default_rng(38)
        model = random_model(rng, n_sites=2, time_dependent=True)
        s, t, steps = 0.15, 1.05, 128
        for _ in range(10):
            rho = random_density_matrix(rng, 4)
            a = random_matrix(rng, 4)
            rho_t = schrodinger_evolve(model, rho, s, t, steps=steps,
                                       check_convergence=False)
            a_s = heisenberg_evolve(model, a, s, t, steps=steps,
                                    check_convergence=False)
            assert abs(np.trace(rho_t @ a) - np.trace(rho @ a_s)) < 1e-8


def xy_chain_with_dephasing(n_sites=3, gamma=0.4):
    """Power-law XY couplings on every pair plus on-site dephasing."""
    lattice = build_lattice(n_sites)
    h_terms = []
    for i in range(n_sites):
        for j in range(i + 1, n_sites):
            w = 1.0 / lattice.dist[i, j] ** 2
            h_terms.append(HamiltonianTerm(
                support=(i, j), matrix=w * np.kron(PAULI_X, PAULI_X)))
            h_terms.append(HamiltonianTerm(
                support=(i, j), matrix=w * np.kron(PAULI_Y, PAULI_Y)))
    l_terms = tuple(
        LindbladTerm(support=(i,), matrix=PAULI_Z, rate=gamma) for i in range(n_sites)
    )
    return GKSLModel(lattice=lattice, hamiltonian_terms=tuple(h_terms),
                     lindblad_terms=l_terms)


def reference_heisenberg_curve(n_sites, gamma, x_site, y_site, t, r_grid):
    """Independent oracle for the XY-with-dephasing commutator curve.

    Rebuilds the model from scratch with plain kron chains (pair couplings as
    products of single-site embeddings) and integrates the backward operator
    equation dA/ds = -L(A) with an adaptive ODE solver; no vectorized
    superoperator and no matrix exponential.
    """
    dim = 2**n_sites

    def site_op(mat, site):
        out = np.eye(1, dtype=complex)
        for k in range(n_sites):
            out = np.kron(out, mat if k == site else np.eye(2, dtype=complex))
        return out

    h_total = np.zeros((dim, dim), dtype=complex)
    for i in range(n_sites):
        for j in range(i + 1, n_sites):
            w = 1.0 / (j - i) ** 2
            h_total += w * site_op(PAULI_X, i) @ site_op(PAULI_X, j)
            h_total += w * site_op(PAULI_Y, i) @ site_op(PAULI_Y, j)
    lindblads = [(site_op(PAULI_Z, i), gamma) for i in range(n_sites)]
    x_full = site_op(PAULI_Z, x_site)

    def rhs(s, y):
        a = y.reshape(dim, dim)
        out = 1j * (h_total @ a - a @ h_total)
        for l_full, rate in lindblads:
            ldl = l_full.conj().T @ l_full
            out += rate * (l_full.conj().T @ a @ l_full - 0.5 * (ldl @ a + a @ ldl))
        return (-out).reshape(-1)

    sol = solve_ivp(rhs, (t, min(r_grid)),
                    site_op(PAULI_Z, y_site).reshape(-1).astype(complex),
                    t_eval=sorted(r_grid, reverse=True), rtol=1e-11, atol=1e-12,
                    method="DOP853")
    values = {}
    for idx, r in enumerate(sol.t):
        a_r = sol.y[:, idx].reshape(dim, dim)
        comm = a_r @ x_full - x_full @ a_r
        values[float(r)] = float(np.linalg.svd(comm, compute_uv=False)[0])
    return values


class TestCommutatorNormCurve:
    def test_zero_at_r_equals_t(self):
        model = xy_chain_with_dephasing()
        o_x = local_operator(PAULI_Z, (0,))
        o_y = local_operator(PAULI_Z, (2,))
        curve = commutator_norm_curve(model, o_x, o_y, t=1.0, r_grid=[1.0])
        assert curve[0] == (1.0, 0.0)

    def test_onsite_only_model_has_flat_zero_curve(self):
        lattice = build_lattice(3)
        model = GKSLModel(
            lattice=lattice,
            hamiltonian_terms=tuple(
                HamiltonianTerm(support=(i,), matrix=PAULI_Z) for i in range(3)
            ),
            lindblad_terms=(LindbladTerm(support=(1,), matrix=PAULI_Z, rate=0.3),),
        )
        curve = commutator_norm_curve(
            model, local_operator(PAULI_X, (0,)), local_operator(PAULI_X, (2,)),
            t=1.0, r_grid=np.linspace(0, 1, 5),
        )
        assert all(v < 1e-12 for _, v in curve)

    def test_grid_outside_window_rejected(self):
        model = xy_chain_with_dephasing()
        o_x = local_operator(PAULI_Z, (0,))
        o_y = local_operator(PAULI_Z, (2,))
        with pytest.raises(ValueError, match="r_grid"):
            commutator_norm_curve(model, o_x, o_y, t=1.0, r_grid=[0.5, 1.5])
        with pytest.raises(ValueError, match="r_grid"):
            commutator_norm_curve(model, o_x, o_y, t=1.0, r_grid=[-0.1, 0.5])

    def test_overlapping_supports_rejected(self):
        model = xy_chain_with_dephasing()
        with pytest.raises(ValueError, match="overlap"):
            commutator_norm_curve(
                model, local_operator(np.kron(PAULI_Z, PAULI_Z), (0, 1)),
                local_operator(PAULI_Z, (1,)), t=1.0, r_grid=[0.5],
            )

    def test_matches_independent_ode_oracle(self):
        model = xy_chain_with_dephasing(n_sites=3, gamma=0.4)
        o_x = local_operator(PAULI_Z, (0,))
        o_y = local_operator(PAULI_Z, (2,))
        t = 1.2
        r_grid = [0.0, 0.3, 0.6, 0.9, 1.2]
        curve = commutator_norm_curve(model, o_x, o_y, t, r_grid)
        oracle = reference_heisenberg_curve(3, 0.4, 0, 2, t, r_grid)
        for r, value in curve:
            assert value == pytest.approx(oracle[r], abs=1e-8)

    def test_time_dependent_curve_agrees_with_heisenberg_partition(self):
        rng = np.random.default_rng(39)
        model = random_model(rng, n_sites=2, time_dependent=True)
        o_x = local_operator(PAULI_Z, (0,))
        o_y = local_operator(random_matrix(rng, 2), (1,))
        r, t, substeps = 0.3, 1.1, 32
        curve = commutator_norm_curve(model, o_x, o_y, t, [r], substeps=substeps)
        evolved = heisenberg_evolve(model, embed(o_y.matrix, (1,), model.lattice),
                                    r, t, steps=substeps, check_convergence=False)
        x_full = embed(PAULI_Z, (0,), model.lattice).matrix
        comm = evolved.matrix @ x_full - x_full @ evolved.matrix
        assert curve[0][1] == pytest.approx(operator_norm(comm), abs=1e-12)

    def test_curves_share_the_sweep(self):
        model = xy_chain_with_dephasing()
        pairs = [
            (local_operator(PAULI_Z, (0,)), local_operator(PAULI_Z, (2,))),
            (local_operator(PAULI_Z, (1,)), local_operator(PAULI_Z, (2,))),
        ]
        grid = np.linspace(0, 1, 6)
        batched = commutator_norm_curves(model, pairs, 1.0, grid)
        for pair, batch in zip(pairs, batched):
            single = commutator_norm_curve(model, pair[0], pair[1], 1.0, grid)
            assert batch == single
