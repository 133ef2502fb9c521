import numpy as np
import pytest
import scipy.sparse as sp

from CorepModels import TruncBasis, block_components, blockwise_eigh, build_basis, corep_model, decay_ratios, haar, \
    intertwining_residual, level_multiplicity, op_EFK, op_K_power, relation_residuals, rep_pi, rep_rho
from QAlgebra import NCPoly, normal_form, random_poly, star
from QScalar import TruncationError


def test_basis_dimension_and_order():
    basis = TruncBasis(2)
    assert basis.dim == 1 + 4 + 9
    assert list(basis.labels[0]) == [0, 0, 0]
    assert np.all(np.diff(basis.l2) >= 0)
    assert level_multiplicity(basis) == {0: 1, 1: 4, 2: 9}


def test_sectors_fix_n():
    plus = TruncBasis(3, "+")
    assert set(plus.n2.tolist()) == {1}
    assert plus.dim == 2 + 4
    with pytest.raises(ValueError):
        TruncBasis(3, "x")


def test_E_on_the_lowest_spin(ctx):
    basis = build_basis(2)
    E = op_EFK("E", basis, ctx).matrix
    assert E[basis.index_of(1, 1, 1), basis.index_of(1, 1, -1)] == pytest.approx(1.0)
    F = op_EFK("F", basis, ctx).matrix
    assert abs(F - E.T).max() == pytest.approx(0.0, abs=1e-14)


def test_K_powers_multiply(ctx):
    basis = build_basis(3)
    K = op_K_power(1, basis, ctx).matrix
    Kinv = op_EFK("Kinv", basis, ctx).matrix
    assert abs(K @ Kinv - sp.identity(basis.dim)).max() == pytest.approx(0.0, abs=1e-14)


def test_pi_vacuum_coefficient(ctx):
    basis = build_basis(4)
    a = rep_pi(NCPoly.gen("a"), basis, ctx).matrix
    q = ctx.q
    expected = q ** 0.5 / np.sqrt(q + 1 / q)
    assert a[basis.index_of(1, -1, -1), basis.index_of(0, 0, 0)] == pytest.approx(expected)
    assert abs(rep_pi(NCPoly.one(), basis, ctx).matrix - sp.identity(basis.dim)).max() == 0.0


def test_rho_on_the_vacuum(ctx):
    basis = build_basis(4)
    vacuum = basis.index_of(0, 0, 0)
    q = ctx.q
    a = rep_rho(NCPoly.gen("a"), basis, ctx).matrix
    b = rep_rho(NCPoly.gen("b"), basis, ctx).matrix
    d = rep_rho(NCPoly.gen("d"), basis, ctx).matrix
    assert a[:, vacuum].nnz == 0
    assert b[basis.index_of(1, -1, 1), vacuum] == pytest.approx(q)
    assert d[basis.index_of(1, 1, 1), vacuum] == pytest.approx(np.sqrt(1 - q ** 2))


def test_rho_c_follows_the_sign_of_pi_c(ctx):
    basis = build_basis(30)
    pi_c = rep_pi(NCPoly.gen("c"), basis, ctx).matrix
    rho_c = rep_rho(NCPoly.gen("c"), basis, ctx).matrix
    rho_b = rep_rho(NCPoly.gen("b"), basis, ctx).matrix
    col = basis.index_of(24, -20, 0)
    row = basis.index_of(23, -19, -1)
    assert rho_c[row, col] == pytest.approx(-ctx.q ** 2)
    assert np.sign(pi_c[row, col]) == np.sign(rho_c[row, col])
    assert abs(pi_c[row, col] - rho_c[row, col]) <= 1e-4
    assert abs(rho_b + ctx.q * rho_c.T).max() <= 1e-15


@pytest.mark.parametrize("kind", ["pi", "rho"])
def test_relations_hold_on_interior_columns(ctx, kind):
    residuals = relation_residuals(kind, ctx, 30)
    assert max(residuals.values()) <= 1e-10


def test_rho_interior_avoids_the_cone_faces(ctx):
    model = corep_model(ctx, 10, "rho")
    mask = model.interior(2)
    b = model.basis
    assert not mask[b.index_of(4, 4, 0)]
    assert not mask[b.index_of(4, 0, -4)]
    assert mask[b.index_of(4, 0, 0)]
    assert np.array_equal(corep_model(ctx, 10, "pi").interior(2), b.interior(2))


@pytest.mark.parametrize("z", [1j, -1j, -2j, 0.3])
def test_modular_flow_is_implemented_by_K(ctx, z):
    rng = np.random.default_rng(21)
    for _ in range(3):
        x = random_poly(rng, 3, terms=2)
        assert intertwining_residual(x, z, ctx, 30) <= 1e-12


def test_haar_state(ctx):
    q = ctx.q
    assert haar(NCPoly.one(), ctx) == pytest.approx(1.0)
    assert haar(NCPoly.gen("a"), ctx) == pytest.approx(0.0)
    lhs = haar(normal_form("da"), ctx) - haar(normal_form("ad"), ctx)
    assert lhs == pytest.approx((1 / q - q) * haar(normal_form("bc"), ctx))
    b = NCPoly.gen("b")
    assert haar(star(b) * b, ctx).real > 0


def test_haar_needs_enough_levels(ctx):
    with pytest.raises(TruncationError):
        haar(normal_form("bc"), ctx, L2=2)


def test_blockwise_eigh_matches_dense():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((3, 3))
    b = rng.standard_normal((2, 2))
    m = sp.block_diag([a + a.T, b + b.T]).tocsr()
    perm = np.array([0, 3, 1, 4, 2])
    m = m[perm][:, perm]
    values, vectors, blocks = blockwise_eigh(m)
    assert sorted(len(x) for x in blocks) == [2, 3]
    assert np.allclose(np.sort(values), np.linalg.eigvalsh(m.toarray()))
    assert np.allclose((m @ vectors).toarray(), vectors.toarray() * values)
    assert len(block_components(sp.identity(4))) == 4


def test_pi_minus_rho_decays_like_q(ctx):
    for g in ("a", "c"):
        ratios = decay_ratios(g, ctx, 30)
        tested = [r for l2, r in ratios.items() if l2 >= 10 and r is not None]
        assert tested
        assert max(tested) <= ctx.q + 0.1
