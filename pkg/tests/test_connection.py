import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import EXPLICIT, BENCH1, BENCH2, PHI7, general_curve
from curveops.connection import (ConnectionMatrix, assemble_jacobi, build_connection,
                                 canonical_signs, entrywise_connection, eval_Y, explicit_basis,
                                 explicit_connection, init_columns, reorth_window,
                                 reorthogonalize, sequence, zero_bounds)
from curveops.curvebasis import (CurveSpec, build_mult_ops, curve_nodes, dim_Vn, ell_index,
                                 pbasis_eval, row_part)
from curveops.errors import Degenerate, LanczosBreakdown, PointOffCurve
from curveops.polycore import Poly
from curveops.verify import audit_result, expected_bandwidth, orthonormality_residual


def gram_defect(C):
    D = C.to_dense()
    return np.max(np.abs(D.T @ D - np.eye(D.shape[1])))


# --------------------------------------------------------------------------- zero bounds

def test_zero_bounds_m1_small_n():
    d = 5
    for n in range(d - 1):
        for k in range(1, n + 3):
            zb = zero_bounds(1, d, n + 1, k)
            assert zb.jmin == n + 1
            if k == n + 2:
                assert zb.jmax == (n + 1) * d


def test_zero_bounds_m1_saturated():
    d = 4
    for n in range(d - 1, 12):
        for k in range(1, d + 1):
            assert zero_bounds(1, d, n + 1, k).jmin == d - 1 + d * (n + 2 - d)


def test_zero_bounds_m2_even_offset():
    d = 5
    for n in range(d - 1, 14):
        if (n + 1 - d) % 2:
            continue
        for k in range(1, d + 1):
            zb = zero_bounds(2, d, n + 1, k)
            # flat lower bound, moved up to the first row of the column's part
            assert zb.jmin in (2 * d + d * (n + 1 - d), 2 * d + d * (n + 1 - d) + 1)
            assert row_part(zb.jmin, 2) == zb.part


def test_zero_bounds_degree_zero_and_range():
    assert zero_bounds(1, 3, 0, 1).jmin == zero_bounds(1, 3, 0, 1).jmax == 0
    with pytest.raises(IndexError):
        zero_bounds(1, 3, 2, 4)


@pytest.mark.parametrize("m,d", [(1, 3), (1, 4), (1, 6), (2, 4), (2, 5), (2, 7)])
def test_untruncated_columns_respect_bounds(m, d):
    # the natural supports never reach outside the proven bounds
    c = general_curve(m, d)
    res = build_connection(c, 3 * d, truncate=False, full_reorth=True)
    for col in res.C.columns:
        if col.n == 0:
            continue
        zb = zero_bounds(m, d, col.n, col.k)
        rows = np.arange(col.vec.start, col.vec.stop)
        bad = (rows < zb.jmin) | (rows > zb.jmax)
        if m == 2:
            bad |= row_part(rows, 2) != zb.part
        assert np.max(np.abs(col.vec.values[bad]), initial=0.0) < 1e-12, (col.n, col.k)


# --------------------------------------------------------------------------- sequences

def test_sequences():
    assert sequence(0, 1, 4) == [("x", 1), ("y", 1)]
    assert sequence(2, 1, 4) == [("x", 1), ("x", 2), ("x", 3), ("y", 3)]
    assert sequence(3, 1, 4) == [("y", k) for k in range(1, 5)]
    assert sequence(3, 1, 4, "xy") == [("x", 2), ("x", 3), ("x", 4), ("y", 4)]
    assert sequence(5, 2, 2) == [("x", 1), ("x", 2)]
    with pytest.raises(ValueError):
        sequence(5, 1, 3, "z")


def test_reorth_window():
    assert reorth_window(10, 1, 3) == 10
    assert reorth_window(10, 2, 5) == 9
    assert reorth_window(1, 1, 6) == 0


# --------------------------------------------------------------------------- explicit bases

@pytest.mark.parametrize("m,d", sorted(k for k in EXPLICIT if k != (2, 4)))
def test_engine_reproduces_identity(m, d):
    c = CurveSpec(m, EXPLICIT[(m, d)])
    res = build_connection(c, 15)
    D = res.C.to_dense()
    n = D.shape[1]
    np.testing.assert_allclose(np.abs(D[:n]), np.eye(n), atol=1e-11)
    assert np.max(np.abs(D[n:]), initial=0.0) < 1e-11


def test_engine_reproduces_even_quartic_permutation():
    c = CurveSpec(2, EXPLICIT[(2, 4)])
    N = 15
    P = explicit_connection(c, N).to_dense()
    D = build_connection(c, N).C.to_dense(P.shape[0])
    np.testing.assert_allclose(np.abs(P.T @ D), np.eye(D.shape[1]), atol=1e-11)
    # Y_{2,3} = P_{4,0}, flat row 7
    assert P[7, ell_index(2, 3, 2, 4)] == 1.0


@pytest.mark.parametrize("m,d", sorted(EXPLICIT))
def test_explicit_basis_is_orthonormal(m, d):
    res = explicit_basis(CurveSpec(m, EXPLICIT[(m, d)]), 10)
    assert res.options == {"explicit": True}
    rep = audit_result(res, nquad=40)
    assert rep.ok, rep.failures


@pytest.mark.parametrize("c", [CurveSpec(1, BENCH1["cubic"]), CurveSpec(2, BENCH2["quartic"]),
                               CurveSpec(2, PHI7)])
def test_no_explicit_basis(c):
    assert explicit_basis(c, 5) is None


def test_explicit_cubic_values_are_p_values():
    c = CurveSpec(2, EXPLICIT[(2, 3)])
    res = explicit_basis(c, 6)
    x, y, _ = curve_nodes(c, 5)
    Yv = eval_Y(res.C, c, res.ops, x, y)
    P = pbasis_eval(c, res.ops, x, y, 12)
    np.testing.assert_array_equal(Yv, P[:, :Yv.shape[1]])


# --------------------------------------------------------------------------- initial columns

@pytest.mark.parametrize("d", [3, 4, 6])
def test_init_columns_m1(d):
    c = general_curve(1, d)
    ops = build_mult_ops(c, 4)
    blocks, b = init_columns(c, ops)
    assert b ** 2 == pytest.approx(sum(ops.Y[r, 0] ** 2 for r in range(2, d + 1)))
    assert blocks[0][0].vec.start == 0 and blocks[0][0].vec.values.tolist() == [1.0]


@pytest.mark.parametrize("d", [4, 5, 7])
def test_init_columns_m2(d):
    c = general_curve(2, d)
    ops = build_mult_ops(c, 4)
    blocks, b = init_columns(c, ops)
    v = blocks[2][2].vec.dense(2 * d + 2)
    ref = np.zeros(2 * d + 2)
    ref[5:2 * d:2] = [ops.r(0, j) for j in range(3, d + 1)]
    np.testing.assert_allclose(v, ref / b, atol=1e-15)


@pytest.mark.parametrize("m,d", [(1, 3), (1, 5), (2, 4), (2, 6)])
def test_init_columns_agree_with_engine(m, d):
    c = general_curve(m, d)
    a = build_connection(c, 3 * d).C.to_dense()
    b = build_connection(c, 3 * d, use_init=True).C.to_dense(a.shape[0])
    np.testing.assert_allclose(canonical_signs(b), canonical_signs(a), atol=1e-10)


@pytest.mark.parametrize("m,phi", [(1, (1, 1, 0, 1e-20)), (2, (2, 0, 0, 0, 1e-20))])
def test_degenerate_curves(m, phi):
    c = CurveSpec(m, Poly(phi))
    with pytest.raises(Degenerate):
        init_columns(c, build_mult_ops(c, 3))
    with pytest.raises(LanczosBreakdown) as exc:
        build_connection(c, 6)
    assert exc.value.n == (1 if m == 1 else 2)


def test_init_columns_needs_large_degree():
    c = general_curve(1, 2)
    with pytest.raises(ValueError):
        init_columns(c, build_mult_ops(c, 3))


# --------------------------------------------------------------------------- engine

def test_orthonormality_N40_d6():
    res = build_connection(general_curve(1, 6), 40)
    assert orthonormality_residual(res.C) < 1e-11


@pytest.mark.parametrize("m,d,lam", [(1, 3, 1), (2, 4, 2), (2, 7, 14)])
def test_benchmark_bandwidths(m, d, lam):
    phi = {(1, 3): BENCH1["cubic"], (2, 4): BENCH2["quartic"], (2, 7): PHI7}[(m, d)]
    res = build_connection(CurveSpec(m, phi), 20)
    rep = audit_result(res)
    assert expected_bandwidth(m, d) == lam
    assert rep.bandwidth_lower == rep.bandwidth_upper == lam
    assert rep.ok, rep.failures


@pytest.mark.parametrize("m,d", [(1, 4), (2, 5)])
def test_reorth_is_idempotent(m, d):
    res = build_connection(general_curve(m, d), 20)
    blocks = res.C.blocks
    n = 15
    window = [c for s in range(reorth_window(n, m, d), n + 1) for c in blocks[s]]
    for col in blocks[n + 1]:
        v, hmax = reorthogonalize(col.vec, window)
        assert hmax < 1e-12
        np.testing.assert_allclose(v.dense(col.vec.stop), col.vec.dense(col.vec.stop),
                                   atol=1e-12)


def test_reorth_breakdown():
    from curveops.polycore import SparseColumn
    res = build_connection(general_curve(1, 3), 4)
    with pytest.raises(LanczosBreakdown):
        reorthogonalize(res.C.blocks[2][0].vec, res.C.blocks[2], (2, 1))
    assert reorthogonalize(SparseColumn(0, np.ones(1)), [])[1] == 0.0


FORWARD_UNSTABLE = pytest.mark.xfail(
    strict=True, reason="all-y recursion amplifies roundoff through normalizers below 1e-2")


@pytest.mark.parametrize("c", [general_curve(1, 3), general_curve(1, 4), general_curve(2, 4),
                               general_curve(2, 6), general_curve(2, 7),
                               CurveSpec(1, BENCH1["quartic"]), CurveSpec(2, BENCH2["even_octic"]),
                               pytest.param(general_curve(1, 6), marks=FORWARD_UNSTABLE),
                               pytest.param(CurveSpec(1, BENCH1["sextic"]),
                                            marks=FORWARD_UNSTABLE)],
                         ids=["m1d3", "m1d4", "m2d4", "m2d6", "m2d7", "fig1quartic",
                              "fig2even_octic", "m1d6", "fig1sextic"])
def test_wider_allocation_changes_nothing(c):
    d = c.d
    a = build_connection(c, 20)
    b = build_connection(c, 20, pad=2 * d)
    nr = max(a.C.nrows, b.C.nrows)
    A, B = a.C.to_dense(nr), b.C.to_dense(nr)
    inband = np.zeros_like(A, dtype=bool)
    for col in a.C.columns:
        inband[col.vec.start:col.vec.stop, col.ell] = True
    assert np.max(np.abs(A - B)[inband]) < 1e-12
    # padded rows only pick up roundoff
    assert np.max(np.abs(B[~inband]), initial=0.0) < 1e-10


@pytest.mark.parametrize("m,phi", [(1, BENCH1["cubic"]), (1, BENCH1["quartic"]),
                                   (1, BENCH1["sextic"]), (2, BENCH2["quartic"]), (2, PHI7)])
def test_secondary_sequences_agree(m, phi):
    c = CurveSpec(m, phi)
    a = build_connection(c, 20)
    b = build_connection(c, 20, secondary="xy")
    nr = max(a.C.nrows, b.C.nrows)
    A, B = canonical_signs(a.C.to_dense(nr)), canonical_signs(b.C.to_dense(nr))
    # column-wise agreement, limited by the conditioning of the smallest normalizers
    assert np.max(np.abs(A - B)) < 1e-8
    for n in range(21):
        s = slice(ell_index(n, 1, m, c.d), ell_index(n, dim_Vn(n, m, c.d), m, c.d) + 1)
        M = A[:, s].T @ B[:, s]
        np.testing.assert_allclose(M.T @ M, np.eye(M.shape[0]), atol=1e-11)


@pytest.mark.parametrize("m,d", [(1, 3), (1, 5), (2, 4), (2, 6), (2, 2)])
def test_entrywise_cross_check(m, d):
    # both recursions run without re-orthogonalization, so they agree while
    # neither has lost orthogonality
    c = general_curve(m, d)
    N = max(3, d - 1)
    ref = build_connection(c, N, reorth=False)
    E = entrywise_connection(c, N, ref.ops)
    D = ref.C.to_dense(E.shape[0])
    np.testing.assert_allclose(E, D, atol=1e-11)


@pytest.mark.parametrize("m,d", [(1, 5), (2, 6)])
def test_entrywise_discrepancy_tracks_orthogonality_loss(m, d):
    c = general_curve(m, d)
    ref = build_connection(c, 6, reorth=False)
    E = entrywise_connection(c, 6, ref.ops)
    loss = np.max(np.abs(E.T @ E - np.eye(E.shape[1])))
    diff = np.max(np.abs(E - ref.C.to_dense(E.shape[0])))
    assert diff <= 10 * loss + 1e-12


@pytest.mark.parametrize("m,d", [(1, 3), (1, 6), (2, 3), (2, 6)])
def test_normalizers_positive(m, d):
    res = build_connection(general_curve(m, d), 20)
    assert all(b > 0 for *_, b in res.diag.normalizers)
    assert len(res.diag.normalizers) == res.C.ncols - 1
    # diagonal normalization entries b^{n,op}_{k',k} of B_n
    for (n1, kp, op, ks, b) in res.diag.normalizers:
        assert res.pair.B(op)[n1 - 1][kp - 1, ks - 1] == pytest.approx(b, rel=1e-8, abs=1e-12)


def test_leading_jacobi_blocks():
    c1 = general_curve(1, 4)
    r1 = build_connection(c1, 4)
    assert r1.pair.Ax[0][0, 0] == pytest.approx(r1.ops.X[0, 0], abs=1e-15)
    np.testing.assert_allclose(r1.pair.Bx[0][:, 0], [r1.ops.X[1, 0], 0.0], atol=1e-15)
    r2 = build_connection(general_curve(2, 5), 4)
    assert r2.pair.Ay[0][0, 0] == 0.0


@pytest.mark.parametrize("m,d", [(1, 4), (2, 5)])
def test_assemble_jacobi_matches_engine(m, d):
    res = build_connection(general_curve(m, d), 12)
    pair = assemble_jacobi(res.C, res.ops)
    for op in ("x", "y"):
        for a, b in zip(pair.A(op), res.pair.A(op)):
            np.testing.assert_allclose(a, b, atol=1e-13)
        for a, b in zip(pair.B(op), res.pair.B(op)):
            np.testing.assert_allclose(a, b, atol=1e-13)


def test_jacobi_banded_form():
    res = build_connection(CurveSpec(1, BENCH1["cubic"]), 8)
    J = res.pair.to_dense("y")
    np.testing.assert_array_equal(res.pair.to_banded("y").to_dense(), J)
    np.testing.assert_array_equal(J, J.T)


def test_deterministic():
    c = CurveSpec(2, PHI7)
    a = build_connection(c, 20).C.to_dense()
    b = build_connection(c, 20).C.to_dense()
    assert a.tobytes() == b.tobytes()


def test_connection_matrix_dense_round_trip():
    res = build_connection(general_curve(2, 5), 10)
    D = res.C.to_dense()
    R = ConnectionMatrix.from_dense(D, 2, 5, 10)
    np.testing.assert_array_equal(R.to_dense(D.shape[0]), D)
    np.testing.assert_array_equal(res.C.to_sparse().toarray(), D)


# --------------------------------------------------------------------------- evaluation

@pytest.mark.parametrize("m,d", [(1, 3), (1, 5), (2, 4), (2, 7)])
def test_eval_Y_gram(m, d):
    c = general_curve(m, d)
    res = build_connection(c, 8)
    x, y, wt = curve_nodes(c, 60)
    Yv = eval_Y(res.C, c, res.ops, x, y)
    np.testing.assert_allclose((Yv * wt[:, None]).T @ Yv, np.eye(Yv.shape[1]), atol=1e-10)
    P = pbasis_eval(c, res.ops, x, y, 0)
    np.testing.assert_array_equal(Yv[:, 0], P[:, 0])


def test_eval_Y_checks_points():
    c = CurveSpec(1, BENCH1["cubic"])
    res = build_connection(c, 3)
    with pytest.raises(PointOffCurve):
        eval_Y(res.C, c, res.ops, [0.2], [5.0])
    assert eval_Y(res.C, c, res.ops, [0.2], [c.phi(0.2)], N=1).shape == (1, 3)


@given(arrays(float, (6, 4), elements=st.floats(-5, 5)))
def test_canonical_signs(A):
    S = canonical_signs(A)
    np.testing.assert_array_equal(np.abs(S), np.abs(A))
    np.testing.assert_array_equal(canonical_signs(-A), S)
    for j in range(4):
        nz = np.flatnonzero(np.abs(S[:, j]) > 1e-10 * np.max(np.abs(S[:, j])))
        if nz.size:
            assert S[nz[0], j] > 0
