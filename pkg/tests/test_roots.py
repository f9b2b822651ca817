import numpy as np
import pytest

from hyperdisp import corpus
from hyperdisp.roots import (FrequencyGrid, JetError, PairingError, RootSolveError, pair_principal, root_bound,
                             root_jet, root_jets, solve_roots, solve_roots_batch, sort_roots, track_field)
from hyperdisp.symbols import TauPolynomial, discriminant_at, evaluate_symbol


def quadratic(b, c):
    d = np.sqrt(complex(b * b - 4 * c))
    return np.array([(-b + d) / 2, (-b - d) / 2])


def same_multiset(a, b, tol=1e-10):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a[:, None] - b[None, :]).min(axis=1).max() < tol and \
        np.abs(a[:, None] - b[None, :]).min(axis=0).max() < tol


def test_quadratic_oracle():
    r = solve_roots(TauPolynomial(np.array([1, -1j, -1])))
    assert same_multiset(r, quadratic(-1j, -1))
    assert same_multiset(r, [(1j + np.sqrt(3)) / 2, (1j - np.sqrt(3)) / 2])
    assert same_multiset(solve_roots([1, 0, -25]), [5, -5])


def test_warm_start_preserves_labels():
    warm = np.array([-1.01, 0.02, 0.99])
    r = solve_roots([1, 0, -1, 0], warm=warm)
    np.testing.assert_allclose(r, [-1, 0, 1], atol=1e-12)
    r2 = solve_roots([1, 0, -1, 0], warm=warm[::-1])
    np.testing.assert_allclose(r2, [1, 0, -1], atol=1e-12)


def test_root_bound_and_residuals():
    rng = np.random.default_rng(2)
    c = np.concatenate([np.ones((200, 1)), rng.normal(size=(200, 6)) + 1j * rng.normal(size=(200, 6))], axis=1)
    z, res = solve_roots_batch(c)
    assert np.all(res < 1e-9)
    bound = 2 * np.maximum(1, np.max(np.abs(c[:, 1:]) ** (1 / np.arange(1, 7)), axis=1))
    assert np.all(np.abs(z).max(axis=1) <= bound + 1e-12)
    assert np.all(root_bound(c) >= np.abs(z).max(axis=1) - 1e-12)
    for i in range(0, 200, 37):
        assert same_multiset(z[i], np.roots(c[i]), 1e-8)


def test_vieta():
    rng = np.random.default_rng(5)
    S = corpus.get("fp_2_1")
    xi = rng.uniform(-3, 3, size=(50, 1))
    c = S.coefficients(xi)
    z, _ = solve_roots_batch(c)
    np.testing.assert_allclose(z.sum(axis=1), -c[:, 1], rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(np.prod(z, axis=1), (-1) ** S.order * c[:, -1], rtol=1e-10, atol=1e-10)


def test_non_monic_rejected():
    with pytest.raises(ValueError):
        solve_roots_batch(np.array([2.0, 1.0, 1.0]))


def test_solver_reports_failure():
    # a residual tolerance no solver can meet triggers the error path with best residuals attached
    with pytest.raises(RootSolveError) as exc:
        solve_roots([1, 1e-3, 1, 3], tol=0.0)
    assert exc.value.roots is not None


def test_dissipative_tracking_branches():
    S = corpus.get("dissipative_wave_1d")
    f = track_field(S, FrequencyGrid.cube(1, 2.0, 513))
    xi = f.xi[:, 0]
    exact = np.stack([(1j + np.sqrt(4 * xi ** 2 - 1 + 0j)) / 2, (1j - np.sqrt(4 * xi ** 2 - 1 + 0j)) / 2], axis=1)
    for k in range(2):
        assert np.abs(f.roots[:, k][:, None] - exact).min(axis=1).max() < 1e-7
    # flagged cells only near |xi| = 1/2
    assert np.all(np.abs(np.abs(xi[f.flags]) - 0.5) < 0.05)
    assert f.flags[np.argmin(np.abs(xi - 0.5))]
    # continuity away from flags
    d = np.abs(np.diff(f.roots, axis=0)).max(axis=1)
    ok = ~(f.flags[1:] | f.flags[:-1])
    assert d[ok].max() < 0.1


def test_kg_tracking_gap():
    f = track_field(corpus.get("kg_1d"), FrequencyGrid.cube(1, 3.0, 301))
    assert not f.flags.any()
    assert f.gap.min() == pytest.approx(2.0, abs=1e-9)
    np.testing.assert_allclose(np.sort(f.roots.real, axis=1)[:, 1], np.sqrt(1 + f.xi[:, 0] ** 2), atol=1e-10)


def test_wave_crosses_only_at_origin():
    f = track_field(corpus.get("wave_2d"), FrequencyGrid.cube(2, 2.0, 21))
    r = f.norms()
    assert f.flags[r == 0].all()
    assert not f.flags[r > 0.5].any()


def test_root_growth_bound():
    for name in ("fp_2_1", "kg_2d", "grad13"):
        S = corpus.get(name)
        f = track_field(S, FrequencyGrid.cube(S.dimension, 5.0, 21 if S.dimension == 2 else 101))
        c = np.abs(f.roots).max(axis=-1) / (1 + f.norms())
        assert c.max() < 10


def test_sweep_order_invariance():
    S = corpus.get("fp_1_2")
    g = FrequencyGrid.cube(2, 2.0, 25)
    a = track_field(S, g, axis_order=[0, 1])
    b = track_field(S, g, axis_order=[1, 0])
    np.testing.assert_allclose(sort_roots(a.roots), sort_roots(b.roots), atol=1e-12)


def test_discriminant_flag_consistency():
    S = corpus.get("dissipative_wave_1d")
    f = track_field(S, FrequencyGrid.cube(1, 2.0, 401))
    tiny = f.disc < f.disc_threshold
    assert np.all(f.gap[tiny] < 1e-4)
    np.testing.assert_allclose(f.disc, np.abs(discriminant_at(S, f.xi)), rtol=1e-12)


def test_pairing_dissipative_and_kg():
    S = corpus.get("dissipative_wave_1d")
    f = track_field(S, FrequencyGrid.cube(1, 20.0, 801))
    rep = pair_principal(f, S)
    xi = np.abs(f.xi[:, 0])
    outer = xi >= 10.0
    exact = np.sqrt(0.25 + (np.sqrt(xi[outer] ** 2 - 0.25) - xi[outer]) ** 2).max()
    assert rep.bounded and rep.sup_deviation == pytest.approx(exact, rel=1e-9)
    assert rep.sup_deviation < 0.501
    K = corpus.get("kg_1d")
    fk = track_field(K, FrequencyGrid.cube(1, 20.0, 801))
    rk = pair_principal(fk, K)
    assert rk.sup_deviation <= 1 / (2 * 10.0) + 1e-9
    W = corpus.get("wave_1d")
    rw = pair_principal(track_field(W, FrequencyGrid.cube(1, 5.0, 101)), W)
    assert rw.sup_deviation < 1e-12


def test_pairing_detects_growth():
    W = corpus.get("wave_1d")
    f = track_field(W, FrequencyGrid.cube(1, 50.0, 201))
    f.roots = f.roots + 0.01j * f.norms()[:, None] ** 2
    with pytest.raises(PairingError):
        pair_principal(f, W)


def test_kg_jet_at_origin():
    J = root_jet(corpus.get("kg_1d"), [0.0], seed=1.0)
    assert J.value == pytest.approx(1.0)
    np.testing.assert_allclose(J.gradient, [0], atol=1e-14)
    np.testing.assert_allclose(J.hessian, [[1]], atol=1e-12)


def test_wave_jet_rank_deficient():
    J = root_jet(corpus.get("wave_2d"), [1.0, 0.0], seed=1.0)
    np.testing.assert_allclose(J.gradient, [1, 0], atol=1e-12)
    np.testing.assert_allclose(J.hessian, [[0, 0], [0, 1]], atol=1e-12)
    assert np.linalg.matrix_rank(J.hessian.real, tol=1e-8) == 1


def test_fp_lower_root_curvature():
    J = root_jet(corpus.get("fp_1_1"), [0.0], seed=0.0)
    assert abs(J.value) < 1e-14
    assert J.hessian[0, 0] == pytest.approx(2j, abs=1e-10)


def test_jet_rejects_double_root():
    with pytest.raises(JetError):
        root_jet(corpus.get("dissipative_wave_1d"), [0.5], seed=0.5j)


def test_jets_match_finite_differences():
    S = corpus.get("kg_2d")
    rng = np.random.default_rng(0)
    xi = rng.uniform(-2, 2, size=(20, 2))
    tau = np.sqrt(1 + (xi ** 2).sum(axis=1)) + 0j
    _, g, H, ok, _ = root_jets(S, xi, tau)
    assert ok.all()
    h = 1e-4
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        fd = (np.sqrt(1 + ((xi + e) ** 2).sum(1)) - np.sqrt(1 + ((xi - e) ** 2).sum(1))) / (2 * h)
        np.testing.assert_allclose(g[:, d].real, fd, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(H, np.swapaxes(H, -1, -2), atol=1e-12)


def test_field_csv(tmp_path):
    f = track_field(corpus.get("kg_1d"), FrequencyGrid.cube(1, 1.0, 5))
    f.to_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "node,xi1,k,re_tau,im_tau,abs_disc"
    assert len(lines) == 1 + 5 * 2


def test_grid_validation_and_roundtrip():
    g = FrequencyGrid.cube(2, 3.0, 11)
    assert FrequencyGrid.from_dict(g.to_dict()) == g
    p = FrequencyGrid.radial(2, 0.1, 2.0, 10, 16)
    assert FrequencyGrid.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        FrequencyGrid(((0.0, 1.0, 1),))
    with pytest.raises(ValueError):
        FrequencyGrid(((1.0, 0.0, 5),))


def test_evaluate_consistency_on_field():
    S = corpus.get("fp_2_1")
    f = track_field(S, FrequencyGrid.cube(1, 2.0, 41))
    for i in range(0, 41, 10):
        c = evaluate_symbol(S, f.xi[i]).coefficients
        assert np.abs(np.polyval(c, f.roots[i])).max() < 1e-9 * (1 + np.abs(c).sum())
