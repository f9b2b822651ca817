import numpy as np
import pytest

from hyperdisp import corpus
from hyperdisp.classify import (ClassificationError, CurveSamples, RealBranch, axis_behavior, contact_order,
                                convexity_indices, estimate_codimension, hessian_class, level_set_trace,
                                stability_scan)
from hyperdisp.roots import FrequencyGrid, track_field


def root_kinds(zone):
    return sorted(info.axis.kind for info in zone.roots)


def test_stability_scan_examples(reports):
    for name in ("dissipative_wave_1d", "kg_1d", "wave_2d", "fp_2_1"):
        assert reports(name)[2].stability.passed, name
    _, _, anti = reports("anti_dissipative_1d")
    assert not anti.stability.passed
    assert anti.stability.min_im == pytest.approx(-1.0, abs=1e-9)
    # negative mass: one root dips below the axis for |xi| < 1
    _, f, _ = reports("negative_mass_1d")
    scan = stability_scan(f)
    assert not scan.passed and abs(scan.argmin[0]) < 1


def test_negative_mass_region_and_contact(reports):
    _, _, rep = reports("negative_mass_1d", min_radius=1.0)
    assert rep.stability.passed
    assert rep.zone("excluded")
    (k, beh), = rep.contacts.items()
    assert beh.kind == "meets" and beh.s == 1 and beh.on_boundary


def test_dissipative_contact_at_origin(reports):
    _, _, rep = reports("dissipative_wave_1d")
    (k, beh), = rep.contacts.items()
    assert beh.kind == "meets" and beh.isolated and not beh.on_boundary
    assert beh.s == 2 and beh.s1 == 2
    assert beh.xi0[0] == pytest.approx(0.0, abs=1e-12)
    # Im tau_- = xi^2 + O(xi^4) near the origin
    assert beh.c0 == pytest.approx(1.0, rel=0.05)


def test_dissipative_multiplicities(reports):
    _, _, rep = reports("dissipative_wave_1d")
    centres = sorted(np.mean(ms.points[:, 0]) for ms in rep.multiplicities)
    assert len(centres) == 2
    assert centres[0] == pytest.approx(-0.5, abs=0.03) and centres[1] == pytest.approx(0.5, abs=0.03)
    for ms in rep.multiplicities:
        assert ms.L == 2 and ms.ell == 1 and not ms.contains_axis
        # the double root is tau = i/2
        assert ms.centre_value == pytest.approx(0.5j, abs=0.05)


def test_dissipative_large_zone_separated(reports):
    _, _, rep = reports("dissipative_wave_1d")
    (large,) = rep.zone("large")
    assert root_kinds(large) == ["separated", "separated"]
    assert min(i.axis.delta for i in large.roots) == pytest.approx(0.5, abs=1e-9)


def test_kg_nondegenerate(reports):
    for name, n in (("kg_1d", 1), ("kg_2d", 2)):
        _, _, rep = reports(name)
        (large,) = rep.zone("large")
        assert rep.multiplicities == [] and not rep.contacts
        for info in large.roots:
            assert info.axis.kind == "on_axis"
            assert info.hessian.kind == "nondegenerate" and info.hessian.rank == n
            # |det Hess| ~ |xi|^-(n+2) for the Klein-Gordon branch
            assert info.hessian.M == pytest.approx(n + 2, abs=0.1)


def test_wave_rank_deficient_and_convex(reports):
    _, _, rep = reports("wave_2d")
    (large,) = rep.zone("large")
    for info in large.roots:
        assert info.hessian.kind == "rank_deficient" and info.hessian.rank == 1
        assert info.contact.all_convex
        assert info.contact.gamma == 2 and info.contact.gamma0 == 2
    (ms,) = rep.multiplicities
    assert ms.contains_axis and ms.ell == 2


def test_wave_hessian_determinant_vanishes():
    S = corpus.get("wave_2d")
    f = track_field(S, FrequencyGrid.cube(2, 3.0, 13))
    region = f.norms() > 0.5
    hc = hessian_class(S, f, 1, region)
    assert hc.kind == "rank_deficient" and hc.rank == 1


def test_quartic_contact_order():
    S = corpus.get("quartic_2d")
    branch = RealBranch(S, -1)
    ci = convexity_indices(S, branch, [1.0], sigma_count=8, graph_count=16, extra_planes=0)
    # flat points of the level curve on the coordinate axes
    assert ci.gamma == 4 and ci.gamma0 == 4
    assert ci.all_convex


def test_kg_level_set_radius():
    S = corpus.get("kg_2d")
    cs = level_set_trace(S, RealBranch(S, -1), 2.0, count=32)
    np.testing.assert_allclose(np.linalg.norm(cs.points, axis=1), np.sqrt(3.0), rtol=1e-10)
    assert cs.skipped == 0


def test_circle_contact_order_two():
    S = corpus.get("kg_2d")
    branch = RealBranch(S, -1)
    cs = level_set_trace(S, branch, 2.0, sigma=[np.sqrt(3.0), 0.0], count=16)
    co = contact_order(cs)
    assert co.order == 2 and not co.infinite
    # curvature of the circle of radius sqrt(3): h ~ -s^2 / (2 sqrt 3)
    w = np.max(np.abs(cs.s))
    assert co.coefficients[2] / w ** 2 == pytest.approx(-1 / (2 * np.sqrt(3.0)), rel=1e-6)


def test_synthetic_contact_orders():
    s = np.linspace(-0.3, 0.3, 33)
    quartic = CurveSamples(1.0, None, s=s, h=s ** 4)
    assert contact_order(quartic).order == 4
    segment = CurveSamples(1.0, None, s=s, h=np.zeros_like(s))
    co = contact_order(segment)
    assert co.infinite and co.order is None
    with pytest.raises(ClassificationError):
        contact_order(CurveSamples(1.0, None, s=s[:5], h=s[:5]))


def test_codimension_examples():
    g2 = FrequencyGrid.cube(2, 4.0, 81)
    ell, diag = estimate_codimension([[0.0, 0.0]], g2)
    assert ell == 2 and diag["slope"] == pytest.approx(2.0, abs=0.15)
    th = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    circle = np.stack([np.cos(th), np.sin(th)], axis=1)
    ell, diag = estimate_codimension(circle, g2)
    assert ell == 1 and diag["slope"] == pytest.approx(1.0, abs=0.15)
    g1 = FrequencyGrid.cube(1, 4.0, 401)
    ell, _ = estimate_codimension([[0.5]], g1)
    assert ell == 1


def test_codimension_needs_enough_scales():
    g2 = FrequencyGrid.cube(2, 4.0, 81)
    with pytest.raises(ClassificationError):
        estimate_codimension([[0.0, 0.0]], g2, eps_range=(2.0, 4.0))
    with pytest.raises(ClassificationError):
        estimate_codimension([[3.9, 0.0]], g2)


def test_axis_behavior_kinds():
    f = track_field(corpus.get("kg_1d"), FrequencyGrid.cube(1, 3.0, 121))
    assert axis_behavior(f, 0).kind == "on_axis"
    d = track_field(corpus.get("dissipative_wave_1d"), FrequencyGrid.cube(1, 4.0, 401))
    far = d.norms() > 1.0
    assert axis_behavior(d, 0, far).kind == "separated"
    a = track_field(corpus.get("anti_dissipative_1d"), FrequencyGrid.cube(1, 2.0, 41))
    assert {axis_behavior(a, k).kind for k in range(2)} == {"unstable"}


def test_region_must_be_nonempty():
    f = track_field(corpus.get("kg_1d"), FrequencyGrid.cube(1, 1.0, 11))
    with pytest.raises(ClassificationError):
        axis_behavior(f, 0, np.zeros(f.shape, dtype=bool))


@pytest.mark.parametrize("name", ["dissipative_wave_1d", "kg_2d", "wave_1d", "fp_2_1", "fp_1_2",
                                  "dissipative_wave_2d"])
def test_zones_cover_each_cell_once(reports, name):
    _, f, rep = reports(name)
    assert np.all(rep.coverage() == 1)
    assert rep.coverage().shape == f.shape


def test_report_serialisable(reports):
    import json
    _, _, rep = reports("fp_2_1")
    d = json.loads(json.dumps(rep.to_dict(), default=float))
    assert d["order"] == 3 and {z["id"] for z in d["zones"]} >= {"large-1", "contact-1"}
