"""Boundary functional, certificates, roots, and their consequences."""

import json
import math

import pytest

from subcrit.certificates import (Certificate, PhiResult, Refusal, best_bound,
                                  certify_subcritical, chi_upper_bound,
                                  compute_phi, critical_root,
                                  decay_upper_bound, greedy_grow,
                                  phi_ising, phi_percolation, region_id)
from subcrit.lattice import LatticeSpec, Region, ball

P_LAT = LatticeSpec.square(mode="p")
B_LAT = LatticeSpec.square(mode="beta")


# ---------------------------------------------------------------------------
# exact phi values
# ---------------------------------------------------------------------------

def test_phi_single_vertex_percolation():
    region = ball(P_LAT, 0)
    result = phi_percolation(P_LAT, region, 0.2)
    assert result.value == pytest.approx(0.8, abs=1e-14)
    assert result.method == "exact"
    assert result.upper_confidence == result.value


def test_phi_ball1_percolation():
    # 4 boundary vertices, each reached with prob p, each with 3 exits: 12 p^2
    region = ball(P_LAT, 1)
    for p in (0.1, 0.25, 0.5):
        result = phi_percolation(P_LAT, region, p)
        assert result.value == pytest.approx(12.0 * p * p, abs=1e-12)
    assert phi_percolation(P_LAT, region, 0.25).value == pytest.approx(0.75)
    assert phi_percolation(P_LAT, region, 0.5).value == pytest.approx(3.0)


def test_phi_single_vertex_ising():
    region = ball(B_LAT, 0)
    for beta in (0.1, 0.25541281188299536, 0.6):
        result = phi_ising(B_LAT, region, beta)
        assert result.value == pytest.approx(4.0 * math.tanh(beta), abs=1e-13)


def test_phi_parameterization_consistency():
    # same bond weight => same percolation phi, p-mode or beta-mode
    region_p, region_b = ball(P_LAT, 1), ball(B_LAT, 1)
    for p in (0.15, 0.4, 0.7):
        beta = -math.log1p(-p)
        a = phi_percolation(P_LAT, region_p, p).value
        b = phi_percolation(B_LAT, region_b, beta).value
        assert a == pytest.approx(b, abs=1e-12)


def test_phi_ising_needs_beta_mode():
    with pytest.raises(ValueError):
        phi_ising(P_LAT, ball(P_LAT, 0), 0.3)


# ---------------------------------------------------------------------------
# critical roots (closed-form oracles for radius 0 and 1)
# ---------------------------------------------------------------------------

def test_percolation_roots_closed_forms():
    assert critical_root("perc", P_LAT, ball(P_LAT, 0)) == pytest.approx(
        0.25, abs=1e-8)
    assert critical_root("perc", P_LAT, ball(P_LAT, 1)) == pytest.approx(
        12.0 ** -0.5, abs=1e-8)


def test_ising_roots_closed_forms():
    assert critical_root("ising", B_LAT, ball(B_LAT, 0)) == pytest.approx(
        math.atanh(0.25), abs=1e-8)
    assert critical_root("ising", B_LAT, ball(B_LAT, 1)) == pytest.approx(
        math.atanh(12.0 ** -0.5), abs=1e-8)


def test_roots_radius_two_regression_pins():
    # no closed form; values pinned from the exact enumeration engine
    assert critical_root("perc", P_LAT, ball(P_LAT, 2)) == pytest.approx(
        0.3217371266307605, abs=1e-7)
    assert critical_root("ising", B_LAT, ball(B_LAT, 2)) == pytest.approx(
        0.3272930958203095, abs=1e-7)


def test_percolation_root_mode_consistency():
    beta_star = critical_root("perc", B_LAT, ball(B_LAT, 1))
    assert 1.0 - math.exp(-beta_star) == pytest.approx(12.0 ** -0.5, abs=1e-8)


# ---------------------------------------------------------------------------
# certificates and refusals
# ---------------------------------------------------------------------------

def test_certificate_and_refusal():
    region = ball(P_LAT, 1)
    cert = certify_subcritical("perc", P_LAT, region, 0.25)
    assert isinstance(cert, Certificate)
    assert cert.exact
    assert cert.phi.value == pytest.approx(0.75)
    assert cert.statement == "param <= critical point"
    refusal = certify_subcritical("perc", P_LAT, region, 0.5)
    assert isinstance(refusal, Refusal)
    assert "not below" in refusal.reason


def test_certificate_refused_exactly_at_one():
    # phi({0}, p=0.25) = 4p = 1: not strictly below 1, must refuse
    result = certify_subcritical("perc", P_LAT, ball(P_LAT, 0), 0.25)
    assert isinstance(result, Refusal)


def test_certificate_json_round_trip_fields():
    cert = certify_subcritical("perc", P_LAT, ball(P_LAT, 1), 0.25)
    blob = json.loads(json.dumps(cert.to_json()))
    assert blob["kind"] == "certificate"
    assert blob["model"] == "percolation"
    assert blob["param"] == 0.25
    assert blob["phi"]["value"] == pytest.approx(0.75)
    assert blob["statement"] == "param <= critical point"
    assert len(blob["region"]) == 5


def test_region_id_format():
    rid = region_id(ball(P_LAT, 1))
    size, reach, digest = rid.split(":")
    assert size == "v5" and reach == "L2" and len(digest) == 8


# ---------------------------------------------------------------------------
# Monte Carlo fallback agrees with the exact path
# ---------------------------------------------------------------------------

def test_phi_percolation_mc_matches_exact():
    region = ball(P_LAT, 2)
    exact = phi_percolation(P_LAT, region, 0.3).value
    mc = phi_percolation(P_LAT, region, 0.3, samples=40_000, seed=91,
                         edge_cap=2)
    assert mc.method == "monte_carlo"
    assert mc.samples == 40_000
    assert mc.upper_confidence > mc.value
    assert abs(mc.value - exact) < 0.08
    assert exact < mc.upper_confidence
    # deterministic under the same seed
    again = phi_percolation(P_LAT, region, 0.3, samples=40_000, seed=91,
                            edge_cap=2)
    assert again.value == mc.value
    assert again.upper_confidence == mc.upper_confidence


def test_phi_percolation_mc_disabled_raises():
    from subcrit.errors import CapExceeded
    with pytest.raises(CapExceeded):
        phi_percolation(P_LAT, ball(P_LAT, 2), 0.3, edge_cap=2, allow_mc=False)


def test_phi_ising_mc_matches_exact():
    region = ball(B_LAT, 1)
    exact = phi_ising(B_LAT, region, 0.25).value
    mc = phi_ising(B_LAT, region, 0.25, sweeps=4000, seed=5, spin_cap=2)
    assert mc.method == "monte_carlo"
    assert abs(mc.value - exact) < 0.08
    assert mc.upper_confidence > mc.value


# ---------------------------------------------------------------------------
# consequences of a certificate
# ---------------------------------------------------------------------------

def test_chi_upper_bound_value_and_errors():
    region = ball(P_LAT, 1)
    phi = phi_percolation(P_LAT, region, 0.25)
    assert chi_upper_bound(region, 0.25, phi) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        chi_upper_bound(region, 0.3, phi)  # parameter mismatch
    hot = phi_percolation(P_LAT, region, 0.5)
    with pytest.raises(ValueError):
        chi_upper_bound(region, 0.5, hot)  # phi >= 1 certifies nothing


def test_decay_upper_bound_value_and_errors():
    region = ball(P_LAT, 1)  # radius_l = 2
    phi = phi_percolation(P_LAT, region, 0.25)
    assert decay_upper_bound(region, phi, 20) == pytest.approx(0.75 ** 10)
    assert decay_upper_bound(region, phi, 1) == 1.0  # below one step
    with pytest.raises(ValueError):
        decay_upper_bound(region, phi, -1)
    hot = phi_percolation(P_LAT, region, 0.5)
    with pytest.raises(ValueError):
        decay_upper_bound(region, hot, 20)


# ---------------------------------------------------------------------------
# search helpers
# ---------------------------------------------------------------------------

def test_best_bound_table_percolation():
    result = best_bound("perc", P_LAT, 2)
    roots = [row.root for row in result.rows]
    assert roots == sorted(roots)
    assert roots[0] == pytest.approx(0.25, abs=1e-8)
    assert roots[1] == pytest.approx(12.0 ** -0.5, abs=1e-8)
    assert all(row.method == "exact" for row in result.rows)
    assert result.param_star == roots[-1]
    region, param_star = result  # tuple-style unpacking
    assert param_star == result.param_star
    assert len(region.vertices) == 13


def test_best_bound_skips_over_cap_radii_without_budget():
    result = best_bound("perc", P_LAT, 3, budget=0)
    last = result.rows[-1]
    assert last.method == "skipped"
    assert math.isnan(last.root)
    assert result.param_star == pytest.approx(0.3217371266307605, abs=1e-7)


def test_greedy_grow_stays_at_origin_when_nothing_helps():
    # adding a neighbor to {0} moves phi from 4p to 3p + 3p^2, worse for p > 1/3
    region = greedy_grow("perc", P_LAT, 0.4, max_size=6)
    assert len(region.vertices) == 1


def test_greedy_grow_improves_phi():
    param = 0.29
    grown = greedy_grow("perc", P_LAT, param, max_size=9)
    assert len(grown.vertices) > 1
    phi_grown = compute_phi("perc", P_LAT, grown, param).value
    phi_origin = compute_phi("perc", P_LAT, ball(P_LAT, 0), param).value
    assert phi_grown < phi_origin


def test_model_aliases_and_unknown_model():
    region = ball(P_LAT, 0)
    for alias in ("perc", "percolation", "bond"):
        assert compute_phi(alias, P_LAT, region, 0.2).value == pytest.approx(0.8)
    with pytest.raises(ValueError):
        compute_phi("potts", P_LAT, region, 0.2)
