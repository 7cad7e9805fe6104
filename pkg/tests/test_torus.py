import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitflow.errors import NeutralityError
from splitflow.problems import sin_power
from splitflow.torus import (
    TorusField,
    TorusGrid,
    aliased_eigenvalue,
    dft,
    fold_symbol,
    graph_norm,
    interpolate,
    l2_norm,
    linear_flow,
    naive_dft,
    poisson_potential,
    project_spectrum,
    read_field_csv,
    sobolev_norm,
    write_field_csv,
)


def random_field(m, seed=0):
    rng = np.random.default_rng(seed)
    return TorusField(TorusGrid(m), rng.standard_normal(m) + 1j * rng.standard_normal(m))


def test_grid_rejects_even_and_small():
    for m in (1, 2, 4, 256):
        with pytest.raises(ValueError):
            TorusGrid(m)


@pytest.mark.parametrize("m", [3, 5, 15, 257])
def test_signed_freq_bijection(m):
    g = TorusGrid(m)
    assert sorted(g.freqs.tolist()) == list(range(-g.l, g.l + 1))
    assert all(g.signed_freq(p) == g.freqs[p] for p in range(m))


def test_dft_constant():
    g = TorusGrid(7)
    c = dft(TorusField(g, np.full(7, 2.5 - 1j)))
    assert c.repr == "coeffs"
    np.testing.assert_allclose(c.data, [2.5 - 1j] + [0] * 6, atol=1e-15)


def test_dft_single_mode():
    g = TorusGrid(9)
    c = dft(TorusField(g, np.exp(2j * np.pi * np.arange(9) / 9)))
    expected = np.zeros(9)
    expected[1] = 1
    np.testing.assert_allclose(c.data, expected, atol=1e-14)


@pytest.mark.parametrize("m", [5, 15, 257])
def test_fast_matches_naive(m):
    u = random_field(m, seed=m)
    np.testing.assert_allclose(dft(u).data, naive_dft(u.data), atol=1e-10)


def test_dft_requires_opposite_repr():
    u = random_field(5)
    with pytest.raises(ValueError):
        dft(u, "inverse")
    with pytest.raises(ValueError):
        dft(dft(u), "forward")


@settings(max_examples=30)
@given(st.sampled_from([3, 5, 15, 33, 101]), st.integers(0, 10_000))
def test_roundtrip_and_parseval(m, seed):
    u = random_field(m, seed)
    c = dft(u)
    back = dft(c, "inverse")
    assert np.max(np.abs(back.data - u.data)) <= 1e-12 * np.max(np.abs(u.data))
    lhs = np.mean(np.abs(u.data) ** 2)
    rhs = np.sum(np.abs(c.data) ** 2)
    assert abs(lhs - rhs) <= 1e-12 * lhs


def test_aliasing_identity():
    u = random_field(11)
    q = np.arange(11)
    for p in (-3, 2, 7):
        direct = np.mean(u.data * np.exp(-2j * np.pi * p * q / 11))
        shifted = np.mean(u.data * np.exp(-2j * np.pi * (p + 11) * q / 11))
        assert abs(direct - shifted) < 1e-13


def test_eigenvalue_examples():
    assert aliased_eigenvalue(0, 5) == 0.0
    assert aliased_eigenvalue(1, 5) == pytest.approx(4 * math.pi**2, rel=1e-15)
    assert aliased_eigenvalue(4, 5) == aliased_eigenvalue(1, 5)


def _exact_fold(p, m):
    nu = Fraction(p, m)
    return nu * nu - 2 * max(nu - Fraction(1, 2), Fraction(0))


@pytest.mark.parametrize("m", [3, 5, 15, 257, 4097])
def test_eigenvalue_fold_formula(m):
    # exact rational evaluation of 4 m^2 h(p/m) must be the square of the signed frequency
    g = TorusGrid(m)
    lam = g.eigenvalues
    for p in range(m):
        k2 = 4 * m * m * _exact_fold(p, m)
        assert k2 == 4 * g.freqs[p] ** 2
        exact = 4 * math.pi**2 * g.freqs[p] ** 2
        assert abs(lam[p] - exact) <= 4 * np.spacing(exact)
    nu = np.arange(m) / m
    np.testing.assert_allclose(4 * m * m * math.pi**2 * fold_symbol(nu), lam, rtol=1e-9, atol=1e-9)


def test_linear_flow_plane_wave():
    g = TorusGrid(15)
    u = TorusField(g, np.exp(2j * np.pi * g.nodes))
    t = 0.37
    out = linear_flow(t, u)
    np.testing.assert_allclose(out.data, np.exp(-4j * np.pi**2 * t) * u.data, atol=1e-13)
    np.testing.assert_array_equal(linear_flow(0.0, u).data, u.data)


def test_linear_flow_on_coeffs():
    u = random_field(9)
    a = linear_flow(0.2, u)
    b = dft(linear_flow(0.2, dft(u)), "inverse")
    np.testing.assert_allclose(a.data, b.data, atol=1e-13)


@settings(max_examples=30)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 999))
def test_flow_isometry_and_group_law(s, t, seed):
    u = random_field(33, seed)
    a = linear_flow(s, linear_flow(t, u))
    b = linear_flow(s + t, u)
    assert abs(u.l2() - b.l2()) <= 1e-12 * u.l2()
    assert l2_norm(a.data - b.data) <= 1e-12 * u.l2() * max(1, abs(s) + abs(t)) * 10


def test_poisson_cosine():
    g = TorusGrid(33)
    rho = TorusField(g, np.cos(2 * np.pi * g.nodes))
    v = poisson_potential(rho)
    np.testing.assert_allclose(v.data, -np.cos(2 * np.pi * g.nodes) / (4 * np.pi**2), atol=1e-12)
    assert np.all(v.data.imag == 0)


def test_poisson_zero_and_neutrality():
    g = TorusGrid(9)
    assert np.all(poisson_potential(TorusField(g, np.zeros(9))).data == 0)
    with pytest.raises(NeutralityError) as exc:
        poisson_potential(TorusField(g, np.full(9, 0.3)))
    assert exc.value.residual == pytest.approx(0.3)


def test_poisson_second_difference():
    # V_xx = rho checked with a spectrally accurate derivative on a smooth neutral rho
    g = TorusGrid(65)
    x = g.nodes
    rho = np.exp(np.sin(2 * np.pi * x))
    rho -= rho.mean()
    v = poisson_potential(TorusField(g, rho)).data
    c = np.fft.fft(v) * (2j * np.pi * g.freqs) ** 2
    np.testing.assert_allclose(np.fft.ifft(c).real, rho, atol=1e-12)


def test_projection_examples():
    g = TorusGrid(15)
    u = random_field(15)
    np.testing.assert_allclose(project_spectrum(u, g.eigenvalues.max()).data, u.data, atol=1e-14)
    low = project_spectrum(u, 4 * np.pi**2 * 0.99)
    np.testing.assert_allclose(low.data, np.full(15, np.mean(u.data)), atol=1e-14)
    two = TorusField(g, np.exp(2j * np.pi * g.nodes) + np.exp(6j * np.pi * g.nodes))
    np.testing.assert_allclose(
        project_spectrum(two, 4 * np.pi**2).data, np.exp(2j * np.pi * g.nodes), atol=1e-13
    )


@settings(max_examples=25)
@given(st.integers(0, 999), st.floats(0, 2e4))
def test_projection_idempotent_selfadjoint(seed, R):
    u, v = random_field(33, seed), random_field(33, seed + 1)
    pu = project_spectrum(u, R)
    np.testing.assert_allclose(project_spectrum(pu, R).data, pu.data, atol=1e-13)
    pv = project_spectrum(v, R)
    lhs = np.vdot(pu.data, v.data)
    rhs = np.vdot(u.data, pv.data)
    assert abs(lhs - rhs) <= 1e-12 * 33


def test_sobolev_examples():
    g = TorusGrid(9)
    u = random_field(9)
    assert sobolev_norm(u, 0) == pytest.approx(u.l2(), rel=1e-13)
    mode = TorusField(g, np.exp(2j * np.pi * g.nodes))
    assert sobolev_norm(mode, 1) == pytest.approx(math.sqrt(1 + 4 * math.pi**2), rel=1e-13)
    with pytest.raises(ValueError):
        sobolev_norm(u, 1.5)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 99))
def test_sobolev_monotone(a, b, seed):
    u = random_field(15, seed)
    lo, hi = sorted((a, b))
    assert sobolev_norm(u, lo) <= sobolev_norm(u, hi) * (1 + 1e-14)


@settings(max_examples=100)
@given(st.integers(0, 10_000), st.floats(0.5, 5e5))
def test_projection_error_bound(seed, R):
    u = random_field(257, seed)
    err = l2_norm(u.data - project_spectrum(u, R).data)
    assert err <= graph_norm(u) / R * (1 + 1e-12)


def test_interpolate_is_exact_for_bandlimited():
    g = TorusGrid(9)
    u = TorusField(g, np.exp(4j * np.pi * g.nodes) + 0.5)
    fine = interpolate(u, 45)
    x = fine.grid.nodes
    np.testing.assert_allclose(fine.data, np.exp(4j * np.pi * x) + 0.5, atol=1e-13)


def test_interpolation_error_rate():
    alpha = 0.01
    fine = TorusGrid(2**16 + 1)
    exact = sin_power(fine.nodes, 1.5 + alpha)
    ms, errs = [33], []
    while ms[-1] < 1000:
        ms.append(2 * ms[-1] + 1)
    for m in ms:
        g = TorusGrid(m)
        u = TorusField(g, sin_power(g.nodes, 1.5 + alpha))
        errs.append(l2_norm(interpolate(u, fine.m).data - exact))
    slope = np.polyfit(np.log(ms), np.log(errs), 1)[0]
    assert slope <= -1.9


def test_csv_roundtrip(tmp_path):
    u = random_field(17, seed=3)
    path = tmp_path / "f.csv"
    write_field_csv(u, path)
    assert path.read_text().splitlines()[0] == "q,x,re,im"
    back = read_field_csv(path)
    assert back.grid.m == 17
    assert np.max(np.abs(back.data - u.data)) <= 1e-15
