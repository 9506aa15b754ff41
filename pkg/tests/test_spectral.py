import math
from fractions import Fraction

import numpy as np
import pytest

from doublinglab.cocycle import sample_sequence
from doublinglab.operator import BoundaryCondition, TridiagonalOperator, build_halfline_box
from doublinglab.potential import PotentialSpec, SamplingFunction
from doublinglab.spectral import (
    BandSet,
    EigenPair,
    band_edges_oracle,
    band_gamma_check,
    decay_csv,
    decay_report,
    discriminant,
    eigensolve,
    eigensolve_arrays,
    mid_spectrum_pr,
    participation_ratio,
    period_potential,
    periodic_bands,
)
from doublinglab.symbolic import DigitSequence, encode

ZERO = PotentialSpec(1.0, SamplingFunction.constant(0.0))
COS1 = PotentialSpec(1.0, SamplingFunction.cosine())
COS2 = PotentialSpec(2.0, SamplingFunction.cosine())
ALT = PotentialSpec(1.0, SamplingFunction.table([1.0, -1.0]))
THIRD = encode(Fraction(1, 3))


# -- eigensolver ----------------------------------------------------------------

def test_free_boxes():
    w = [p.eigenvalue for p in eigensolve(build_halfline_box(ZERO, encode(0), 2))]
    assert w == pytest.approx([-1, 1], abs=1e-14)
    w = [p.eigenvalue for p in eigensolve(build_halfline_box(ZERO, encode(0), 5))]
    assert np.allclose(w, np.sort(2 * np.cos(np.arange(1, 6) * np.pi / 6)), atol=1e-10)


def test_diagonal_only_harness():
    # hopping suppressed: eigenvalues are the sorted diagonal
    d = np.array([3.0, -1.0, 0.5, 2.0])
    w, _ = eigensolve_arrays(TridiagonalOperator(d * 1e12, 1))
    assert np.allclose(w / 1e12, np.sort(d), atol=1e-9)


def test_single_site():
    pairs = eigensolve(TridiagonalOperator([0.3], 1))
    assert pairs[0].eigenvalue == 0.3 and pairs[0].eigenvector.tolist() == [1.0]


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("N", [1, 7, 64, 200])
def test_oracle_agreement(seed, N):
    op = build_halfline_box(COS2, sample_sequence(seed, 0), N, BoundaryCondition(0.1 * seed))
    w, _ = eigensolve_arrays(op)
    assert np.max(np.abs(w - np.linalg.eigvalsh(op.to_dense()))) <= 1e-9


@pytest.mark.parametrize("N", [50, 2000])
def test_residuals_and_normalization(N):
    op = build_halfline_box(COS2, sample_sequence(1, 0), N)
    w, vecs = eigensolve_arrays(op)
    assert w.size == N and np.all(np.diff(w) >= 0)
    res = np.linalg.norm(op.matvec(vecs) - vecs * w, axis=0)
    assert res.max() <= 1e-8 * (2 + COS2.bound)
    assert np.allclose(np.linalg.norm(vecs, axis=0), 1, atol=1e-12)
    lo, hi = COS2.enclosure()
    assert lo <= w.min() and w.max() <= hi


# -- decay / participation ---------------------------------------------------------

def test_decay_exact_exponential():
    n = np.arange(40)
    psi = np.exp(-0.5 * n)
    rep = decay_report(EigenPair(0.0, psi / np.linalg.norm(psi)))
    assert rep.rate == pytest.approx(0.5, abs=1e-6)
    assert rep.residual < 1e-10


def test_participation_ratio_extremes():
    delta = np.zeros(30)
    delta[7] = 1.0
    assert participation_ratio(delta) == 1.0
    assert participation_ratio(np.ones(30) / math.sqrt(30)) == pytest.approx(30)


def test_decay_unreliable_when_peak_at_edge():
    psi = np.exp(-0.5 * np.arange(40))[::-1].copy()
    rep = decay_report(EigenPair(0.0, psi / np.linalg.norm(psi)))
    assert not rep.reliable and rep.rate is None


def test_decay_rejects_short_vectors():
    with pytest.raises(ValueError):
        decay_report(EigenPair(0.0, np.ones(8)))


def test_decay_skips_noise_floor():
    # fit window starts at site 6; entries below 1e-14 are dropped
    rep = decay_report(EigenPair(0.0, np.exp(-2.0 * np.arange(60))))
    assert rep.reliable and rep.n_fit == 11 and rep.rate == pytest.approx(2.0, abs=1e-9)
    rep = decay_report(EigenPair(0.0, np.exp(-3.0 * np.arange(60))))
    assert not rep.reliable and rep.n_fit < 8


def test_localized_eigenvectors_decay():
    op = build_halfline_box(COS2, sample_sequence(0, 0), 400)
    reports = [decay_report(p) for p in eigensolve(op)]
    rates = [r.rate for r in reports if r.reliable]
    assert len(rates) > 100
    assert np.median(rates) > 0.05
    assert all(1 <= r.participation_ratio <= 400 for r in reports)


def test_free_participation_closed_form():
    # sine modes: sum psi^4 = 3 / (2 (N + 1))
    N = 300
    w, vecs = eigensolve_arrays(build_halfline_box(ZERO, encode(0), N))
    prs = [participation_ratio(vecs[:, k]) for k in range(5, N - 5)]
    assert np.allclose(prs, 2 * (N + 1) / 3, rtol=1e-6)


def test_localization_trend():
    N = 2000
    loc = mid_spectrum_pr(build_halfline_box(COS2, sample_sequence(0, 0), N))
    free = mid_spectrum_pr(build_halfline_box(ZERO, encode(0), N))
    assert loc <= N / 20
    assert free >= N / 4


def test_decay_csv():
    rep = decay_report(EigenPair(0.5, np.exp(-0.3 * np.arange(20))))
    text = decay_csv([(rep, 20, 0.0, 7)])
    assert text.splitlines()[0] == "eigenvalue,rate,residual,participation_ratio,N,alpha,seed"
    assert text.splitlines()[1].endswith(",20,0.0,7")


# -- periodic bands ------------------------------------------------------------------

def brute_trace(v, E):
    M = np.eye(2)
    for vk in v:
        M = np.array([[E - vk, -1.0], [1.0, 0.0]]) @ M
    return np.trace(M)


def test_discriminant_matches_brute_trace():
    v = np.array([0.3, -1.2, 0.8, 2.0, -0.1])
    for E in np.linspace(-5, 5, 21):
        assert discriminant(v, E) == pytest.approx(brute_trace(v, E), rel=1e-12, abs=1e-12)


def test_constant_potential_band():
    spec = PotentialSpec(1.0, SamplingFunction.constant(0.7))
    bands = periodic_bands(spec, encode(0))
    assert bands.period == 1
    assert len(bands.bands) == 1
    assert bands.bands[0] == pytest.approx((0.7 - 2, 0.7 + 2), abs=1e-10)


def test_one_third_cosine_band():
    bands = periodic_bands(COS1, THIRD)
    assert np.allclose(bands.potential, -0.5, atol=1e-15)
    assert len(bands.bands) == 1
    assert bands.bands[0] == pytest.approx((-2.5, 1.5), abs=1e-8)
    # the period-2 description has a closed gap at E = -1/2
    assert len(bands.closed_gaps) == 1 and bands.closed_gaps[0] == pytest.approx(-0.5, abs=1e-6)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_alternating_potential_bands(lam):
    spec = PotentialSpec(lam, SamplingFunction.table([1.0, -1.0]))
    bands = periodic_bands(spec, THIRD)
    assert sorted(bands.potential.tolist()) == [-lam, lam]
    r = math.sqrt(lam * lam + 4)
    assert len(bands.bands) == 2
    assert np.allclose(np.ravel(bands.bands), [-r, -lam, lam, r], atol=1e-8)
    # closed form |E^2 - lam^2 - 2|
    E = np.linspace(-3, 3, 101)
    assert np.allclose(bands.discriminant(E), E * E - lam * lam - 2, atol=1e-12)


@pytest.mark.parametrize("x", [Fraction(1, 7), Fraction(3, 11), Fraction(5, 31), Fraction(2, 9)])
@pytest.mark.parametrize("f", [SamplingFunction.cosine(), SamplingFunction.step(0.4)])
def test_bands_match_eigenvalue_oracle(x, f):
    spec = PotentialSpec(1.3, f)
    bands = periodic_bands(spec, encode(x))
    edges = band_edges_oracle(bands.potential)
    got = np.ravel(bands.bands)
    # merged closed gaps drop a doubled interior edge pair
    expected = list(edges)
    for g in bands.closed_gaps:
        near = np.argsort(np.abs(np.asarray(expected) - g))[:2]
        expected = [e for k, e in enumerate(expected) if k not in near]
    assert np.allclose(got, expected, atol=1e-8)
    for e in got:
        assert abs(abs(bands.discriminant(e)) - 2) <= 1e-10 * max(1.0, abs(e)) ** bands.period


def test_bands_ignore_prefix():
    a = periodic_bands(COS2, encode(Fraction(1, 7)))
    b = periodic_bands(COS2, DigitSequence.periodic([1, 1, 0, 1], encode(Fraction(1, 7)).period))
    assert np.allclose(np.ravel(a.bands), np.ravel(b.bands), atol=1e-12)


def test_bands_reject_seeded():
    with pytest.raises(ValueError):
        periodic_bands(COS2, DigitSequence.seeded(1))


def test_band_set_validation_and_csv():
    with pytest.raises(ValueError):
        BandSet(((0.0, 2.0), (1.0, 3.0)), 2, np.zeros(2))
    text = periodic_bands(ALT, THIRD).to_csv()
    lines = text.splitlines()
    assert lines[0] == "band_index,E_lower,E_upper,period"
    assert len(lines) == 3 and lines[2].startswith("1,1.0")


def test_box_spectrum_inside_bands():
    for x in (Fraction(1, 3), Fraction(1, 7), Fraction(4, 15)):
        om = encode(x)
        bands = periodic_bands(COS2, om)
        w, _ = eigensolve_arrays(build_halfline_box(COS2, om, 2000))
        assert bands.contains(w, pad=1e-2).mean() >= 0.99


def test_band_gamma_check_free():
    bands = periodic_bands(ZERO, encode(0))
    rep = band_gamma_check(ZERO, encode(0), bands, n=100_000)
    assert rep.passed
    mid = [p for p in rep.points if p.where == "band"][0]
    assert mid.energy == 0.0 and mid.mean <= 1e-3
    off = {p.energy: p.mean for p in rep.points if p.where == "gap"}
    assert off[2.5] == pytest.approx(math.acosh(1.25), abs=1e-3)


def test_band_gamma_check_free_outside_point():
    from doublinglab.cocycle import propagate
    assert propagate(ZERO, encode(0), 3.0, 100_000).exponent == pytest.approx(0.9624, abs=1e-4)


def test_band_gamma_check_alternating():
    bands = periodic_bands(ALT, THIRD)
    rep = band_gamma_check(ALT, THIRD, bands, n=100_000)
    assert rep.passed
    for p in rep.points:
        if p.where == "band":
            assert p.mean <= 2e-4
        else:
            assert p.mean > 0.1


def test_period_potential_uses_tail():
    om = DigitSequence.periodic([1, 1, 1], [0, 1])
    v = period_potential(COS1, om)
    assert v.size == 2 and np.allclose(v, -0.5)
