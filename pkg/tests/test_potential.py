import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doublinglab.potential import (
    PotentialSpec,
    SamplingFunction,
    eval_f,
    halfline_potential,
    halfline_potentials,
    nondeterminism_witness,
    wholeline_potential,
    wholeline_potentials,
)
from doublinglab.symbolic import TwoSidedDigitSequence, encode, restrict_to_halfline, sample_bernoulli

COS = SamplingFunction.cosine()


def test_eval_f_examples():
    assert eval_f(COS, 0.0) == 1.0
    assert eval_f(COS, 1 / 3) == pytest.approx(math.cos(2 * math.pi / 3), abs=1e-15)
    assert eval_f(COS, 1 / 3) == pytest.approx(-0.5, abs=1e-15)
    assert eval_f(SamplingFunction.step(0.5), 0.5) == 0.0
    assert eval_f(SamplingFunction.step(0.5), 0.4999) == 1.0


def test_table_half_open_cells_and_clamp():
    f = SamplingFunction.table([1.0, 2.0, 3.0, 4.0])
    assert f(np.array([0.0, 0.25, 0.2499, 0.5, 0.75, np.nextafter(1.0, 0)])).tolist() == [1, 2, 1, 3, 4, 4]


def test_eval_f_rejects_outside_circle():
    with pytest.raises(ValueError):
        eval_f(COS, 1.0)


def test_sampling_function_validation():
    with pytest.raises(ValueError):
        SamplingFunction.table([1.0, 1.0])
    with pytest.raises(ValueError):
        SamplingFunction.step(1.0)
    with pytest.raises(ValueError):
        SamplingFunction("sine")
    assert SamplingFunction.constant(0.0).sup == 0.0
    assert SamplingFunction.table([0.5, -3.0]).sup == 3.0


def test_sampling_function_record_roundtrip(tmp_path):
    for f in (COS, SamplingFunction.step(0.3), SamplingFunction.table([1, -1]), SamplingFunction.constant(0)):
        assert SamplingFunction.from_record(f.to_record()) == f
    path = tmp_path / "f.txt"
    path.write_text("1.5\n-0.5\n2\n")
    f = SamplingFunction.from_record({"kind": "table", "params": {"path": str(path)}})
    assert f.values == (1.5, -0.5, 2.0)
    with pytest.raises(ValueError):
        SamplingFunction.from_record({"kind": "step", "params": {"c": 0.5, "extra": 1}})


def test_potential_spec_validation():
    with pytest.raises(ValueError):
        PotentialSpec(0.0, COS)
    with pytest.raises(ValueError):
        PotentialSpec(1.0, COS, base=1)


def test_halfline_potential_one_third():
    spec = PotentialSpec(1.0, COS)
    om = encode(Fraction(1, 3))
    # orbit of 1/3 under doubling: 2/3, 1/3, 2/3, ...
    assert halfline_potential(spec, om, 1) == pytest.approx(-0.5, abs=1e-15)
    assert halfline_potential(spec, om, 2) == pytest.approx(-0.5, abs=1e-15)


def test_halfline_matches_exact_orbit():
    spec = PotentialSpec(1.3, COS, base=3)
    x = Fraction(5, 17)
    om = encode(x, 3)
    v = halfline_potentials(spec, om, 1, 40)
    exact = [1.3 * math.cos(2 * math.pi * float((3**n * x) % 1)) for n in range(1, 41)]
    assert np.allclose(v, exact, atol=1e-13, rtol=0)


def test_zero_table_gives_zero_potential():
    spec = PotentialSpec(1.0, SamplingFunction.constant(0.0))
    assert np.all(halfline_potentials(spec, restrict_to_halfline(sample_bernoulli(1)), 1, 100) == 0)


def test_vectorized_equals_scalar():
    spec = PotentialSpec(2.0, COS)
    om = restrict_to_halfline(sample_bernoulli(8))
    v = halfline_potentials(spec, om, 1, 300)
    assert [halfline_potential(spec, om, n) for n in range(1, 301)] == v.tolist()


def test_restriction_consistency_bit_exact():
    spec = PotentialSpec(2.0, COS)
    for seed in range(5):
        om = sample_bernoulli(seed)
        half = halfline_potentials(spec, restrict_to_halfline(om), 1, 10_000)
        whole = wholeline_potentials(spec, om, 1, 10_000)
        assert np.array_equal(half, whole)
        assert wholeline_potential(spec, om, 1) == halfline_potential(spec, restrict_to_halfline(om), 1)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(-2000, 2000),
       f=st.sampled_from([COS, SamplingFunction.step(0.37), SamplingFunction.table([0.1, -2.0, 0.7])]))
def test_stationarity_under_shift(seed, n, f):
    spec = PotentialSpec(1.7, f)
    om = sample_bernoulli(seed)
    assert wholeline_potential(spec, om, n + 1) == wholeline_potential(spec, om.shift(1), n)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), lam=st.floats(0.01, 10.0),
       f=st.sampled_from([COS, SamplingFunction.step(0.2), SamplingFunction.table([3.0, -1.0])]))
def test_boundedness(seed, lam, f):
    spec = PotentialSpec(lam, f)
    v = wholeline_potentials(spec, sample_bernoulli(seed), -500, 1001)
    assert np.max(np.abs(v)) <= spec.bound


def test_constant_table_wholeline_is_constant():
    spec = PotentialSpec(2.0, SamplingFunction.constant(0.25))
    v = wholeline_potentials(spec, sample_bernoulli(0), -100, 201)
    assert np.all(v == 0.5)


def test_wholeline_reads_only_later_digits():
    spec = PotentialSpec(1.0, COS)
    om = sample_bernoulli(21)
    patched = om.with_digits({5: 1 - om.digit(5)})
    a = wholeline_potentials(spec, om, -10, 30)
    b = wholeline_potentials(spec, patched, -10, 30)
    sites = np.arange(-10, 20)
    assert np.array_equal(a[sites >= 5], b[sites >= 5])
    assert a[sites == 4] != b[sites == 4]


@pytest.mark.parametrize("f", [COS, SamplingFunction.step(0.5)])
def test_nondeterminism_witness(f):
    spec = PotentialSpec(1.0, f)
    for seed in range(20):
        om = sample_bernoulli(seed)
        other, v0, w0 = nondeterminism_witness(spec, om)
        assert np.array_equal(wholeline_potentials(spec, om, 1, 2000),
                              wholeline_potentials(spec, other, 1, 2000))
        if f is COS:
            # flipping the leading digit moves theta by 1/2: cos -> -cos
            assert w0 == pytest.approx(-v0, abs=1e-12)
        else:
            assert {v0, w0} == {0.0, 1.0}


def test_base_mismatch_rejected():
    with pytest.raises(ValueError):
        halfline_potentials(PotentialSpec(1.0, COS, base=3), encode(Fraction(1, 3)), 1, 4)


def test_two_sided_periodic_potential():
    spec = PotentialSpec(1.0, COS)
    om = TwoSidedDigitSequence.periodic([0, 1])
    v = wholeline_potentials(spec, om, -4, 9)
    assert np.allclose(v, -0.5, atol=1e-15)
