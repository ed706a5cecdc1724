"""Sine/cosine-integral validation against independent high-precision oracles."""

import mpmath as mp
import numpy as np
import pytest

from levelstat import sici
from levelstat.scattering import _sici_continued_fraction, _sici_series

mp.mp.dps = 50


def _reference(x):
    # independent oracle: mpmath's arbitrary-precision Si/Ci at 50 digits
    return float(mp.si(x) - mp.pi / 2), float(mp.ci(x))


def _series_oracle(x, terms=50):
    # literal 50-term power series at 50 digits, written out independently
    x = mp.mpf(x)
    si_sum = mp.mpf(0)
    for n in range(terms):
        si_sum += (-1) ** n * x ** (2 * n + 1) / ((2 * n + 1) * mp.factorial(2 * n + 1))
    cin = mp.mpf(0)
    for n in range(1, terms + 1):
        cin += (-1) ** (n + 1) * x ** (2 * n) / (2 * n * mp.factorial(2 * n))
    return float(si_sum - mp.pi / 2), float(mp.euler + mp.log(x) - cin)


@pytest.mark.parametrize("x", [1e-6, 0.01, 0.5, 1.0, 2.0, 3.5, 4.0])
def test_against_series_oracle_small_x(x):
    si, ci = sici(x)
    si_ref, ci_ref = _series_oracle(x)
    assert abs(si - si_ref) < 1e-13
    assert abs(ci - ci_ref) < 1e-13


def test_against_mpmath_small_and_mid():
    xs = np.concatenate([np.geomspace(1e-6, 4.0, 40), np.linspace(4.0, 50.0, 47)])
    for x in xs:
        si, ci = sici(float(x))
        si_ref, ci_ref = _reference(float(x))
        assert abs(si - si_ref) < 1e-12, x
        assert abs(ci - ci_ref) < 1e-12, x


def test_against_mpmath_large():
    for x in np.geomspace(50.0, 1e4, 40):
        si, ci = sici(float(x))
        si_ref, ci_ref = _reference(float(x))
        assert abs(si - si_ref) < 1e-10, x
        assert abs(ci - ci_ref) < 1e-10, x


def test_branch_overlap():
    # series and continued fraction agree where both are valid
    for x in np.linspace(3.0, 5.0, 21):
        s1, c1 = _sici_series(float(x))
        s2, c2 = _sici_continued_fraction(float(x))
        assert abs(s1 - s2) < 1e-13
        assert abs(c1 - c2) < 1e-13


def test_limits():
    si_small, _ = sici(1e-9)
    assert si_small == pytest.approx(-np.pi / 2, abs=1e-8)
    si_big, ci_big = sici(1e4)
    assert abs(si_big) < 2e-4 and abs(ci_big) < 2e-4  # tails fall off like 1/x


def test_derivative_identities():
    # d si/dx = sin(x)/x and d ci/dx = cos(x)/x by central differences
    h = 1e-4
    for x in np.linspace(0.5, 50.0, 34):
        sp, cp = sici(x + h)
        sm, cm = sici(x - h)
        assert abs((sp - sm) / (2 * h) - np.sin(x) / x) < 1e-6
        assert abs((cp - cm) / (2 * h) - np.cos(x) / x) < 1e-6


def test_domain_and_vectorization():
    with pytest.raises(ValueError):
        sici(0.0)
    with pytest.raises(ValueError):
        sici(-1.0)
    si, ci = sici(np.array([0.5, 5.0, 50.0]))
    assert si.shape == (3,) and ci.shape == (3,)
    s0, c0 = sici(0.5)
    assert si[0] == s0 and ci[0] == c0
