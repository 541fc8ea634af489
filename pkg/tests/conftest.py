"""Independent oracles shared by the tests.

Nothing here touches the package's series or composition code: the Rician
CDF comes from adaptive quadrature of its density and drop probabilities are
built from those values directly.
"""

import itertools
import math

import pytest
from scipy import integrate, special


def q1_quad(a, b):
    """Marcum-Q by quadrature: returns ``(Q1, 1 - Q1)``."""
    if b == 0:
        return 1.0, 0.0
    density = lambda x: x * math.exp(-0.5 * (x - a) ** 2) * special.i0e(a * x)
    cdf = integrate.quad(density, 0.0, b, epsabs=1e-16, epsrel=1e-13, limit=400)[0]
    return 1.0 - cdf, cdf


def rician_cdf_quad(c, rate, snr, q=1):
    a = math.sqrt(2 * c / (1 - c))
    b = math.sqrt(2 * (2**rate - 1) / (snr * (1 - c) * q))
    return q1_quad(a, b)[1]


def pdp_quad(c, rate, snr, q):
    survive = 1.0
    for ck, qk in zip(c, q):
        survive *= 1.0 - rician_cdf_quad(ck, rate, snr, qk)
    return 1.0 - survive


def k_const(c, rate, snr):
    phi = (2**rate - 1) / snr
    return phi / (1 - c) * math.exp(-c / (1 - c))


def pdp_approx_hand(c, rate, snr, q):
    survive = 1.0
    for ck, qk in zip(c, q):
        survive *= 1.0 - min(1.0, k_const(ck, rate, snr) / qk)
    return 1.0 - survive


def compositions_brute(n, total):
    return [q for q in itertools.product(range(1, total + 1), repeat=n) if sum(q) == total]


@pytest.fixture
def oracle():
    class O:
        pass

    o = O()
    o.q1 = q1_quad
    o.cdf = rician_cdf_quad
    o.pdp = pdp_quad
    o.K = k_const
    o.pdp_approx = pdp_approx_hand
    o.compositions = compositions_brute
    return o
