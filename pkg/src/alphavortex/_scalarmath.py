"""Scalar kernel functions, shared between the plain-Python API and the
compiled N-body loops.

Everything here is written against ``math`` only so that the exact same
function objects can be compiled with numba (same libm, same operation
order, hence bitwise-identical results on both paths).

Branch layout for f(z) = ((1+z)e^{-z} - 1) / (4 pi z^2):

* z <= 1e-2   degree-8 Taylor polynomial of f.  Direct evaluation loses
              about 2*log10(1/z) digits to cancellation, which is
              unacceptable below 1e-2 in 64-bit arithmetic.
* z <= 0.9    Taylor series of the numerator (degree 26).  The closed
              form still cancels 1-2 digits here; the series does not.
* z >  0.9    closed form, cancellation factor below ~16.

f'(z) and the scaled Green function follow the same pattern.
"""

import math

FOUR_PI = 4.0 * math.pi

Z_SERIES = 1e-2
Z_MID = 0.9

# Numerator series of f, highest order first:
# (1+z)e^{-z} - 1 = z^2 * sum_{n=2..26} (-1)^(n-1) (n-1)/n! z^(n-2)
_F_NUMER_DESC = tuple(
    (1.0 if n % 2 else -1.0) * (n - 1) / math.factorial(n) for n in range(26, 1, -1)
)

# Numerator series of f', highest order first:
# 2 - (2+2z+z^2)e^{-z} = z^3 * sum_{j=0..23} (-1)^j (j+1)(j+2)/(j+3)! z^j
_FP_NUMER_DESC = tuple(
    (1.0 if j % 2 == 0 else -1.0) * (j + 1) * (j + 2) / math.factorial(j + 3)
    for j in range(23, -1, -1)
)


def f_raw(z):
    """f(z) = ((1+z)e^{-z} - 1)/(4 pi z^2), series-stabilized; z >= 0."""
    if z <= Z_SERIES:
        # degree-8 Taylor of f itself; handles z = 0 (limit -1/(8 pi))
        acc = -1.0 / 403200.0
        acc = acc * z + 1.0 / 45360.0
        acc = acc * z - 1.0 / 5760.0
        acc = acc * z + 1.0 / 840.0
        acc = acc * z - 1.0 / 144.0
        acc = acc * z + 1.0 / 30.0
        acc = acc * z - 1.0 / 8.0
        acc = acc * z + 1.0 / 3.0
        acc = acc * z - 1.0 / 2.0
        return acc / FOUR_PI
    if z <= Z_MID:
        acc = 0.0
        for c in _F_NUMER_DESC:
            acc = acc * z + c
        return acc / FOUR_PI
    return ((1.0 + z) * math.exp(-z) - 1.0) / (FOUR_PI * z * z)


def f_prime_raw(z):
    """f'(z) = (2 - (2+2z+z^2)e^{-z})/(4 pi z^3), series-stabilized; z >= 0."""
    if z <= Z_SERIES:
        acc = 1.0 / 443520.0
        acc = acc * z - 1.0 / 50400.0
        acc = acc * z + 1.0 / 6480.0
        acc = acc * z - 1.0 / 960.0
        acc = acc * z + 1.0 / 168.0
        acc = acc * z - 1.0 / 36.0
        acc = acc * z + 1.0 / 10.0
        acc = acc * z - 1.0 / 4.0
        acc = acc * z + 1.0 / 3.0
        return acc / FOUR_PI
    if z <= Z_MID:
        acc = 0.0
        for c in _FP_NUMER_DESC:
            acc = acc * z + c
        return acc / FOUR_PI
    return (2.0 - (2.0 + 2.0 * z + z * z) * math.exp(-z)) / (FOUR_PI * z * z * z)


def green_scaled_raw(u):
    """4*pi*alpha*G_alpha as a function of u = s/alpha: (1 - e^{-u})/u."""
    if u <= Z_SERIES:
        # degree-8 Taylor; handles u = 0 (limit 1)
        acc = 1.0 / 362880.0
        acc = acc * u - 1.0 / 40320.0
        acc = acc * u + 1.0 / 5040.0
        acc = acc * u - 1.0 / 720.0
        acc = acc * u + 1.0 / 120.0
        acc = acc * u - 1.0 / 24.0
        acc = acc * u + 1.0 / 6.0
        acc = acc * u - 1.0 / 2.0
        acc = acc * u + 1.0
        return acc
    return -math.expm1(-u) / u
