"""Special functions and truncated power series used by the analytic expressions.

Everything here is a pure function of its arguments. The hypergeometric
routines accept either Python floats (fast scalar path) or numpy arrays
(vectorized path, used inside fixed quadrature rules).
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, special

EULER_GAMMA = 0.57721566490153286061

_SERIES_EPS = 1e-16
_SERIES_MAX_TERMS = 5000


class ConvergenceError(ArithmeticError):
    """A series or quadrature did not reach its requested accuracy."""

    def __init__(self, message, partial=None, error=None):
        super().__init__(message)
        self.partial = partial
        self.error = error


# ---------------------------------------------------------------------------
# Truncated power series
# ---------------------------------------------------------------------------


class Jet:
    """Truncated Taylor series ``f(s0 + e) = sum_j coeffs[j] e**j + O(e**(m+1))``.

    ``coeffs[j]`` is the j-th Taylor coefficient, i.e. ``f^(j)(s0) / j!``;
    :meth:`derivatives` returns the raw derivatives. Coefficients may carry
    trailing batch dimensions (shape ``(order + 1, *batch)``) so that one jet
    can represent the same expansion at many quadrature nodes at once.
    """

    __slots__ = ("coeffs",)
    __array_priority__ = 100

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim == 0:
            c = c[None]
        self.coeffs = c

    @classmethod
    def variable(cls, value, order):
        """Jet of the identity map ``s -> s`` expanded at ``value``."""
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1,) + value.shape)
        c[0] = value
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, order):
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1,) + value.shape)
        c[0] = value
        return cls(c)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def value(self):
        v = self.coeffs[0]
        return float(v) if v.ndim == 0 else v

    def derivatives(self):
        """Return ``f^(j)(s0)`` for ``j = 0..order``."""
        fact = np.array([math.factorial(j) for j in range(self.order + 1)], dtype=float)
        return self.coeffs * fact.reshape((-1,) + (1,) * (self.coeffs.ndim - 1))

    def __repr__(self):
        return f"Jet(order={self.order}, coeffs={self.coeffs!r})"

    # -- arithmetic ---------------------------------------------------------

    def _lifted(self, other):
        """Coefficients and ``other`` reshaped so batch dimensions broadcast."""
        other = np.asarray(other, dtype=float)
        c = self.coeffs
        extra = other.ndim - (c.ndim - 1)
        if extra > 0:
            c = c.reshape((c.shape[0],) + (1,) * extra + c.shape[1:])
        return c, other[None]

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError("jets of different order cannot be combined")
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            c, other = self._lifted(other)
            c = np.array(np.broadcast_to(c, np.broadcast_shapes(c.shape, other.shape)))
            c[0] = c[0] + other[0]
            return Jet(c)
        return Jet(self.coeffs + o.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            c, other = self._lifted(other)
            return Jet(c * other)
        a, b = self.coeffs, o.coeffs
        m = self.order
        c = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for k in range(m + 1):
            acc = a[0] * b[k]
            for i in range(1, k + 1):
                acc = acc + a[i] * b[k - i]
            c[k] = acc
        return Jet(c)

    __rmul__ = __mul__

    def reciprocal(self):
        a = self.coeffs
        a0 = a[0]
        if np.any(a0 == 0):
            raise ZeroDivisionError("reciprocal of a jet with zero value")
        r = np.zeros_like(a)
        r[0] = 1.0 / a0
        for k in range(1, self.order + 1):
            acc = a[1] * r[k - 1]
            for i in range(2, k + 1):
                acc = acc + a[i] * r[k - i]
            r[k] = -acc / a0
        return Jet(r)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            c, other = self._lifted(other)
            return Jet(c / other)
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def compose(self, outer_coeffs):
        """Compose with a smooth outer function given its Taylor coefficients.

        ``outer_coeffs[j]`` must be the j-th Taylor coefficient of the outer
        function at ``self.value`` (length ``order + 1``, same batch shape).
        """
        t = np.asarray(outer_coeffs, dtype=float)
        if t.shape[0] != self.order + 1:
            raise ValueError("outer coefficient count must equal order + 1")
        delta = Jet(self.coeffs.copy())
        delta.coeffs[0] = 0.0
        out = Jet.constant(t[-1], self.order)
        for j in range(self.order - 1, -1, -1):
            out = out * delta + t[j]
        return out

    def __pow__(self, p):
        """Real power ``self**p`` (value must be positive unless p is a nonnegative integer)."""
        a0 = self.coeffs[0]
        m = self.order
        t = np.empty((m + 1,) + np.shape(a0))
        binom = 1.0
        for j in range(m + 1):
            t[j] = binom * np.power(a0, p - j)
            binom *= (p - j) / (j + 1)
        return self.compose(t)


# ---------------------------------------------------------------------------
# Gauss hypergeometric function on the negative real axis
# ---------------------------------------------------------------------------


def _rgamma(x):
    """1/Gamma(x), zero at the poles."""
    if x <= 0 and x == math.floor(x):
        return 0.0
    return 1.0 / math.gamma(x)


def _series_scalar(a, b, c, z):
    total = 1.0
    term = 1.0
    for n in range(_SERIES_MAX_TERMS):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        total += term
        if abs(term) <= _SERIES_EPS * abs(total):
            return total
        if term == 0.0:
            return total
    raise ConvergenceError(
        f"2F1 series did not converge for a={a}, b={b}, c={c}, z={z}", partial=total
    )


def _series_array(a, b, c, z):
    total = np.ones_like(z)
    term = np.ones_like(z)
    for n in range(_SERIES_MAX_TERMS):
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1))) * z
        total = total + term
        if np.all(np.abs(term) <= _SERIES_EPS * np.abs(total)):
            return total
    raise ConvergenceError(
        f"2F1 series did not converge for a={a}, b={b}, c={c}", partial=total
    )


def _series(a, b, c, z):
    if isinstance(z, np.ndarray):
        return _series_array(a, b, c, z)
    return _series_scalar(a, b, c, z)


def _check_c(c):
    if c <= 0 and c == math.floor(c):
        raise ValueError(f"2F1 undefined for nonpositive integer c={c}")


def _pfaff(a, b, c, x):
    # 2F1(a,b;c;x) = (1-x)^-a 2F1(a, c-b; c; x/(x-1))
    return (1.0 - x) ** (-a) * _series(a, c - b, c, x / (x - 1.0))


def _inversion(a, b, c, x):
    # DLMF 15.8.2 with z = x < 0; requires a - b not an integer.
    mx = -x
    g1 = math.gamma(c) * math.gamma(b - a) * _rgamma(b) * _rgamma(c - a)
    g2 = math.gamma(c) * math.gamma(a - b) * _rgamma(a) * _rgamma(c - b)
    t1 = 0.0 if g1 == 0.0 else g1 * mx ** (-a) * _series(a, a - c + 1.0, a - b + 1.0, 1.0 / x)
    t2 = 0.0 if g2 == 0.0 else g2 * mx ** (-b) * _series(b, b - c + 1.0, b - a + 1.0, 1.0 / x)
    return t1 + t2


def gauss_2f1(a, b, c, x):
    """Gauss hypergeometric function 2F1(a, b; c; x) for real x <= 0.

    Uses the power series for |x| < 0.5, the Pfaff transformation for
    0.5 <= |x| <= 2 and the 1/x connection formula beyond that. When a - b is
    an integer the connection formula degenerates into its logarithmic case;
    there scipy's implementation handles |x| > 2. ``x`` may be a float or an
    ndarray.
    """
    _check_c(c)
    if isinstance(x, np.ndarray) or isinstance(x, (list, tuple)):
        x = np.asarray(x, dtype=float)
        if np.any(x > 0):
            raise ValueError("gauss_2f1 is only implemented for x <= 0")
        out = np.empty_like(x)
        ax = np.abs(x)
        near = ax < 0.5
        mid = (ax >= 0.5) & (ax <= 2.0)
        far = ax > 2.0
        if np.any(near):
            out[near] = _series(a, b, c, x[near])
        if np.any(mid):
            out[mid] = _pfaff(a, b, c, x[mid])
        if np.any(far):
            out[far] = _far(a, b, c, x[far])
        return out
    x = float(x)
    if x > 0:
        raise ValueError("gauss_2f1 is only implemented for x <= 0")
    if -x < 0.5:
        return _series(a, b, c, x)
    if -x <= 2.0:
        return _pfaff(a, b, c, x)
    return float(_far(a, b, c, x))


def _far(a, b, c, x):
    if float(a - b).is_integer():
        out = special.hyp2f1(a, b, c, x)
        if not np.all(np.isfinite(out)):
            raise ConvergenceError(f"2F1 evaluation failed for a={a}, b={b}, c={c}")
        return out
    return _inversion(a, b, c, x)


def _check_y(y):
    if not y > 2:
        raise ValueError(f"D(x, y) requires y > 2 (got {y}); the interference integral diverges")


def d_func(x, y):
    """Interference functional ``D(x, y) = 2x/(y-2) * 2F1(1, 1-2/y; 2-2/y; -x)``.

    Equal to ``x^(2/y) * int_{x^(-2/y)}^inf dt / (1 + t^(y/2))``.
    """
    _check_y(y)
    if isinstance(x, (np.ndarray, list, tuple)):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("D(x, y) requires x >= 0")
    elif x < 0:
        raise ValueError("D(x, y) requires x >= 0")
    return 2.0 * x / (y - 2.0) * gauss_2f1(1.0, 1.0 - 2.0 / y, 2.0 - 2.0 / y, -x)


def d_func_taylor(x0, y, order):
    """Taylor coefficients of ``x -> D(x, y)`` at ``x0`` up to ``order``.

    Uses d/dx 2F1(a,b;c;-x) = -(ab/c) 2F1(a+1,b+1;c+1;-x) repeatedly.
    """
    _check_y(y)
    a, b, c = 1.0, 1.0 - 2.0 / y, 2.0 - 2.0 / y
    x0 = np.asarray(x0, dtype=float) if isinstance(x0, (np.ndarray, list, tuple)) else float(x0)
    scale = 2.0 / (y - 2.0)
    g = []
    pref = 1.0
    for j in range(order + 1):
        g.append(pref * gauss_2f1(a + j, b + j, c + j, -x0))
        pref *= -(a + j) * (b + j) / ((c + j) * (j + 1))
    out = [scale * x0 * g[0]]
    for j in range(1, order + 1):
        out.append(scale * (x0 * g[j] + g[j - 1]))
    return np.array(out)


def d_func_jet(x: Jet, y) -> Jet:
    """Propagate a jet through ``D(., y)`` in its first argument."""
    x0 = x.coeffs[0]
    if np.any(x0 < 0):
        raise ValueError("D(x, y) requires x >= 0")
    scalar = x0.ndim == 0
    t = d_func_taylor(float(x0) if scalar else x0, y, x.order)
    return x.compose(t)


# ---------------------------------------------------------------------------
# Digamma and harmonic numbers
# ---------------------------------------------------------------------------

# B_2k / (2k) for k = 1..8
_DIGAMMA_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
)


def digamma(x: float) -> float:
    """psi(x) for x > 0 via upward recurrence and the asymptotic series."""
    if not x > 0:
        raise ValueError(f"digamma is only implemented for x > 0 (got {x})")
    shift = 0.0
    while x < 12.0:
        shift -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    tail = 0.0
    p = inv2
    for coef in _DIGAMMA_ASYMPTOTIC:
        tail += coef * p
        p *= inv2
    return shift + math.log(x) - 0.5 / x - tail


def harmonic(n: int) -> float:
    """n-th harmonic number 1 + 1/2 + ... + 1/n (0 for n = 0)."""
    if n < 0 or int(n) != n:
        raise ValueError("harmonic number needs a nonnegative integer")
    return math.fsum(1.0 / i for i in range(1, int(n) + 1))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


class QuadResult(NamedTuple):
    value: float
    error: float


def integrate_semi_infinite(f: Callable[[float], float], tol: float = 1e-8,
                            rtol: float = 1e-10, limit: int = 500) -> QuadResult:
    """Integrate ``f`` over (0, inf).

    The range is split at 1; the tail is mapped onto (0, 1] with z = 1/t and
    both pieces go through adaptive Gauss-Kronrod. Raises
    :class:`ConvergenceError` (with the partial estimate attached) when the
    error estimate exceeds ``tol``.
    """

    def tail(t):
        if t == 0.0:
            return 0.0
        return f(1.0 / t) / (t * t)

    v1, e1, *info1 = integrate.quad(f, 0.0, 1.0, epsabs=tol / 2, epsrel=rtol,
                                    limit=limit, full_output=1)
    v2, e2, *info2 = integrate.quad(tail, 0.0, 1.0, epsabs=tol / 2, epsrel=rtol,
                                    limit=limit, full_output=1)
    value, err = v1 + v2, e1 + e2
    if not np.isfinite(value):
        raise ConvergenceError("integrand produced a non-finite value", partial=value, error=err)
    if err > max(tol, rtol * abs(value)):
        raise ConvergenceError(
            f"quadrature error estimate {err:.3g} exceeds tolerance {tol:.3g}",
            partial=value, error=err,
        )
    return QuadResult(value, err)


def gauss_legendre(n: int, lo: float = 0.0, hi: float = 1.0):
    """Nodes and weights of the n-point Gauss-Legendre rule on [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w
