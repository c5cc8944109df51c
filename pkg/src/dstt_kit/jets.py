"""Truncated multivariate Taylor arithmetic ("jet transport") up to third order.

A :class:`TaylorJet` holds the normalized Taylor coefficients of a function of
``nvars`` variables about an expansion point. Coefficient ``k`` multiplies the
monomial ``basis.monomials[k]``; monomials are sorted tuples of variable
indices in graded lexicographic order::

    (), (0,), (1,), ..., (0, 0), (0, 1), ..., (0, 0, 0), (0, 0, 1), ...

so the coefficient of ``dx_j dx_k`` (``j <= k``) is ``d2f/dxj dxk / alpha!``.

The module-level functions (:func:`sin`, :func:`exp`, ...) accept plain floats
as well as jets, so a right-hand side written against them can be evaluated
on either.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb

import numpy as np

MAX_ORDER = 3


class JetDomainError(ValueError):
    """Raised when an elementary function is evaluated outside its domain."""


class _Basis:
    """Monomial bookkeeping shared by all jets with the same (nvars, order)."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        monos = [()]
        for deg in range(1, order + 1):
            monos.extend(combinations_with_replacement(range(nvars), deg))
        self.monomials = monos
        self.index = {mono: k for k, mono in enumerate(monos)}
        self.size = len(monos)
        self.degree = np.array([len(mono) for mono in monos])

        ia, ib, tgt = [], [], []
        for a, ma in enumerate(monos):
            for b, mb in enumerate(monos):
                if len(ma) + len(mb) <= order:
                    ia.append(a)
                    ib.append(b)
                    tgt.append(self.index[tuple(sorted(ma + mb))])
        self.mul_a = np.array(ia)
        self.mul_b = np.array(ib)
        self.mul_tgt = np.array(tgt)

    @lru_cache(maxsize=None)
    def partial_map(self, deg: int):
        """Monomial index and ``alpha!`` factor for every full index tuple of degree ``deg``."""
        shape = (self.nvars,) * deg
        idx = np.empty(shape, dtype=int)
        fac = np.empty(shape)
        for tup in np.ndindex(*shape):
            mono = tuple(sorted(tup))
            idx[tup] = self.index[mono]
            fac[tup] = math.prod(math.factorial(mono.count(v)) for v in set(mono))
        return idx, fac


@lru_cache(maxsize=None)
def get_basis(nvars: int, order: int) -> _Basis:
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"jet order must be in [0, {MAX_ORDER}], got {order}")
    return _Basis(nvars, order)


class TaylorJet:
    """Truncated Taylor polynomial in ``nvars`` variables."""

    __slots__ = ("coeffs", "basis")
    __array_priority__ = 1000

    def __init__(self, coeffs, basis: _Basis):
        self.coeffs = coeffs
        self.basis = basis

    @classmethod
    def constant(cls, value: float, nvars: int, order: int) -> "TaylorJet":
        basis = get_basis(nvars, order)
        c = np.zeros(basis.size)
        c[0] = value
        return cls(c, basis)

    @property
    def nvars(self) -> int:
        return self.basis.nvars

    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def coefficient(self, *variables: int) -> float:
        """Normalized coefficient of the monomial ``prod(dx_v for v in variables)``."""
        return float(self.coeffs[self.basis.index[tuple(sorted(variables))]])

    def partial(self, *variables: int) -> float:
        """Raw partial derivative with respect to ``variables`` at the expansion point."""
        mono = tuple(sorted(variables))
        fac = math.prod(math.factorial(mono.count(v)) for v in set(mono))
        return self.coefficient(*mono) * fac

    def _coerce(self, other) -> np.ndarray | None:
        if isinstance(other, TaylorJet):
            if other.basis is not self.basis:
                raise ValueError("jets have mismatched nvars/order")
            return other.coeffs
        return None

    def __repr__(self) -> str:
        return f"TaylorJet(value={self.value:.6g}, nvars={self.nvars}, order={self.order})"

    def __add__(self, other):
        c = self._coerce(other)
        if c is not None:
            return TaylorJet(self.coeffs + c, self.basis)
        out = self.coeffs.copy()
        out[0] += other
        return TaylorJet(out, self.basis)

    __radd__ = __add__

    def __neg__(self):
        return TaylorJet(-self.coeffs, self.basis)

    def __pos__(self):
        return self

    def __sub__(self, other):
        c = self._coerce(other)
        if c is not None:
            return TaylorJet(self.coeffs - c, self.basis)
        out = self.coeffs.copy()
        out[0] -= other
        return TaylorJet(out, self.basis)

    def __rsub__(self, other):
        out = -self.coeffs
        out[0] += other
        return TaylorJet(out, self.basis)

    def __mul__(self, other):
        c = self._coerce(other)
        if c is None:
            return TaylorJet(self.coeffs * other, self.basis)
        b = self.basis
        prod = self.coeffs[b.mul_a] * c[b.mul_b]
        return TaylorJet(np.bincount(b.mul_tgt, weights=prod, minlength=b.size), b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TaylorJet):
            return self * reciprocal(other)
        return TaylorJet(self.coeffs / other, self.basis)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = TaylorJet.constant(1.0, self.nvars, self.order)
            for _ in range(int(p)):
                out = out * self
            return out
        if isinstance(p, (int, np.integer)):
            return reciprocal(self ** (-int(p)))
        return power(self, p)


def seed(values, order: int) -> list[TaylorJet]:
    """Independent-variable jets: jet ``i`` is ``values[i] + dx_i``."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    basis = get_basis(n, order)
    jets = []
    for i, val in enumerate(values):
        c = np.zeros(basis.size)
        c[0] = val
        if order >= 1:
            c[1 + i] = 1.0
        jets.append(TaylorJet(c, basis))
    return jets


def compose(a: TaylorJet, derivs) -> TaylorJet:
    """Compose a univariate function with a jet.

    ``derivs[k]`` is the k-th derivative of the function at ``a.value``.
    """
    b = a.basis
    h = a.coeffs.copy()
    h[0] = 0.0
    h_jet = TaylorJet(h, b)
    out = np.zeros(b.size)
    out[0] = derivs[0]
    power_k = h_jet
    for k in range(1, b.order + 1):
        out += (derivs[k] / math.factorial(k)) * power_k.coeffs
        if k < b.order:
            power_k = power_k * h_jet
    return TaylorJet(out, b)


def reciprocal(a: TaylorJet) -> TaylorJet:
    x = a.value
    if x == 0.0:
        raise ZeroDivisionError("division by a jet with zero constant term")
    r = 1.0 / x
    return compose(a, (r, -r * r, 2 * r**3, -6 * r**4))


def sin(a):
    if not isinstance(a, TaylorJet):
        return math.sin(a)
    s, c = math.sin(a.value), math.cos(a.value)
    return compose(a, (s, c, -s, -c))


def cos(a):
    if not isinstance(a, TaylorJet):
        return math.cos(a)
    s, c = math.sin(a.value), math.cos(a.value)
    return compose(a, (c, -s, -c, s))


def tan(a):
    if not isinstance(a, TaylorJet):
        return math.tan(a)
    t = math.tan(a.value)
    sec2 = 1.0 + t * t
    return compose(a, (t, sec2, 2 * t * sec2, sec2 * (2 + 6 * t * t)))


def exp(a):
    if not isinstance(a, TaylorJet):
        return math.exp(a)
    e = math.exp(a.value)
    return compose(a, (e, e, e, e))


def log(a):
    if not isinstance(a, TaylorJet):
        return math.log(a)
    x = a.value
    if x <= 0.0:
        raise JetDomainError(f"log of non-positive constant term {x}")
    return compose(a, (math.log(x), 1 / x, -1 / x**2, 2 / x**3))


def sqrt(a):
    if not isinstance(a, TaylorJet):
        return math.sqrt(a)
    x = a.value
    if x <= 0.0:
        raise JetDomainError(f"sqrt of non-positive constant term {x}")
    return power(a, 0.5)


def power(a, p: float):
    """``a ** p`` for real ``p``; jets need a positive constant term."""
    if not isinstance(a, TaylorJet):
        return a**p
    x = a.value
    if x <= 0.0:
        raise JetDomainError(f"real power of non-positive constant term {x}")
    derivs = [x**p, p * x ** (p - 1), p * (p - 1) * x ** (p - 2), p * (p - 1) * (p - 2) * x ** (p - 3)]
    return compose(a, derivs)


def value_of(a) -> float:
    return a.value if isinstance(a, TaylorJet) else float(a)


def extract_partials(jets_out, max_order: int | None = None):
    """Raw partial derivative tensors of a vector function from its output jets.

    Returns ``(A1, A2, A3)`` with ``A1[i, j] = dF_i/dx_j``,
    ``A2[i, j, k] = d2F_i/dx_j dx_k`` and ``A3`` likewise; tensors above
    ``max_order`` (default: the jet order) are returned as ``None``.
    """
    jets_out = list(jets_out)
    basis = jets_out[0].basis
    order = basis.order if max_order is None else max_order
    if order > basis.order:
        raise ValueError(f"jets of order {basis.order} cannot supply order-{order} partials")
    coeffs = np.stack([j.coeffs for j in jets_out])
    out = []
    for deg in (1, 2, 3):
        if deg > order:
            out.append(None)
            continue
        idx, fac = basis.partial_map(deg)
        out.append(coeffs[:, idx] * fac)
    return tuple(out)


def n_coefficients(nvars: int, order: int) -> int:
    return comb(nvars + order, order)
