"""Nonnegative reals stored by their natural logarithm.

The log value is an ``mpmath.mpf`` rather than a float, because some of the
magnitudes handled here have logs that themselves overflow a double
(``exp(-exp(800))`` has log ``-exp(800)``).  Working precision is the
mpmath default of 53 bits, so arithmetic on the log is as accurate as float
arithmetic but with an unbounded exponent range.
"""

from __future__ import annotations

import math
from functools import total_ordering
from numbers import Real

import mpmath as mp

__all__ = ["LogReal", "log_erfc", "log_erfc_scaled", "as_logreal"]

_NEG_INF = mp.ninf


def _to_mpf(x) -> mp.mpf:
    if isinstance(x, mp.mpf):
        return x
    return mp.mpf(x)


@total_ordering
class LogReal:
    """A nonnegative real number ``exp(log)``; ``log = -inf`` encodes zero.

    Parameters
    ----------
    log : float, int, str or mpmath.mpf
        Natural logarithm of the represented value.

    Examples
    --------
    >>> a = LogReal.from_value(2.0)
    >>> float(a * a)
    4.0
    >>> (LogReal(-1e400) + LogReal.zero()).log10 < -1e399
    True
    """

    __slots__ = ("log",)

    def __init__(self, log):
        lg = _to_mpf(log)
        if mp.isnan(lg) or lg == mp.inf:
            raise ValueError(f"invalid log value {log!r}")
        self.log = lg

    @classmethod
    def from_value(cls, x) -> "LogReal":
        x = _to_mpf(x)
        if x < 0:
            raise ValueError("LogReal holds nonnegative values only")
        if x == 0:
            return cls(_NEG_INF)
        return cls(mp.log(x))

    @classmethod
    def zero(cls) -> "LogReal":
        return cls(_NEG_INF)

    @classmethod
    def one(cls) -> "LogReal":
        return cls(0)

    @property
    def is_zero(self) -> bool:
        return self.log == _NEG_INF

    @property
    def log10(self) -> mp.mpf:
        if self.is_zero:
            return _NEG_INF
        return self.log / mp.log(10)

    def __float__(self) -> float:
        if self.is_zero:
            return 0.0
        if self.log > 709.8:
            return math.inf
        if self.log < -745.2:
            return 0.0
        return float(mp.exp(self.log))

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = as_logreal(other)
        a, b = self.log, other.log
        if a < b:
            a, b = b, a
        if b == _NEG_INF:
            return LogReal(a)
        return LogReal(a + mp.log1p(mp.exp(b - a)))

    __radd__ = __add__

    def __sub__(self, other):
        other = as_logreal(other)
        if other.is_zero:
            return LogReal(self.log)
        if other.log > self.log:
            raise ValueError("subtraction would give a negative value")
        if other.log == self.log:
            return LogReal.zero()
        return LogReal(self.log + mp.log(-mp.expm1(other.log - self.log)))

    def __mul__(self, other):
        other = as_logreal(other)
        if self.is_zero or other.is_zero:
            return LogReal.zero()
        return LogReal(self.log + other.log)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_logreal(other)
        if other.is_zero:
            raise ZeroDivisionError("division by a zero LogReal")
        if self.is_zero:
            return LogReal.zero()
        return LogReal(self.log - other.log)

    def __rtruediv__(self, other):
        return as_logreal(other) / self

    def __pow__(self, p):
        p = _to_mpf(p)
        if self.is_zero:
            if p > 0:
                return LogReal.zero()
            if p == 0:
                return LogReal.one()
            raise ZeroDivisionError("negative power of zero")
        return LogReal(self.log * p)

    def sqrt(self) -> "LogReal":
        return self ** mp.mpf(0.5)

    # comparisons ----------------------------------------------------------
    def __eq__(self, other):
        try:
            other = as_logreal(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.log == other.log

    def __lt__(self, other):
        return self.log < as_logreal(other).log

    def __hash__(self):
        return hash(("LogReal", str(self.log)))

    def __repr__(self):
        if self.is_zero:
            return "LogReal(0)"
        return f"LogReal(log={mp.nstr(self.log, 17)})"

    # serialization --------------------------------------------------------
    def to_json(self) -> dict:
        """``{"log10": x}`` with ``x`` a float when it fits, else a decimal string.

        Zero is ``{"log10": "-inf"}`` so the record stays strict JSON.
        """
        if self.is_zero:
            return {"log10": "-inf"}
        l10 = self.log10
        if abs(l10) < 1e300:
            return {"log10": float(l10)}
        return {"log10": mp.nstr(l10, 17)}

    @classmethod
    def from_json(cls, obj) -> "LogReal":
        v = obj["log10"]
        if v == "-inf":
            return cls.zero()
        return cls(_to_mpf(v) * mp.log(10))


def as_logreal(x) -> LogReal:
    if isinstance(x, LogReal):
        return x
    if isinstance(x, (Real, mp.mpf)):
        return LogReal.from_value(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as LogReal")


# ---------------------------------------------------------------------------
# complementary error function in log domain

_ASYMPTOTIC_FROM = 30.0


def _asymptotic_log_series(T) -> mp.mpf:
    # log of sum_m (-1)^m (2m-1)!! / (2T^2)^m, truncated at the smallest term
    x = 1 / (2 * T * T)
    total = mp.mpf(1)
    term = mp.mpf(1)
    m = 1
    while True:
        nxt = -term * (2 * m - 1) * x
        if abs(nxt) >= abs(term) or abs(nxt) < mp.mpf(10) ** -25:
            break
        total += nxt
        term = nxt
        m += 1
    return mp.log(total)


def log_erfc_scaled(base, u) -> mp.mpf:
    """Return ``log(erfc(base + u)) + base**2`` without forming ``base**2``.

    For ``base + u > 30`` the asymptotic expansion
    ``erfc(T) = exp(-T^2)/(T sqrt(pi)) * S(T)`` is used, which keeps the
    result finite when ``base`` is so large that ``base**2`` overflows even
    the log scale of the caller.
    """
    base = _to_mpf(base)
    u = _to_mpf(u)
    T = base + u
    if T <= _ASYMPTOTIC_FROM:
        return mp.log(mp.erfc(T)) + base * base
    return (-2 * base * u - u * u - mp.log(T) - mp.log(mp.pi) / 2
            + _asymptotic_log_series(T))


def log_erfc(x) -> mp.mpf:
    """Natural log of ``erfc(x)``, accurate far into the Gaussian tail."""
    x = _to_mpf(x)
    if x <= _ASYMPTOTIC_FROM:
        return mp.log(mp.erfc(x))
    return log_erfc_scaled(x, 0) - x * x
