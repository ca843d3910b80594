"""Signed log-domain arithmetic.

Forward/backward path weights multiply T per-round factors exp(-eta*loss),
which underflow in linear domain once T gets large, so all path
accumulations in the online engine are kept as (sign, log magnitude)
pairs.  Plain log-sum-exp would be enough for ordinary automata; the sign
is required because the failure-transition engine cancels shadowed path
mass by subtraction, extending the (R+, +, x) semiring to a ring.
"""

from __future__ import annotations

import math

NEG_INF = float("-inf")


class SignedLog:
    """A real number stored as sign in {-1, 0, +1} and log|value|."""

    __slots__ = ("sign", "log")

    def __init__(self, sign: int, log: float):
        if sign == 0 or log == NEG_INF:
            sign, log = 0, NEG_INF
        self.sign = sign
        self.log = log

    @classmethod
    def zero(cls) -> "SignedLog":
        return cls(0, NEG_INF)

    @classmethod
    def one(cls) -> "SignedLog":
        return cls(1, 0.0)

    @classmethod
    def from_linear(cls, x: float) -> "SignedLog":
        if x == 0.0:
            return cls.zero()
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def from_log(cls, log: float) -> "SignedLog":
        """Positive value given directly in log domain."""
        return cls(1, log)

    def to_linear(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log)

    def is_zero(self) -> bool:
        return self.sign == 0

    def __mul__(self, other: "SignedLog") -> "SignedLog":
        if self.sign == 0 or other.sign == 0:
            return SignedLog.zero()
        return SignedLog(self.sign * other.sign, self.log + other.log)

    def scaled(self, log_factor: float) -> "SignedLog":
        """Multiply by a positive factor given in log domain."""
        if self.sign == 0:
            return self
        return SignedLog(self.sign, self.log + log_factor)

    def __add__(self, other: "SignedLog") -> "SignedLog":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        if self.sign == other.sign:
            hi, lo = (self.log, other.log) if self.log >= other.log else (other.log, self.log)
            return SignedLog(self.sign, hi + math.log1p(math.exp(lo - hi)))
        # Opposite signs: the larger magnitude wins.
        if self.log == other.log:
            return SignedLog.zero()
        if self.log > other.log:
            big, small, sign = self.log, other.log, self.sign
        else:
            big, small, sign = other.log, self.log, other.sign
        diff = small - big
        # log(e^big - e^small) = big + log1p(-e^(small-big))
        return SignedLog(sign, big + math.log1p(-math.exp(diff)))

    def __neg__(self) -> "SignedLog":
        return SignedLog(-self.sign, self.log)

    def __sub__(self, other: "SignedLog") -> "SignedLog":
        return self + (-other)

    def __repr__(self) -> str:
        return f"SignedLog({self.to_linear()!r})"


def log_sum(logs) -> float:
    """Stable log(sum(exp(l) for l in logs)) over plain (positive) logs."""
    m = NEG_INF
    for l in logs:
        if l > m:
            m = l
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(sum(math.exp(l - m) for l in logs))
