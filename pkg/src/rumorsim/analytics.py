"""Closed-form one-round expectations and round-count predictions.

These are the oracles the simulator is checked against. The quantities
are expectations, not counts, and nothing is rounded. With int arguments
the expectations come back as floats; pass ``fractions.Fraction``
arguments to get exact rational values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ConfigError, Protocol, log_base


@dataclass(frozen=True)
class Prediction:
    quantity: str
    value: float
    validity: str
    low: float | None = None
    high: float | None = None


def falling_factorial(x: float, k: int) -> float:
    """``x (x-1) ... (x-k+1)``; the empty product is 1."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    out = 1
    for j in range(k):
        out *= x - j
    return out


def _check_u(u: int, n: int) -> None:
    if not 0 <= u <= n:
        raise ValueError(f"u must lie in [0, n={n}], got {u}")


def expected_uninformed_pull_wr(u: int, n: int, f_in: int) -> float:
    """Expected uninformed count after a pull round with independent uniform targets."""
    _check_u(u, n)
    return u * (u / n) ** f_in


def expected_uninformed_pull_wor(u: int, n: int, f_in: int) -> float:
    """Exact expectation when each requester samples ``f_in`` distinct peers among the other ``n-1``.

    A requester stays uninformed iff all its peers are among the other
    ``u-1`` uninformed processes.
    """
    _check_u(u, n)
    if f_in > n - 1:
        raise ValueError(f"f_in={f_in} exceeds n-1={n - 1}")
    if u == 0:
        return 0 * u / n
    return u * falling_factorial(u - 1, f_in) / falling_factorial(n - 1, f_in)


def expected_uninformed_pull_wor_literal(u: int, n: int, f_in: int) -> float:
    """``u * C(u, f_in) / C(n-1, f_in)``, kept for comparison with the exact form.

    This counts the requester among its own candidate peers and overshoots
    the exact expectation by a factor ``u / (u - f_in)``.
    """
    _check_u(u, n)
    if f_in > n - 1:
        raise ValueError(f"f_in={f_in} exceeds n-1={n - 1}")
    return u * falling_factorial(u, f_in) / falling_factorial(n - 1, f_in)


def expected_uninformed_push(u: int, n: int, f_out: int) -> float:
    """Expected uninformed count after a push round with independent uniform targets."""
    _check_u(u, n)
    return u * (1 - 1 / n) ** (f_out * (n - u))


def expected_uninformed_push_wor(u: int, n: int, f_out: int) -> float:
    """Push counterpart when each sender picks ``f_out`` distinct peers other than itself."""
    _check_u(u, n)
    if f_out > n - 1:
        raise ValueError(f"f_out={f_out} exceeds n-1={n - 1}")
    return u * (1 - f_out / (n - 1)) ** (n - u)


@dataclass(frozen=True)
class Verdict:
    passed: bool
    u: int | None = None
    pull: float | None = None
    push: float | None = None


def check_pull_le_push(n: int, f: int, rel_tol: float = 1e-12) -> Verdict:
    """Check pull <= push (equal fanouts) for every ``u`` in ``0..n``.

    Returns the first violating ``u`` with both expectations. ``rel_tol``
    absorbs rounding at ``u = n-1`` where the two sides are equal.
    """
    if f < 1:
        raise ValueError(f"f must be >= 1, got {f}")
    for u in range(n + 1):
        pull = expected_uninformed_pull_wr(u, n, f)
        push = expected_uninformed_push(u, n, f)
        if pull > push * (1.0 + rel_tol):
            return Verdict(False, u, pull, push)
    return Verdict(True)


def informed_growth_bound(i: int, f_in: int) -> float:
    """Upper bound ``i (f_in + 1)`` on the expected informed count one pull round later."""
    if i < 0:
        raise ValueError(f"i must be >= 0, got {i}")
    return float(i * (f_in + 1))


def expected_informed_after_pull_wor(i: int, n: int, f_in: int) -> float:
    return n - expected_uninformed_pull_wor(n - i, n, f_in)


def predicted_rounds(
    protocol: Protocol | str,
    n: int,
    f_in: int = 1,
    f_out: int = 1,
    low: float = 1.0,
    high: float = 8.0,
) -> Prediction:
    """Asymptotic round count with a ``[low, high]`` multiplicative band.

    ``protocol`` may also be ``"endgame"``: a pull run that starts with
    ``n / ln n`` informed processes.
    """
    if n < 2:
        raise ConfigError(f"n must be >= 2, got {n}")
    if protocol == "endgame":
        if n < 3:
            raise ConfigError("endgame needs n >= 3")
        base = log_base(math.log(n), f_in + 1)
        note = "pull from n/ln n informed; order only, constants unknown"
    else:
        protocol = Protocol.parse(protocol)
        if protocol is Protocol.REGULAR_PULL:
            base = log_base(n, f_in + 1)
            note = "order log_{f_in+1} n; constants unknown"
        elif protocol is Protocol.REGULAR_PUSH:
            base = log_base(n, f_out + 1) + math.log(n) / f_out
            note = "log_{f_out+1} n + ln(n)/f_out, up to an additive O(1)"
        elif protocol is Protocol.PUSH_THEN_PULL:
            base = log_base(n, min(f_in, f_out) + 1)
            note = "push phase then pull; same order as regular pull"
        else:
            base = log_base(n, 3) + math.log(max(math.log(n), 1.0))
            note = "polite push-pull, single call per process; order log n"
    return Prediction("rounds", base, note, low * base, high * base)


def predicted_messages(protocol: Protocol | str, n: int, f_in: int = 1, f_out: int = 1) -> Prediction:
    """Order-of-magnitude message count for a full dissemination.

    ``"endgame"`` is accepted as in :func:`predicted_rounds`.
    """
    if protocol == "endgame":
        if n < 3:
            raise ConfigError("endgame needs n >= 3")
        u0 = n - math.ceil(n / math.log(n))
        if f_in == 1:
            return Prediction("messages", float(u0), "one reply per initially uninformed process")
        return Prediction("messages", float(f_in * u0), "upper bound f_in times the initially uninformed")
    protocol = Protocol.parse(protocol)
    if protocol is Protocol.PUSH_THEN_PULL:
        return Prediction("messages", n + n / math.log(n) ** 2,
                          "n plus order n/(ln n)^2 overhead at the overhead-bounded switch point")
    if protocol is Protocol.REGULAR_PULL:
        if f_in == 1:
            return Prediction("messages", float(n - 1), "exact without failures when f_in = 1")
        return Prediction("messages", float(f_in * (n - 1)), "upper bound f_in (n-1) for regular pull")
    if protocol is Protocol.REGULAR_PUSH:
        return Prediction("messages", n * math.log(n), "order n ln n; constants unknown")
    return Prediction("messages", n * math.log(max(math.log(n), 1.0)), "order n ln ln n; constants unknown")
