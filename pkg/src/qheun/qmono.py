"""Exact arithmetic over finite sums of q-monomials.

A term is ``r * t1^a * t2^b * q^mu`` with nonzero rational ``r``, integer
``a, b`` and rational ``mu``.  The symbols ``t1, t2`` stay formal (they stand
for fixed but arbitrary positive reals), which makes cancellation questions
decidable: two terms cancel exactly only when they share the full key
``(mu, a, b)``, while same-``mu`` terms of opposite sign but different
t-monomials are flagged as a potential value-dependent cancellation instead
of being resolved silently.

The q -> +0 comparison machinery lives here as well:

* ``leading_part``    -- the minimal-q-exponent slice, dominant as q -> +0;
* ``equiv_sim``       -- ratio tends to 1 (equal leading slices);
* ``equiv_approx``    -- ratio tends to a positive constant (equal leading
                         exponents, same definite sign);
* ``ultradiscretize`` -- (exponent, sign) of the leading slice;
* ``eval_numeric``    -- extended-precision evaluation at fixed q, t1, t2.

All symbolic operations are exact; floating point enters only through
``eval_numeric``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import mpmath

from .errors import DomainError, SignIndefiniteError, ZeroQSumError

__all__ = [
    "QMonomial",
    "QSum",
    "CancellationEvent",
    "EXACT_ZERO",
    "SIGN_CONFLICT",
    "as_fraction",
    "qpow",
    "qsum_add",
    "qsum_merge",
    "qsum_mul",
    "leading_part",
    "equiv_sim",
    "equiv_approx",
    "ultradiscretize",
    "eval_numeric",
    "EVAL_GUARD_BITS",
    "EVAL_MARGIN_BITS",
]

RationalLike = Union[Fraction, int, str]

#: Extra working bits used internally by eval_numeric.  With them, the
#: documented round-off envelope of the evaluation homomorphism is
#: ``2**(-bits + EVAL_MARGIN_BITS) * scale`` where ``scale`` is the sum of
#: the absolute values of the evaluated terms.
EVAL_GUARD_BITS = 24
EVAL_MARGIN_BITS = 16

#: CancellationEvent kinds.
EXACT_ZERO = "exact-zero"
SIGN_CONFLICT = "sign-conflict-at-leading-exponent"

_ZERO = Fraction(0)


def as_fraction(x: RationalLike) -> Fraction:
    """Coerce ints, Fractions and strings like '3/4' or '1e-3' to Fraction."""
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True, order=True)
class QMonomial:
    """A single term coeff * t1^t1pow * t2^t2pow * q^qexp.

    Field order makes the natural sort key (qexp, t1pow, t2pow).  A
    normalized monomial has coeff != 0; QSum enforces this.
    """

    qexp: Fraction
    t1pow: int
    t2pow: int
    coeff: Fraction

    def key(self) -> tuple[Fraction, int, int]:
        return (self.qexp, self.t1pow, self.t2pow)


#: Multiplicative unit monomial, also the default EPoly denominator.
UNIT_MONOMIAL = QMonomial(_ZERO, 0, 0, Fraction(1))


@dataclass(frozen=True)
class CancellationEvent:
    """Diagnostic record attached to additions.

    kind == EXACT_ZERO: contributions on one key summed to zero.
    kind == SIGN_CONFLICT: the result's minimal-exponent slice carries both
    signs, so for specific positive t1, t2 the leading coefficient may vanish.
    """

    site: str
    qexp: Fraction
    kind: str


class QSum:
    """A normalized finite sum of q-monomials; the empty sum is zero.

    Construction merges terms with equal (qexp, t1pow, t2pow), drops zero
    coefficients and sorts the rest, so two QSums compare equal iff they are
    the same element of the ring.  Instances are immutable and hashable;
    every operation returns a fresh value, which makes them safe to share
    across threads.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[QMonomial] = ()):
        acc: dict[tuple[Fraction, int, int], Fraction] = {}
        for t in terms:
            k = (t.qexp, t.t1pow, t.t2pow)
            acc[k] = acc.get(k, _ZERO) + t.coeff
        self.terms: tuple[QMonomial, ...] = tuple(
            QMonomial(k[0], k[1], k[2], c)
            for k, c in sorted(acc.items())
            if c
        )

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls) -> "QSum":
        return _QSUM_ZERO

    @classmethod
    def one(cls) -> "QSum":
        return _QSUM_ONE

    @classmethod
    def term(
        cls,
        coeff: RationalLike,
        t1pow: int = 0,
        t2pow: int = 0,
        qexp: RationalLike = 0,
    ) -> "QSum":
        c = as_fraction(coeff)
        if not c:
            return cls()
        return cls((QMonomial(as_fraction(qexp), t1pow, t2pow, c),))

    # -- predicates and views ----------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    @property
    def leading_exponent(self) -> Fraction:
        """Minimal q-exponent; undefined for zero."""
        if not self.terms:
            raise ZeroQSumError("zero has no leading exponent")
        return self.terms[0].qexp

    # -- ring structure ------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if isinstance(other, QSum):
            return self.terms == other.terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.terms)

    def __add__(self, other: "QSum") -> "QSum":
        if not isinstance(other, QSum):
            return NotImplemented
        if not other.terms:
            return self
        if not self.terms:
            return other
        return QSum(self.terms + other.terms)

    def __radd__(self, other):
        if other == 0:  # allows sum(...)
            return self
        return NotImplemented

    def __neg__(self) -> "QSum":
        return QSum(
            QMonomial(t.qexp, t.t1pow, t.t2pow, -t.coeff) for t in self.terms
        )

    def __sub__(self, other: "QSum") -> "QSum":
        return self + (-other)

    def __mul__(self, other) -> "QSum":
        if isinstance(other, QSum):
            return qsum_mul(self, other)
        if isinstance(other, (int, Fraction)):
            c = as_fraction(other)
            if not c:
                return QSum()
            return QSum(
                QMonomial(t.qexp, t.t1pow, t.t2pow, t.coeff * c)
                for t in self.terms
            )
        return NotImplemented

    __rmul__ = __mul__

    def div_monomial(self, m: QMonomial) -> "QSum":
        """Exact division by a single monomial."""
        return QSum(
            QMonomial(
                t.qexp - m.qexp,
                t.t1pow - m.t1pow,
                t.t2pow - m.t2pow,
                t.coeff / m.coeff,
            )
            for t in self.terms
        )

    def __repr__(self) -> str:
        if not self.terms:
            return "QSum(0)"
        bits = []
        for t in self.terms:
            part = f"{t.coeff}"
            if t.t1pow:
                part += f"*t1^{t.t1pow}"
            if t.t2pow:
                part += f"*t2^{t.t2pow}"
            if t.qexp:
                part += f"*q^({t.qexp})"
            bits.append(part)
        return "QSum(" + " + ".join(bits) + ")"


_QSUM_ZERO = QSum()
_QSUM_ONE = QSum.term(1)


def qpow(mu: RationalLike) -> QSum:
    """The monomial q^mu."""
    return QSum.term(1, qexp=mu)


# ---------------------------------------------------------------------------
# additive operations with cancellation diagnostics
# ---------------------------------------------------------------------------


def _slice_sign(terms: Sequence[QMonomial]) -> int | None:
    """+1 / -1 when every coefficient shares that sign, else None."""
    pos = any(t.coeff > 0 for t in terms)
    neg = any(t.coeff < 0 for t in terms)
    if pos and neg:
        return None
    return 1 if pos else -1


def qsum_merge(
    parts: Sequence[QSum], site: str = ""
) -> tuple[QSum, list[CancellationEvent]]:
    """Sum several QSums, recording cancellation diagnostics.

    Events: one EXACT_ZERO per key whose contributions annihilated, and one
    SIGN_CONFLICT when the result's leading-exponent slice is mixed-sign.
    """
    acc: dict[tuple[Fraction, int, int], Fraction] = {}
    multi: set[tuple[Fraction, int, int]] = set()
    for part in parts:
        for t in part.terms:
            k = (t.qexp, t.t1pow, t.t2pow)
            if k in acc:
                multi.add(k)
                acc[k] += t.coeff
            else:
                acc[k] = t.coeff
    events: list[CancellationEvent] = []
    for k in multi:
        if not acc[k]:
            events.append(CancellationEvent(site, k[0], EXACT_ZERO))
    result = QSum(
        QMonomial(k[0], k[1], k[2], c) for k, c in acc.items() if c
    )
    if result.terms:
        lead = result.terms[0].qexp
        slice_terms = [t for t in result.terms if t.qexp == lead]
        if _slice_sign(slice_terms) is None:
            events.append(CancellationEvent(site, lead, SIGN_CONFLICT))
    return result, events


def qsum_add(
    a: QSum, b: QSum, site: str = ""
) -> tuple[QSum, list[CancellationEvent]]:
    """Exact sum with diagnostics; see qsum_merge."""
    return qsum_merge((a, b), site)


def qsum_mul(a: QSum, b: QSum) -> QSum:
    """Exact product (no diagnostics: products create no cancellations of
    their own, only the subsequent merge can)."""
    if not a.terms or not b.terms:
        return QSum()
    acc: dict[tuple[Fraction, int, int], Fraction] = {}
    for ta in a.terms:
        for tb in b.terms:
            k = (ta.qexp + tb.qexp, ta.t1pow + tb.t1pow, ta.t2pow + tb.t2pow)
            c = ta.coeff * tb.coeff
            if k in acc:
                acc[k] += c
            else:
                acc[k] = c
    return QSum(QMonomial(k[0], k[1], k[2], c) for k, c in acc.items() if c)


# ---------------------------------------------------------------------------
# q -> +0 comparison machinery
# ---------------------------------------------------------------------------


def leading_part(a: QSum) -> QSum:
    """All terms of ``a`` at the minimal q-exponent; they dominate as q -> +0."""
    if not a.terms:
        raise ZeroQSumError("zero has no leading part")
    lead = a.terms[0].qexp
    return QSum(t for t in a.terms if t.qexp == lead)


def equiv_sim(a: QSum, b: QSum) -> bool:
    """True iff a(q)/b(q) -> 1 as q -> +0.

    With t1, t2 formal positive symbols this holds exactly when the leading
    slices agree term by term.
    """
    if a.is_zero() or b.is_zero():
        raise ZeroQSumError("equiv_sim is undefined for the zero sum")
    return leading_part(a) == leading_part(b)


def equiv_approx(a: QSum, b: QSum) -> bool:
    """True iff a(q)/b(q) -> C for some constant C > 0 as q -> +0.

    Requires both leading slices to be sign-definite (for fixed positive
    t1, t2 the limit is then a positive constant iff the exponents agree and
    the signs match); a mixed-sign slice raises SignIndefiniteError.
    """
    if a.is_zero() or b.is_zero():
        raise ZeroQSumError("equiv_approx is undefined for the zero sum")
    ea, sa = ultradiscretize(a)
    eb, sb = ultradiscretize(b)
    return ea == eb and sa == sb


def ultradiscretize(a: QSum) -> tuple[Fraction, int]:
    """Ultradiscrete image of ``a``: (leading exponent, sign of the slice).

    Raises SignIndefiniteError when the leading slice carries both signs.
    """
    lead = leading_part(a)
    sign = _slice_sign(lead.terms)
    if sign is None:
        raise SignIndefiniteError(
            f"sign-indefinite leading part at q^({lead.terms[0].qexp})"
        )
    return lead.terms[0].qexp, sign


# ---------------------------------------------------------------------------
# numeric evaluation
# ---------------------------------------------------------------------------


def _fraction_to_mpf(x: Fraction):
    return mpmath.mpf(x.numerator) / x.denominator


def to_mpf(x):
    """Convert Fractions, ints, strings and floats to mpf in the current
    working precision.  mpf inputs pass through unrounded (re-creating an
    mpf would silently truncate it to the caller's precision)."""
    if isinstance(x, mpmath.mpf):
        return x
    if isinstance(x, Fraction):
        return _fraction_to_mpf(x)
    if isinstance(x, (int, float)):
        return mpmath.mpf(x)
    if isinstance(x, str):
        return _fraction_to_mpf(Fraction(x))
    raise TypeError(f"cannot convert {type(x).__name__} to mpf")


def eval_terms(a: QSum, qv, t1v, t2v, lq=None):
    """Evaluate ``a`` inside the caller's mpmath context.

    q^mu is computed as exp(mu * log q), which keeps the accuracy uniform in
    |mu| (``lq`` lets callers reuse log q across many sums).
    """
    if not a.terms:
        return mpmath.mpf(0)
    if lq is None:
        lq = mpmath.log(qv)
    vals = []
    for t in a.terms:
        v = _fraction_to_mpf(t.coeff)
        if t.qexp:
            v *= mpmath.exp(_fraction_to_mpf(t.qexp) * lq)
        if t.t1pow:
            v *= t1v ** t.t1pow
        if t.t2pow:
            v *= t2v ** t.t2pow
        vals.append(v)
    return mpmath.fsum(vals)


def eval_numeric(a: QSum, q, t1, t2, bits: int = 512):
    """Value of ``a`` at numeric q in (0,1) and positive rational t1, t2.

    Computed at bits + EVAL_GUARD_BITS working precision and rounded back to
    ``bits``; the result is exact to within 2**(-bits + EVAL_MARGIN_BITS)
    relative to the sum of the term magnitudes.
    """
    if bits < 64:
        raise DomainError(f"bits must be at least 64, got {bits}")
    with mpmath.workprec(bits + EVAL_GUARD_BITS):
        qv = to_mpf(q)
        if not (0 < qv < 1):
            raise DomainError(f"q must lie in (0,1), got {q}")
        t1v = to_mpf(t1)
        t2v = to_mpf(t2)
        if not (t1v > 0 and t2v > 0):
            raise DomainError("t1 and t2 must be positive")
        total = eval_terms(a, qv, t1v, t2v)
    with mpmath.workprec(bits):
        return +total
