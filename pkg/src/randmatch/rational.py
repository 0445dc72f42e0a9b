"""Exact rational helpers shared by the flow-based solvers."""

from fractions import Fraction

from .errors import InvalidCap, IrrationalCap

MAX_DENOMINATOR = 10**6

# fixed-point scale for arc costs
COST_SCALE = 10**9


def to_rational(value, max_denominator=MAX_DENOMINATOR):
    """Convert a number or a decimal/ratio string to an exact Fraction.

    Floats are read through their shortest decimal repr, so ``0.5`` becomes
    ``1/2`` and ``0.1`` becomes ``1/10``. Values whose denominator is too
    large are snapped with ``limit_denominator`` only if the snap moves the
    value by less than 1e-12 (so ``1/3`` given as a float is recovered).
    """
    if isinstance(value, Fraction):
        frac = value
    elif isinstance(value, int):
        frac = Fraction(value)
    elif isinstance(value, str):
        try:
            frac = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise IrrationalCap(f"cannot read {value!r} as a rational") from exc
    else:
        fv = float(value)
        if fv != fv or fv in (float("inf"), float("-inf")):
            raise IrrationalCap(f"{value!r} is not finite")
        frac = Fraction(repr(fv))
    if frac.denominator > max_denominator:
        snapped = frac.limit_denominator(max_denominator)
        if abs(snapped - frac) > Fraction(1, 10**12):
            raise IrrationalCap(
                f"{value!r} has no rational form with denominator <= {max_denominator}"
            )
        frac = snapped
    return frac


def as_cap(Q):
    """Validate a probability cap and return it as a Fraction in (0, 1]."""
    frac = to_rational(Q)
    if frac <= 0 or frac > 1:
        raise InvalidCap(f"probability cap must lie in (0, 1], got {Q}")
    return frac


def fixpoint(value):
    """Round a real (float or Fraction) to an integer count of 1e-9 units."""
    if isinstance(value, Fraction):
        return round(value * COST_SCALE)
    return int(round(float(value) * COST_SCALE))
