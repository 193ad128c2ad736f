"""Exception hierarchy.

Every numerical failure mode has its own class so callers (and the scan
engine) can turn it into a machine-readable reason code.
"""


class FptmError(Exception):
    """Base class for domain errors (CLI exit code 2)."""

    code = "error"


class ConfigError(Exception):
    """Malformed configuration (CLI exit code 3)."""


def _make(name, doc):
    cls = type(name, (FptmError,), {"__doc__": doc, "code": name})
    return cls


PreconditionError = _make("PreconditionError", "Input violates a documented precondition.")
NonSaturatedModule = _make("NonSaturatedModule", "Resonance lattice has a Smith divisor > 1.")
ResidualResonance = _make("ResidualResonance", "Intrinsic frequency is itself resonant.")
ZeroDivisor = _make("ZeroDivisor", "k.omega is an exact integer for some k in the search box.")
RealityViolation = _make("RealityViolation", "Series is not real valued within tolerance.")
SmallDivisorBreach = _make("SmallDivisorBreach", "A non-resonant divisor fell below the floor.")
NotInvertible = _make("NotInvertible", "Map is not a diffeomorphism on the sampled grid.")
NonMonotone = _make("NonMonotone", "Circle map lift is not monotone.")
AllOrdersFlat = _make("AllOrdersFlat", "Every resonant average up to the requested order vanishes.")
NoZero = _make("NoZero", "eta has no zero.")
DegenerateZero = _make("DegenerateZero", "eta has a zero with vanishing slope.")
NotContracting = _make("NotContracting", "Fixed-point iteration failed to contract.")
HyperbolicityFail = _make("HyperbolicityFail", "Normal multiplier too close to the unit circle.")
SolvabilityFail = _make("SolvabilityFail", "Average of the order-one right-hand side is not zero.")
NonDegeneracyFail = _make("NonDegeneracyFail", "Averaged derivative is singular.")
PinchingFail = _make("PinchingFail", "Fiber maps violate the pinching inequality.")
FiberInversionFail = _make("FiberInversionFail", "Fiber map could not be inverted.")
SignChange = _make("SignChange", "Multiplier vanishes or changes sign.")
Diverged = _make("Diverged", "Newton residual grew on consecutive steps.")
BudgetExceeded = _make("BudgetExceeded", "Scan grid exceeds the configured budget.")
CheckFailed = _make("CheckFailed", "A regression assertion of an end-to-end run failed.")


class AliasingRisk(UserWarning):
    """Composition band is large relative to the collocation grid."""
