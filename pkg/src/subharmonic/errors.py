"""Exception hierarchy.

Every failure raised by the library derives from :class:`SubharmonicError`.
The three intermediate classes map onto CLI exit codes (see ``cli.py``).
"""


class SubharmonicError(Exception):
    """Base class for all library errors."""


class ConfigError(SubharmonicError):
    """Invalid input data or usage (exit code 4)."""


class MalformedConfig(ConfigError):
    pass


class RealityViolation(ConfigError):
    """A mode is present without a matching complex-conjugate partner."""


class TooLarge(ConfigError):
    """Tree enumeration requested beyond the configured order cap."""


class HypothesisViolation(SubharmonicError):
    """An assumption of the perturbation theory fails (exit code 2)."""


class NoResonance(HypothesisViolation):
    pass


class Hyp1Violated(HypothesisViolation):
    """The unperturbed frequency map is flat at the resonant energy."""


class Hyp2ViolatedNoRoot(HypothesisViolation):
    pass


class Hyp2ViolatedDegenerate(HypothesisViolation):
    pass


class DegenerateZero(HypothesisViolation):
    """Fixed-phase mode requested at a phase that is not a simple zero."""


class SolvabilityFailure(HypothesisViolation):
    pass


class NoSuchPeriod(HypothesisViolation):
    pass


class BadOrbit(HypothesisViolation):
    pass


class HierarchyExhausted(SubharmonicError):
    """All Melnikov levels vanish identically up to the requested order.

    Carries the computed levels in ``levels`` (list of ``(k, samples)``).
    """

    def __init__(self, message, levels=None):
        super().__init__(message)
        self.levels = levels or []


class AllStationary(SubharmonicError):
    """C(eps, t0) is constant in t0, every phase is stationary."""


class OracleError(SubharmonicError):
    """Direct numerical verification failed (exit code 3)."""


class NoConvergence(OracleError):
    pass


class NoExistenceAnywhere(OracleError):
    pass


class StepUnderflow(OracleError):
    pass
