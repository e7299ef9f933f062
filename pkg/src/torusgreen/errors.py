"""Typed error taxonomy.

Every numerical failure mode raises a named exception so callers (and the
CLI) can distinguish "bad input" from "the computation genuinely cannot be
done here".  All of these derive from :class:`TorusGreenError`.
"""


class TorusGreenError(Exception):
    """Base class for all library-specific errors."""


class NonPositiveImaginaryPart(TorusGreenError):
    """tau must lie in the open upper half plane."""


class PrecisionUnreachable(TorusGreenError):
    """Requested eps would need an absurd series truncation."""


class NearPole(TorusGreenError):
    """Evaluation point is inside the pole-exclusion radius of a lattice point."""


class CriticalPointNotFound(TorusGreenError):
    """No grid seed converged when solving wp(z) = a."""


class AmbiguousCount(TorusGreenError):
    """A root sits suspiciously close to (but not on) a half-period."""


class NotConverging(TorusGreenError):
    """An orbit limit did not settle within its iteration budget."""


class NoConvergence(TorusGreenError):
    """A parameter-space Newton search ran out of steps."""


class LeftComponent(TorusGreenError):
    """A parameter path crossed out of the hyperbolic component it started in."""


class LiftBroken(TorusGreenError):
    """A continuation corrector failed; the lifted path cannot be extended."""


class NotParabolic(TorusGreenError):
    """The fixed point is not close enough to multiplier one."""


class PetalEscape(TorusGreenError):
    """An orbit left the attracting petal during Fatou-coordinate computation."""


class SlowConvergence(TorusGreenError):
    """Fatou-coordinate orbit exceeded its iteration budget."""


class NoCrossing(TorusGreenError):
    """No parabolic boundary crossing found along the search ray."""


class SingularGradient(TorusGreenError):
    """The arc-defect gradient vanished; two arcs would have to cross here."""


class InconclusiveAtResolution(TorusGreenError):
    """Boundary sampling is too coarse to separate parabolic arcs."""


class WindowInvalid(TorusGreenError):
    """A scan window is empty, inverted, or touches the real axis."""
