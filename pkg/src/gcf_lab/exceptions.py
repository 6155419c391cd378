"""Exception types shared across the solvers."""


class GCFLabError(Exception):
    """Base class for every error raised by gcf_lab."""


class ValidationError(GCFLabError, ValueError):
    """Input parameters outside their admissible range."""


class SolverFailure(GCFLabError, RuntimeError):
    """A numerical solver could not produce an acceptable answer."""


class ComplexExponents(SolverFailure):
    """The characteristic quadratic for a mode has a negative discriminant."""


class JacobiCountMismatch(SolverFailure):
    """Closed-form and enumerated Jacobi-field counts disagree."""


class NoNontrivialSolution(SolverFailure):
    """Shooting found no sign change away from the round solution."""


class NonConvex(SolverFailure):
    """A support function lost strict convexity."""


class ConvexityLost(NonConvex):
    """A perturbed support function has a nonpositive curvature determinant."""


class GraphicalityLost(SolverFailure):
    """The level-set speed S_l became nonpositive."""


class StepUnderflow(SolverFailure):
    """An adaptive integrator could not take a step."""


class EigenNonConvergence(SolverFailure):
    """The Jacobi eigensolver hit its sweep limit."""


class GammaOnResonance(ValidationError):
    """The decay rate coincides with a characteristic exponent."""


class TailDivergence(ValidationError):
    """A tail integral to infinity does not converge for the chosen rate."""


class NoContraction(SolverFailure):
    """Picard iteration failed to contract."""
