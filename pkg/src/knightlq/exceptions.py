"""Exception hierarchy. Every error raised by the package derives from ``KnightLQError``."""


class KnightLQError(Exception):
    pass


class DomainError(KnightLQError, ValueError):
    """Non-finite or otherwise out-of-domain numeric input."""


class InvalidParameterError(KnightLQError, ValueError):
    """A parameter set violates a construction invariant (e.g. K <= 0)."""


class IllPosedPolicyError(KnightLQError, ArithmeticError):
    """The Gaussian/Boltzmann policy is not normalizable (K - 2 D^2 G[v''] <= 0)."""


class QuadratureError(KnightLQError, ArithmeticError):
    """Adaptive quadrature did not reach tolerance within the subinterval cap."""


class NoSolutionError(KnightLQError, ArithmeticError):
    """No admissible root of the k2 equation was found."""


class MultipleRootsError(KnightLQError, ArithmeticError):
    def __init__(self, roots):
        self.roots = tuple(roots)
        super().__init__(
            f"{len(self.roots)} admissible roots for k2: {list(self.roots)}; "
            "pass an explicit root index to choose one"
        )


class DegenerateError(KnightLQError, ArithmeticError):
    """A closed form degenerates (zero denominator, alpha == 0, ...)."""


class HorizonTooShortError(KnightLQError, ValueError):
    """Simulation horizon leaves too much discounted tail mass."""


class NotAdmissibleError(KnightLQError, ValueError):
    """The transversality condition rho > alpha fails."""


class ConfigError(KnightLQError, ValueError):
    """Malformed verification config file."""
