"""Exception types shared across the package.

Every error raised on a documented failure path derives from ObslabError so
callers (and the command line driver) can map failures to exit codes without
string matching.
"""


class ObslabError(Exception):
    """Base class for all package-specific failures."""


class InvalidResolution(ObslabError):
    """Mesh resolution parameter too small to produce a usable mesh."""


class DegenerateTriangle(ObslabError):
    """A chart triangle has non-positive area."""


class EmptyRegion(ObslabError):
    """Region descriptor produced no usable control region on this mesh."""


class ConvergenceFailure(ObslabError):
    """The eigensolver did not converge to the requested accuracy."""


class TooManyModes(ObslabError):
    """Requested more modes than the mesh resolution supports (N > nv/10)."""


class SpilloverGuard(ObslabError):
    """A spectral filter's support exceeds 0.8 * lambda_N of the basis."""


class AliasedGrid(ObslabError):
    """A time grid is too coarse for the spectral content it must carry."""


class UnresolvedScale(ObslabError):
    """Semiclassical parameter h probes frequencies beyond the basis."""


class ConfigError(ObslabError):
    """Malformed, unknown, or inconsistent experiment configuration."""


class NotObservable(ObslabError):
    """Gramian numerically singular: the truncated system is unobservable.

    Library code reports this condition as a flag; the command-line layer
    promotes it to this exception so runs exit with the numerical-failure
    code.
    """
