"""Exception and warning types raised by the pipeline stages."""


class D2OrientError(Exception):
    """Base class for all pipeline errors."""

    stage = None


class InvalidParam(D2OrientError, ValueError):
    pass


class DegenerateViewPair(D2OrientError):
    """Two beaming directions (up to a symmetry element) nearly coincide."""


class AllDegenerate(D2OrientError):
    """All three self common lines of an image are undefined."""


class NoAdmissibleCandidate(D2OrientError):
    pass


class MissingTriangle(D2OrientError, KeyError):
    pass


class EigenFailure(D2OrientError):
    """An iterative eigen-solver hit its iteration cap without converging."""


class FileFormatError(D2OrientError, ValueError):
    pass


class ZeroRayWarning(UserWarning):
    """A Fourier ray has zero norm; its correlations are set to 0."""


class AmbiguousUnmixingWarning(UserWarning):
    """Two non-equivalent unmixing angles give the same objective value."""


class IllConditionedWarning(UserWarning):
    """A stacked row matrix is far from orthogonal before projection."""


class DegenerateDotWarning(UserWarning):
    """Some sign products could not be read off near-orthogonal rows."""
