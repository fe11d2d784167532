"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0
"""
import time


class SymSepError(Exception):
    """Base class for everything SymSep raises on purpose"""


"""Form construction and I/O"""


class DimensionMismatch(SymSepError):
    """Payload or operand sizes do not agree with the local dimension"""


class NotCompletelySymmetric(SymSepError):
    """Dense entries change under an index permutation beyond tolerance"""


class ZeroVectorAtom(SymSepError):
    """An atom vector has (numerically) zero length and cannot be normalized"""


class UnknownExampleId(SymSepError):
    pass


class RepresentationPairUnsupported(SymSepError):
    """No structured pairing exists and the dense route is above the dense cap"""


class DenseCapExceeded(SymSepError):
    pass


class MalformedFile(SymSepError):
    pass


class UnsupportedVersion(SymSepError):
    pass


"""Solvers"""


class SingularKKTSystem(SymSepError):
    """The SQP system is singular or too ill-conditioned; callers fall back to the power step"""


class NearParallelInputs(SymSepError):
    """
    The two directions of the 2D search span (numerically) a line
    The better of both inputs travels with the exception
    """

    def __init__(self, message, vector, value):
        super().__init__(message)
        self.vector = vector
        self.value = value


class MaxIterationsReached(SymSepError):
    """Only raised by solvers running in strict mode, carries the best iterate"""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


class DegenerateDirection(SymSepError):
    pass


class GramIllConditioned(SymSepError):
    pass


class InnerSolverFailed(SymSepError):
    pass


class UnsupportedDimension(SymSepError):
    pass


class Timer:
    """
    Very simple timer
    """

    def __init__(self, seconds: float = 0):
        """
        Setting the time the timer may run
        :param seconds: time in seconds, 0 never runs out
        """
        self._seconds = seconds
        self._start_time = None

    def start(self):
        """
        Starting the timer
        If already started does nothing
        """
        if not self._start_time:
            self._start_time = time.perf_counter()

    def check_timer(self) -> bool:
        """
        Returns True while the timer has run less than _seconds (or has no limit)
        Returns False if timer is not started
        """
        if self._start_time is None:
            return False
        if self._seconds <= 0:
            return True
        return self.return_time() <= self._seconds

    def return_time(self) -> float:
        if self._start_time is None:
            return 0.0
        return time.perf_counter() - self._start_time
