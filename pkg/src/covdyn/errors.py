"""Exception types raised by the library.

Every error carries enough context (point, parameter, time index) to locate
the failure without re-running the computation.
"""

from __future__ import annotations

import numpy as np


class CovdynError(Exception):
    """Base class for all library errors."""


class DegenerateMetricError(CovdynError):
    def __init__(self, point):
        self.point = np.asarray(point)
        super().__init__(f"degenerate metric at y={self.point.tolist()}")


class StencilRoomError(CovdynError):
    def __init__(self, point, step):
        self.point = np.asarray(point)
        super().__init__(
            f"insufficient stencil room at y={self.point.tolist()} (step {step:g})"
        )


class ChartExitError(CovdynError):
    def __init__(self, parameter, point=None):
        self.parameter = float(parameter)
        self.point = None if point is None else np.asarray(point)
        where = "" if point is None else f" near y={self.point.tolist()}"
        super().__init__(f"chart exit at parameter s={self.parameter:.6g}{where}")


class EmbeddingError(CovdynError):
    """A configuration fails the rank-d spatial Jacobian test."""


class DomainError(CovdynError):
    def __init__(self, what, point):
        self.point = np.asarray(point)
        super().__init__(f"{what} at grid point {self.point.tolist()}")


class UnstableStepError(CovdynError):
    def __init__(self, index, norm):
        self.index = int(index)
        super().__init__(f"unstable step: norm {norm:.3g} exceeds bound at time index {index}")


class NotTwiceDifferentiableError(CovdynError):
    def __init__(self):
        super().__init__("density not twice differentiable")


class DegenerateLinearizationError(CovdynError):
    def __init__(self, nullity, smallest):
        self.nullity = None if nullity is None else int(nullity)
        est = "unknown" if nullity is None else str(nullity)
        super().__init__(
            f"degenerate linearization: null-space dimension estimate {est} "
            f"(smallest singular value {smallest:.3g})"
        )


class ScenarioError(CovdynError):
    """Scenario file could not be parsed or validated.

    ``problems`` lists every validation failure, not just the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ShootingError(CovdynError):
    def __init__(self, iterations, residual):
        super().__init__(
            f"shooting did not converge after {iterations} iterations (residual {residual:.3g})"
        )
