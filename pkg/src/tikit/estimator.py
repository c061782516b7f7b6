"""Scikit-learn style front end for the regularized restoration solver.

`TikhonovRestorer` wraps the forward operator, a penalizer spec, and the
regularization weight behind the familiar fit/transform surface so the solver
composes with sklearn pipelines and parameter search.  `fit` selects alpha
(by L-curve if requested) and restores the training data; `transform`
restores further observations with the fitted alpha.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ParameterError
from .grid import GridFunction
from .lcurve import corner as lcurve_corner, default_alpha_grid, sweep
from .operators import OperatorHandle
from . import penalizers as pen
from .solvers import Problem, SolverOptions, solve_general, solve_quadratic


def _as_grid(x, shape) -> GridFunction:
    if isinstance(x, GridFunction):
        return x
    arr = np.asarray(x, dtype=np.float64)
    return GridFunction(*shape, values=arr.ravel())


class TikhonovRestorer(BaseEstimator, TransformerMixin):
    """Minimize |Tx - y|^2 + alpha * W(x) for observations y.

    Parameters
    ----------
    forward : OperatorHandle
        The forward (degradation) operator T.
    penalizer : str or Penalizer, default "grad2"
        Penalizer spec string (see `penalizers.parse_penalizer`) or an
        already-built unweighted penalizer W.
    alpha : float or "lcurve", default "lcurve"
        Regularization weight, or corner selection over `alpha_grid`.
    alpha_grid : sequence of float, optional
        Descending grid for the L-curve sweep; defaults to 25 log-spaced
        values over 6 decades below 1.
    structural : OperatorHandle, optional
        Operator bound to the "struct" name in spec strings.

    Attributes
    ----------
    alpha_ : float         fitted regularization weight
    restored_ : GridFunction   restoration of the fit data
    report_ : SolveReport      solver diagnostics for the fit data
    """

    def __init__(self, forward: OperatorHandle, penalizer="grad2",
                 alpha="lcurve", alpha_grid=None, structural=None,
                 solver_options: SolverOptions = SolverOptions()):
        self.forward = forward
        self.penalizer = penalizer
        self.alpha = alpha
        self.alpha_grid = alpha_grid
        self.structural = structural
        self.solver_options = solver_options

    def _base_penalizer(self) -> pen.Penalizer:
        if isinstance(self.penalizer, pen.Penalizer):
            return self.penalizer
        w, h, _ = self.forward.input_shape
        return pen.parse_penalizer(self.penalizer, w, h,
                                   structural=self.structural)

    def _solve(self, y: GridFunction, alpha: float):
        problem = Problem(self.forward, y,
                          pen.scale(self._base_penalizer(), alpha))
        if pen.quadratic_terms(problem.penalizer) is not None:
            return solve_quadratic(problem, self.solver_options)
        return solve_general(problem, self.solver_options)

    def fit(self, y, sample_weight=None):
        y = _as_grid(y, self.forward.output_shape)
        if self.alpha == "lcurve":
            grid = (self.alpha_grid if self.alpha_grid is not None
                    else default_alpha_grid())
            curve = sweep(self.forward, y, self._base_penalizer(), grid,
                          self.solver_options)
            self.alpha_, _ = lcurve_corner(curve)
            self.lcurve_ = curve
        else:
            alpha = float(self.alpha)
            if alpha <= 0:
                raise ParameterError(f"alpha must be positive, got {alpha}")
            self.alpha_ = alpha
        self.report_ = self._solve(y, self.alpha_)
        self.restored_ = self.report_.minimizer
        return self

    def transform(self, y):
        if not hasattr(self, "alpha_"):
            raise ParameterError("estimator is not fitted; call fit first")
        y = _as_grid(y, self.forward.output_shape)
        return self._solve(y, self.alpha_).minimizer

    def predict(self, y):
        return self.transform(y)
