"""Estimator-style front end over the analytic pipeline.

``RetrialSpectrumModel`` follows the scikit-learn conventions: constructor
arguments are plain hyper-parameters, :meth:`fit` does the work and stores
results in trailing-underscore attributes, and ``get_params``/``set_params``/
``clone`` work so parameter sweeps compose naturally::

    model = RetrialSpectrumModel(M=3, N=2, L=10).fit()
    model.metrics_.p_drop_exact
    clone(model).set_params(theta=5.0).fit()
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .generator import assemble_generator, extract_blocks
from .metrics import compute_metrics
from .model import ModelParams, build_state_space
from .simulation import SimConfig, run_simulation
from .solver import solve_direct, solve_ldqbd

SOLVERS = ("direct", "ldqbd", "both")


def check_solver(solver: str) -> str:
    solver = str(solver).lower()
    if solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}, got {solver!r}")
    return solver


class RetrialSpectrumModel(BaseEstimator):
    """Overlay spectrum access with a finite SU retrial orbit.

    Defaults are the baseline traffic rates (lambda_s=1.5, lambda_p=0.1,
    mu_s=0.4, mu_p=0.2) with two bands of two sub-bands and an orbit of 10.

    Attributes set by :meth:`fit`: ``params_``, ``state_space_``,
    ``generator_``, ``blocks_``, ``stationary_`` (the distribution used for
    metrics), ``stationary_ldqbd_`` and ``solver_disagreement_`` (when
    ``solver="both"``), and ``metrics_``.
    """

    def __init__(self, M=2, N=2, L=10, lambda_p=0.1, lambda_s=1.5, mu_p=0.2, mu_s=0.4,
                 theta=2.0, solver="direct"):
        self.M = M
        self.N = N
        self.L = L
        self.lambda_p = lambda_p
        self.lambda_s = lambda_s
        self.mu_p = mu_p
        self.mu_s = mu_s
        self.theta = theta
        self.solver = solver

    def _model_params(self) -> ModelParams:
        return ModelParams(**{name: getattr(self, name) for name in ModelParams.field_names()})

    def fit(self, X=None, y=None):
        """Solve for the stationary distribution and derive the metrics.

        ``X`` and ``y`` are ignored; they exist for API compatibility.
        """
        solver = check_solver(self.solver)
        self.params_ = self._model_params()
        self.state_space_ = build_state_space(self.params_)
        self.generator_ = assemble_generator(self.state_space_)
        self.blocks_ = extract_blocks(self.generator_, self.state_space_)
        self.solver_disagreement_ = None
        self.stationary_ldqbd_ = None
        if solver in ("ldqbd", "both"):
            self.stationary_ldqbd_ = solve_ldqbd(self.blocks_, self.generator_)
        if solver == "ldqbd":
            self.stationary_ = self.stationary_ldqbd_
        else:
            self.stationary_ = solve_direct(self.generator_)
        if solver == "both":
            self.solver_disagreement_ = float(np.max(np.abs(
                self.stationary_.probabilities - self.stationary_ldqbd_.probabilities)))
        self.metrics_ = compute_metrics(self.stationary_, self.params_)
        return self

    @property
    def residual_(self) -> float:
        check_is_fitted(self, "stationary_")
        res = self.stationary_.residual
        if self.stationary_ldqbd_ is not None:
            res = max(res, self.stationary_ldqbd_.residual)
        return res

    def probability(self, state) -> float:
        check_is_fitted(self, "stationary_")
        return float(self.stationary_.probabilities[self.state_space_.index0(state)])

    def predict(self, X, metric="p_drop_exact"):
        """Evaluate ``metric`` at each parameter point in ``X``.

        ``X`` is a sequence of mappings (or anything with ``to_dict("records")``)
        whose keys override this model's parameters point by point.
        """
        if hasattr(X, "to_dict"):
            X = X.to_dict("records")
        out = []
        for point in X:
            fitted = clone(self).set_params(**dict(point)).fit()
            out.append(getattr(fitted.metrics_, metric))
        return np.asarray(out, dtype=float)

    def simulate(self, horizon=1e4, warmup=None, replications=100, seed=0, n_jobs=1):
        """Simulation estimates at this model's parameters."""
        config = SimConfig(self._model_params(), horizon, warmup, replications, seed)
        return run_simulation(config, n_jobs=n_jobs)


__all__ = ["RetrialSpectrumModel", "NotFittedError", "check_solver", "SOLVERS"]
