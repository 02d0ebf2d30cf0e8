"""scikit-learn style wrapper: rows of X are mapped to their sunny retraction values."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .means import cesaro_mean
from .scheme import (
    CesaroSchedule,
    ConstantContraction,
    HarmonicSchedule,
    PowerSchedule,
    SchemeConfig,
    run_anchor,
    run_viscosity,
)


class SunnyRetraction(TransformerMixin, BaseEstimator):
    """Approximate the sunny nonexpansive retraction onto Fix(S).

    ``transform`` maps each row x of X to the final iterate of a scheme
    whose limit is P(x): either the viscosity scheme with the constant map
    f = x, or the anchor scheme with anchor x.

    Parameters
    ----------
    representation : Representation
        The semigroup action; certified in :meth:`fit`.
    method : {"viscosity", "anchor"}
    n_steps : int
        Outer steps per row.
    gamma : float
        eps_n = 1/(n+1)^gamma for the viscosity scheme (gamma = 1 is harmonic).
    mean_size : int
        Side of the fixed Cesaro box mean used by the anchor scheme.
    inner_tol, inner_max : float, int
        Picard tolerance and iteration cap of each implicit step.
    certify_samples, random_state : int
        Sampling used by the commutativity/nonexpansiveness certification.

    Attributes
    ----------
    certification_ : CertificationReport
    traces_ : list of Trace
        Traces from the most recent ``transform`` call, one per row.
    n_features_in_ : int
    """

    def __init__(
        self,
        representation=None,
        method="viscosity",
        n_steps=200,
        gamma=1.0,
        mean_size=16,
        inner_tol=1e-10,
        inner_max=100_000,
        certify_samples=100,
        random_state=0,
    ):
        self.representation = representation
        self.method = method
        self.n_steps = n_steps
        self.gamma = gamma
        self.mean_size = mean_size
        self.inner_tol = inner_tol
        self.inner_max = inner_max
        self.certify_samples = certify_samples
        self.random_state = random_state

    def fit(self, X=None, y=None):
        if self.representation is None:
            raise ValueError("SunnyRetraction needs a representation")
        if self.method not in ("viscosity", "anchor"):
            raise ValueError(f"method must be 'viscosity' or 'anchor', got {self.method!r}")
        rep = self.representation
        if X is not None:
            X = check_array(X, dtype=np.float64)
            if X.shape[1] != rep.d:
                raise ValueError(f"X has {X.shape[1]} features, the representation acts on R^{rep.d}")
        self.certification_ = rep.require_certified(self.certify_samples, self.random_state)
        self.n_features_in_ = rep.d
        return self

    def _trace(self, x):
        rep = self.representation
        if self.method == "anchor":
            mu = cesaro_mean(self.mean_size, rep.k)
            return run_anchor(rep, mu, x, self.n_steps, self.inner_tol, self.inner_max)
        eps = HarmonicSchedule() if self.gamma == 1.0 else PowerSchedule(self.gamma)
        cfg = SchemeConfig(
            epsilon=eps,
            mean_schedule=CesaroSchedule(),
            inner_tol=self.inner_tol,
            inner_max_iters=self.inner_max,
            outer_steps=self.n_steps,
        )
        return run_viscosity(rep, cfg, ConstantContraction(x))

    def transform(self, X):
        check_is_fitted(self, "certification_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        self.traces_ = [self._trace(x) for x in X]
        failed = [i for i, t in enumerate(self.traces_) if t.failed]
        if failed:
            raise RuntimeError(f"inner solver failed for rows {failed}")
        return np.array([t.z_hat for t in self.traces_])

    def residuals(self, X):
        """Largest generator residual ||Px - G_i Px|| of each transformed row."""
        P = self.transform(X)
        return np.array([self.representation.generator_residuals(z).max() for z in P])
