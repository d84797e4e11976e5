"""Scikit-learn transformers applying gCQ fractional operators to sampled signals.

Each row of ``X`` is one signal sampled at ``t_1..t_N`` of a time mesh; the
columns are the time points.  ``fit`` builds the mesh and the real-line
history quadrature (the expensive, data-independent part) and ``transform``
runs the fast evaluator over all rows at once.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ._validation import check_order
from .fast import FastConfig, FastGCQ, build_history_quadrature, default_n0
from .kernels import frac_derivative_history_kernel, frac_integral_kernel
from .meshgen import TimeMesh, graded_mesh, mesh_from_points, uniform_mesh

__all__ = ["GCQFractionalIntegral", "GCQFractionalDerivative"]


class _GCQBase(TransformerMixin, BaseEstimator):
    def _kernel(self):  # pragma: no cover - overridden
        raise NotImplementedError

    def _resolve_mesh(self, n_features: int) -> TimeMesh:
        if self.mesh is None:
            if self.gamma == 1:
                return uniform_mesh(self.T, n_features)
            return graded_mesh(self.T, n_features, self.gamma)
        mesh = self.mesh if isinstance(self.mesh, TimeMesh) else mesh_from_points(self.mesh)
        if mesh.N != n_features:
            raise ValueError(f"mesh has {mesh.N} steps but X has {n_features} columns")
        return mesh

    def fit(self, X, y=None):
        check_order(self.alpha)
        X = validate_data(self, X, dtype=float, reset=True)
        self.mesh_ = self._resolve_mesh(X.shape[1])
        self.config_ = FastConfig(self.n0, self.tol, self.local_method, self.n_contour)
        n0 = self.n0 if self.n0 is not None else default_n0(self.mesh_.N)
        self.history_ = build_history_quadrature(self._kernel(), self.mesh_, n0, self.tol)
        return self

    def _run(self, X):
        check_is_fitted(self, "history_")
        X = validate_data(self, X, dtype=float, reset=False)
        ev = FastGCQ(self._kernel(), self.mesh_, self.config_, self.history_, (X.shape[0],))
        out = np.empty_like(X)
        for n in range(self.mesh_.N):
            out[:, n] = self._step(ev, X, n)
        return out

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = True
        return tags


class GCQFractionalIntegral(_GCQBase):
    """Riemann-Liouville integral of order ``alpha`` on a graded mesh.

    Parameters
    ----------
    alpha : float in (0, 1)
    T : float
        Final time used when ``mesh`` is not given.
    gamma : float >= 1
        Grading exponent for the generated mesh (``1`` for uniform).
    mesh : TimeMesh, array of points, or None
        Explicit mesh; its ``N`` must match the number of columns.
    n0, tol, local_method, n_contour
        Passed to the fast evaluator.
    """

    def __init__(self, alpha=0.5, T=1.0, gamma=1.0, mesh=None, n0=None, tol=1e-8,
                 local_method="exact-dd", n_contour=None):
        self.alpha = alpha
        self.T = T
        self.gamma = gamma
        self.mesh = mesh
        self.n0 = n0
        self.tol = tol
        self.local_method = local_method
        self.n_contour = n_contour

    def _kernel(self):
        return frac_integral_kernel(self.alpha)

    def _step(self, ev, X, n):
        return ev.step(X[:, n])

    def transform(self, X):
        return self._run(X)


class GCQFractionalDerivative(_GCQBase):
    """Caputo derivative of order ``alpha``.

    Applies the integral of order ``1 - alpha`` to first difference quotients
    of each row, with ``initial`` as the value at ``t = 0``.
    """

    def __init__(self, alpha=0.5, T=1.0, gamma=1.0, mesh=None, initial=0.0, n0=None,
                 tol=1e-8, local_method="exact-dd", n_contour=None):
        self.alpha = alpha
        self.T = T
        self.gamma = gamma
        self.mesh = mesh
        self.initial = initial
        self.n0 = n0
        self.tol = tol
        self.local_method = local_method
        self.n_contour = n_contour

    def _kernel(self):
        return frac_derivative_history_kernel(self.alpha)

    def _step(self, ev, X, n):
        prev = X[:, n - 1] if n else np.full(X.shape[0], float(self.initial))
        return ev.step((X[:, n] - prev) / self.mesh_.steps[n])

    def transform(self, X):
        return self._run(X)
