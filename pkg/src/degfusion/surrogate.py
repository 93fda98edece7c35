"""Trajectory surrogates: orthogonal output compression, per-mode
Gaussian-process regression and simplex-weighted aggregation.

A design of experiments is compressed by a singular value decomposition
of the output matrix (Karhunen-Loeve modes); each retained mode
coefficient gets its own GP with a chosen trend and stationary kernel.
A grid of trend x kernel choices yields an ensemble of surrogates whose
predictions are convexly combined with simplex weights.
"""

import io
import json
import logging
import warnings
import zipfile
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.optimize import minimize_scalar
from scipy.spatial.distance import cdist

from ._interp import interp_columns
from .errors import (
    ConditioningError,
    ConfigurationError,
    DegenerateSampleError,
    ShapeError,
)
from .probability import SimplexWeights

log = logging.getLogger(__name__)

TRENDS = ("constant", "linear", "quadratic")
KERNELS = ("matern12", "matern32", "matern52", "squared-exponential")

_SQRT3 = np.sqrt(3.0)
_SQRT5 = np.sqrt(5.0)


def _corr(name, r, ell):
    t = r / ell
    if name == "matern12":
        return np.exp(-t)
    if name == "matern32":
        return (1.0 + _SQRT3 * t) * np.exp(-_SQRT3 * t)
    if name == "matern52":
        return (1.0 + _SQRT5 * t + 5.0 * t * t / 3.0) * np.exp(-_SQRT5 * t)
    if name == "squared-exponential":
        return np.exp(-0.5 * t * t)
    raise ConfigurationError(f"unknown kernel {name!r}")


def _trend_matrix(Xs, trend):
    n = Xs.shape[0]
    if trend == "constant":
        return np.ones((n, 1))
    if trend == "linear":
        return np.hstack([np.ones((n, 1)), Xs])
    if trend == "quadratic":
        return np.hstack([np.ones((n, 1)), Xs, Xs * Xs])
    raise ConfigurationError(f"unknown trend {trend!r}")


def trend_dof(trend, d):
    return {"constant": 1, "linear": d + 1, "quadratic": 2 * d + 1}[trend]


# ---------------------------------------------------------------------------
# Karhunen-Loeve decomposition


@dataclass(frozen=True, eq=False)
class KleBasis:
    """Orthonormal output modes retained up to a variance fraction."""

    modes: np.ndarray             # (N x m), orthonormal columns
    singular_values: np.ndarray   # (m,), non-increasing
    truncation_fraction: float
    centered: bool
    mean_trajectory: np.ndarray   # zeros when centered is False

    @property
    def n_modes(self):
        return self.modes.shape[1]


def kle_decompose(Y, truncation_fraction=0.99, centered=True):
    """SVD of the (by default row-mean-centered) output matrix.

    Keeps the smallest mode count whose cumulative squared singular
    values reach ``truncation_fraction`` of the total. Centering is the
    default because degradation trajectories carry a large mean shape:
    truncating by raw energy would keep almost none of the variance the
    surrogates must explain. Pass ``centered=False`` to decompose the raw
    matrix.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[1] < 2:
        raise ConfigurationError("output matrix must be (N x n) with n >= 2")
    if not 0.0 < truncation_fraction <= 1.0:
        raise ConfigurationError("truncation_fraction must lie in (0, 1]")
    mean = Y.mean(axis=1) if centered else np.zeros(Y.shape[0])
    Yc = Y - mean[:, None]
    U, s, _ = np.linalg.svd(Yc, full_matrices=False)
    energy = s * s
    total = float(energy.sum())
    if total <= 0.0:
        raise DegenerateSampleError("output matrix has rank zero")
    cum = np.cumsum(energy)
    m = int(np.searchsorted(cum, truncation_fraction * total - 1e-12 * total)) + 1
    m = min(m, s.size)
    return KleBasis(U[:, :m].copy(), s[:m].copy(), float(truncation_fraction),
                    bool(centered), mean)


def project_modes(Y, basis):
    """Coefficients (m x n): inner products of each trajectory with each mode."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] != basis.modes.shape[0]:
        raise ShapeError("trajectory length does not match the basis")
    return basis.modes.T @ (Y - basis.mean_trajectory[:, None])


def reconstruct(coeffs, basis):
    """Map mode coefficients back to trajectory space."""
    out = basis.modes @ np.asarray(coeffs, dtype=float)
    if out.ndim == 2:
        return out + basis.mean_trajectory[:, None]
    return out + basis.mean_trajectory


# ---------------------------------------------------------------------------
# Gaussian-process regression


class GpSurrogate:
    """Fitted GP posterior mean with a parametric trend.

    Inputs are min-max scaled to the unit box internally; the kernel is
    isotropic in scaled space. Prediction is deterministic:
    ``h(x) @ beta + r(x) @ alpha`` with ``alpha = R^-1 (y - F beta)``.
    """

    def __init__(self, trend, kernel, ell, sigma2, nugget, beta, alpha,
                 x_lo, x_span, train_scaled, targets):
        self.trend = trend
        self.kernel = kernel
        self.ell = float(ell)
        self.sigma2 = float(sigma2)
        self.nugget = float(nugget)
        self.beta = np.asarray(beta, dtype=float)
        self.alpha = np.asarray(alpha, dtype=float)
        self.x_lo = np.asarray(x_lo, dtype=float)
        self.x_span = np.asarray(x_span, dtype=float)
        self.train_scaled = np.asarray(train_scaled, dtype=float)
        self.targets = np.asarray(targets, dtype=float)

    def _scale(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.x_lo.size:
            raise ShapeError(f"expected {self.x_lo.size} input dims, got {X.shape[1]}")
        return (X - self.x_lo) / self.x_span

    def predict(self, x):
        """Posterior mean at one point (scalar) or a stack of points (vector)."""
        single = np.ndim(x) == 1
        Xs = self._scale(x)
        dist = cdist(Xs, self.train_scaled)
        r = _corr(self.kernel, dist, self.ell)
        # The nugget is a micro-scale kernel component, so it contributes at
        # exactly coincident points; this keeps kriging an exact interpolator.
        r[dist == 0.0] += self.nugget
        out = _trend_matrix(Xs, self.trend) @ self.beta + r @ self.alpha
        return float(out[0]) if single else out


def _profile_nll(D, F, y, kernel, ell, nugget, sigma2_box):
    """Negative log-likelihood with trend and variance profiled out.

    Returns the objective value and everything needed to finalize the fit
    at this length scale.
    """
    n = y.size
    R = _corr(kernel, D, ell)
    R[np.diag_indices_from(R)] += nugget
    chol = cho_factor(R, lower=True)
    Ri_y = cho_solve(chol, y)
    Ri_F = cho_solve(chol, F)
    A = F.T @ Ri_F
    beta = np.linalg.solve(A, F.T @ Ri_y)
    resid = y - F @ beta
    Ri_resid = Ri_y - Ri_F @ beta
    quad = float(resid @ Ri_resid)
    sigma2 = min(max(quad / n, sigma2_box[0]), sigma2_box[1])
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    nll = quad / sigma2 + n * np.log(sigma2) + logdet
    return nll, (beta, sigma2, resid, chol)


def fit_gp(inputs, targets, trend="constant", kernel="matern52", nugget=1e-8,
           n_starts=8):
    """Fit hyperparameters by bounded multi-start likelihood minimization.

    The length scale is searched over a log-spaced box; the process
    variance and trend coefficients have closed-form optima at each
    candidate. The nugget escalates tenfold (up to 1e-4) whenever the
    correlation matrix fails to factor.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    if X.shape[0] == 1 and np.ndim(inputs) == 1:
        X = X.T
    y = np.asarray(targets, dtype=float).ravel()
    n, d = X.shape
    if y.size != n:
        raise ShapeError("inputs and targets disagree in length")
    dof = trend_dof(trend, d)
    if n < max(5, dof + 1):
        raise ConfigurationError(f"need at least {max(5, dof + 1)} points for a {trend} trend")

    x_lo = X.min(axis=0)
    x_span = X.max(axis=0) - x_lo
    if not np.any(x_span > 0):
        raise ConfigurationError("degenerate inputs: no variation in any dimension")
    x_span = np.where(x_span > 0, x_span, 1.0)
    Xs = (X - x_lo) / x_span

    if np.ptp(y) == 0.0:
        # Constant targets: the trend alone reproduces them exactly.
        beta = np.zeros(dof)
        beta[0] = y[0]
        return GpSurrogate(trend, kernel, 1.0, 0.0, nugget, beta,
                           np.zeros(n), x_lo, x_span, Xs, y)

    D = cdist(Xs, Xs)
    F = _trend_matrix(Xs, trend)
    box = (1e-2 * np.sqrt(d), 1e2 * np.sqrt(d))
    var_y = float(y.var())
    sigma2_box = (1e-6 * var_y, 1e2 * var_y)

    current_nugget = float(nugget)
    while True:
        try:
            candidates = []

            def objective(log_ell):
                nll, _ = _profile_nll(D, F, y, kernel, np.exp(log_ell),
                                      current_nugget, sigma2_box)
                return nll

            for ell in np.geomspace(box[0], box[1], n_starts):
                candidates.append((objective(np.log(ell)), np.log(ell)))
            res = minimize_scalar(objective, bounds=(np.log(box[0]), np.log(box[1])),
                                  method="bounded", options={"xatol": 1e-3})
            candidates.append((float(res.fun), float(res.x)))
            _, best_log_ell = min(candidates, key=lambda c: c[0])
            ell = float(np.exp(best_log_ell))
            _, (beta, sigma2, resid, chol) = _profile_nll(
                D, F, y, kernel, ell, current_nugget, sigma2_box
            )
            alpha = cho_solve(chol, resid)
            return GpSurrogate(trend, kernel, ell, sigma2, current_nugget, beta,
                               alpha, x_lo, x_span, Xs, y)
        except (LinAlgError, np.linalg.LinAlgError):
            current_nugget *= 10.0
            if current_nugget > 1e-4:
                raise ConditioningError(
                    f"correlation matrix stayed non-positive-definite up to nugget 1e-4 "
                    f"({trend}/{kernel})"
                ) from None


def gp_predict(model, x):
    """Posterior mean of a fitted GP at one input point."""
    return model.predict(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# Ensembles


@dataclass(frozen=True, eq=False)
class EnsembleMember:
    label: str
    trend: str
    kernel: str
    basis: KleBasis
    gps: tuple

    def predict(self, x):
        coeffs = np.array([gp.predict(x) for gp in self.gps])
        return self.basis.modes @ coeffs + self.basis.mean_trajectory


@dataclass(frozen=True, eq=False)
class SurrogateEnsemble:
    """Immutable collection of trajectory surrogates on shared times."""

    members: tuple
    data_times: np.ndarray

    @property
    def size(self):
        return len(self.members)

    @property
    def member_labels(self):
        return tuple(m.label for m in self.members)

    def member_predictions(self, x):
        """(p x n_times) matrix of every member's prediction at ``x``."""
        return np.vstack([m.predict(x) for m in self.members])


def build_ensemble(doe, data_times, trends=TRENDS, kernels=KERNELS,
                   truncation_fraction=0.99, nugget=1e-8, centered=True):
    """One surrogate per trend x kernel pair, trained on the DoE outputs
    interpolated to the observation times.

    Members whose GP fit fails conditioning are dropped with a warning;
    an empty ensemble is an error.
    """
    times = np.asarray(data_times, dtype=float).ravel()
    Z = interp_columns(doe.grid.points, doe.outputs, times)
    basis = kle_decompose(Z, truncation_fraction, centered)
    coeffs = project_modes(Z, basis)
    members = []
    for trend in trends:
        for kernel in kernels:
            label = f"{trend}/{kernel}"
            try:
                gps = tuple(
                    fit_gp(doe.inputs, coeffs[k], trend=trend, kernel=kernel,
                           nugget=nugget)
                    for k in range(basis.n_modes)
                )
            except (ConditioningError, ConfigurationError) as exc:
                warnings.warn(f"dropping ensemble member {label}: {exc}")
                continue
            members.append(EnsembleMember(label, trend, kernel, basis, gps))
    if not members:
        raise ConfigurationError("every ensemble member failed to train")
    return SurrogateEnsemble(tuple(members), times)


def ensemble_predict(ensemble, w, x):
    """Convex combination of member predictions at ``x``."""
    weights = w.w if isinstance(w, SimplexWeights) else np.asarray(w, dtype=float)
    if weights.size != ensemble.size:
        raise ShapeError(f"got {weights.size} weights for {ensemble.size} members")
    return weights @ ensemble.member_predictions(x)


def q2_score(predictor, test_inputs, test_outputs):
    """Predictivity per time and its average over times.

    ``predictor`` maps an input row to trajectory values; ``test_outputs``
    is (n_test x n_times), one row per held-out point. Times with zero
    spread across the test set are reported as NaN and excluded from the
    average.
    """
    X = np.atleast_2d(np.asarray(test_inputs, dtype=float))
    Y = np.asarray(test_outputs, dtype=float)
    if X.shape[0] < 10:
        raise ConfigurationError("predictivity scoring needs at least 10 test points")
    preds = np.vstack([np.asarray(predictor(X[i]), dtype=float)
                       for i in range(X.shape[0])])
    if preds.shape != Y.shape:
        raise ShapeError("predictions and test outputs disagree in shape")
    ss_res = ((Y - preds) ** 2).sum(axis=0)
    ss_tot = ((Y - Y.mean(axis=0, keepdims=True)) ** 2).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        per_time = 1.0 - ss_res / ss_tot
    per_time = np.where(ss_tot > 0, per_time, np.nan)
    if np.all(np.isnan(per_time)):
        raise DegenerateSampleError("test outputs have zero variance at every time")
    return per_time, float(np.nanmean(per_time))


# ---------------------------------------------------------------------------
# Persistence

FORMAT_VERSION = 1


def _write_npy(zf, name, arr):
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    zf.writestr(info, buf.getvalue())


def _read_npy(zf, name):
    with zf.open(name) as fh:
        return np.lib.format.read_array(io.BytesIO(fh.read()), allow_pickle=False)


def save_ensemble(ensemble, path):
    """Self-describing archive; predictions survive a round trip bit for bit.

    Zip entries carry a fixed timestamp so identical ensembles produce
    identical archives.
    """
    manifest = {
        "format_version": FORMAT_VERSION,
        "members": [
            {"label": m.label, "trend": m.trend, "kernel": m.kernel,
             "gps": [{"ell": gp.ell, "sigma2": gp.sigma2, "nugget": gp.nugget,
                      "kernel": gp.kernel, "trend": gp.trend}
                     for gp in m.gps]}
            for m in ensemble.members
        ],
        "centered": ensemble.members[0].basis.centered,
        "truncation_fraction": ensemble.members[0].basis.truncation_fraction,
    }
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo("manifest.json", date_time=(1980, 1, 1, 0, 0, 0))
        zf.writestr(info, json.dumps(manifest, sort_keys=True, indent=1))
        _write_npy(zf, "data_times.npy", ensemble.data_times)
        basis = ensemble.members[0].basis
        _write_npy(zf, "basis/modes.npy", basis.modes)
        _write_npy(zf, "basis/singular_values.npy", basis.singular_values)
        _write_npy(zf, "basis/mean.npy", basis.mean_trajectory)
        gp0 = ensemble.members[0].gps[0]
        _write_npy(zf, "inputs/x_lo.npy", gp0.x_lo)
        _write_npy(zf, "inputs/x_span.npy", gp0.x_span)
        _write_npy(zf, "inputs/train_scaled.npy", gp0.train_scaled)
        for i, m in enumerate(ensemble.members):
            for k, gp in enumerate(m.gps):
                _write_npy(zf, f"member{i}/mode{k}/beta.npy", gp.beta)
                _write_npy(zf, f"member{i}/mode{k}/alpha.npy", gp.alpha)
                _write_npy(zf, f"member{i}/mode{k}/targets.npy", gp.targets)


def load_ensemble(path):
    with zipfile.ZipFile(path, "r") as zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(
                f"unsupported ensemble archive version {manifest.get('format_version')!r}"
            )
        data_times = _read_npy(zf, "data_times.npy")
        basis = KleBasis(
            _read_npy(zf, "basis/modes.npy"),
            _read_npy(zf, "basis/singular_values.npy"),
            float(manifest["truncation_fraction"]),
            bool(manifest["centered"]),
            _read_npy(zf, "basis/mean.npy"),
        )
        x_lo = _read_npy(zf, "inputs/x_lo.npy")
        x_span = _read_npy(zf, "inputs/x_span.npy")
        train_scaled = _read_npy(zf, "inputs/train_scaled.npy")
        members = []
        for i, mrec in enumerate(manifest["members"]):
            gps = []
            for k, grec in enumerate(mrec["gps"]):
                gps.append(GpSurrogate(
                    grec["trend"], grec["kernel"], grec["ell"], grec["sigma2"],
                    grec["nugget"],
                    _read_npy(zf, f"member{i}/mode{k}/beta.npy"),
                    _read_npy(zf, f"member{i}/mode{k}/alpha.npy"),
                    x_lo, x_span, train_scaled,
                    _read_npy(zf, f"member{i}/mode{k}/targets.npy"),
                ))
            members.append(EnsembleMember(mrec["label"], mrec["trend"],
                                          mrec["kernel"], basis, tuple(gps)))
    return SurrogateEnsemble(tuple(members), data_times)
