"""PCA subspaces trained with the small Gram-matrix trick, and nearest-subspace classification.

Samples are rows of a ``P x D`` matrix. Training eigendecomposes the
``P x P`` Gram matrix of the centred samples with cyclic Jacobi rotations
and lifts the eigenvectors back to ``D`` dimensions.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imaging import Rect, as_gray

OPEN = "open"
CLOSED = "closed"
REJECT = "reject"
EYE_WINDOW = (50, 40)
PCA_STRIDE = 2
MIN_WINDOW_VARIANCE = 1.0


class EigenError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


def _round_robin(n: int) -> list[list[tuple[int, int]]]:
    """Rounds of disjoint index pairs covering every pair once (circle method)."""
    m = n + (n % 2)
    idx = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for k in range(m // 2):
            p, q = idx[k], idx[m - 1 - k]
            if p < n and q < n:
                pairs.append((min(p, q), max(p, q)))
        rounds.append(pairs)
        idx = [idx[0], idx[-1]] + idx[1:-1]
    return rounds


def jacobi_eigh(S: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and column eigenvectors of symmetric ``S``.

    Cyclic Jacobi with a round-robin ordering: each round rotates a set of
    disjoint index pairs at once. Sweeps continue until the off-diagonal
    Frobenius norm is below ``tol`` times the norm of ``S``.
    """
    A = np.array(S, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(A).max(initial=0.0))):
        raise ValueError("matrix must be symmetric")
    A = (A + A.T) / 2.0
    n = A.shape[0]
    Vt = np.eye(n)
    scale = np.linalg.norm(A)
    if n == 1 or scale == 0.0:
        return np.diag(A).copy(), Vt
    rounds = [(np.array([p for p, _ in r]), np.array([q for _, q in r])) for r in _round_robin(n) if r]

    mask = ~np.eye(n, dtype=bool)

    def off(M):
        return np.linalg.norm(M[mask])

    for _ in range(max_sweeps):
        if off(A) <= tol * scale:
            break
        for p, q in rounds:
            apq = A[p, q]
            app = A[p, p]
            aqq = A[q, q]
            nz = np.abs(apq) > 1e-300
            theta = np.where(nz, (aqq - app) / (2.0 * np.where(nz, apq, 1.0)), 0.0)
            big = np.abs(theta) > 1e150
            safe = np.where(big, 0.0, theta)
            t = np.sign(theta + (theta == 0)) / (np.abs(safe) + np.sqrt(safe * safe + 1.0))
            t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
            t = np.where(nz, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # A <- J^T A J as two row passes with a transpose between them;
            # rows are contiguous, columns are not
            for _pass in range(2):
                Ap, Aq = A[p], A[q]
                A[p], A[q] = c[:, None] * Ap - s[:, None] * Aq, s[:, None] * Ap + c[:, None] * Aq
                A = np.ascontiguousarray(A.T)
            Vp, Vq = Vt[p], Vt[q]
            Vt[p], Vt[q] = c[:, None] * Vp - s[:, None] * Vq, s[:, None] * Vp + c[:, None] * Vq
    else:
        raise EigenError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], Vt.T[:, order]


def _fix_sign(u: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(u)))
    return -u if u[k] < 0 else u


@dataclass(frozen=True)
class EigenModel:
    """Mean, ``K`` orthonormal eigenvector rows and covariance eigenvalues (descending)."""

    mean: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def k(self) -> int:
        return self.eigvecs.shape[0]

    def _check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.dim:
            raise ValueError(f"vector length {v.shape[-1]} does not match model dimension {self.dim}")
        return v

    def project(self, v) -> np.ndarray:
        """Weights ``u_i . (v - mean)``; accepts one vector or a stack of rows."""
        v = self._check(v)
        return (v - self.mean) @ self.eigvecs.T

    def reconstruct(self, v) -> np.ndarray:
        return self.mean + self.project(v) @ self.eigvecs

    def recon_error(self, v):
        """Distance from ``v`` to the affine subspace spanned by the model."""
        v = self._check(v)
        d = v - self.mean
        # residual norm directly; |d|^2 - |w|^2 cancels badly near the span
        r = d - (d @ self.eigvecs.T) @ self.eigvecs
        return np.sqrt(np.sum(r * r, axis=-1))

    def truncated(self, k: int) -> "EigenModel":
        if not 1 <= k <= self.k:
            raise ValueError(f"k must be in 1..{self.k}")
        return EigenModel(self.mean, self.eigvecs[:k], self.eigvals[:k])


def pca_train(X, k: int, rank_tol: float = 1e-9) -> EigenModel:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("samples must form a 2-D matrix, one sample per row")
    n = X.shape[0]
    if n < 2:
        raise EigenError("need at least 2 samples")
    if not 1 <= k <= n - 1:
        raise EigenError(f"K={k} must be between 1 and P-1={n - 1}")
    mean = X.mean(axis=0)
    A = X - mean
    gram = A @ A.T
    lam, V = jacobi_eigh(gram)
    if lam[0] <= 0.0:
        raise EigenError("samples have zero variance")
    if lam[k - 1] <= rank_tol * lam[0]:
        rank = int(np.sum(lam > rank_tol * lam[0]))
        raise EigenError(f"samples span only {rank} dimensions, cannot keep K={k}")
    U = A.T @ V[:, :k]
    U /= np.linalg.norm(U, axis=0)
    U = np.array([_fix_sign(U[:, i]) for i in range(k)])
    return EigenModel(mean, U, lam[:k] / n)


def calibrate_threshold(model: EigenModel, samples, percentile: float = 99.0, factor: float = 1.0) -> float:
    errs = model.recon_error(np.asarray(samples, dtype=np.float64))
    return float(np.percentile(errs, percentile)) * factor


@dataclass(frozen=True)
class ClassModels:
    """Open and closed subspaces with their acceptance thresholds."""

    models: dict
    thresholds: dict

    def __post_init__(self):
        for label in (OPEN, CLOSED):
            if label not in self.models or label not in self.thresholds:
                raise ValueError(f"class {label!r} missing")
        if self.models[OPEN].dim != self.models[CLOSED].dim:
            raise ValueError("class models differ in dimension")

    @property
    def dim(self) -> int:
        return self.models[OPEN].dim

    def errors(self, v) -> tuple:
        return self.models[OPEN].recon_error(v), self.models[CLOSED].recon_error(v)

    def classify(self, v) -> str:
        e_open, e_closed = self.errors(v)
        # a tie goes to closed: a missed closure is the costlier mistake
        label, e = (OPEN, e_open) if e_open < e_closed else (CLOSED, e_closed)
        return label if e < self.thresholds[label] else REJECT


def _holdout_split(n: int, every: int = 5) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(n)
    held = idx % every == every - 1
    return idx[~held], idx[held]


def train_class_models(open_samples, closed_samples, k: int, percentile: float = 99.0) -> ClassModels:
    """Fit both classes; every fifth sample is held out to calibrate thresholds."""
    models, taus = {}, {}
    for label, X in ((OPEN, open_samples), (CLOSED, closed_samples)):
        X = np.asarray(X, dtype=np.float64)
        fit, held = _holdout_split(len(X))
        if len(held) == 0:
            raise EigenError(f"class {label!r} has too few samples for a held-out split")
        models[label] = pca_train(X[fit], k)
        taus[label] = calibrate_threshold(models[label], X[held], percentile)
    return ClassModels(models, taus)


def eye_vectors(crops: Iterable) -> np.ndarray:
    rows = []
    shape = None
    for i, c in enumerate(crops):
        c = as_gray(c)
        if shape is None:
            shape = c.shape
        elif c.shape != shape:
            raise ValueError(f"crop {i} is {c.shape[1]}x{c.shape[0]}, expected {shape[1]}x{shape[0]}")
        rows.append(c.astype(np.float64).ravel())
    if not rows:
        raise ValueError("no crops given")
    return np.vstack(rows)


def detect_eye_pca(cm: ClassModels, roi, window=EYE_WINDOW, stride: int = PCA_STRIDE) -> tuple[Rect, str] | None:
    """Best-matching eye window in an equalized ROI, or None.

    Every ``window``-sized crop on a ``stride`` grid is scored by its smaller
    class reconstruction error; near-uniform crops are skipped. The global
    minimum is accepted if it is below that class's threshold.
    """
    roi = as_gray(roi).astype(np.float64)
    ww, wh = window
    if ww * wh != cm.dim:
        raise ValueError(f"window {ww}x{wh} does not match model dimension {cm.dim}")
    if roi.shape[0] < wh or roi.shape[1] < ww:
        return None
    views = sliding_window_view(roi, (wh, ww))[::stride, ::stride]
    ny, nx = views.shape[:2]
    X = views.reshape(ny * nx, wh * ww)
    live = X.var(axis=1) >= MIN_WINDOW_VARIANCE
    if not live.any():
        return None
    e_open, e_closed = cm.errors(X[live])
    is_open = e_open < e_closed
    best = np.where(is_open, e_open, e_closed)
    j = int(np.argmin(best))
    label = OPEN if is_open[j] else CLOSED
    if not best[j] < cm.thresholds[label]:
        return None
    flat = int(np.flatnonzero(live)[j])
    y, x = divmod(flat, nx)
    return Rect(x * stride, y * stride, ww, wh), label


# --- model files ---------------------------------------------------------


def _row(values) -> str:
    return " ".join(f"{float(v):.17g}" for v in values)


def write_model(fh, m: EigenModel) -> None:
    fh.write(f"EIGEN v1 {m.dim} {m.k}\n")
    fh.write(_row(m.mean) + "\n")
    for u in m.eigvecs:
        fh.write(_row(u) + "\n")
    fh.write(_row(m.eigvals) + "\n")


def read_model(lines) -> EigenModel:
    """Parse one EIGEN v1 block from an iterator of lines."""
    try:
        head = next(lines).split()
    except StopIteration:
        raise ModelFormatError("missing EIGEN header") from None
    if len(head) != 4 or head[:2] != ["EIGEN", "v1"]:
        raise ModelFormatError(f"bad EIGEN header {' '.join(head)!r}")
    d, k = int(head[2]), int(head[3])

    def vec(n, what):
        try:
            vals = np.array([float(t) for t in next(lines).split()])
        except StopIteration:
            raise ModelFormatError(f"unexpected end of file reading {what}") from None
        except ValueError as exc:
            raise ModelFormatError(f"non-numeric {what}: {exc}") from None
        if vals.size != n:
            raise ModelFormatError(f"{what} has {vals.size} values, expected {n}")
        return vals

    mean = vec(d, "mean")
    U = np.array([vec(d, f"eigenvector {i}") for i in range(k)]).reshape(k, d)
    lam = vec(k, "eigenvalues")
    return EigenModel(mean, U, lam)


def dumps_class_models(cm: ClassModels) -> str:
    buf = io.StringIO()
    for label in (OPEN, CLOSED):
        write_model(buf, cm.models[label])
        buf.write(f"THRESHOLD {label} {cm.thresholds[label]:.17g}\n")
    return buf.getvalue()


def loads_class_models(text: str) -> ClassModels:
    lines = iter([ln for ln in text.splitlines() if ln.strip()])
    models, taus = {}, {}
    for _ in range(2):
        m = read_model(lines)
        row = next(lines, "").split()
        if len(row) != 3 or row[0] != "THRESHOLD" or row[1] not in (OPEN, CLOSED):
            raise ModelFormatError(f"expected THRESHOLD <open|closed> <tau>, got {' '.join(row)!r}")
        models[row[1]] = m
        taus[row[1]] = float(row[2])
    if next(lines, None) is not None:
        raise ModelFormatError("trailing content after class models")
    try:
        return ClassModels(models, taus)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None


def save_class_models(path, cm: ClassModels) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps_class_models(cm))


def load_class_models(path) -> ClassModels:
    with open(path, encoding="ascii") as fh:
        return loads_class_models(fh.read())

