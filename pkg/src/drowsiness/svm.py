"""Binary soft-margin SVM trained by sequential minimal optimization.

Working pairs are chosen with second-order information (the maximal
violating ``i`` and the ``j`` giving the largest guaranteed decrease of
the dual objective). Ties go to the lowest index, so training is fully
deterministic for a given sample order.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

OPEN, CLOSED = "open", "closed"
SV_EPS = 1e-8
TAU = 1e-12


class SvmError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Kernel:
    kind: str = "linear"
    degree: int = 3
    c0: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic", "polynomial", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 2:
            raise ValueError("polynomial degree must be >= 2")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError("rbf gamma must be positive")

    @classmethod
    def linear(cls) -> "Kernel":
        return cls("linear")

    @classmethod
    def quadratic(cls, c0: float = 1.0) -> "Kernel":
        return cls("quadratic", 2, c0)

    @classmethod
    def polynomial(cls, degree: int = 3, c0: float = 1.0) -> "Kernel":
        return cls("polynomial", degree, c0)

    @classmethod
    def rbf(cls, gamma: float = 1.0) -> "Kernel":
        return cls("rbf", gamma=gamma)

    def matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Kernel values between the rows of ``X`` and the rows of ``Y``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        if self.kind == "rbf":
            sq = np.sum(X * X, axis=1)[:, None] + np.sum(Y * Y, axis=1)[None, :] - 2.0 * X @ Y.T
            return np.exp(-self.gamma * np.maximum(sq, 0.0))
        dot = X @ Y.T
        if self.kind == "linear":
            return dot
        d = 2 if self.kind == "quadratic" else self.degree
        return (dot + self.c0) ** d

    def __call__(self, x, y) -> float:
        return float(self.matrix(np.ravel(x)[None, :], np.ravel(y)[None, :])[0, 0])

    def spec(self) -> str:
        if self.kind == "linear":
            return "linear"
        if self.kind == "quadratic":
            return f"quadratic:{self.c0!r}"
        if self.kind == "polynomial":
            return f"polynomial:{self.degree}:{self.c0!r}"
        return f"rbf:{self.gamma!r}"

    @classmethod
    def parse(cls, text: str) -> "Kernel":
        kind, *args = text.split(":")
        try:
            if kind == "linear" and not args:
                return cls.linear()
            if kind == "quadratic" and len(args) == 1:
                return cls.quadratic(float(args[0]))
            if kind == "polynomial" and len(args) == 2:
                return cls.polynomial(int(args[0]), float(args[1]))
            if kind == "rbf" and len(args) == 1:
                return cls.rbf(float(args[0]))
        except ValueError as exc:
            raise ModelFormatError(f"bad kernel spec {text!r}: {exc}") from None
        raise ModelFormatError(f"bad kernel spec {text!r}")


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    tolerance: float = 1e-3
    max_passes: int = 100_000

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")


@dataclass(frozen=True)
class SvmModel:
    """Support vectors ``sv`` (already standardized), multipliers and bias.

    ``mean`` and ``scale``, when present, standardize raw inputs before the
    kernel is applied.
    """

    sv: np.ndarray
    alpha: np.ndarray
    y: np.ndarray
    b: float
    kernel: Kernel
    C: float
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.sv.shape[1]

    def _prepare(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError(f"input dimension {x.shape[-1]} does not match model dimension {self.dim}")
        if self.mean is not None:
            x = (x - self.mean) / self.scale
        return x

    def decision(self, x):
        """``sum_i alpha_i y_i k(x, sv_i) + b`` for one vector or a stack of rows."""
        x = self._prepare(x)
        K = self.kernel.matrix(np.atleast_2d(x), self.sv)
        f = K @ (self.alpha * self.y) + self.b
        return float(f[0]) if x.ndim == 1 else f

    def classify(self, x):
        f = self.decision(x)
        # an exact zero counts as the positive (open) class
        if np.ndim(f) == 0:
            return 1 if f >= 0 else -1
        return np.where(f >= 0, 1, -1)

    def weight_vector(self) -> np.ndarray:
        """Explicit normal ``w`` in standardized space (linear kernel only)."""
        if self.kernel.kind != "linear":
            raise ValueError("w is only explicit for the linear kernel")
        return (self.alpha * self.y) @ self.sv


class ConvergenceError(SvmError):
    def __init__(self, message: str, model: SvmModel):
        super().__init__(message)
        self.model = model


def _check_set(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise SvmError("need an (N, d) feature matrix and N labels")
    if not np.all((y == 1) | (y == -1)):
        raise SvmError("labels must be +1 or -1")
    if not ((y == 1).any() and (y == -1).any()):
        raise SvmError("training data contains a single class")
    return X, y


def _solve(K: np.ndarray, y: np.ndarray, C: float, eps: float, max_iter: int):
    n = y.size
    Q = (y[:, None] * y[None, :]) * K
    diag = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    converged = False
    for _ in range(max_iter):
        up = ((alpha < C) & (y > 0)) | ((alpha > 0) & (y < 0))
        low = ((alpha < C) & (y < 0)) | ((alpha > 0) & (y > 0))
        score = -y * G
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        m_up = score[i]
        m_low = np.min(np.where(low, score, np.inf))
        if m_up - m_low < eps:
            converged = True
            break
        b_it = m_up - score
        cand = low & (b_it > 0)
        a_it = diag[i] + diag - 2.0 * y[i] * y * Q[i]
        a_it = np.where(a_it > 0, a_it, TAU)
        gain = np.where(cand, -(b_it * b_it) / a_it, np.inf)
        j = int(np.argmin(gain))
        # two-variable update as in LIBSVM
        if y[i] != y[j]:
            quad = max(diag[i] + diag[j] + 2.0 * Q[i, j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            ai, aj = alpha[i] + delta, alpha[j] + delta
            if diff > 0 and aj < 0:
                aj, ai = 0.0, diff
            elif diff <= 0 and ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0 and ai > C:
                ai, aj = C, C - diff
            elif diff <= 0 and aj > C:
                aj, ai = C, C + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * Q[i, j], TAU)
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            ai, aj = alpha[i] - delta, alpha[j] + delta
            if total > C and ai > C:
                ai, aj = C, total - C
            elif total <= C and aj < 0:
                aj, ai = 0.0, total
            if total > C and aj > C:
                aj, ai = C, total - C
            elif total <= C and ai < 0:
                ai, aj = 0.0, total
        dai, daj = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        G += Q[i] * dai + Q[j] * daj
    # bias from the free multipliers, else the midpoint of the feasible range
    free = (alpha > 0) & (alpha < C)
    yG = y * G
    if free.any():
        rho = float(np.mean(yG[free]))
    else:
        at_c = alpha >= C
        at_0 = alpha <= 0
        ub_set = (at_c & (y < 0)) | (at_0 & (y > 0))
        lb_set = (at_c & (y > 0)) | (at_0 & (y < 0))
        ub = yG[ub_set].min() if ub_set.any() else np.inf
        lb = yG[lb_set].max() if lb_set.any() else -np.inf
        rho = float((ub + lb) / 2.0) if np.isfinite(ub) and np.isfinite(lb) else 0.0
    return alpha, -rho, converged


def fit(xs, ys, kernel: Kernel = Kernel(), cfg: TrainConfig = TrainConfig(), standardize: bool = False) -> tuple[SvmModel, np.ndarray]:
    """Train and also return the multiplier of every training sample.

    With ``standardize`` set, inputs are centred and divided per dimension
    by ``std * sqrt(d)``; the model stores both vectors and applies them at
    prediction time.
    """
    X, y = _check_set(xs, ys)
    mean = scale = None
    if standardize:
        mean = X.mean(axis=0)
        # z-scores shrunk by sqrt(d) keep |x| near 1, so (x.y + c0)^d stays tame
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0) * np.sqrt(X.shape[1])
        X = (X - mean) / scale
    K = kernel.matrix(X, X)
    alpha, b, converged = _solve(K, y, cfg.C, cfg.tolerance, cfg.max_passes)
    keep = alpha > SV_EPS
    model = SvmModel(X[keep], alpha[keep], y[keep], float(b), kernel, cfg.C, mean, scale)
    if not converged:
        raise ConvergenceError(f"SMO did not reach tolerance {cfg.tolerance} in {cfg.max_passes} iterations", model)
    return model, alpha


def train(xs, ys, kernel: Kernel = Kernel(), cfg: TrainConfig = TrainConfig(), standardize: bool = False) -> SvmModel:
    return fit(xs, ys, kernel, cfg, standardize)[0]


def kkt_residual(model: SvmModel, xs, ys, alphas) -> float:
    """Largest violation of the KKT conditions, in margin units, over a training set."""
    y = np.asarray(ys, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    margin = y * model.decision(np.asarray(xs, dtype=np.float64))
    C = model.C
    at_zero = alphas <= SV_EPS
    at_c = alphas >= C - SV_EPS
    free = ~at_zero & ~at_c
    viol = np.zeros(y.size)
    viol[at_zero] = np.maximum(0.0, 1.0 - margin[at_zero])
    viol[at_c] = np.maximum(0.0, margin[at_c] - 1.0)
    viol[free] = np.abs(margin[free] - 1.0)
    return float(viol.max(initial=0.0))


def classify_eye_state(model: SvmModel, weights) -> str:
    return OPEN if model.classify(np.ravel(weights)) == 1 else CLOSED


# --- model files ---------------------------------------------------------


def _row(values) -> str:
    return " ".join(f"{float(v):.17g}" for v in values)


def dumps(m: SvmModel) -> str:
    buf = io.StringIO()
    buf.write(f"SVM v1 {m.dim} {m.kernel.spec()} {m.C:.17g} {m.b:.17g} {m.sv.shape[0]}\n")
    for a, yy, s in zip(m.alpha, m.y, m.sv):
        buf.write(f"{a:.17g} {int(yy)} {_row(s)}\n")
    if m.mean is None:
        buf.write("SCALE none\n")
    else:
        buf.write("MEAN " + _row(m.mean) + "\n")
        buf.write("STD " + _row(m.scale) + "\n")
    buf.write("LABELS +1 open -1 closed\n")
    return buf.getvalue()


def loads(text: str) -> SvmModel:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0][:2] != ["SVM", "v1"] or len(rows[0]) != 7:
        raise ModelFormatError("missing SVM v1 header")
    try:
        d = int(rows[0][2])
        kernel = Kernel.parse(rows[0][3])
        C, b, n = float(rows[0][4]), float(rows[0][5]), int(rows[0][6])
        if len(rows) < 1 + n + 1:
            raise ModelFormatError("truncated support vector list")
        body = rows[1 : 1 + n]
        if any(len(r) != d + 2 for r in body):
            raise ModelFormatError(f"support vector rows must have {d + 2} fields")
        alpha = np.array([float(r[0]) for r in body])
        y = np.array([float(r[1]) for r in body])
        sv = np.array([[float(v) for v in r[2:]] for r in body]).reshape(n, d)
        rest = rows[1 + n :]
        mean = scale = None
        if rest[0] == ["SCALE", "none"]:
            rest = rest[1:]
        else:
            if rest[0][0] != "MEAN" or rest[1][0] != "STD":
                raise ModelFormatError("expected MEAN and STD lines")
            mean = np.array([float(v) for v in rest[0][1:]])
            scale = np.array([float(v) for v in rest[1][1:]])
            if mean.size != d or scale.size != d:
                raise ModelFormatError("standardization vectors have the wrong length")
            rest = rest[2:]
        if rest and rest[0][0] != "LABELS":
            raise ModelFormatError(f"unexpected line {' '.join(rest[0])!r}")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(str(exc)) from None
    return SvmModel(sv, alpha, y, b, kernel, C, mean, scale)


def save_model(path, m: SvmModel) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps(m))


def load_model(path) -> SvmModel:
    with open(path, encoding="ascii") as fh:
        return loads(fh.read())
