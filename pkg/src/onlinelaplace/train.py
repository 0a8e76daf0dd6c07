"""Full-batch training with online (OL / LM) or fixed (offline) hyperparameters."""

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import hyper as hyp
from .evidence import elbo
from .exceptions import NumericalBreakdown
from .model import Hyperparams, loss_and_gradient
from .predict import gaussian_log_likelihood, predictive_variance, rmse
from .tangent import linearize

PROCEDURES = ("ol", "lm", "offline")

# Steps per dataset for online runs; offline runs track validation for this many.
STEP_BUDGETS = {"housing": 1000, "wine": 1000, "concrete": 2000, "energy": 30000, "yacht": 10000}
OFFLINE_MAX_STEPS = 30000


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int = 0
    lr0: float = 0.01
    decay: float = 0.9999
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, n_params, **kw):
        return cls(np.zeros(n_params), np.zeros(n_params), **kw)

    @property
    def lr(self):
        """Learning rate the next step will use."""
        return self.lr0 * self.decay**self.step


def adam_step(state, w, grad):
    t = state.step + 1
    m = state.beta1 * state.first_moment + (1 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1 - state.beta2) * grad * grad
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    w_new = w - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, first_moment=m, second_moment=v, step=t), w_new


@dataclass(frozen=True)
class TrainConfig:
    procedure: str = "ol"
    max_steps: int = 1000
    hyper_init: Hyperparams = field(default_factory=Hyperparams)
    seed: int = 0
    damping: float = 1.0
    record_every: int = 1
    convergence_tol: float = 1e-6
    lr0: float = 0.01
    decay: float = 0.9999
    jitter: float = 0.0
    # offline only: evidence diagnostics on recorded rows (each costs a GGN factorisation)
    diagnostics: bool = True

    def __post_init__(self):
        if self.procedure not in PROCEDURES:
            raise ValueError(f"procedure must be one of {PROCEDURES}, got {self.procedure!r}")
        if self.max_steps < 1 or self.record_every < 1:
            raise ValueError("max_steps and record_every must be >= 1")
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError("damping must lie in [0, 1]")

    def as_dict(self):
        d = asdict(self)
        d["hyper_init"] = {"alpha": self.hyper_init.alpha, "beta": self.hyper_init.beta}
        return d


TRACE_COLUMNS = (
    "phase", "step", "alpha", "beta", "gamma", "gamma_clamped", "train_loss",
    "log_evidence_f", "log_evidence_h", "elbo_gap", "log_evidence_f_per_n",
    "log_evidence_h_per_n", "map_distance", "map_distance_rel", "grad_norm",
    "fixed_point_residual", "train_rmse", "val_rmse", "test_rmse", "test_loglik",
    "best_step",
)


@dataclass
class TrainTrace:
    """Rows of diagnostics; ``phase`` is ``"train"`` except for one closing ``"final"`` row."""

    records: list = field(default_factory=list)
    params: list = field(default_factory=list)
    best_step: int = None

    def append(self, row, w=None):
        self.records.append(row)
        if w is not None:
            self.params.append(np.array(w))

    def column(self, name):
        return np.array([r.get(name, np.nan) for r in self.records if r["phase"] == "train"])

    @property
    def final(self):
        finals = [r for r in self.records if r["phase"] == "final"]
        return finals[-1] if finals else None


@dataclass
class TrainResult:
    params: np.ndarray
    hyper: Hyperparams
    trace: TrainTrace
    steps_run: int
    converged: bool = False


def state_diagnostics(arch, w, X, y, m, jitter=0.0, mode="ol"):
    """Linearise at ``w`` and compute every per-state quantity the trace reports.

    Returns ``(row, step)`` where ``step`` is the :class:`hyper.MacKayStep`
    (GGN factor, ``v*``, MacKay target) so callers can reuse it.
    """
    t = linearize(arch, w, X)
    st = hyp.mackay_step(t, y, m, mode=mode, jitter=jitter)
    lf = elbo(t, st.ggn, t.w_t, y, m).total
    lh = elbo(t, st.ggn, st.v_star, y, m).total
    r = t.f_wt - y
    grad = m.beta * (t.J.T @ r) + m.alpha * t.w_t
    dist = float(np.linalg.norm(w - st.v_star))
    n = len(y)
    row = {
        "alpha": m.alpha,
        "beta": m.beta,
        "gamma": st.gamma.gamma,
        "gamma_clamped": int(st.gamma.clamped),
        "train_loss": 0.5 * m.beta * float(r @ r) + 0.5 * m.alpha * float(w @ w),
        "log_evidence_f": lf,
        "log_evidence_h": lh,
        "elbo_gap": lh - lf,
        "log_evidence_f_per_n": lf / n,
        "log_evidence_h_per_n": lh / n,
        "map_distance": dist,
        "map_distance_rel": dist / max(float(np.linalg.norm(w)), 1e-300),
        "grad_norm": float(np.linalg.norm(grad)),
        "fixed_point_residual": st.residual,
    }
    return row, st, t


def _eval_rows(arch, w, data, scale, ggn=None, m=None):
    """Train/val/test RMSE (original target units) and, given a GGN, test log-likelihood."""
    out = {"train_rmse": rmse(arch.forward(w, data.X_train), data.y_train) * scale}
    if data.has_validation:
        out["val_rmse"] = rmse(arch.forward(w, data.X_val), data.y_val) * scale
    if data.X_test is not None:
        mean = arch.forward(w, data.X_test)
        out["test_rmse"] = rmse(mean, data.y_test) * scale
        if ggn is not None:
            var = predictive_variance(arch, w, ggn, data.X_test, m)
            out["test_loglik"] = gaussian_log_likelihood(
                mean * scale, var * scale**2, data.y_test * scale
            )
    return out


def _check_finite(value, step, w, m):
    if not math.isfinite(value):
        raise NumericalBreakdown(
            f"non-finite loss at step {step}", step=step, params=w, hyper=m
        )


def _record_due(step, cfg):
    return step % cfg.record_every == 0 or step == cfg.max_steps


def run_online(arch, data, cfg, w0=None, on_record=None, keep_params=False):
    """Interleave Adam steps on the network loss with MacKay hyperparameter steps.

    Each step: gradient of the loss at the current ``(alpha, beta)`` and an
    Adam update; linearisation at the new weights, GGN factorisation and
    Gauss-Newton MAP ``v*``; MacKay update using ``(w, f(w))`` for OL or
    ``(v*, h(v*))`` for LM. Trace rows report the state *before* the
    hyperparameter update, so every evidence column is a function of the row's
    ``(w, alpha, beta)``. ``on_record`` is called with each row as it is made.
    """
    if cfg.procedure not in ("ol", "lm"):
        raise ValueError("run_online needs procedure 'ol' or 'lm'")
    X, y = data.X_train, data.y_train
    rng = np.random.default_rng(cfg.seed)
    w = arch.init_params(rng) if w0 is None else np.array(w0, dtype=np.float64)
    m = cfg.hyper_init
    adam = AdamState.init(arch.n_params, lr0=cfg.lr0, decay=cfg.decay)
    trace = TrainTrace()
    scale = data.target_std
    converged = False

    def emit(row, w_row):
        trace.append(row, w_row if keep_params else None)
        if on_record is not None:
            on_record(row)

    for step in range(1, cfg.max_steps + 1):
        value, grad = loss_and_gradient(arch, w, X, y, m)
        _check_finite(value, step, w, m)
        adam, w_new = adam_step(adam, w, grad)
        if not np.all(np.isfinite(w_new)):
            raise NumericalBreakdown(f"non-finite parameters at step {step}", step, w, m)
        w = w_new

        row, st, _ = state_diagnostics(arch, w, X, y, m, cfg.jitter, mode=cfg.procedure)
        _check_finite(row["train_loss"], step, w, m)
        if _record_due(step, cfg):
            row = {"phase": "train", "step": step, **row}
            row.update(_eval_rows(arch, w, data, scale, st.ggn, m))
            emit(row, w)

        converged = (
            row["grad_norm"] / (1 + np.linalg.norm(w)) < cfg.convergence_tol
            and st.residual < cfg.convergence_tol
        )
        m = hyp.damp(m, st.target, cfg.damping)

    final, st, _ = state_diagnostics(arch, w, X, y, m, cfg.jitter, mode=cfg.procedure)
    final = {"phase": "final", "step": cfg.max_steps, **final}
    final.update(_eval_rows(arch, w, data, scale, st.ggn, m))
    emit(final, w)
    return TrainResult(w, m, trace, cfg.max_steps, converged)


def run_offline(arch, data, cfg, w0=None, on_record=None, keep_params=False, posthoc="lf"):
    """Adam on the loss with hyperparameters fixed at ``cfg.hyper_init``.

    Validation RMSE is tracked at every step and the parameters with the
    lowest value (earliest on ties) are returned. The closing ``"final"`` trace
    row describes that snapshot, with predictive hyperparameters tuned post hoc
    on ``posthoc`` (``"lf"`` or ``"lh"``; ``None`` keeps the training values).
    """
    if not data.has_validation:
        raise ValueError("offline training needs a validation portion")
    X, y = data.X_train, data.y_train
    rng = np.random.default_rng(cfg.seed)
    w = arch.init_params(rng) if w0 is None else np.array(w0, dtype=np.float64)
    m = cfg.hyper_init
    adam = AdamState.init(arch.n_params, lr0=cfg.lr0, decay=cfg.decay)
    trace = TrainTrace()
    scale = data.target_std
    best_val, best_step, best_w = math.inf, 0, w.copy()

    def emit(row, w_row):
        trace.append(row, w_row if keep_params else None)
        if on_record is not None:
            on_record(row)

    for step in range(1, cfg.max_steps + 1):
        value, grad = loss_and_gradient(arch, w, X, y, m)
        _check_finite(value, step, w, m)
        adam, w_new = adam_step(adam, w, grad)
        if not np.all(np.isfinite(w_new)):
            raise NumericalBreakdown(f"non-finite parameters at step {step}", step, w, m)
        w = w_new
        val = rmse(arch.forward(w, data.X_val), data.y_val)
        if val < best_val:
            best_val, best_step, best_w = val, step, w.copy()

        if _record_due(step, cfg):
            if cfg.diagnostics:
                row, st, _ = state_diagnostics(arch, w, X, y, m, cfg.jitter)
                row.update(_eval_rows(arch, w, data, scale, st.ggn, m))
            else:
                r = arch.forward(w, X) - y
                row = {
                    "alpha": m.alpha,
                    "beta": m.beta,
                    "train_loss": 0.5 * m.beta * float(r @ r) + 0.5 * m.alpha * float(w @ w),
                }
                row.update(_eval_rows(arch, w, data, scale))
            row = {"phase": "train", "step": step, **row, "best_step": best_step}
            emit(row, w)

    trace.best_step = best_step
    m_pred = m
    if posthoc is not None:
        m_pred = posthoc_hyperopt(arch, best_w, data, posthoc, m, cfg.jitter).hyper
    final, st, _ = state_diagnostics(arch, best_w, X, y, m_pred, cfg.jitter)
    final = {"phase": "final", "step": best_step, **final, "best_step": best_step}
    final.update(_eval_rows(arch, best_w, data, scale, st.ggn, m_pred))
    emit(final, best_w)
    return TrainResult(best_w, m_pred, trace, cfg.max_steps)


@dataclass(frozen=True)
class PosthocResult:
    hyper: Hyperparams
    n_iter: int
    residual: float
    converged: bool


def posthoc_hyperopt(arch, w, data, objective="lf", m0=None, jitter=0.0, tol=1e-6, max_iter=500):
    """Tune ``(alpha, beta)`` for frozen weights by iterating MacKay updates.

    ``"lf"`` uses the online-Laplace substitution (maximises the Laplace
    evidence at ``w``); ``"lh"`` uses the tangent-MAP substitution (maximises
    the tangent-model evidence). ``converged`` is False if ``max_iter`` was hit.
    """
    mode = {"lf": "ol", "lh": "lm"}[objective]
    t = linearize(arch, w, data.X_train)
    res = hyp.iterate_mackay(
        t, data.y_train, m0 or Hyperparams(), mode=mode, tol=tol, max_iter=max_iter, jitter=jitter
    )
    return PosthocResult(res.hyper, res.n_iter, res.residual, res.converged)


def run(arch, data, cfg, **kw):
    if cfg.procedure == "offline":
        return run_offline(arch, data, cfg, **kw)
    kw.pop("posthoc", None)
    return run_online(arch, data, cfg, **kw)
