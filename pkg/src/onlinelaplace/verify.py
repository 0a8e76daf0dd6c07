"""Property checks for the evidence machinery, runnable without pytest.

Each check draws random instances, compares the implementation against an
independent route (dense Gaussian marginal, finite differences, eigenvalues,
grid search) and returns a :class:`CheckResult`.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import linalg
from .evidence import elbo, exact_marginal_oracle, laplace_evidence_lf, tangent_evidence_lh
from .hyper import iterate_mackay
from .model import Hyperparams, MlpArchitecture, jacobian, loss, loss_gradient
from .tangent import from_arrays, gauss_newton_map, ggn, ggn_matrix, tangent_gradient


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def random_hyper(rng, lo=1e-2, hi=1e2):
    return Hyperparams(*np.exp(rng.uniform(math.log(lo), math.log(hi), size=2)))


def random_tangent(rng, n_max=50, d_max=50):
    """Random tangent model, targets and log-uniform hyperparameters."""
    n = int(rng.integers(1, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    t = from_arrays(rng.standard_normal(d), rng.standard_normal(n), rng.standard_normal((n, d)))
    return t, rng.standard_normal(n), random_hyper(rng)


def random_linear_problem(rng, n=None, d=None, noise=None):
    """Frozen tangent model of ``f(w) = X w`` with data from a random linear teacher."""
    n = n or int(rng.integers(30, 81))
    d = d or int(rng.integers(3, 11))
    X = rng.standard_normal((n, d))
    w_true = rng.standard_normal(d) * rng.uniform(0.3, 2.0)
    noise = noise or rng.uniform(0.1, 1.0)
    y = X @ w_true + noise * rng.standard_normal(n)
    w_t = rng.standard_normal(d)
    return from_arrays(w_t, X @ w_t, X), y


def central_difference(fn, x, eps=1e-5):
    """Jacobian of ``fn`` (scalar- or vector-valued) at ``x`` by central differences."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * eps))
    return np.stack(cols, axis=-1)


def relative_error(approx, exact, floor=1e-2):
    """Elementwise ``|a - e| / max(|e|, floor)``, maximised."""
    approx = np.asarray(approx)
    exact = np.asarray(exact)
    return float(np.max(np.abs(approx - exact) / np.maximum(np.abs(exact), floor)))


def random_mlp_instance(rng, d_max=8, h_max=10, n=None):
    d = int(rng.integers(1, d_max + 1))
    h = int(rng.integers(1, h_max + 1))
    n = n or int(rng.integers(2, 16))
    arch = MlpArchitecture(d, h)
    w = rng.standard_normal(arch.n_params)
    X = rng.standard_normal((n, d))
    y = rng.standard_normal(n)
    return arch, w, X, y, random_hyper(rng, 1e-1, 1e1)


def teacher_regression(seed=0, n=400, input_dim=13, hidden=10, noise=1.0, n_test=0, gain=1.5):
    """Targets from a random tanh teacher plus Gaussian noise of ``noise * std(signal)``.

    Returns ``(X, y, X_test, y_test)``; test rows come from the same teacher,
    and both targets are standardised with the training statistics.
    """
    rng = np.random.default_rng(seed)
    teacher = MlpArchitecture(input_dim, hidden)
    w = teacher.init_params(rng) * gain
    X = rng.standard_normal((n + n_test, input_dim))
    f = teacher.forward(w, X)
    y = f + noise * np.std(f[:n]) * rng.standard_normal(n + n_test)
    mu, sd = y[:n].mean(), y[:n].std()
    y = (y - mu) / sd
    return X[:n], y[:n], X[n:], y[n:]


def evidence_errors(t, y, m):
    """All per-instance evidence discrepancies used by the checks below."""
    g = ggn(t, m)
    v = gauss_newton_map(t, m, g, y)
    lf = laplace_evidence_lf(t, g, y, m).total
    lh = tangent_evidence_lh(t, g, y, m, v_star=v).total
    d = v - t.w_t
    quad = 0.5 * float(d @ (ggn_matrix(t, m) @ d))
    return {
        "lf": lf,
        "lh": lh,
        "oracle": exact_marginal_oracle(t, y, m),
        "elbo_vstar": elbo(t, g, v, y, m).total,
        "elbo_wt": elbo(t, g, t.w_t, y, m).total,
        "gap": lh - lf,
        "quad": quad,
    }


def check_evidence(n_instances=200, seed=0):
    rng = np.random.default_rng(seed)
    worst = {"oracle": 0.0, "tight": 0.0, "recover": 0.0, "order": -math.inf, "gap": 0.0}
    for _ in range(n_instances):
        t, y, m = random_tangent(rng)
        e = evidence_errors(t, y, m)
        worst["oracle"] = max(worst["oracle"], abs(e["lh"] - e["oracle"]) / (1 + abs(e["lh"])))
        worst["tight"] = max(worst["tight"], abs(e["elbo_vstar"] - e["lh"]))
        worst["recover"] = max(worst["recover"], abs(e["elbo_wt"] - e["lf"]))
        worst["order"] = max(worst["order"], e["lf"] - e["lh"])
        worst["gap"] = max(worst["gap"], abs(e["gap"] - e["quad"]) / max(abs(e["quad"]), 1e-300))
    return [
        CheckResult("oracle_equivalence", worst["oracle"] < 1e-8, f"max rel err {worst['oracle']:.2e}"),
        CheckResult("elbo_tightness", worst["tight"] < 1e-9, f"max |elbo(v*) - Lh| {worst['tight']:.2e}"),
        CheckResult("elbo_recovery", worst["recover"] == 0.0, f"max |elbo(w_t) - Lf| {worst['recover']:.2e}"),
        CheckResult("evidence_ordering", worst["order"] <= 1e-10, f"max Lf - Lh {worst['order']:.2e}"),
        CheckResult("gap_formula", worst["gap"] < 1e-8, f"max rel err {worst['gap']:.2e}"),
    ]


def check_linalg(n_instances=20, seed=0):
    rng = np.random.default_rng(seed)
    worst_ld = worst_solve = worst_tr = 0.0
    for _ in range(n_instances):
        d = int(rng.integers(1, 51))
        B = rng.standard_normal((d, d))
        A = B.T @ B + np.eye(d)
        f = linalg.cholesky(A)
        ld = float(np.sum(np.log(np.linalg.eigvalsh(A))))
        worst_ld = max(worst_ld, abs(f.log_det - ld) / max(abs(ld), 1.0))
        x = rng.standard_normal(d)
        worst_solve = max(worst_solve, np.linalg.norm(linalg.solve(f, A @ x) - x) / np.linalg.norm(x))
        tr = sum(linalg.solve(f, np.eye(d)[:, i])[i] for i in range(d))
        worst_tr = max(worst_tr, abs(linalg.trace_inverse(f) - tr))
    return [
        CheckResult("cholesky_logdet", worst_ld < 1e-8, f"max rel err {worst_ld:.2e}"),
        CheckResult("cholesky_solve", worst_solve < 1e-7, f"max rel err {worst_solve:.2e}"),
        CheckResult("trace_inverse", worst_tr < 1e-9, f"max abs err {worst_tr:.2e}"),
    ]


def derivative_errors(arch, w, X, y, m, eps=1e-5):
    g = loss_gradient(arch, w, X, y, m)
    g_fd = central_difference(lambda v: loss(arch, v, X, y, m), w, eps)
    J = jacobian(arch, w, X)
    J_fd = central_difference(lambda v: arch.forward(v, X), w, eps)
    return relative_error(g_fd, g), relative_error(J_fd, J)


def check_derivatives(n_instances=50, seed=0):
    rng = np.random.default_rng(seed)
    worst_g = worst_j = worst_match = 0.0
    for _ in range(n_instances):
        arch, w, X, y, m = random_mlp_instance(rng)
        eg, ej = derivative_errors(arch, w, X, y, m)
        worst_g, worst_j = max(worst_g, eg), max(worst_j, ej)
        t = from_arrays(w, arch.forward(w, X), jacobian(arch, w, X))
        gf = loss_gradient(arch, w, X, y, m)
        gh = tangent_gradient(t, w, y, m)
        worst_match = max(worst_match, np.linalg.norm(gf - gh) / (1 + np.linalg.norm(gf)))
    return [
        CheckResult("loss_gradient_fd", worst_g < 1e-5, f"max rel err {worst_g:.2e}"),
        CheckResult("jacobian_fd", worst_j < 1e-5, f"max rel err {worst_j:.2e}"),
        CheckResult("gradient_matching", worst_match < 1e-10, f"max rel diff {worst_match:.2e}"),
    ]


def log_evidence_surface(t, y):
    """``(log alpha, log beta) -> exact tangent evidence`` via the dense marginal."""
    return lambda la_, lb_: exact_marginal_oracle(t, y, Hyperparams(math.exp(la_), math.exp(lb_)))


def grid_maximiser(t, y, lo=-8.0, hi=8.0, n_grid=65, rounds=30):
    """Maximise the tangent evidence over a log-grid, then refine by alternating golden sections."""
    fn = log_evidence_surface(t, y)
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([[fn(a, b) for b in grid] for a in grid])
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    a, b = grid[i], grid[j]
    step = grid[1] - grid[0]
    for _ in range(rounds):
        a_old, b_old = a, b
        a = minimize_scalar(lambda s: -fn(s, b), bracket=(a - step, a, a + step), method="golden",
                            tol=1e-10).x
        b = minimize_scalar(lambda s: -fn(a, s), bracket=(b - step, b, b + step), method="golden",
                            tol=1e-10).x
        if abs(a - a_old) < 1e-9 and abs(b - b_old) < 1e-9:
            break
    return Hyperparams(math.exp(a), math.exp(b))


def evidence_log_gradient(t, y, m, h=1e-4):
    fn = log_evidence_surface(t, y)
    a, b = math.log(m.alpha), math.log(m.beta)
    return ((fn(a + h, b) - fn(a - h, b)) / (2 * h), (fn(a, b + h) - fn(a, b - h)) / (2 * h))


def check_mackay(n_instances=20, seed=0):
    rng = np.random.default_rng(seed)
    worst_rel = worst_grad = 0.0
    all_converged = True
    for _ in range(n_instances):
        t, y = random_linear_problem(rng)
        res = iterate_mackay(t, y, Hyperparams(), mode="lm", tol=1e-6, max_iter=500)
        all_converged &= res.converged
        ref = grid_maximiser(t, y)
        rel = max(abs(res.hyper.alpha / ref.alpha - 1), abs(res.hyper.beta / ref.beta - 1))
        worst_rel = max(worst_rel, rel)
        worst_grad = max(worst_grad, *map(abs, evidence_log_gradient(t, y, res.hyper)))
    return [
        CheckResult("mackay_converges", all_converged, "all runs below 1e-6 within 500 iterations"
                    if all_converged else "iteration cap hit"),
        CheckResult("mackay_matches_grid", worst_rel < 0.02, f"max rel dev {worst_rel:.2e}"),
        CheckResult("mackay_stationary", worst_grad < 1e-3, f"max |dL/dlog| {worst_grad:.2e}"),
    ]


def run_all(seed=0):
    results = []
    results += check_linalg(seed=seed)
    results += check_evidence(seed=seed)
    results += check_derivatives(seed=seed)
    results += check_mackay(seed=seed)
    return results
