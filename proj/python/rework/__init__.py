"""Double machine learning for rework decisions: effects, CATE curves and policies."""

import json

from ._core import (  # noqa: F401
    ConfigError,
    Error,
    EstimationError,
    IoError,
    apply_policy as _apply_policy,
    aipw_scores,
    estimate_ate as _estimate_ate,
    evaluate_policy as _evaluate_policy,
    fit_cate as _fit_cate,
    fit_effects as _fit_effects,
    policy_tree as _policy_tree,
    run_stage as _run_stage,
    simulate as _simulate,
    spline_basis as _spline_basis,
)

__all__ = [
    "ConfigError",
    "Error",
    "EstimationError",
    "IoError",
    "aipw_scores",
    "apply_policy",
    "estimate_ate",
    "evaluate_policy",
    "fit_cate",
    "fit_effects",
    "policy_tree",
    "run_stage",
    "simulate",
    "spline_basis",
]


def simulate(**dgp):
    """Synthetic lots. Returns (y, a, x, lot_id, oracle) with oracle as a dict."""
    y, a, x, ids, oracle = _simulate(json.dumps(dgp))
    return y, a, x, ids, json.loads(oracle)


def fit_effects(y, a, x, g_learner="gradient_boosting", m_learner="logistic", **kwargs):
    """Cross-fitted ATE/ATTE. Learners are family names or spec dicts."""
    summary, psi_b, g0, g1, m = _fit_effects(y, a, x, json.dumps(g_learner), json.dumps(m_learner), **kwargs)
    out = json.loads(summary)
    out.update(psi_b=psi_b, g0_hat=g0, g1_hat=g1, m_hat=m)
    return out


def estimate_ate(psi_b, level=0.95):
    return json.loads(_estimate_ate(psi_b, level))


def spline_basis(x_tilde, kind="bspline_1d", **spec):
    spec["kind"] = kind
    return _spline_basis(json.dumps(spec), x_tilde)


def fit_cate(x_tilde, psi_b, grid, kind="bspline_1d", alpha=0.05, draws=500, seed=0, **spec):
    spec["kind"] = kind
    fit, est, lo_pt, hi_pt, lo_u, hi_u = _fit_cate(json.dumps(spec), x_tilde, psi_b, grid, alpha, draws, seed)
    return {
        "fit": json.loads(fit),
        "theta_hat": est,
        "lo_pt": lo_pt,
        "hi_pt": hi_pt,
        "lo_unif": lo_u,
        "hi_unif": hi_u,
    }


def policy_tree(x, psi_b, gamma, depth=2, greedy=False):
    return json.loads(_policy_tree(x, psi_b, gamma, depth, greedy))


def apply_policy(policy, x):
    return _apply_policy(json.dumps(policy), x)


def evaluate_policy(assignment, psi_b, level=0.95):
    return json.loads(_evaluate_policy(assignment, psi_b, level))


def run_stage(stage, config, output_dir=""):
    """Runs one pipeline stage from a config dict; returns the output directory."""
    return _run_stage(stage, json.dumps(config), str(output_dir))
