"""Central-difference verification of every analytic gradient path.

For each component kind (and for the joint model subgradients) this draws
random instances, rejects any draw whose max/min structures sit within a
small margin of a tie, and compares the analytic gradients against central
finite differences of the actual forward pass. Used both by the test suite
and by the ``check-gradients`` CLI command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embedder import build_state
from .mixture import DsnModel, build_model, eval_model, model_subgrads
from .numerics import seeded_rng
from .submodular import subset_indices

_REL_FLOOR = 1e-8


@dataclass
class GradCheckRow:
    kind: str
    target: str  # "theta" or "param" or "weights"
    points: int
    max_rel_error: float
    ok: bool


def _rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = max(float(np.linalg.norm(numeric)), float(np.linalg.norm(analytic)), _REL_FLOOR)
    return float(np.linalg.norm(analytic - numeric)) / denom


def fd_theta(fn, theta: np.ndarray, step: float) -> np.ndarray:
    """Central differences of a scalar function of theta, entry by entry."""
    grad = np.zeros_like(theta)
    for a in range(theta.shape[0]):
        for b in range(theta.shape[1]):
            bumped = theta.copy()
            bumped[a, b] = theta[a, b] + step
            hi = fn(bumped)
            bumped[a, b] = theta[a, b] - step
            lo = fn(bumped)
            grad[a, b] = (hi - lo) / (2.0 * step)
    return grad


def fd_scalar(fn, value: float, step: float) -> float:
    return (fn(value + step) - fn(value - step)) / (2.0 * step)


def fd_vector(fn, values: np.ndarray, step: float) -> np.ndarray:
    grad = np.zeros_like(values)
    for i in range(values.size):
        bumped = values.copy()
        bumped[i] = values[i] + step
        hi = fn(bumped)
        bumped[i] = values[i] - step
        lo = fn(bumped)
        grad[i] = (hi - lo) / (2.0 * step)
    return grad


def _min_gap(values: np.ndarray) -> float:
    """Gap between the two largest entries (inf when fewer than two)."""
    if values.size < 2:
        return math.inf
    top = np.partition(values, values.size - 2)
    return float(top[-1] - top[-2])


def tie_margin(component, state, subset) -> float:
    """Distance to the nearest tie in the component's max/min structures."""
    idx = subset_indices(subset, state.n)
    margin = math.inf
    kind = component.kind
    if kind in ("fl", "flp") and idx.size >= 2:
        cols = state.s[:, idx]
        margin = min(margin, min(_min_gap(cols[i]) for i in range(state.n)))
    elif kind == "sc":
        covered = state.s[:, idx].sum(axis=1)
        caps = component.lam * state.s.sum(axis=1)
        margin = min(margin, float(np.abs(covered - caps).min()))
    elif kind == "fb":
        margin = min(margin, float(state.x[idx].sum(axis=0).min()))
    elif kind == "fl1mi":
        data_side = state.s[:, idx].max(axis=1)
        query_side = component.lam * state.sq.max(axis=1)
        margin = min(margin, float(np.abs(data_side - query_side).min()))
        if idx.size >= 2:
            cols = state.s[:, idx]
            margin = min(margin, min(_min_gap(cols[i]) for i in range(state.n)))
        if state.sq.shape[1] >= 2:
            margin = min(margin, min(_min_gap(state.sq[i]) for i in range(state.n)))
    elif kind == "fl2mi":
        rows = state.sq[idx]
        if idx.size >= 2:
            margin = min(margin, min(_min_gap(rows[:, j]) for j in range(rows.shape[1])))
        if rows.shape[1] >= 2:
            margin = min(margin, min(_min_gap(rows[i]) for i in range(rows.shape[0])))
    return margin


def _draw_instance(rng, kind: str, n=6, d=3, h=4, m=2):
    from .mixture import make_component

    features = rng.normal(0.0, 1.2, size=(n, d))
    theta = rng.normal(0.0, 0.6, size=(d, h))
    queries = np.abs(rng.normal(0.5, 0.5, size=(m, h))) + 0.05
    subset = sorted(rng.choice(n, size=int(rng.integers(2, 4)), replace=False).tolist())
    params = {}
    if kind == "flp":
        params["lam"] = float(rng.uniform(0.1, 0.6))
    elif kind == "sc":
        params["lam"] = float(rng.uniform(0.2, 0.8))
    elif kind == "gc":
        params["lam"] = float(rng.uniform(0.2, 0.9))
    elif kind in ("fl1mi", "fl2mi"):
        params["lam"] = float(rng.uniform(0.4, 1.4))
    component = make_component(kind, **params)
    if kind == "fb":
        component.gamma = rng.uniform(0.2, 1.0, size=h)
    needs_query = component.requires_query
    state = build_state(theta, features, queries if needs_query else None)
    return component, state, theta, features, queries if needs_query else None, subset


def check_component_kind(kind: str, seed: int, points: int, step: float,
                         margin: float) -> list[GradCheckRow]:
    """Theta- and parameter-gradient rows for one component kind."""
    rng = seeded_rng(seed)
    worst_theta = 0.0
    worst_param = 0.0
    has_param = False
    done = 0
    while done < points:
        component, state, theta, features, queries, subset = _draw_instance(rng, kind)
        if tie_margin(component, state, subset) < margin:
            continue
        done += 1

        def value_at(th):
            st = build_state(th, features, queries)
            return component.evaluate(st, subset)

        numeric = fd_theta(value_at, theta, step)
        analytic = component.theta_grad(state, subset)
        worst_theta = max(worst_theta, _rel_error(analytic, numeric))

        param = component.get_param()
        if param is not None:
            has_param = True
            if np.ndim(param) == 0:
                def value_at_param(p):
                    component.set_param(p)
                    try:
                        return component.evaluate(state, subset)
                    finally:
                        component.set_param(param)

                numeric_p = fd_scalar(value_at_param, float(param), step)
            else:
                base = np.asarray(param, dtype=np.float64)

                def value_at_vec(p):
                    component.set_param(p)
                    try:
                        return component.evaluate(state, subset)
                    finally:
                        component.set_param(base)

                numeric_p = fd_vector(value_at_vec, base, step)
            analytic_p = component.param_grad(state, subset)
            worst_param = max(worst_param, _rel_error(np.asarray(analytic_p), np.asarray(numeric_p)))
    rows = [GradCheckRow(kind=kind, target="theta", points=points, max_rel_error=worst_theta, ok=True)]
    if has_param:
        rows.append(GradCheckRow(kind=kind, target="param", points=points,
                                 max_rel_error=worst_param, ok=True))
    return rows


def _model_margin(model: DsnModel, state, subsets) -> float:
    return min(tie_margin(c, state, sub) for c in model.components for sub in subsets)


def check_model_subgrads(mode: str, seed: int, points: int, step: float,
                         margin: float) -> list[GradCheckRow]:
    """Rows for the joint subgradients of the hinge difference
    F(a_hat) - F(y) at fixed subsets, in every parameter group."""
    rng = seeded_rng(seed)
    n, d, h, m = 6, 3, 4, 2
    beta = 0.05
    worst = {"weights": 0.0, "param": 0.0, "theta": 0.0}
    done = 0
    while done < points:
        kinds = ("fl", "sc", "gc", "fb") if mode == "generic" else ("gcmi", "fl1mi", "fl2mi")
        model = build_model(rng, d, h, kinds=kinds, mode=mode)
        model.weights = rng.uniform(0.2, 1.0, size=len(model.components))
        features = rng.normal(0.0, 1.2, size=(n, d))
        queries = np.abs(rng.normal(0.5, 0.5, size=(m, h))) + 0.05 if mode == "query" else None
        state = build_state(model.theta, features, queries)
        a_hat = frozenset(rng.choice(n, size=3, replace=False).tolist())
        y = frozenset(rng.choice(n, size=3, replace=False).tolist())
        if a_hat == y or _model_margin(model, state, (a_hat, y)) < margin:
            continue
        done += 1
        subs = model_subgrads(model, state, a_hat, y, beta)

        def diff_at_theta(th):
            st = build_state(th, features, queries)
            return eval_model(model, st, a_hat) - eval_model(model, st, y)

        numeric_theta = fd_theta(diff_at_theta, model.theta, step)
        worst["theta"] = max(worst["theta"], _rel_error(subs.d_theta, numeric_theta))

        def diff_at_weights(w):
            saved = model.weights
            model.weights = np.asarray(w, dtype=np.float64)
            try:
                return (eval_model(model, state, a_hat) - eval_model(model, state, y)
                        + 0.5 * beta * float(np.sum(model.weights**2)))
            finally:
                model.weights = saved

        numeric_w = fd_vector(diff_at_weights, model.weights.copy(), step)
        worst["weights"] = max(worst["weights"], _rel_error(subs.d_weights, numeric_w))

        for i, comp in enumerate(model.components):
            param = comp.get_param()
            if param is None:
                continue
            w_i = model.weights[i]

            if np.ndim(param) == 0:
                def diff_at_param(p):
                    comp.set_param(p)
                    try:
                        return w_i * (comp.evaluate(state, a_hat) - comp.evaluate(state, y))
                    finally:
                        comp.set_param(param)

                numeric_p = np.asarray(fd_scalar(diff_at_param, float(param), step))
            else:
                base = np.asarray(param, dtype=np.float64)

                def diff_at_vec(p):
                    comp.set_param(p)
                    try:
                        return w_i * (comp.evaluate(state, a_hat) - comp.evaluate(state, y))
                    finally:
                        comp.set_param(base)

                numeric_p = fd_vector(diff_at_vec, base, step)
            worst["param"] = max(worst["param"], _rel_error(np.asarray(subs.d_params[i]), numeric_p))
    return [
        GradCheckRow(kind=f"model-{mode}", target=target, points=points,
                     max_rel_error=err, ok=True)
        for target, err in worst.items()
    ]


ALL_KINDS = ("fl", "flp", "sc", "gc", "fb", "gcmi", "fl1mi", "fl2mi")


def run_gradient_checks(seed: int = 7, points: int = 20, step: float = 1e-5,
                        threshold: float = 1e-3, margin: float = 1e-6) -> list[GradCheckRow]:
    """All gradient checks; each row's ``ok`` reflects the threshold."""
    rows: list[GradCheckRow] = []
    for i, kind in enumerate(ALL_KINDS):
        rows.extend(check_component_kind(kind, seed + i, points, step, margin))
    rows.extend(check_model_subgrads("generic", seed + 100, points, step, margin))
    rows.extend(check_model_subgrads("query", seed + 200, points, step, margin))
    for row in rows:
        row.ok = row.max_rel_error < threshold
    return rows
