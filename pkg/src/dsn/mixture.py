"""The trainable model: a weighted mixture of set-function components over a
shared learned embedding, with an optional concave composition layer.

The model owns the embedding parameters, the component list with their
internal parameters, and the mixture weights. It produces per-collection
evaluation states, incremental objectives for greedy maximization, and the
joint subgradients used by max-margin training. Serialization is a single
JSON document whose floats round-trip bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedder import EmbeddingState, ThetaGradAccumulator, build_state
from .errors import DataFormatError, DimensionError
from .numerics import xavier_init
from .submodular import (
    Component,
    FacilityLocation,
    FacilityLocationPenalty,
    FeatureBased,
    GraphCut,
    SaturatedCoverage,
    make_concave,
)
from .smi import FacilityLocationMI1, FacilityLocationMI2, GraphCutMI

COMPONENT_KINDS = {
    "fl": FacilityLocation,
    "flp": FacilityLocationPenalty,
    "sc": SaturatedCoverage,
    "gc": GraphCut,
    "fb": FeatureBased,
    "gcmi": GraphCutMI,
    "fl1mi": FacilityLocationMI1,
    "fl2mi": FacilityLocationMI2,
}

GENERIC_KINDS = ("fl", "flp", "sc", "gc", "fb")
QUERY_KINDS = ("gcmi", "fl1mi", "fl2mi")

DEFAULT_GENERIC_COMPONENTS = ("fl", "fb", "gc", "sc")
DEFAULT_QUERY_COMPONENTS = ("gcmi", "fl2mi")


def make_component(kind: str, **params) -> Component:
    if kind not in COMPONENT_KINDS:
        raise ValueError(f"unknown component kind {kind!r}")
    cls = COMPONENT_KINDS[kind]
    if kind == "fb":
        concave_spec = params.pop("concave", None)
        concave = make_concave(**concave_spec) if concave_spec else None
        return cls(gamma=params.pop("gamma", None), concave=concave, **params)
    if "lambda" in params:
        params["lam"] = params.pop("lambda")
    if "init_lambda" in params:
        params["lam"] = params.pop("init_lambda")
    return cls(**params)


@dataclass
class Composition:
    """Optional outer layer: sum_p psi_p(sum_j weights[p, j] * f_j(A))."""

    psis: list
    weights: np.ndarray  # P x M, nonnegative

    def validate(self, n_components: int) -> "Composition":
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape != (len(self.psis), n_components):
            raise ValueError(
                f"composition weights must have shape ({len(self.psis)}, {n_components})"
            )
        if np.any(self.weights < 0):
            raise ValueError("composition weights must be nonnegative")
        return self


@dataclass
class DsnModel:
    """Embedding parameters plus components, weights, and optional composition."""

    mode: str  # "generic" or "query"
    theta: np.ndarray  # d x h
    components: list[Component]
    weights: np.ndarray  # one weight per component
    composition: Composition | None = None

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    @property
    def hidden(self) -> int:
        return self.theta.shape[1]

    def validate(self) -> "DsnModel":
        if self.mode not in ("generic", "query"):
            raise ValueError(f"unknown mode {self.mode!r}")
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.components),):
            raise ValueError("need exactly one mixture weight per component")
        if np.any(self.weights < 0):
            raise ValueError("mixture weights must be nonnegative")
        allowed = QUERY_KINDS if self.mode == "query" else GENERIC_KINDS
        for comp in self.components:
            if comp.kind not in allowed:
                raise ValueError(f"component {comp.kind!r} not usable in {self.mode} mode")
            if isinstance(comp, FeatureBased):
                comp.bind_width(self.hidden)
        if self.composition is not None:
            self.composition.validate(len(self.components))
        return self

    def state_for(self, collection, query=None) -> EmbeddingState:
        """Build the evaluation state for one collection (and query set)."""
        features = getattr(collection, "features", collection)
        features = np.asarray(features, dtype=np.float64)
        if features.shape[1] != self.dim:
            raise DimensionError(
                f"collection feature dimension {features.shape[1]} does not match model dim {self.dim}"
            )
        if self.mode == "query":
            if query is None:
                raise ValueError("query-mode model needs a query set")
            qf = np.asarray(getattr(query, "features", query), dtype=np.float64)
            if qf.ndim != 2 or qf.shape[1] != self.hidden:
                raise DimensionError(
                    f"query feature dimension {qf.shape[-1] if qf.ndim else '?'} must equal "
                    f"the embedding width {self.hidden}"
                )
            return build_state(self.theta, features, qf)
        if query is not None:
            raise ValueError("generic-mode model does not accept a query set")
        return build_state(self.theta, features)

    def objective(self, state: EmbeddingState) -> "ModelObjective":
        return ModelObjective(self, state)

    def copy(self) -> "DsnModel":
        return model_from_dict(model_to_dict(self))

    def project(self) -> None:
        """Clamp weights and every internal parameter to their valid ranges."""
        np.maximum(self.weights, 0.0, out=self.weights)
        if self.composition is not None:
            np.maximum(self.composition.weights, 0.0, out=self.composition.weights)
        for comp in self.components:
            comp.clamp()


def build_model(
    rng,
    dim: int,
    hidden: int,
    kinds=None,
    mode: str = "generic",
    composition: Composition | None = None,
) -> DsnModel:
    """Fresh model: Xavier-initialized embedding, mixture weights uniform on
    [0, 1], component parameters at their per-kind defaults."""
    if kinds is None:
        kinds = DEFAULT_QUERY_COMPONENTS if mode == "query" else DEFAULT_GENERIC_COMPONENTS
    components = []
    for spec in kinds:
        if isinstance(spec, Component):
            components.append(spec)
        elif isinstance(spec, str):
            components.append(make_component(spec))
        else:
            kind, params = spec
            components.append(make_component(kind, **params))
    theta = xavier_init(rng, dim, hidden)
    weights = rng.uniform(0.0, 1.0, size=len(components))
    return DsnModel(
        mode=mode, theta=theta, components=components, weights=weights, composition=composition
    ).validate()


def eval_model(model: DsnModel, state: EmbeddingState, subset) -> float:
    """Model value at one subset: weighted sum, or concave composition."""
    values = np.array([c.evaluate(state, subset) for c in model.components])
    if model.composition is None:
        return float(np.dot(model.weights, values))
    inner = model.composition.weights @ values
    return float(sum(psi(t) for psi, t in zip(model.composition.psis, inner)))


class ModelObjective:
    """Incremental marginal gains of the model over one insertion sequence.

    In mixture form the gain is the weighted sum of per-component gains; the
    composition form differences the outer concave layer using exact running
    component totals from the caches.
    """

    def __init__(self, model: DsnModel, state: EmbeddingState):
        self.model = model
        self.n = state.n
        self.caches = [c.make_cache(state) for c in model.components]

    def _totals(self) -> np.ndarray:
        return np.array([c.value for c in self.caches])

    def gain(self, v: int) -> float:
        gains = np.array([c.gain(v) for c in self.caches])
        if self.model.composition is None:
            return float(np.dot(self.model.weights, gains))
        comp = self.model.composition
        totals = self._totals()
        before = comp.weights @ totals
        after = comp.weights @ (totals + gains)
        return float(sum(psi(a) - psi(b) for psi, a, b in zip(comp.psis, after, before)))

    def add(self, v: int) -> None:
        for cache in self.caches:
            cache.add(v)

    def value(self) -> float:
        totals = self._totals()
        if self.model.composition is None:
            return float(np.dot(self.model.weights, totals))
        comp = self.model.composition
        inner = comp.weights @ totals
        return float(sum(psi(t) for psi, t in zip(comp.psis, inner)))


def model_marginal_gain(objective: ModelObjective, v: int) -> float:
    """Marginal gain of adding item v to the objective's current set."""
    return objective.gain(v)


@dataclass
class ModelSubgrads:
    """Joint subgradients of one hinge term at a fixed pair of subsets."""

    d_weights: np.ndarray  # mixture vector, or P x M composition matrix
    d_params: list  # per component: None, float, or array
    d_theta: np.ndarray  # d x h


def model_subgrads(model: DsnModel, state: EmbeddingState, a_hat, y, beta: float) -> ModelSubgrads:
    """Subgradients of F(a_hat) - F(y) + (beta/2)||w||^2 in all parameters.

    a_hat is the loss-augmented maximizer and y the reference summary; both
    are treated as fixed sets.
    """
    f_hat = np.array([c.evaluate(state, a_hat) for c in model.components])
    f_ref = np.array([c.evaluate(state, y) for c in model.components])
    acc = ThetaGradAccumulator(state)
    d_params: list = []

    if model.composition is None:
        d_weights = f_hat - f_ref + beta * model.weights
        coeff_hat = model.weights
        coeff_ref = model.weights
    else:
        comp = model.composition
        inner_hat = comp.weights @ f_hat
        inner_ref = comp.weights @ f_ref
        dpsi_hat = np.array([psi.derivative(t) for psi, t in zip(comp.psis, inner_hat)])
        dpsi_ref = np.array([psi.derivative(t) for psi, t in zip(comp.psis, inner_ref)])
        d_weights = (
            np.outer(dpsi_hat, f_hat) - np.outer(dpsi_ref, f_ref) + beta * comp.weights
        )
        coeff_hat = dpsi_hat @ comp.weights
        coeff_ref = dpsi_ref @ comp.weights

    for i, comp_i in enumerate(model.components):
        if comp_i.get_param() is None:
            d_params.append(None)
        else:
            g_hat = comp_i.param_grad(state, a_hat)
            g_ref = comp_i.param_grad(state, y)
            d_params.append(coeff_hat[i] * np.asarray(g_hat) - coeff_ref[i] * np.asarray(g_ref))
        if coeff_hat[i] != 0.0:
            comp_i.add_theta_weights(state, a_hat, coeff_hat[i], acc)
        if coeff_ref[i] != 0.0:
            comp_i.add_theta_weights(state, y, -coeff_ref[i], acc)

    return ModelSubgrads(d_weights=d_weights, d_params=d_params, d_theta=acc.total())


# ---------------------------------------------------------------------------
# Serialization


def model_to_dict(model: DsnModel) -> dict:
    doc = {
        "mode": model.mode,
        "dim": int(model.dim),
        "hidden": int(model.hidden),
        "theta": model.theta.tolist(),
        "components": [c.to_dict() for c in model.components],
        "weights": model.weights.tolist(),
    }
    if model.composition is not None:
        doc["composition"] = {
            "psis": [
                {"kind": p.kind} if p.cap is None else {"kind": p.kind, "cap": p.cap}
                for p in model.composition.psis
            ],
            "weights": model.composition.weights.tolist(),
        }
    return doc


def model_from_dict(doc: dict) -> DsnModel:
    try:
        theta = np.asarray(doc["theta"], dtype=np.float64)
        components = [make_component(spec.pop("kind"), **spec) for spec in
                      [dict(c) for c in doc["components"]]]
        weights = np.asarray(doc["weights"], dtype=np.float64)
        mode = doc["mode"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid model document: {exc}")
    if theta.shape != (int(doc.get("dim", theta.shape[0])), int(doc.get("hidden", theta.shape[-1]))):
        raise DataFormatError("model theta shape disagrees with declared dim/hidden")
    composition = None
    if "composition" in doc and doc["composition"] is not None:
        try:
            spec = doc["composition"]
            psis = [make_concave(**p) for p in spec["psis"]]
            composition = Composition(psis=psis, weights=np.asarray(spec["weights"], dtype=np.float64))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"invalid composition block: {exc}")
    try:
        return DsnModel(
            mode=mode, theta=theta, components=components, weights=weights, composition=composition
        ).validate()
    except ValueError as exc:
        raise DataFormatError(str(exc))


def save_model(model: DsnModel, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model), sort_keys=True) + "\n")
    return path


def load_model(path) -> DsnModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: cannot parse model file: {exc}")
    return model_from_dict(doc)
