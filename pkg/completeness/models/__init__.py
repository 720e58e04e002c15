"""Built-in model families for the three behavioral domains."""
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple, Union

from completeness.core import LossFunction, ModelClass, PredictionRule, ProblemKind
from completeness.models import games, risk, sequences

MODEL_NAMES: Dict[ProblemKind, Tuple[str, ...]] = {
    ProblemKind.RISK: ("eu", "cpt"),
    ProblemKind.GAMES: ("pchm", "level1"),
    ProblemKind.SEQUENCES: ("urn", "rv"),
}

DEFAULT_MODELS: Dict[ProblemKind, Tuple[str, ...]] = {
    ProblemKind.RISK: ("eu", "cpt"),
    ProblemKind.GAMES: ("pchm",),
    ProblemKind.SEQUENCES: ("urn", "rv"),
}

STRICT = "strict"
SIGN_PRESERVING = "sign_preserving"


@dataclass(frozen=True)
class ModelOptions:
    k_max: int = games.DEFAULT_K_MAX
    opponents: str = games.HIERARCHY
    depletion: str = sequences.FORCE
    likelihood: str = sequences.POSTERIOR
    eu_losses: str = SIGN_PRESERVING
    bounds: Mapping[str, Mapping[str, Tuple[float, float]]] = field(
        default_factory=dict
    )


def model_class(
    domain: Union[ProblemKind, str],
    name: str,
    loss: LossFunction,
    options: ModelOptions = ModelOptions(),
) -> Union[ModelClass, PredictionRule]:
    """The named model of ``domain``; parameter-free models come back as rules."""
    domain = ProblemKind(domain)
    if name not in MODEL_NAMES.get(domain, ()):
        raise ValueError(
            "Unknown model '%s' for domain '%s'; known: %s"
            % (name, domain.value, ", ".join(MODEL_NAMES.get(domain, ())))
        )
    if name == "level1":
        return games.level1_rule()
    if name == "eu":
        if options.eu_losses not in (STRICT, SIGN_PRESERVING):
            raise ValueError("eu.losses must be strict or sign_preserving")
        model = risk.eu_model(signed=options.eu_losses == SIGN_PRESERVING)
    elif name == "cpt":
        model = risk.cpt_model()
    elif name == "pchm":
        model = games.pchm_model(k_max=options.k_max, opponents=options.opponents)
    elif name == "urn":
        model = sequences.urn_model(
            loss, depletion=options.depletion, likelihood=options.likelihood
        )
    else:
        model = sequences.rv_model(loss)
    overrides = options.bounds.get(name)
    return model.with_bounds(overrides) if overrides else model
