"""Experiment files: a JSON document that resolves to a SimulationConfig.

Example::

    {
      "schema": "dhtlearn-experiment/1",
      "graph": {"generator": "path", "n": 3},
      "hypotheses": {"labels": ["h0", "h1"], "true": "h0"},
      "agents": {"likelihoods": [[[0.8, 0.2], [0.2, 0.8]],
                                 [[0.5, 0.5], [0.5, 0.5]],
                                 [[0.5, 0.5], [0.5, 0.5]]]},
      "run": {"rule": "min_rule", "horizon": 1000, "seed": 7}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import jsonschema

from . import graph as G
from .adversary import AdversaryConfig, make_strategy
from .beliefs import AgentState, BeliefVector
from .engine import SCHEMA, SimulationConfig
from .exceptions import ConfigError, DHTError
from .model import HypothesisSet, ObservationModel, SignalStructure


class ParseError(ConfigError):
    """Experiment file could not be parsed; message carries line or field context."""


_INT = {"type": "integer"}
_NUM_ARRAY = {"type": "array"}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["graph", "hypotheses", "agents", "run"],
    "properties": {
        "schema": {"const": SCHEMA},
        "graph": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "edges": {"type": "array", "items": {"type": "array", "items": _INT,
                                                     "minItems": 2, "maxItems": 2}},
                "generator": {"enum": sorted(G.GENERATORS)},
                "bidirectional": {"type": "boolean"},
                "p": {"type": "number", "minimum": 0, "maximum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "offsets": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "file": {"type": "string"},
            },
        },
        "hypotheses": {
            "type": "object",
            "additionalProperties": False,
            "required": ["labels"],
            "properties": {
                "labels": {"type": "array", "items": {"type": "string"}, "minItems": 2},
                "true": {"type": ["string", "integer"]},
            },
        },
        "agents": {
            "type": "object",
            "additionalProperties": False,
            "required": ["likelihoods"],
            "properties": {
                "likelihoods": _NUM_ARRAY,
                "joint": _NUM_ARRAY,
                "priors": {
                    "oneOf": [
                        {"const": "uniform"},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["local", "actual"],
                            "properties": {"local": _NUM_ARRAY, "actual": _NUM_ARRAY},
                        },
                    ]
                },
            },
        },
        "adversary": {
            "type": "object",
            "additionalProperties": False,
            "required": ["agents", "f"],
            "properties": {
                "agents": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "f": {"type": "integer", "minimum": 0},
                "strategy": {
                    "type": "object",
                    "required": ["id"],
                    "properties": {"id": {"type": "string"}},
                },
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "required": ["rule", "horizon"],
            "properties": {
                "rule": {"enum": ["min_rule", "lfrhe"]},
                "horizon": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "seeds": {"oneOf": [
                    {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                    {"type": "string"},
                ]},
                "checked": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"type": "string"},
                "format": {"enum": ["csv", "jsonl"]},
                "thin": {"type": "integer", "minimum": 1},
            },
        },
    },
}


@dataclass(frozen=True)
class Experiment:
    config: SimulationConfig
    seeds: List[int] = field(default_factory=list)
    output_path: Optional[str] = None
    output_format: str = "jsonl"


def parse_seed_range(text: str) -> List[int]:
    """``"a..b"`` (inclusive) or a comma-separated list of seeds."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
            if hi < lo:
                raise ValueError
            seeds = list(range(lo, hi + 1))
        else:
            seeds = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ParseError(f"invalid seed range {text!r}; expected 'a..b' or 'a,b,c'") from None
    if not seeds or any(s < 0 for s in seeds):
        raise ParseError(f"invalid seed range {text!r}")
    return seeds


def _field(path) -> str:
    return ".".join(str(p) for p in path) or "<root>"


def _build_graph(doc: dict, base: Path) -> G.DirectedGraph:
    if "file" in doc:
        return G.read_edge_list(base / doc["file"])
    if "generator" in doc:
        gen = doc["generator"]
        if "n" not in doc:
            raise ParseError("graph.n: required by generator")
        n = doc["n"]
        if gen in ("path", "cycle"):
            return G.GENERATORS[gen](n, doc.get("bidirectional", False))
        if gen == "complete":
            return G.complete_graph(n)
        if gen == "circulant":
            return G.circulant_graph(n, doc.get("offsets", [1]))
        return G.random_digraph(n, doc.get("p", 0.5), doc.get("seed", 0))
    if "n" not in doc:
        raise ParseError("graph: give 'n' with 'edges', a 'generator', or a 'file'")
    return G.DirectedGraph.from_edges(doc["n"], [tuple(e) for e in doc.get("edges", [])])


def _build_model(hyp: HypothesisSet, agents: dict) -> ObservationModel:
    tables = agents["likelihoods"]
    structures = tuple(SignalStructure(i, t) for i, t in enumerate(tables))
    if "joint" in agents:
        return ObservationModel(hyp, structures, kind="joint", joint=agents["joint"])
    return ObservationModel(hyp, structures)


def _build_priors(priors_doc, n: int, m: int):
    if priors_doc is None or priors_doc == "uniform":
        return None
    local, actual = priors_doc["local"], priors_doc["actual"]
    if len(local) != n or len(actual) != n:
        raise ParseError(f"agents.priors: need one row per agent ({n})")
    return tuple(AgentState(BeliefVector.from_probs(a), BeliefVector.from_probs(b))
                 for a, b in zip(local, actual))


def experiment_from_dict(doc: dict, base: Path = Path(".")) -> Experiment:
    validator = jsonschema.Draft7Validator(EXPERIMENT_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ParseError(f"{_field(e.absolute_path)}: {e.message}")
    try:
        hdoc = doc["hypotheses"]
        truth = hdoc.get("true", 0)
        labels = hdoc["labels"]
        if isinstance(truth, str):
            if truth not in labels:
                raise ParseError(f"hypotheses.true: {truth!r} is not one of {labels}")
            truth = labels.index(truth)
        hyp = HypothesisSet(tuple(labels), truth)
        g = _build_graph(doc["graph"], base)
        model = _build_model(hyp, doc["agents"])
        priors = _build_priors(doc["agents"].get("priors"), model.n, hyp.m)

        adversary = None
        if "adversary" in doc:
            adoc = doc["adversary"]
            strategy = None
            if "strategy" in adoc:
                params = dict(adoc["strategy"])
                strategy = make_strategy(params.pop("id"), **params)
            adversary = AdversaryConfig(frozenset(adoc["agents"]), adoc["f"], strategy)

        rdoc = doc["run"]
        odoc = doc.get("output", {})
        if "seeds" in rdoc:
            seeds = rdoc["seeds"]
            seeds = parse_seed_range(seeds) if isinstance(seeds, str) else list(seeds)
        else:
            seeds = [rdoc.get("seed", 0)]
        config = SimulationConfig(
            graph=g,
            model=model,
            rule=rdoc["rule"],
            adversary=adversary,
            priors=priors,
            horizon=rdoc["horizon"],
            seed=seeds[0],
            checked_mode=rdoc.get("checked", False),
            thin=odoc.get("thin", 1),
        )
    except ParseError:
        raise
    except (DHTError, OSError) as exc:
        raise ParseError(str(exc)) from None
    return Experiment(config, seeds, odoc.get("path"), odoc.get("format", "jsonl"))


def load_experiment(path) -> Experiment:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return experiment_from_dict(doc, path.parent)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def config_from_dict(doc: dict) -> SimulationConfig:
    """Rebuild the SimulationConfig serialized by ``SimulationConfig.to_dict``."""
    return experiment_from_dict(doc).config


def dump_experiment(config: SimulationConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")
