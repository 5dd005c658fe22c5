"""JSON run specifications: parsing, validation and serialization."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources

import jsonschema

from .encounter import AirplaneSpec, Scenario
from .opinion import OpinionParams
from .safety import SafetyParams

SCHEMA_VERSION = "1"
_SIM_KEYS = ("dt", "t_max", "goal_radius", "noise_std", "seed", "opinion_enabled", "heading_mode", "tracking_gain")


class RunSpecError(ValueError):
    """Malformed or invalid run specification; the message names the key or line."""


@dataclass(frozen=True)
class OutputOptions:
    out_dir: str = "out"
    emit_csv: bool = True
    emit_svg: bool = True


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(schema_text())


def schema_text() -> str:
    return resources.files(__package__).joinpath("runspec.schema.json").read_text(encoding="utf-8")


def _key_path(path) -> str:
    out = "$"
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def parse_run_spec(text: str) -> tuple[Scenario, OutputOptions]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RunSpecError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise RunSpecError("top level must be an object")
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise RunSpecError(f"{_key_path(e.absolute_path)}: {e.message}")

    planes = []
    for k, a in enumerate(doc["airplanes"]):
        planes.append(
            AirplaneSpec(
                id=a.get("id", k + 1),
                start=tuple(a["start"]),
                goal=tuple(a["goal"]),
                heading0=a.get("heading0"),
                bias=float(a.get("bias", 0.0)),
            )
        )
    sim = doc.get("simulation", {})
    try:
        scenario = Scenario(
            airplanes=tuple(planes),
            safety=SafetyParams(**{k: float(v) for k, v in doc.get("safety", {}).items()}),
            opinion=OpinionParams(**{k: float(v) for k, v in doc.get("opinion", {}).items()}),
            name=doc.get("name", "run"),
            **sim,
        )
    except ValueError as exc:
        raise RunSpecError(f"$: {exc}") from None
    return scenario, OutputOptions(**doc.get("output", {}))


def load_run_spec(path) -> tuple[Scenario, OutputOptions]:
    with open(path, encoding="utf-8") as fh:
        return parse_run_spec(fh.read())


def dump_run_spec(scenario: Scenario, output: OutputOptions | None = None) -> str:
    """Serialize to the same JSON shape ``parse_run_spec`` reads."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "airplanes": [
            {
                "id": a.id,
                "start": list(a.start),
                "goal": list(a.goal),
                "heading0": a.heading0,
                "bias": a.bias,
            }
            for a in scenario.airplanes
        ],
        "safety": asdict(scenario.safety),
        "opinion": asdict(scenario.opinion),
        "simulation": {k: getattr(scenario, k) for k in _SIM_KEYS},
    }
    if output is not None:
        doc["output"] = asdict(output)
    return json.dumps(doc, indent=2)
