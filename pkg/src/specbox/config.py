"""Run configuration: JSON file -> validated ``RunConfig``.

Validation errors name the offending field and the line of the config file
where it (or its closest enclosing key) appears.
"""
from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError, model_validator

from .model import BoxProblem, CosineSpec, TrigPotential, build_potential

TASKS = ("spectrum", "heat-trace", "fit", "decompose", "invariants", "compare", "verify")


class ConfigError(ValueError):
    """Unreadable or invalid configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProblemConfig(_Strict):
    sides: list[PositiveFloat] = Field(min_length=1, max_length=3)
    bc: Optional[list[str]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.bc is not None:
            if len(self.bc) != len(self.sides):
                raise ValueError("need one boundary pair per side")
            for pair in self.bc:
                if not re.fullmatch(r"[DNdn]{2}", pair):
                    raise ValueError(f"boundary pair {pair!r} must be two letters from D, N")
        return self

    def box(self) -> BoxProblem:
        return BoxProblem(tuple(self.sides), tuple(self.bc) if self.bc else ())


class TermConfig(_Strict):
    m: list[int]
    c: float


class PotentialConfig(_Strict):
    terms: list[TermConfig] = Field(default_factory=list)


class ParamsConfig(_Strict):
    K: Optional[int] = Field(default=None, ge=4)
    K_cell: Optional[int] = Field(default=None, ge=4)
    J: int = Field(default=20, ge=1)
    t_grid: Optional[list[PositiveFloat]] = None
    t_set: Optional[list[PositiveFloat]] = None
    exponents: Optional[list[float]] = None
    subtract_geometric: Optional[bool] = None
    guards: int = Field(default=3, ge=0)
    tolerance: Optional[PositiveFloat] = None
    rtol: PositiveFloat = 0.02
    atol: Optional[float] = Field(default=None, ge=0)
    spectra_tol: PositiveFloat = 1e-8
    integral_tol: PositiveFloat = 1e-10
    heat_tol: PositiveFloat = 1e-6
    heat: bool = True
    radii: int = Field(default=8, ge=1)
    irrationality_bound: int = Field(default=200, ge=1)
    cap: int = Field(default=20000, ge=1)


class OutputConfig(_Strict):
    dir: str = "out"
    csv: bool = True


class RunConfig(_Strict):
    """Validated run description.

    ``potential`` is a cosine series on ``problem.sides``; ``second_potential``
    is required by ``compare``.
    """

    task: Literal["spectrum", "heat-trace", "fit", "decompose", "invariants", "compare", "verify"]
    problem: ProblemConfig
    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    second_potential: Optional[PotentialConfig] = None
    params: ParamsConfig = Field(default_factory=ParamsConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _check(self):
        n = len(self.problem.sides)
        for name in ("potential", "second_potential"):
            pot = getattr(self, name)
            if pot is None:
                continue
            for i, t in enumerate(pot.terms):
                if len(t.m) != n:
                    raise ValueError(f"{name}.terms[{i}].m has {len(t.m)} entries, expected {n}")
                if any(v < 0 for v in t.m):
                    raise ValueError(f"{name}.terms[{i}].m must be nonnegative")
        if self.task == "compare" and self.second_potential is None:
            raise ValueError("task 'compare' needs second_potential")
        return self

    def box(self) -> BoxProblem:
        return self.problem.box()

    def cosine(self, which: str = "potential") -> CosineSpec:
        pot = getattr(self, which)
        return CosineSpec(tuple(self.problem.sides), [(t.m, t.c) for t in pot.terms])

    def trig(self, which: str = "potential") -> TrigPotential:
        return build_potential(self.cosine(which))

    def echo(self) -> dict:
        """JSON form that parses back to an equal config."""
        return self.model_dump(mode="json")


def _line_of(text: str, loc: tuple) -> int:
    """Line of the deepest key of ``loc`` found in order in ``text``."""
    pos, line = 0, 1
    for part in loc:
        if isinstance(part, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(part))).search(text, pos)
        if m is None:
            break
        pos = m.start()
        line = text.count("\n", 0, pos) + 1
    return line


def parse_config(text: str, source: str = "<config>", task: str | None = None) -> RunConfig:
    """Validate JSON text; ``task`` fills in a missing ``"task"`` key."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if task is not None and isinstance(doc, dict):
        doc.setdefault("task", task)
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = tuple(err["loc"])
            field = ".".join(str(p) for p in loc) or "<root>"
            msgs.append(f"{source}:{_line_of(text, loc)}: {field}: {err['msg']}")
        raise ConfigError("\n".join(msgs)) from None


def load_config(path: str | Path, task: str | None = None) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(p), task)
