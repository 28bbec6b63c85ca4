from __future__ import annotations

import json
import re
from typing import List, Literal, Optional

from pydantic import (
    BaseModel,
    ConfigDict,
    NonNegativeInt,
    PositiveInt,
    ValidationInfo,
    field_validator,
    model_validator,
)

SCHEMA_VERSION = 1

Command = Literal["derive", "constraints", "noether", "lift", "verify-paper"]

_DIGEST_REGEXP = re.compile("^[0-9a-f]{64}$")
"""SHA-256 hexadecimal digest"""


# Rendered expressions


class Rendered(BaseModel, frozen=True, extra="forbid"):
    """Expression, form or vector field as plain text and LaTeX"""

    text: str
    latex: str = ""


class Entry(BaseModel, frozen=True, extra="forbid"):
    """Labelled rendered item such as ``Theta_L`` or a Legendre map component"""

    label: str
    value: Rendered


# derive


class DerivePayload(BaseModel, frozen=True, extra="forbid"):
    """Forms, Legendre map and field equations of one side of a theory"""

    side: Literal["lagrangian", "hamiltonian"]
    space: str
    classification: Literal["regular", "singular"]
    forms: List[Entry]
    energy: Entry
    hessian: List[Entry] = []
    legendre: List[Entry] = []
    primary_constraints: List[Entry] = []
    field_equations: List[Entry] = []
    sections: List[Rendered] = []
    unsolved: NonNegativeInt = 0
    pullback_verified: Optional[bool] = None


# constraints


class ConstraintEntry(BaseModel, frozen=True, extra="forbid"):
    stage: Literal["compatibility", "sopde", "tangency"]
    family: str
    source: str
    iteration: NonNegativeInt = 0
    expr: Rendered


class ConstraintsPayload(BaseModel, frozen=True, extra="forbid"):
    """Staged constraint algorithm result"""

    side: Literal["lagrangian", "hamiltonian"]
    space: str
    compatibility: List[ConstraintEntry] = []
    sopde: List[ConstraintEntry] = []
    tangency: List[ConstraintEntry] = []
    status: Literal["converged", "iteration-cap"] = "converged"
    iterations: NonNegativeInt = 0
    final: str
    notes: List[str] = []

    # validators
    @field_validator("compatibility", "sopde", "tangency")
    def check_stage(
        cls, v: List[ConstraintEntry], info: ValidationInfo
    ) -> List[ConstraintEntry]:
        for entry in v:
            if entry.stage != info.field_name:
                raise ValueError(f"{entry.stage} constraint listed as {info.field_name}")
        return v


# noether and lift


class Verdict(BaseModel, frozen=True, extra="forbid"):
    exact: bool
    cartan: bool
    natural: bool = False
    lagrangian_invariance: Optional[bool] = None
    on_constraints: bool = False


class Current(BaseModel, frozen=True, extra="forbid"):
    """Multimomentum map J with i(Y)Ω = -dJ"""

    form: Rendered
    construction: str
    verified: bool
    on_constraints: bool = False
    zero: bool = False


class NoetherPayload(BaseModel, frozen=True, extra="forbid"):
    generator: str
    space: Literal["E", "J1", "MPI", "J1STAR", "P0"]
    vector: Rendered
    verdict: Optional[Verdict] = None
    current: Optional[Current] = None
    lifts: List[Entry] = []


class LiftPayload(BaseModel, frozen=True, extra="forbid"):
    generator: str
    lifts: List[Entry]
    projection: Optional[bool] = None


# verify-paper


class CheckResult(BaseModel, frozen=True, extra="forbid"):
    name: str
    group: str
    passed: bool
    detail: str = ""


class VerifyPayload(BaseModel, frozen=True, extra="forbid"):
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    # validators
    @field_validator("checks")
    def check_unique_names(cls, v: List[CheckResult]) -> List[CheckResult]:
        names = [check.name for check in v]
        if len(set(names)) != len(names):
            raise ValueError("Check names must be unique")
        return v


# report


class Report(BaseModel):
    """Output of a command, rendered as text, LaTeX or JSON

    Reports hold no timestamp: identical input and version give identical reports.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    tool: Literal["multisym"] = "multisym"
    version: str
    schema_version: PositiveInt = SCHEMA_VERSION
    command: Command
    theory: str
    input_digest: str
    assumptions: List[str] = []
    warnings: List[str] = []
    derive: Optional[DerivePayload] = None
    constraints: Optional[ConstraintsPayload] = None
    noether: Optional[NoetherPayload] = None
    lift: Optional[LiftPayload] = None
    verify: Optional[VerifyPayload] = None

    # validators
    @field_validator("input_digest")
    def check_digest(cls, v: str) -> str:
        if _DIGEST_REGEXP.match(v) is None:
            raise ValueError("Must be a SHA-256 hexadecimal digest")
        return v

    @model_validator(mode="after")
    def check_payload(self) -> "Report":
        attribute = "verify" if self.command == "verify-paper" else self.command
        payloads = {
            name
            for name in ("derive", "constraints", "noether", "lift", "verify")
            if getattr(self, name) is not None
        }
        if payloads != {attribute}:
            raise ValueError(f"A '{self.command}' report carries exactly its own payload")
        return self

    def to_json(self) -> str:
        """Keys sorted, two-space indentation, trailing newline"""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
