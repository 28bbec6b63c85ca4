import json

import pytest
from pydantic import ValidationError

from multisym.models import (
    CheckResult,
    ConstraintEntry,
    ConstraintsPayload,
    LiftPayload,
    Rendered,
    Report,
    VerifyPayload,
)
from multisym.utils import data_hash

DIGEST = data_hash(b"theory")


def verify_payload(*passed: bool) -> VerifyPayload:
    return VerifyPayload(
        checks=[
            CheckResult(name=f"forms.check{i}", group="forms", passed=p)
            for i, p in enumerate(passed)
        ]
    )


def test_report():
    report = Report(
        version="0.1.0",
        command="verify-paper",
        theory="builtin",
        input_digest=DIGEST,
        verify=verify_payload(True, False),
    )
    assert report.tool == "multisym"
    assert report.schema_version == 1
    assert not report.verify.passed
    assert [c.name for c in report.verify.failures] == ["forms.check1"]


@pytest.mark.parametrize(
    "digest",
    [
        "",
        "abc",
        DIGEST.upper(),
        DIGEST[:-1],
        DIGEST + "0",
    ],
)
def test_invalid_digest(digest):
    with pytest.raises(ValidationError):
        Report(
            version="0.1.0",
            command="verify-paper",
            theory="builtin",
            input_digest=digest,
            verify=verify_payload(True),
        )


@pytest.mark.parametrize(
    "command,payloads",
    [
        ("verify-paper", {}),  # missing
        ("lift", {"verify": verify_payload(True)}),  # other command
        (
            "lift",
            {
                "lift": LiftPayload(generator="shift", lifts=[]),
                "verify": verify_payload(True),
            },
        ),  # extra payload
    ],
)
def test_payload_exclusive(command, payloads):
    """Test a report carries exactly the payload of its command"""
    with pytest.raises(ValidationError):
        Report(
            version="0.1.0", command=command, theory="free", input_digest=DIGEST, **payloads
        )


def test_unknown_command():
    with pytest.raises(ValidationError):
        Report(version="0.1.0", command="solve", theory="free", input_digest=DIGEST)


def test_duplicate_checks():
    with pytest.raises(ValidationError):
        VerifyPayload(
            checks=[
                CheckResult(name="forms.a", group="forms", passed=True),
                CheckResult(name="forms.a", group="forms", passed=False),
            ]
        )


def test_constraint_stage():
    """Test constraints must be listed under their own stage"""
    entry = ConstraintEntry(
        stage="tangency", family="y", source="Omega_L", expr=Rendered(text="y[0]")
    )
    ConstraintsPayload(side="lagrangian", space="J1Pi", tangency=[entry], final="")
    with pytest.raises(ValidationError):
        ConstraintsPayload(side="lagrangian", space="J1Pi", sopde=[entry], final="")


def test_frozen():
    payload = LiftPayload(generator="shift", lifts=[])
    with pytest.raises(ValidationError):
        payload.generator = "other"


def test_to_json():
    """Test JSON output is sorted, indented and ends with a newline"""
    report = Report(
        version="0.1.0",
        command="lift",
        theory="free",
        input_digest=DIGEST,
        lift=LiftPayload(generator="shift", lifts=[], projection=True),
    )
    text = report.to_json()
    assert text.endswith("}\n")
    data = json.loads(text)
    assert list(data) == sorted(data)
    assert data["lift"]["projection"] is True
    assert data["derive"] is None
    assert '\n  "command": "lift",' in text
    assert Report.model_validate(data) == report
