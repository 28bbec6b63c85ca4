"""The ``multisym`` command line"""

from __future__ import annotations

import contextlib
import json
import logging
import os.path
import sys
from typing import Iterator, List, Optional, Tuple

import traitlets
from traitlets.config import Application, catch_config_error

from . import version
from .constraints import ConstraintAlgorithm, ConstraintReport
from .elimination import LinearSolver
from .errors import IterationCapExceeded, MultisymError, VerificationFailure
from .geometry import Side
from .lifts import check_legendre_projection, lift_all
from .models import Report
from .multivec import ContractionOrder
from .noether import SpaceName, analyze_symmetry
from .reports import (
    FORMATS,
    constraints_payload,
    derive_payload,
    lift_payload,
    noether_payload,
    render_report,
)
from .symkernel import Kernel
from .theory import BUILTIN_THEORIES, Theory, builtin_source, parse_theory
from .utils import data_hash
from .verify import GROUPS, VerificationContext, run_checks


class WarningCollector(logging.Handler):
    """Keep the warnings logged while a report is computed"""

    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: List[str] = []

    def emit(self, record: logging.LogRecord) -> None:
        message = record.getMessage()
        if message not in self.messages:
            self.messages.append(message)


def read_source(path: str) -> bytes:
    """Content of a theory file, or of the bundled theory of the same name"""
    if not os.path.exists(path):
        name = os.path.splitext(os.path.basename(path))[0]
        if name in BUILTIN_THEORIES:
            return builtin_source(name)
    with open(path, "rb") as f:
        return f.read()


_COMMON_ALIASES = {
    "format": "Command.format",
    "out": "Command.out",
    "contraction-order": "Command.contraction_order",
    "c": "Command.config_file",
    "config": "Command.config_file",
    "log-level": "Application.log_level",
}

_COMMON_FLAGS = {
    "debug": (
        {"Application": {"log_level": logging.DEBUG}},
        "Log the progress of every algorithm.",
    ),
}


class Command(Application):
    """Options shared by every subcommand"""

    version = version

    classes = [Kernel, LinearSolver, ConstraintAlgorithm]

    format = traitlets.CaselessStrEnum(
        FORMATS, default_value="text", help="Report format."
    ).tag(config=True)

    out = traitlets.Unicode(
        "", help="File to write the report to, standard output if empty."
    ).tag(config=True)

    template_paths = traitlets.List(
        trait=traitlets.Unicode(),
        help="Directories searched for report templates before the embedded ones.",
    ).tag(config=True)

    contraction_order = traitlets.CaselessStrEnum(
        [o.value for o in ContractionOrder],
        default_value=ContractionOrder.INNERMOST_FIRST.value,
        help="Order of the iterated contraction i(X)Omega of multivector fields.",
    ).tag(config=True)

    config_file = traitlets.Unicode("", help="Python configuration file.").tag(config=True)

    aliases = _COMMON_ALIASES
    flags = _COMMON_FLAGS

    command = ""

    @catch_config_error
    def initialize(self, argv=None):
        super().initialize(argv)
        if self.config_file:
            self.load_config_file(self.config_file)
            # Command line options take precedence over the file
            self.update_config(self.cli_config)

    # helpers

    def theory_argument(self) -> Tuple[Theory, bytes]:
        """Theory named by the single positional argument"""
        if len(self.extra_args) != 1:
            self.log.error("Expected exactly one theory file, got %d", len(self.extra_args))
            self.exit(1)
        path = self.extra_args[0]
        try:
            source = read_source(path)
        except OSError as error:
            self.log.error("Cannot read %s: %s", path, error)
            self.exit(1)
        self.log.info("Loading theory from %s", path)
        return parse_theory(source, parent=self), source

    def constraint_algorithm(self, max_iter: Optional[int] = None) -> ConstraintAlgorithm:
        kwargs = {} if max_iter is None else {"max_iter": max_iter}
        return ConstraintAlgorithm(
            parent=self,
            contraction_order=ContractionOrder(self.contraction_order),
            **kwargs,
        )

    @contextlib.contextmanager
    def collecting_warnings(self) -> Iterator[WarningCollector]:
        collector = WarningCollector()
        self.log.addHandler(collector)
        try:
            yield collector
        finally:
            self.log.removeHandler(collector)

    def report(self, theory: Optional[Theory], source: bytes, warnings: List[str], **payload) -> Report:
        return Report(
            version=version,
            command=self.command,
            theory=theory.name if theory is not None else "bundled",
            input_digest=data_hash(source),
            assumptions=list(theory.assumption_ledger) if theory is not None else [],
            warnings=warnings,
            **payload,
        )

    def emit(self, report: Report) -> None:
        text = render_report(report, self.format, self.template_paths)
        if not self.out:
            sys.stdout.write(text)
            return
        with open(self.out, "w", encoding="utf-8") as f:
            f.write(text)
        self.log.info("Report written to %s", self.out)


class DeriveCommand(Command):
    name = "multisym-derive"
    description = "Forms, energy, Legendre map and field equations of a theory."
    command = "derive"

    side = traitlets.CaselessStrEnum(
        [s.value for s in Side],
        default_value=Side.LAGRANGIAN.value,
        help="Formalism: lagrangian or hamiltonian.",
    ).tag(config=True)

    aliases = {**_COMMON_ALIASES, "side": "DeriveCommand.side"}

    def start(self):
        theory, source = self.theory_argument()
        with self.collecting_warnings() as collector:
            payload = derive_payload(
                theory, Side(self.side), order=ContractionOrder(self.contraction_order)
            )
        self.emit(self.report(theory, source, collector.messages, derive=payload))


class ConstraintsCommand(Command):
    name = "multisym-constraints"
    description = "Staged constraint algorithm on the Lagrangian or Hamiltonian side."
    command = "constraints"

    side = traitlets.CaselessStrEnum(
        [s.value for s in Side],
        default_value=Side.LAGRANGIAN.value,
        help="Formalism: lagrangian or hamiltonian.",
    ).tag(config=True)

    max_iter = traitlets.Int(
        None,
        allow_none=True,
        help="Maximal number of tangency rounds, overrides the theory option.",
    ).tag(config=True)

    aliases = {
        **_COMMON_ALIASES,
        "side": "ConstraintsCommand.side",
        "max-iter": "ConstraintsCommand.max_iter",
    }

    def start(self):
        theory, source = self.theory_argument()
        algorithm = self.constraint_algorithm(self.max_iter or theory.max_iter)
        with self.collecting_warnings() as collector:
            try:
                result: ConstraintReport = algorithm.run(
                    theory.phase_space(Side(self.side))
                )
            except IterationCapExceeded as error:
                if isinstance(error.report, ConstraintReport):
                    payload = constraints_payload(theory, error.report)
                    self.emit(
                        self.report(theory, source, collector.messages, constraints=payload)
                    )
                raise
        payload = constraints_payload(theory, result)
        self.emit(self.report(theory, source, collector.messages, constraints=payload))


class NoetherCommand(Command):
    name = "multisym-noether"
    description = "Symmetry verdict and multimomentum map of a generator."
    command = "noether"

    generator = traitlets.Unicode("", help="Name of the generator.").tag(config=True)

    space = traitlets.CaselessStrEnum(
        [s.value for s in SpaceName],
        default_value=SpaceName.J1.value,
        help="Space the symmetry is checked on.",
    ).tag(config=True)

    aliases = {
        **_COMMON_ALIASES,
        "generator": "NoetherCommand.generator",
        "space": "NoetherCommand.space",
    }

    def start(self):
        theory, source = self.theory_argument()
        generator = theory.generator(self.generator)
        algorithm = self.constraint_algorithm(theory.max_iter)

        def ideal_factory(side: Side):
            return algorithm.run(theory.phase_space(side)).ideal

        with self.collecting_warnings() as collector:
            analysis = analyze_symmetry(
                theory, generator, SpaceName(self.space), ideal_factory=ideal_factory
            )
            payload = noether_payload(analysis, lift_all(theory, generator))
        self.emit(self.report(theory, source, collector.messages, noether=payload))


class LiftCommand(Command):
    name = "multisym-lift"
    description = "Every lift of a generator and the Legendre projection check."
    command = "lift"

    generator = traitlets.Unicode("", help="Name of the generator.").tag(config=True)

    aliases = {**_COMMON_ALIASES, "generator": "LiftCommand.generator"}

    def start(self):
        theory, source = self.theory_argument()
        generator = theory.generator(self.generator)
        with self.collecting_warnings() as collector:
            lifts = lift_all(theory, generator)
            projection = check_legendre_projection(theory, generator)
            payload = lift_payload(lifts, projection)
        self.emit(self.report(theory, source, collector.messages, lift=payload))


class VerifyCommand(Command):
    name = "multisym-verify-paper"
    description = "Acceptance checks on the bundled theories."
    command = "verify-paper"

    filter = traitlets.Unicode(
        "", help=f"Run one group ({', '.join(GROUPS)}) or the checks with this prefix."
    ).tag(config=True)

    aliases = {**_COMMON_ALIASES, "filter": "VerifyCommand.filter"}

    def start(self):
        sources = b"".join(builtin_source(name) for name in BUILTIN_THEORIES)
        context = VerificationContext(
            parent=self, contraction_order=ContractionOrder(self.contraction_order)
        )
        with self.collecting_warnings() as collector:
            try:
                payload = run_checks(self.filter or None, context=context, parent=self)
            except ValueError as error:
                self.log.error("%s", error)
                self.exit(1)
        self.emit(self.report(None, sources, collector.messages, verify=payload))
        if not payload.passed:
            names = ", ".join(check.name for check in payload.failures)
            raise VerificationFailure(f"Failed checks: {names}")


class InitCommand(Command):
    name = "multisym-init"
    description = "Write one of the bundled theories."

    example = traitlets.CaselessStrEnum(
        BUILTIN_THEORIES, default_value="kg", help="Bundled theory to write."
    ).tag(config=True)

    aliases = {
        "example": "InitCommand.example",
        "out": "Command.out",
        "log-level": "Application.log_level",
    }

    def start(self):
        source = builtin_source(self.example)
        if not self.out:
            sys.stdout.write(source.decode("utf-8"))
            return
        if os.path.exists(self.out):
            self.log.error("Not overwriting existing file %s", self.out)
            self.exit(1)
        with open(self.out, "wb") as f:
            f.write(source)
        self.log.info("Wrote %s to %s", self.example, self.out)


class SchemaCommand(Command):
    name = "multisym-schema"
    description = "JSON schema of the machine-readable reports."

    aliases = {"out": "Command.out", "log-level": "Application.log_level"}

    def start(self):
        text = json.dumps(Report.model_json_schema(), sort_keys=True, indent=2) + "\n"
        if not self.out:
            sys.stdout.write(text)
            return
        with open(self.out, "w", encoding="utf-8") as f:
            f.write(text)


class MultisymApp(Application):
    """Symbolic multisymplectic field theory toolkit"""

    name = "multisym"
    version = version
    description = (
        "Derive the Lagrangian and De Donder-Weyl Hamiltonian formalisms of a first "
        "order field theory, run the constraint algorithm and compute the "
        "multimomentum maps of its symmetries."
    )
    examples = """
    multisym init --example=kg --out=kg.thy
    multisym derive kg.thy --side=hamiltonian
    multisym constraints polyakov.thy --format=json
    multisym noether polyakov.thy --generator=weyl --space=P0
    multisym verify-paper --filter=polyakov
    """

    subcommands = {
        "derive": (DeriveCommand, DeriveCommand.description),
        "constraints": (ConstraintsCommand, ConstraintsCommand.description),
        "noether": (NoetherCommand, NoetherCommand.description),
        "lift": (LiftCommand, LiftCommand.description),
        "verify-paper": (VerifyCommand, VerifyCommand.description),
        "init": (InitCommand, InitCommand.description),
        "schema": (SchemaCommand, SchemaCommand.description),
    }

    def start(self):
        if self.subapp is None:
            self.print_subcommands()
            self.exit(1)
        self.subapp.start()


def main(argv: Optional[List[str]] = None) -> None:
    """Run a command and exit with the code of the error that stopped it"""
    app = MultisymApp.instance()
    try:
        app.initialize(argv)
        app.start()
    except MultisymError as error:
        log = app.subapp.log if app.subapp is not None else app.log
        log.error("%s", error)
        sys.exit(error.exit_code)


if __name__ == "__main__":
    main()
