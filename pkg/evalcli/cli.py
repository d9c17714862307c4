"""
Command-line plumbing shared by the management commands.

Exit codes: 0 success, 1 usage, 2 data or document error, 3 numeric
failure. `cli(argv)` runs one subcommand and returns its exit code.
"""
import json
import logging
import sys
from functools import partial
from pathlib import Path

from django.core.management import load_command_class
from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError

from adcore.exceptions import NumericError
from data.exceptions import DatasetError
from data.storage import load_manifest, read_dataset

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

COMMANDS = ("generate", "train", "eval", "sweep_iters", "rollout",
            "viz_landscape")


def _usage_error(parser, message):
    if parser.called_from_command_line:
        parser.print_usage(sys.stderr)
        parser.exit(EXIT_USAGE, f"{parser.prog}: error: {message}\n")
    raise CommandError(f"Error: {message}", returncode=EXIT_USAGE)


def _describe(exc):
    if isinstance(exc, ValidationError):
        return f"invalid document: {json.dumps(exc.detail, default=str)}"
    return str(exc)


class SimulatorCommand(BaseCommand):
    """Base for the simulator subcommands: usage errors exit 1 and
    domain errors map onto their exit codes."""
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.error = partial(_usage_error, parser)
        self._parser = parser
        return parser

    def usage_error(self, message):
        usage = self._parser.format_usage() if hasattr(self, "_parser") \
            else ""
        raise CommandError(f"{message}\n{usage}".rstrip(),
                           returncode=EXIT_USAGE)

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except CommandError:
            raise
        except (DatasetError, ValidationError, FileNotFoundError) as exc:
            raise CommandError(_describe(exc), returncode=EXIT_DATA) from exc
        except NumericError as exc:
            raise CommandError(str(exc), returncode=EXIT_NUMERIC) from exc
        except ValueError as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE) from exc

    def emit(self, document, path=None):
        """Write a JSON report to `path`, or to stdout without one."""
        text = json.dumps(document, indent=2, default=str)
        if path:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text + "\n", encoding="utf-8")
            logger.info("report written to %s", path)
        else:
            self.stdout.write(text)


def load_split(data_dir, split):
    """(manifest, trajectories) of one split of a stored dataset."""
    manifest = load_manifest(data_dir)
    return manifest, read_dataset(data_dir, split)


def read_json_document(path):
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise ValidationError({"config": [f"{path}: {exc}"]}) from None


def command_name(name):
    """Accept hyphenated spellings such as `sweep-iters`."""
    return name.replace("-", "_")


def cli(argv, stdout=None, stderr=None):
    """Run `argv` ([subcommand, *flags]) and return the exit code."""
    argv = list(argv)
    err = stderr or sys.stderr
    if not argv or command_name(argv[0]) not in COMMANDS:
        err.write(f"usage: manage.py {{{','.join(COMMANDS)}}} [options]\n")
        return EXIT_USAGE
    name = command_name(argv[0])
    command = type(load_command_class("evalcli", name))(stdout=stdout,
                                                         stderr=stderr)
    try:
        command.run_from_argv(["manage.py", name, *argv[1:]])
    except SystemExit as exit_:
        code = exit_.code
        return code if isinstance(code, int) else EXIT_USAGE
    return EXIT_OK
