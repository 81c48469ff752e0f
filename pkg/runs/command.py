"""
Base class for the incidence management commands.

Every command takes one positional action plus the shared flags
--config PATH --out DIR --seed U64 --workers N. Flags win over the
INCIDENCE_* environment (already folded into settings.INCIDENCE), which
wins over the settings defaults. Exit codes: 0 success, 1 configuration
or usage error, 2 solver / estimation failure.
"""

import json
import logging
import sys
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from config.exceptions import ConfigurationError, DomainError, EstimationError, SolverError
from runs.artifacts import ArtifactWriter

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_FAILURE = 2
MAX_SEED = 2**64 - 1


@dataclass
class RunContext:
    command: str
    action: str
    argv: list
    seed: int
    workers: int
    out_dir: Path
    writer: ArtifactWriter
    raw_config: dict
    config_path: str | None = None
    # extra manifest fields a handler wants to record (e.g. ground truth)
    manifest: dict = field(default_factory=dict)


def load_json_config(path):
    if not path:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}", key="config") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}", key="config") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object", key="config")
    return data


def _start_record(ctx):
    if not settings.INCIDENCE["RECORD_RUNS"]:
        return None
    from runs.models import RunRecord

    try:
        return RunRecord.objects.create(
            command=f"{ctx.command} {ctx.action}",
            argv=ctx.argv,
            seed=str(ctx.seed),
            workers=ctx.workers,
            config=ctx.raw_config,
            output_dir=str(ctx.out_dir),
        )
    except DatabaseError as exc:
        logger.warning(f"Run ledger unavailable, continuing without it: {exc}")
        return None


def _finish_record(record, exit_code, message=""):
    if record is None:
        return
    try:
        record.finish(exit_code, message)
    except DatabaseError as exc:
        logger.warning(f"Could not update run ledger entry {record.pk}: {exc}")


def _usage_error(parser, message):
    """argparse errors (unknown action, bad flag value) exit like a configuration error."""
    if parser.called_from_command_line:
        parser.print_usage(sys.stderr)
        parser.exit(EXIT_CONFIG, f"{parser.prog}: error: {message}\n")
    raise CommandError(f"Error: {message}", returncode=EXIT_CONFIG)


class IncidenceCommand(BaseCommand):
    command_name = ""
    actions = ()

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.error = partial(_usage_error, parser)
        return parser

    def add_arguments(self, parser):
        parser.add_argument("action", choices=self.actions)
        parser.add_argument("--config", dest="config_path", default=None, help="JSON config file")
        parser.add_argument("--out", dest="out_dir", default=None, help="Output directory")
        parser.add_argument("--seed", type=int, default=None, help="Random seed (u64)")
        parser.add_argument("--workers", type=int, default=None, help="Parallel workers")
        self.add_action_arguments(parser)

    def add_action_arguments(self, parser):
        """Hook for command-specific flags."""

    def _context(self, options):
        incidence = settings.INCIDENCE
        seed = incidence["SEED"] if options["seed"] is None else options["seed"]
        if not (0 <= seed <= MAX_SEED):
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {seed}", key="seed")
        workers = incidence["WORKERS"] if options["workers"] is None else options["workers"]
        if workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {workers}", key="workers")
        out_dir = Path(options["out_dir"] or incidence["OUTPUT_DIR"])
        raw = load_json_config(options["config_path"])
        argv = [self.command_name, options["action"]]
        for flag, key in (("--config", "config_path"), ("--out", "out_dir"), ("--seed", "seed"), ("--workers", "workers")):
            if options[key] is not None:
                argv += [flag, str(options[key])]
        argv += self.extra_argv(options)
        return RunContext(
            command=self.command_name,
            action=options["action"],
            argv=argv,
            seed=seed,
            workers=workers,
            out_dir=out_dir,
            writer=None,
            raw_config=raw,
            config_path=options["config_path"],
        )

    def extra_argv(self, options):
        return []

    def handle(self, *args, **options):
        try:
            ctx = self._context(options)
        except ConfigurationError as e:
            logger.error(f"Configuration error: {e}")
            raise CommandError(f"configuration error ({e.key}): {e}", returncode=EXIT_CONFIG)

        label = f"{ctx.command} {ctx.action}"
        logger.info(f"Starting {label} seed={ctx.seed} workers={ctx.workers} out={ctx.out_dir}")
        ctx.writer = ArtifactWriter(ctx.out_dir)
        record = _start_record(ctx)
        handler = getattr(self, "handle_" + ctx.action.replace("-", "_"))

        try:
            config_echo = handler(ctx, options)
            ctx.writer.write_manifest(
                command=label,
                argv=ctx.argv,
                seed=ctx.seed,
                workers=ctx.workers,
                config=config_echo,
                **ctx.manifest,
            )
            written = ctx.writer.commit()
        except (ConfigurationError, DomainError) as e:
            ctx.writer.discard()
            _finish_record(record, EXIT_CONFIG, str(e))
            logger.error(f"{label}: configuration error: {e}")
            raise CommandError(f"configuration error ({getattr(e, 'key', None)}): {e}", returncode=EXIT_CONFIG)
        except (SolverError, EstimationError) as e:
            ctx.writer.discard()
            _finish_record(record, EXIT_FAILURE, str(e))
            logger.error(f"{label} failed: {e}")
            raise CommandError(f"{type(e).__name__}: {e}", returncode=EXIT_FAILURE)
        except BaseException:
            ctx.writer.discard()
            _finish_record(record, EXIT_FAILURE, "unexpected error")
            raise

        _finish_record(record, 0)
        logger.info(f"Finished {label}: {len(written)} artifact(s)")
        self.stdout.write(self.style.SUCCESS(f"{label}: wrote {len(written)} artifact(s) to {ctx.out_dir}"))
