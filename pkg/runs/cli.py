"""
Process entry point: run(argv) -> exit code.

    python manage.py economy solve --config base.json --out out/
    python manage.py panel generate --seed 7 --out panel/
    python manage.py estimate event-study --config es.json --out es/
"""

import os
import sys

from django.core.management import execute_from_command_line


def run(argv=None):
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings")
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        execute_from_command_line(["manage.py", *argv])
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    return 0
