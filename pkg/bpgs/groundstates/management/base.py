import sys

from django.core.management.base import BaseCommand, CommandParser

from bpgs.groundstates.errors import UsageError
from bpgs.groundstates.harness import add_run_arguments, config_from_options, error_line, run


class RunCommand(BaseCommand):
    """
    A management command backed by `harness.run`.

    Subclasses only name the harness command. Exit status is 0 on success, 1
    on numerical failure and 2 on usage errors, with one `ERROR` line on
    stderr for every failure.
    """

    command_name: str

    def add_arguments(self, parser: CommandParser):
        add_run_arguments(parser)

    def handle(self, *args, **options):
        try:
            config = config_from_options(self.command_name, options)
        except UsageError as e:
            self.stderr.write(error_line(e.code, str(e)))
            sys.exit(e.returncode)
        code = run(config, self.stdout, self.stderr)
        if code:
            sys.exit(code)
