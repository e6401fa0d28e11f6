from bpgs.groundstates.management.base import RunCommand


class Command(RunCommand):
    """
    The harness `check` command.

    Django reserves the name `check` for its system checks (the test runner
    calls it), so the structural self-checks are exposed as `selfcheck`.
    """

    help = "Run the structural self-checks and write check.json."
    command_name = "check"
