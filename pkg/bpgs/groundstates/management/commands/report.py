from bpgs.groundstates.management.base import RunCommand


class Command(RunCommand):
    help = "Re-evaluate the convergence report of a finished sweep in --out."
    command_name = "report"
