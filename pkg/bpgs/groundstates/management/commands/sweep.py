from bpgs.groundstates.management.base import RunCommand


class Command(RunCommand):
    """
    Run the beta -> 0 experiment.

    Solves the Schrödinger-Poisson reference, then every beta of `--betas`,
    and writes `sweep.csv`, `sweep.json`, plot data and `convergence.json`.
    Records gathered before a failure are still written.
    """

    help = "Sweep beta toward the Schrödinger-Poisson limit and check convergence."
    command_name = "sweep"
