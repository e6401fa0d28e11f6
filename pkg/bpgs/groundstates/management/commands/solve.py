from bpgs.groundstates.management.base import RunCommand


class Command(RunCommand):
    """
    Compute the least energy solution for one (p, beta).

    Writes `solution.txt`, the potential `phi.txt` and `report.json` to the
    output directory; for beta = 0 also the concentration profile.
    """

    help = "Compute a least energy solution for one (p, beta)."
    command_name = "solve"
