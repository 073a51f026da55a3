from lab.commands import LabCommand
from lab.forms import BuildStepConfigForm


class Command(LabCommand):
    help = 'Build one correction step on a synthetic Euler-Reynolds flow and check its invariants.'
    command_name = 'build_step'
    form_class = BuildStepConfigForm
