from lab.commands import LabCommand
from lab.forms import FluxConfigForm


class Command(LabCommand):
    help = 'Compute the energy-flux diagnostics of a velocity field over a mollification sweep.'
    command_name = 'flux'
    form_class = FluxConfigForm
