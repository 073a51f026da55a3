from lab.commands import LabCommand
from lab.forms import IterateConfigForm


class Command(LabCommand):
    help = 'Run the frequency-energy level iteration and write the trace and its summary.'
    command_name = 'iterate'
    form_class = IterateConfigForm
