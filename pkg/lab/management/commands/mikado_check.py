from lab.commands import LabCommand
from lab.forms import MikadoCheckConfigForm


class Command(LabCommand):
    help = 'Check the tube geometry, potentials and partition of unity.'
    command_name = 'mikado_check'
    form_class = MikadoCheckConfigForm
