from homogenization.management.commands._base import StudyCommand


class Command(StudyCommand):
    help = 'Estimate the periodic and Bloch Rayleigh quotients and issue the comparison certificate'
    command_name = 'coercivity'
