from homogenization.management.commands._base import StudyCommand


class Command(StudyCommand):
    help = 'Rank-one ellipticity of a single elasticity tensor'
    command_name = 'ellipticity'
