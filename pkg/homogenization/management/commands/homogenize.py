from homogenization.management.commands._base import StudyCommand


class Command(StudyCommand):
    help = 'Solve the periodic cell problem and report the homogenized tensor and its ellipticity'
    command_name = 'homogenize'
