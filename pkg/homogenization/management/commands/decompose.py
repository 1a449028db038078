from homogenization.management.commands._base import StudyCommand


class Command(StudyCommand):
    help = 'Decompose the shifted energy density into the forms P and R and compute alpha'
    command_name = 'decompose'
