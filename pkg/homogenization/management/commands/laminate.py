from homogenization.management.commands._base import StudyCommand


class Command(StudyCommand):
    help = 'Closed-form homogenized tensor of a rank-one laminate, with an optional volume-fraction sweep'
    command_name = 'laminate'
