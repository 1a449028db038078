from django.apps import AppConfig


class HomogenizationConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'homogenization'
    verbose_name = 'Periodic homogenization studies'
