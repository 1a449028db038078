# homogenization/models.py
from django.db import models


class StudyRun(models.Model):
    """One management-command run kept for auditing (written with --record)"""

    COMMAND_CHOICES = [
        ('homogenize', 'Cell problem and homogenized tensor'),
        ('coercivity', 'Rayleigh quotients and comparison certificate'),
        ('decompose', 'Null-Lagrangian density decomposition'),
        ('laminate', 'Laminate closed form'),
        ('ellipticity', 'Rank-one ellipticity of a tensor'),
    ]

    OUTCOME_CHOICES = [
        (0, 'Success'),
        (1, 'Usage or configuration error'),
        (2, 'Indefiniteness detected'),
        (3, 'Solver did not converge'),
        (4, 'Ill-posed laminate'),
    ]

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    exit_code = models.PositiveSmallIntegerField(choices=OUTCOME_CHOICES, default=0)

    # Resolved run configuration and the report as written
    config = models.JSONField(default=dict)
    report = models.JSONField(default=dict, blank=True)

    output_path = models.CharField(max_length=500, blank=True)
    error_message = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['command', '-created_at'], name='homog_run_command_idx'),
            models.Index(fields=['exit_code'], name='homog_run_exit_code_idx'),
        ]

    def __str__(self):
        return f"{self.command} run {self.id} (exit {self.exit_code})"

    @property
    def succeeded(self) -> bool:
        return self.exit_code == 0
