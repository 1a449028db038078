# Generated by Django 5.2.9 on 2026-10-19 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='StudyRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('homogenize', 'Cell problem and homogenized tensor'), ('coercivity', 'Rayleigh quotients and comparison certificate'), ('decompose', 'Null-Lagrangian density decomposition'), ('laminate', 'Laminate closed form'), ('ellipticity', 'Rank-one ellipticity of a tensor')], max_length=20)),
                ('exit_code', models.PositiveSmallIntegerField(choices=[(0, 'Success'), (1, 'Usage or configuration error'), (2, 'Indefiniteness detected'), (3, 'Solver did not converge'), (4, 'Ill-posed laminate')], default=0)),
                ('config', models.JSONField(default=dict)),
                ('report', models.JSONField(blank=True, default=dict)),
                ('output_path', models.CharField(blank=True, max_length=500)),
                ('error_message', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['command', '-created_at'], name='homog_run_command_idx'), models.Index(fields=['exit_code'], name='homog_run_exit_code_idx')],
            },
        ),
    ]
