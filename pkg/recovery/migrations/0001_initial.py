# Generated by Django 5.2.7 on 2026-10-12 10:41

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('convergence', 'Convergence'), ('phase', 'Phase transition'), ('staterr', 'Statistical error')], max_length=20)),
                ('setting', models.CharField(help_text="Preset name or 'custom'", max_length=20)),
                ('d1', models.PositiveIntegerField()),
                ('d2', models.PositiveIntegerField()),
                ('r', models.PositiveIntegerField()),
                ('noise_sigma', models.FloatField(default=0.0)),
                ('master_seed', models.BigIntegerField()),
                ('trials', models.PositiveIntegerField()),
                ('config', models.JSONField(default=dict, help_text='Resolved experiment configuration')),
                ('csv_path', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['kind'], name='recovery_run_kind_idx')],
            },
        ),
        migrations.CreateModel(
            name='TrialResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('trial_id', models.PositiveIntegerField()),
                ('seed', models.BigIntegerField(help_text='Derived 63-bit trial seed')),
                ('d1', models.PositiveIntegerField()),
                ('d2', models.PositiveIntegerField()),
                ('r', models.PositiveIntegerField()),
                ('N', models.PositiveIntegerField()),
                ('b', models.PositiveIntegerField()),
                ('algorithm', models.CharField(choices=[('svrg', 'SVRG'), ('gd', 'Gradient descent')], max_length=10)),
                ('final_rel_error', models.FloatField(blank=True, null=True)),
                ('recovered', models.BooleanField(default=False)),
                ('diverged', models.BooleanField(default=False)),
                ('wall_time', models.FloatField(default=0.0)),
                ('trace', models.JSONField(default=list, help_text='[data_passes, rel_error] per epoch')),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='trial_results', to='recovery.experimentrun')),
            ],
            options={
                'ordering': ['run', 'N', 'trial_id', 'algorithm'],
            },
        ),
    ]
