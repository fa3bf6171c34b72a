# Generated by Django 4.2 on 2026-10-19 09:00

import django.db.models.deletion
import django.utils.timezone
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='PipelineRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('offline', 'Offline'), ('online', 'Online'), ('compare', 'Compare')], max_length=16)),
                ('output_dir', models.CharField(help_text='Directory holding the artifacts of this run.', max_length=512)),
                ('config_hash', models.CharField(help_text='SHA-256 of the canonical run configuration.', max_length=64)),
                ('mode', models.CharField(blank=True, help_text='Stabilization mode for online runs.', max_length=8)),
                ('status', models.CharField(choices=[('running', 'Running'), ('succeeded', 'Succeeded'), ('failed', 'Failed')], default='running', max_length=16)),
                ('started_at', models.DateTimeField(default=django.utils.timezone.now)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
                ('error', models.TextField(blank=True)),
            ],
            options={
                'verbose_name': 'Pipeline run',
                'verbose_name_plural': 'Pipeline runs',
                'ordering': ['-started_at'],
            },
        ),
        migrations.CreateModel(
            name='StageRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('stage', models.CharField(max_length=32)),
                ('status', models.CharField(choices=[('completed', 'Completed'), ('skipped', 'Skipped (up to date)'), ('failed', 'Failed')], max_length=16)),
                ('input_hash', models.CharField(help_text='Hash of the configuration sections and upstream outputs the stage read.', max_length=64)),
                ('outputs', models.JSONField(blank=True, default=dict, help_text='Relative output path to SHA-256 digest.')),
                ('duration', models.FloatField(default=0.0, help_text='Wall-clock seconds spent in the stage.')),
                ('metadata', models.JSONField(blank=True, help_text='Stage specific figures such as mode counts or the FOM wall time.', null=True)),
                ('created_at', models.DateTimeField(default=django.utils.timezone.now)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='stages', to='core.pipelinerun')),
            ],
            options={
                'verbose_name': 'Stage record',
                'verbose_name_plural': 'Stage records',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['stage', 'created_at'], name='stagerecord_stage_created_idx')],
            },
        ),
    ]
