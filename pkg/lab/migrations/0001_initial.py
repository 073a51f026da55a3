# Generated by Django 5.2.5 on 2026-10-19 09:12

import lab.models
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunManifest',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('iterate', 'Iterate'), ('build_step', 'Build step'), ('flux', 'Flux'), ('mikado_check', 'Mikado check')], max_length=20)),
                ('config', models.JSONField(default=dict)),
                ('seed', models.BigIntegerField(default=0)),
                ('input_paths', models.JSONField(blank=True, default=list)),
                ('output_paths', models.JSONField(blank=True, default=list)),
                ('versions', models.JSONField(default=lab.models.package_versions)),
                ('tolerances', models.JSONField(blank=True, default=dict)),
                ('checks', models.JSONField(blank=True, default=dict, help_text="Named invariant checks: {'name': true/false}")),
                ('verdict', models.CharField(choices=[('pass', 'Pass'), ('fail', 'Fail'), ('error', 'Error')], default='pass', max_length=10)),
                ('message', models.TextField(blank=True)),
                ('wall_clock', models.FloatField(default=0.0, help_text='Seconds spent in the command')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
