import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='TrainingRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('train', 'Train'), ('eval', 'Evaluate'), ('ablate', 'Ablate'), ('sweep', 'Sweep'), ('compare', 'Compare')], max_length=20)),
                ('config_path', models.CharField(blank=True, max_length=500)),
                ('seed', models.IntegerField(default=0)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('loss_name', models.CharField(blank=True, max_length=100)),
                ('status', models.CharField(choices=[('RUNNING', 'Running'), ('DONE', 'Done'), ('FAILED', 'Failed')], default='RUNNING', max_length=10)),
                ('resolved_config', models.TextField(blank=True)),
                ('final_metrics', models.JSONField(blank=True, default=dict)),
                ('created', models.DateTimeField(auto_now_add=True)),
                ('finished', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-created'],
            },
        ),
        migrations.CreateModel(
            name='EpochMetric',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('split', models.CharField(max_length=20)),
                ('epoch', models.IntegerField()),
                ('loss', models.FloatField(blank=True, null=True)),
                ('acc_radial', models.FloatField(blank=True, null=True)),
                ('acc_head', models.FloatField(blank=True, null=True)),
                ('lambda_value', models.FloatField(blank=True, null=True)),
                ('seed', models.IntegerField()),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='metrics', to='runs.trainingrun')),
            ],
            options={
                'ordering': ['run', 'epoch', 'split'],
            },
        ),
        migrations.CreateModel(
            name='SweepResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('parameter', models.CharField(max_length=50)),
                ('value', models.CharField(max_length=100)),
                ('seed', models.IntegerField()),
                ('accuracy', models.FloatField()),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='sweep_results', to='runs.trainingrun')),
            ],
            options={
                'ordering': ['run', 'parameter', 'value', 'seed'],
            },
        ),
    ]
