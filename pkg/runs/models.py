from django.db import models


class TrainingRun(models.Model):
    STATUS_RUNNING = "RUNNING"
    STATUS_DONE = "DONE"
    STATUS_FAILED = "FAILED"
    STATUS_CHOICES = [
        (STATUS_RUNNING, "Running"),
        (STATUS_DONE, "Done"),
        (STATUS_FAILED, "Failed"),
    ]

    COMMAND_CHOICES = [
        ("train", "Train"),
        ("eval", "Evaluate"),
        ("ablate", "Ablate"),
        ("sweep", "Sweep"),
        ("compare", "Compare"),
    ]

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    config_path = models.CharField(max_length=500, blank=True)
    seed = models.IntegerField(default=0)
    output_dir = models.CharField(max_length=500, blank=True)
    loss_name = models.CharField(max_length=100, blank=True)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default=STATUS_RUNNING)
    resolved_config = models.TextField(blank=True)
    final_metrics = models.JSONField(default=dict, blank=True)
    created = models.DateTimeField(auto_now_add=True)
    finished = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ["-created"]

    def __str__(self):
        return f"{self.command} #{self.pk} seed={self.seed} ({self.status})"


class EpochMetric(models.Model):
    run = models.ForeignKey(TrainingRun, on_delete=models.CASCADE, related_name="metrics")
    split = models.CharField(max_length=20)
    epoch = models.IntegerField()
    loss = models.FloatField(null=True, blank=True)
    acc_radial = models.FloatField(null=True, blank=True)
    acc_head = models.FloatField(null=True, blank=True)
    lambda_value = models.FloatField(null=True, blank=True)
    seed = models.IntegerField()

    class Meta:
        ordering = ["run", "epoch", "split"]

    def __str__(self):
        return f"run {self.run_id} {self.split} epoch {self.epoch}"


class SweepResult(models.Model):
    run = models.ForeignKey(TrainingRun, on_delete=models.CASCADE, related_name="sweep_results")
    parameter = models.CharField(max_length=50)
    value = models.CharField(max_length=100)
    seed = models.IntegerField()
    accuracy = models.FloatField()

    class Meta:
        ordering = ["run", "parameter", "value", "seed"]

    def __str__(self):
        return f"{self.parameter}={self.value} seed={self.seed}: {self.accuracy:.4f}"
