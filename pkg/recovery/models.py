import math

from django.db import models, transaction


class ExperimentRun(models.Model):
    """One recorded run of the experiment harness."""

    KIND_CHOICES = [
        ('convergence', 'Convergence'),
        ('phase', 'Phase transition'),
        ('staterr', 'Statistical error'),
    ]

    kind = models.CharField(max_length=20, choices=KIND_CHOICES)
    setting = models.CharField(max_length=20, help_text="Preset name or 'custom'")
    d1 = models.PositiveIntegerField()
    d2 = models.PositiveIntegerField()
    r = models.PositiveIntegerField()
    noise_sigma = models.FloatField(default=0.0)
    master_seed = models.BigIntegerField()
    trials = models.PositiveIntegerField()
    config = models.JSONField(default=dict, help_text="Resolved experiment configuration")
    csv_path = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['kind'], name='recovery_run_kind_idx'),
        ]

    def __str__(self):
        return f"{self.kind} {self.setting} ({self.d1}x{self.d2}, r={self.r}, seed={self.master_seed})"

    @property
    def recovery_rate(self):
        results = self.trial_results.filter(algorithm='svrg')
        total = results.count()
        return results.filter(recovered=True).count() / total if total else None

    @classmethod
    def record(cls, result, csv_path=''):
        """Persist an ExperimentResult and one TrialResult per trial and algorithm."""
        cfg = result.config
        with transaction.atomic():
            run = cls.objects.create(
                kind=cfg.kind,
                setting=cfg.setting,
                d1=cfg.d1,
                d2=cfg.d2,
                r=cfg.r,
                noise_sigma=cfg.noise_sigma,
                master_seed=cfg.master_seed,
                trials=cfg.trials,
                config=cfg.to_dict(),
                csv_path=str(csv_path),
            )
            TrialResult.objects.bulk_create([
                TrialResult(
                    run=run,
                    trial_id=record.trial_id,
                    seed=record.seed,
                    d1=record.d1,
                    d2=record.d2,
                    r=record.r,
                    N=record.N,
                    b=record.b,
                    algorithm=record.algorithm,
                    final_rel_error=None if math.isnan(record.final_rel_error) else record.final_rel_error,
                    recovered=record.recovered,
                    diverged=record.diverged,
                    wall_time=record.wall_time,
                    trace=record.trace_points(),
                )
                for record in result.records
            ])
        return run


class TrialResult(models.Model):
    ALGORITHM_CHOICES = [
        ('svrg', 'SVRG'),
        ('gd', 'Gradient descent'),
    ]

    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='trial_results')
    trial_id = models.PositiveIntegerField()
    seed = models.BigIntegerField(help_text="Derived 63-bit trial seed")
    d1 = models.PositiveIntegerField()
    d2 = models.PositiveIntegerField()
    r = models.PositiveIntegerField()
    N = models.PositiveIntegerField()
    b = models.PositiveIntegerField()
    algorithm = models.CharField(max_length=10, choices=ALGORITHM_CHOICES)
    final_rel_error = models.FloatField(null=True, blank=True)
    recovered = models.BooleanField(default=False)
    diverged = models.BooleanField(default=False)
    wall_time = models.FloatField(default=0.0)
    trace = models.JSONField(default=list, help_text="[data_passes, rel_error] per epoch")

    class Meta:
        ordering = ['run', 'N', 'trial_id', 'algorithm']

    def __str__(self):
        return f"{self.algorithm} trial {self.trial_id} at N={self.N}"
