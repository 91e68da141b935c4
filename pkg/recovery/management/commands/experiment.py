from recovery.management.commands._common import MatsenseCommand
from recovery.models import ExperimentRun
from recovery.utils.experiments import (
    CONVERGENCE_COLUMNS,
    EXPERIMENTS,
    PHASE_COLUMNS,
    STATERR_COLUMNS,
)


class Command(MatsenseCommand):
    help = (
        'Run an experiment and write <out>/<kind>.csv. Columns: '
        f'convergence: {",".join(CONVERGENCE_COLUMNS)}; '
        f'phase: {",".join(PHASE_COLUMNS)}; '
        f'staterr: {",".join(STATERR_COLUMNS)}.'
    )

    def add_command_arguments(self, parser):
        parser.add_argument('kind', choices=sorted(EXPERIMENTS), help='Experiment to run')
        parser.add_argument('--record', action='store_true', help='Store the run and its trials in the database')

    def run(self, **options):
        kind = options['kind']
        experiment_settings = self.load_settings(options, kind=kind)
        cfg = experiment_settings.to_experiment_config()

        self.banner(f"Experiment: {kind}")
        self.stdout.write(f"Setting: {cfg.setting} ({cfg.d1}x{cfg.d2}, r={cfg.r}), noise sigma={cfg.noise_sigma}")
        self.stdout.write(f"N: {cfg.sample_sizes}")
        self.stdout.write(f"Trials: {cfg.trials}, master seed: {cfg.master_seed}, threads: {cfg.threads}")

        result = EXPERIMENTS[kind](cfg)
        path = result.to_csv(self.output_dir(options) / f"{kind}.csv")

        failed = [record for record in result.records if record.diverged]
        if failed:
            self.stdout.write(self.style.WARNING(f"{len(failed)} of {len(result.records)} solver runs failed"))
        for N, params in sorted(result.parameters.items()):
            self.stdout.write(f"N={N}: b={params.b}, m={params.m}")

        if options['record']:
            run = ExperimentRun.record(result, csv_path=path)
            self.stdout.write(f"Recorded run #{run.pk} with {run.trial_results.count()} trial results")

        self.stdout.write(self.style.SUCCESS(f"Results written to {path}"))
