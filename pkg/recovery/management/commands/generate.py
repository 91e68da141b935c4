from django.core.management.base import CommandError

from recovery.management.commands._common import MatsenseCommand
from recovery.utils.experiments import nearest_batch_size, sample_ground_truth
from recovery.utils.seeds import derive_rng
from recovery.utils.sensing import EnsembleKind, EnsembleSpec, NoiseSpec, export_dataset, generate_dataset


class Command(MatsenseCommand):
    help = 'Generate a sensing dataset (manifest.json, matrices.lrmx, y.lrmx, xstar.lrmx) for a random rank-r X*'

    def add_command_arguments(self, parser):
        parser.add_argument('--setting', type=str, help='s1, s2, s3, s4 or custom')
        parser.add_argument('--d1', type=int)
        parser.add_argument('--d2', type=int)
        parser.add_argument('--r', type=int)
        size = parser.add_mutually_exclusive_group()
        size.add_argument('--ratio', type=float, help='N as a multiple of r*max(d1, d2) (default 5)')
        size.add_argument('--N', type=int, dest='n_measurements', help='Number of measurements')
        parser.add_argument('--b', type=int, help='Batch size (default: divisor of N nearest N/batches)')
        parser.add_argument('--noise-sigma', type=float, dest='noise_sigma')
        parser.add_argument('--ensemble', choices=[kind.value for kind in EnsembleKind])

    def run(self, **options):
        experiment_settings = self.load_settings(options)
        for key in ('setting', 'd1', 'd2', 'r', 'noise_sigma', 'ensemble'):
            if options.get(key) is not None:
                experiment_settings.set(key, options[key])
        if options.get('setting') is None and any(options.get(k) is not None for k in ('d1', 'd2', 'r')):
            experiment_settings.set('setting', 'custom')
        cfg = experiment_settings.to_experiment_config()
        seed = self.master_seed(options, experiment_settings)

        if options.get('n_measurements') is not None:
            N = options['n_measurements']
        else:
            N = int(round((options.get('ratio') or 5.0) * cfg.rd_prime))
        if N < 1:
            raise CommandError(f"N must be positive, got {N}")
        b = options.get('b') or nearest_batch_size(N, N / cfg.batches)
        if N % b:
            raise CommandError(f"--b {b} does not divide N = {N}")

        xstar, _ = sample_ground_truth(derive_rng(seed, "ground-truth"), cfg.d1, cfg.d2, cfg.r)
        noise = NoiseSpec.gaussian(cfg.noise_sigma) if cfg.noise_sigma > 0 else NoiseSpec.none()
        ds = generate_dataset(EnsembleSpec(cfg.d1, cfg.d2, cfg.ensemble), xstar, N, b, noise, seed)
        directory = export_dataset(ds, self.output_dir(options, 'dataset'))

        self.stdout.write(f"Setting: {cfg.setting} ({cfg.d1}x{cfg.d2}, r={cfg.r})")
        self.stdout.write(f"Measurements: N={N}, b={b}, n={ds.n}, ensemble={cfg.ensemble.value}, sigma={cfg.noise_sigma}")
        self.stdout.write(self.style.SUCCESS(f"Dataset written to {directory}"))
