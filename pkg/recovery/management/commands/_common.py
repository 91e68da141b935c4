"""
Shared base for the recovery management commands.

Every command takes --config, --seed, --out and --threads. Library errors
are turned into CommandError: numerical failures exit with status 2, bad
input and configuration with status 1.
"""

from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from recovery.exceptions import MatsenseError, NumericalError
from recovery.utils.config import ExperimentSettings, resolve_master_seed

NUMERICAL_FAILURE = 2


class MatsenseCommand(BaseCommand):
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, help='JSON experiment configuration file')
        parser.add_argument('--seed', type=int, help='Master seed (default: MATSENSE_SEED)')
        parser.add_argument('--out', type=str, help='Output directory (default: MATSENSE_OUTPUT_DIR)')
        parser.add_argument('--threads', type=int, help='Worker threads for independent trials')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        if options.get('seed') is not None and options['seed'] < 0:
            raise CommandError(f"--seed must be non-negative, got {options['seed']}")
        if options.get('threads') is not None and options['threads'] < 1:
            raise CommandError(f"--threads must be >= 1, got {options['threads']}")
        try:
            return self.run(**options)
        except NumericalError as exc:
            raise CommandError(f"Numerical failure: {exc}", returncode=NUMERICAL_FAILURE) from exc
        except MatsenseError as exc:
            raise CommandError(str(exc)) from exc

    def run(self, **options):
        raise NotImplementedError

    def output_dir(self, options, default_name=''):
        base = Path(options.get('out') or Path(settings.MATSENSE_OUTPUT_DIR) / default_name)
        base.mkdir(parents=True, exist_ok=True)
        return base

    def master_seed(self, options, experiment_settings=None):
        """--seed, else the config file's master_seed, else MATSENSE_SEED."""
        if options.get('seed') is None and experiment_settings is not None:
            return resolve_master_seed(experiment_settings.get('master_seed'))
        return resolve_master_seed(options.get('seed'))

    def load_settings(self, options, kind='convergence'):
        """Config file layered under the global flags."""
        experiment_settings = ExperimentSettings(options.get('config'), kind=kind)
        if options.get('seed') is not None:
            experiment_settings.set('master_seed', options['seed'])
        if options.get('threads') is not None:
            experiment_settings.set('threads', options['threads'])
        return experiment_settings

    def banner(self, title):
        self.stdout.write("=" * 70)
        self.stdout.write(title)
        self.stdout.write("=" * 70)
