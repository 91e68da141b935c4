import logging

from django.core.management.base import CommandError

from recovery.management.commands._common import MatsenseCommand
from recovery.utils.experiments import epochs_for_budget
from recovery.utils.lrmx import write_lrmx
from recovery.utils.seeds import derive_seed
from recovery.utils.sensing import load_dataset
from recovery.utils.solvers import (
    InitConfig,
    OutputPolicy,
    SolverConfig,
    default_step_size,
    epoch_data_passes,
    gd_solve,
    init_projected_gd,
    svrg_solve,
)

logger = logging.getLogger(__name__)


class Command(MatsenseCommand):
    help = (
        'Recover the low-rank matrix behind a dataset directory. Writes u.lrmx, v.lrmx and '
        'trace.csv (columns: epoch,data_passes,objective,rel_error,dist).'
    )

    def add_command_arguments(self, parser):
        parser.add_argument('--dataset', type=str, required=True, help='Directory written by `generate`')
        parser.add_argument('--algorithm', choices=['svrg', 'gd'], default='svrg')
        parser.add_argument('--rank', type=int, help='Target rank (default: rank of the stored X*, else r of --config)')
        parser.add_argument('--eta', type=float, help='Step size (default: eta_scale / sigma1 of the initial iterate)')
        parser.add_argument('--m', type=int, help='Inner iterations per epoch (default: m_factor * n)')
        parser.add_argument('--epochs', type=int, help='SVRG epochs or GD iterations (default: data-pass budget)')
        parser.add_argument('--tau', type=float, help='Initialization step size')
        parser.add_argument('--s-init', type=int, dest='s_init', help='Initialization steps')
        parser.add_argument('--output-policy', choices=[policy.value for policy in OutputPolicy], dest='output_policy')

    def run(self, **options):
        experiment_settings = self.load_settings(options)
        experiment_settings.validate()
        cfg_settings = experiment_settings.settings
        ds = load_dataset(options['dataset'])

        rank = self.resolve_rank(options, experiment_settings, ds)
        tau = options.get('tau') if options.get('tau') is not None else cfg_settings['tau']
        s_init = options.get('s_init') or cfg_settings['s_init']
        z0 = init_projected_gd(ds, InitConfig(r=rank, tau=tau, S_init=s_init))

        eta = options.get('eta')
        if eta is None:
            eta = cfg_settings['eta'] if cfg_settings['eta'] is not None else default_step_size(z0, cfg_settings['eta_scale'])
        m = options.get('m') or max(1, int(round(cfg_settings['m_factor'] * ds.n)))
        seed = self.master_seed(options, experiment_settings)
        logger.info("Solving with %s: rank=%d eta=%.4e m=%d", options['algorithm'], rank, eta, m)

        if options['algorithm'] == 'svrg':
            epochs = options.get('epochs') or epochs_for_budget(cfg_settings['data_passes'], m, ds.b, ds.N)
            policy = options.get('output_policy') or cfg_settings['output_policy']
            solver_cfg = SolverConfig(eta=eta, m=m, S=epochs, output_policy=policy, seed=derive_seed(seed, "svrg"))
            z, trace = svrg_solve(ds, z0, solver_cfg, reference=ds.xstar)
            self.stdout.write(f"SVRG: {epochs} epochs of m={m}, {epoch_data_passes(m, ds.b, ds.N):.2f} data passes each")
        else:
            iterations = options.get('epochs') or int(cfg_settings['data_passes'])
            z, trace = gd_solve(ds, z0, eta, iterations, reference=ds.xstar)
            self.stdout.write(f"GD: {iterations} iterations")

        out = self.output_dir(options, 'solve')
        write_lrmx(out / 'u.lrmx', z.u)
        write_lrmx(out / 'v.lrmx', z.v)
        trace.to_csv(out / 'trace.csv')

        final = trace.records[-1]
        self.stdout.write(f"Step size: {eta:.6e}")
        self.stdout.write(f"Final objective: {final.objective:.6e}")
        if ds.xstar is not None:
            self.stdout.write(f"Final relative error: {final.rel_error:.6e}")
        self.stdout.write(self.style.SUCCESS(f"Factors and trace written to {out}"))

    def resolve_rank(self, options, experiment_settings, ds):
        """--rank, else the rank of the stored X*, else r from --config."""
        if options.get('rank') is not None:
            return options['rank']
        if ds.rank is not None:
            return ds.rank
        if options.get('config'):
            return experiment_settings.dimensions()[2]
        raise CommandError('--rank is required when the dataset stores no X* and no --config is given')
