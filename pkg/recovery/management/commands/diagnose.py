from django.core.management.base import CommandError

from recovery.management.commands._common import NUMERICAL_FAILURE, MatsenseCommand
from recovery.utils.diagnostics import (
    SpectralSummary,
    contraction_rho,
    dump_report,
    gradient_check,
    inequality_suite,
    probe_suite,
    random_factor_pair,
    prescribed_inner_iterations,
    prescribed_step_size,
    report,
    rip_estimate,
)
from recovery.utils.experiments import sample_ground_truth
from recovery.utils.objective import FactorPair
from recovery.utils.seeds import derive_rng, derive_seed
from recovery.utils.sensing import EnsembleKind, EnsembleSpec, NoiseSpec, generate_dataset

GRADCHECK_TOLERANCE = 1e-5


class Command(MatsenseCommand):
    help = (
        'Run a diagnostic and print its JSON report {check, inputs, margins, pass, seed}; '
        'the report is also written to <out>/<check>.json. gradcheck and lemmas exit with '
        'status 2 when they fail.'
    )

    def add_command_arguments(self, parser):
        parser.add_argument('check', choices=['rip', 'gradcheck', 'lemmas', 'rho'])
        parser.add_argument('--d1', type=int)
        parser.add_argument('--d2', type=int)
        parser.add_argument('--r', type=int)
        parser.add_argument('--ratio', type=float, help='rip: M as a multiple of r*max(d1, d2) (default 50)')
        parser.add_argument('--ensemble', choices=[kind.value for kind in EnsembleKind], default='gaussian_iid')
        parser.add_argument('--trials', type=int, help='rip: sampled matrices (200); lemmas: instances (500)')
        parser.add_argument('--probes', type=int, default=200, help='lemmas: curvature/smoothness probe points')
        parser.add_argument('--h', type=float, default=1e-5, help='gradcheck: finite-difference step')
        parser.add_argument('--eta', type=float, help='rho: step size (default: the 1/(576 kappa (1+delta)^2 sigma1) regime)')
        parser.add_argument('--m', type=int, help='rho: inner iterations (default: smallest m giving 5/6)')
        parser.add_argument('--kappa', type=float, default=1.0)
        parser.add_argument('--sigma1', type=float, default=1.0)
        parser.add_argument('--delta', type=float, default=0.0, help="rho: per-batch RIP constant delta'")

    def run(self, **options):
        seed = self.master_seed(options)
        name = options['check']
        payload = getattr(self, f'check_{name}')(seed, options)

        path = self.output_dir(options, 'checks') / f'{name}.json'
        text = dump_report(payload)
        path.write_text(text)
        self.stdout.write(text, ending='')

        if name in ('gradcheck', 'lemmas') and not payload['pass']:
            raise CommandError(f"{name} check failed (report in {path})", returncode=NUMERICAL_FAILURE)

    def check_rip(self, seed, options):
        d1, d2, r = options.get('d1') or 20, options.get('d2') or 15, options.get('r') or 2
        trials = options.get('trials') or 200
        M = int(round((options.get('ratio') or 50.0) * r * max(d1, d2)))
        xstar, _ = sample_ground_truth(derive_rng(seed, "ground-truth"), d1, d2, r)
        ds = generate_dataset(EnsembleSpec(d1, d2, options['ensemble']), xstar, M, M, NoiseSpec.none(), seed)
        estimate = rip_estimate(ds, r, trials, derive_seed(seed, "rip"))
        inputs = {"d1": d1, "d2": d2, "r_order": r, "M": M, "trials": trials, "ensemble": options['ensemble']}
        margins = {
            "delta_hat": estimate.delta_hat,
            "max_ratio_dev": estimate.max_ratio_dev,
            "note": "delta_hat is a Monte-Carlo lower bound on the RIP constant",
        }
        return report("rip", inputs, margins, estimate.delta_hat < 1.0, seed)

    def check_gradcheck(self, seed, options):
        d1, d2, r = options.get('d1') or 8, options.get('d2') or 6, options.get('r') or 2
        N = 10 * max(d1, d2)
        rng = derive_rng(seed, "gradcheck")
        xstar, _ = sample_ground_truth(rng, d1, d2, r)
        ds = generate_dataset(EnsembleSpec(d1, d2), xstar, N, N // 10, NoiseSpec.gaussian(0.1), seed)
        start = random_factor_pair(rng, d1, d2, r)
        z = FactorPair(0.5 * start.u, 0.5 * start.v)
        result = gradient_check(ds, z, options['h'])
        inputs = {"d1": d1, "d2": d2, "r": r, "N": N, "h": result.h, "entries": result.entries}
        margins = {"max_relative_deviation": result.max_relative_deviation, "tolerance": GRADCHECK_TOLERANCE}
        return report("gradcheck", inputs, margins, result.max_relative_deviation <= GRADCHECK_TOLERANCE, seed)

    def check_lemmas(self, seed, options):
        trials = options.get('trials') or 500
        suites = inequality_suite(trials, derive_seed(seed, "lemmas"))
        probes = probe_suite(options['probes'], derive_seed(seed, "probes"))
        violations = sum(suite["violations"] for suite in suites.values())
        violations += probes["curvature_violations"] + probes["smoothness_violations"]
        inputs = {"instances": trials, "probes": options['probes']}
        margins = dict(suites, probes=probes)
        return report("lemmas", inputs, margins, violations == 0, seed)

    def check_rho(self, seed, options):
        kappa, sigma1, delta = options['kappa'], options['sigma1'], options['delta']
        summary = SpectralSummary(sigma1=sigma1, sigma_r=sigma1 / kappa, kappa=kappa, r=1)
        eta = options.get('eta') or prescribed_step_size(summary, delta)
        m = options.get('m') or prescribed_inner_iterations(summary, eta)
        result = contraction_rho(eta, m, summary, delta)
        inputs = {"eta": eta, "m": m, "kappa": kappa, "sigma1": sigma1, "delta4r_prime": delta}
        margins = {
            "rho": result.rho,
            "rho_simplified": result.rho_simplified,
            "rho_limit": result.rho_limit,
            "prescribed_regime": result.prescribed_regime,
        }
        return report("rho", inputs, margins, result.converges, seed)
