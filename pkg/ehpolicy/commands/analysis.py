from dataclasses import asdict

import click

from ehpolicy.commands.common import (
    emit,
    experiment_config,
    reports_errors,
    resolve_utility,
    shared_options,
    utility_option,
)
from ehpolicy.services import (
    asymptotic_sweep,
    build_gap_report,
    bounded_alpha_lower_bound,
    classify,
    optimize_gap_over_q,
    sweep_decreasing,
)
from ehpolicy.utils import parse_range


@click.command()
@utility_option
@click.option('--q', 'q', type=float, default=None, help='Fraction q = mu / B')
@click.option('--battery', type=float, default=None, help='Battery capacity B')
@click.option('--optimize-q', 'optimize_q', is_flag=True, default=False,
              help='Report the worst-case alpha over q instead of a single q')
@shared_options
@reports_errors
def gap(utility, q, battery, optimize_q, seed, deterministic, emit_csv):
    """Upper bound, FFP value and additive gap alpha under Bernoulli-full(q) arrivals"""
    cfg = experiment_config(utility=utility, q=q, battery=battery, seed=seed,
                            deterministic=deterministic, emit_csv=emit_csv)
    u = resolve_utility(cfg)
    if optimize_q:
        opt = optimize_gap_over_q(u)
        payload = {"utility": u.describe(), **asdict(opt)}
    else:
        report = build_gap_report(u, float(cfg['Q']), float(cfg['BATTERY']))
        payload = {"utility": u.describe(), **asdict(report)}
        if u.is_bounded:
            payload["bounded_alpha_lower_bound"] = bounded_alpha_lower_bound(u, report.q)
    emit('gap', cfg, payload)


@click.command()
@utility_option
@click.option('--q', 'q', type=float, default=None, help='Fraction q = mu / B')
@click.option('--mu', default=None, help="Mean-arrival range, e.g. 1e1:1e6:log")
@shared_options
@reports_errors
def sweep(utility, q, mu, seed, deterministic, emit_csv):
    """FFP deficit u(mu) - value over increasing mu at fixed q"""
    cfg = experiment_config(utility=utility, q=q, mu=mu, seed=seed,
                            deterministic=deterministic, emit_csv=emit_csv)
    u = resolve_utility(cfg)
    rows = asymptotic_sweep(u, float(cfg['Q']), parse_range(cfg['MU']))
    payload = {
        "utility": u.describe(),
        "q": float(cfg['Q']),
        "rows": rows,
        "decreasing": sweep_decreasing(rows),
    }
    emit('sweep', cfg, payload, ['mu', 'ffp_value', 'upper', 'deficit'],
         ((r.mu, r.ffp_value, r.upper, r.deficit) for r in rows))


@click.command('classify')
@utility_option
@shared_options
@reports_errors
def classify_cmd(utility, seed, deterministic, emit_csv):
    """Class A or B of a utility, with the sampled evidence"""
    cfg = experiment_config(utility=utility, seed=seed, deterministic=deterministic, emit_csv=emit_csv)
    u = resolve_utility(cfg)
    result = classify(u)
    emit('classify', cfg, {"utility": u.describe(), **result.as_dict()}, ['x', 'h'],
         ((e["x"], e["h"]) for e in result.evidence))


commands = [gap, sweep, classify_cmd]
