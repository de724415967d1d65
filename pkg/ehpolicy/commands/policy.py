import click

from ehpolicy.commands.common import (
    arrivals_option,
    emit,
    experiment_config,
    reports_errors,
    resolve_arrivals,
    resolve_sim_config,
    resolve_utility,
    shared_options,
    sim_options,
    utility_option,
)
from ehpolicy.services import (
    evaluate_bernoulli,
    fraction_sweep,
    kkt_residuals,
    optimize_fraction,
    policy_from_spec,
    run,
    solve_bernoulli_optimal,
)
from ehpolicy.utils import parse_range


@click.command()
@click.option('--policy', default=None, help="Policy spec: ffp, ffp:theta=0.3 or bernoulli_opt")
@utility_option
@arrivals_option
@sim_options
@shared_options
@reports_errors
def simulate(policy, utility, arrivals, battery, horizon, trials, warmup, initial_battery,
             seed, deterministic, emit_csv):
    """Monte Carlo long-run average utility of a policy"""
    cfg = experiment_config(policy=policy, utility=utility, arrivals=arrivals, battery=battery,
                            horizon=horizon, trials=trials, warmup=warmup, initial_battery=initial_battery,
                            seed=seed, deterministic=deterministic, emit_csv=emit_csv)
    u, spec = resolve_utility(cfg), resolve_arrivals(cfg)
    chosen = policy_from_spec(cfg['POLICY'], u, spec)
    result = run(chosen, spec, u, resolve_sim_config(cfg))
    payload = {
        "utility": u.describe(),
        "arrivals": spec.describe(),
        "policy": chosen.describe(),
        **result.as_dict(),
    }
    emit('simulate', cfg, payload, ['trial', 'mean'], enumerate(result.per_trial_means))


@click.command('bernoulli-opt')
@utility_option
@click.option('--p', 'p', type=float, default=None, help='Probability of a full-battery arrival')
@click.option('--battery', type=float, default=None, help='Battery capacity B')
@shared_options
@reports_errors
def bernoulli_opt(utility, p, battery, seed, deterministic, emit_csv):
    """Optimal renewal schedule under Bernoulli-full arrivals"""
    cfg = experiment_config(utility=utility, p=p, battery=battery, seed=seed,
                            deterministic=deterministic, emit_csv=emit_csv)
    u = resolve_utility(cfg)
    p, B = float(cfg['P']), float(cfg['BATTERY'])
    schedule = solve_bernoulli_optimal(u, p, B)
    payload = {
        "utility": u.describe(),
        "lambda": schedule.lam,
        "N": schedule.N if schedule.N is not None else "inf",
        "schedule": schedule.prefix,
        "value": evaluate_bernoulli(schedule, u, p),
        "kkt": kkt_residuals(schedule),
        "p": p,
        "battery": B,
    }
    emit('bernoulli-opt', cfg, payload, ['t', 'power'],
         ((t, g) for t, g in enumerate(schedule.prefix, start=1)))


@click.command('optimize-fraction')
@utility_option
@arrivals_option
@click.option('--evaluator', type=click.Choice(['renewal', 'mc']), default=None)
@sim_options
@shared_options
@reports_errors
def optimize_fraction_cmd(utility, arrivals, battery, evaluator, horizon, trials, warmup, initial_battery,
                          seed, deterministic, emit_csv):
    """Best fixed fraction theta by golden-section search"""
    cfg = experiment_config(utility=utility, arrivals=arrivals, battery=battery, evaluator=evaluator,
                            horizon=horizon, trials=trials, warmup=warmup, initial_battery=initial_battery,
                            seed=seed, deterministic=deterministic, emit_csv=emit_csv)
    u, spec = resolve_utility(cfg), resolve_arrivals(cfg)
    sim_cfg = resolve_sim_config(cfg) if cfg['EVALUATOR'] == 'mc' else None
    result = optimize_fraction(u, spec, evaluator=cfg['EVALUATOR'], sim_config=sim_cfg)
    payload = {
        "utility": u.describe(),
        "arrivals": spec.describe(),
        "theta_star": result.theta_star,
        "value": result.value,
        "q": spec.fraction_q,
        "value_at_q": result.value_at_q,
        "evaluator": result.evaluator,
    }
    emit('optimize-fraction', cfg, payload)


@click.command('sweep-fraction')
@utility_option
@arrivals_option
@click.option('--thetas', default=None, help="Fraction grid, e.g. 0.05:1:lin:20")
@click.option('--evaluator', type=click.Choice(['renewal', 'mc']), default=None)
@sim_options
@shared_options
@reports_errors
def sweep_fraction(utility, arrivals, battery, thetas, evaluator, horizon, trials, warmup, initial_battery,
                   seed, deterministic, emit_csv):
    """Value of FFP(theta) over a grid of fractions"""
    cfg = experiment_config(utility=utility, arrivals=arrivals, battery=battery, thetas=thetas,
                            evaluator=evaluator, horizon=horizon, trials=trials, warmup=warmup,
                            initial_battery=initial_battery, seed=seed, deterministic=deterministic,
                            emit_csv=emit_csv)
    u, spec = resolve_utility(cfg), resolve_arrivals(cfg)
    sim_cfg = resolve_sim_config(cfg) if cfg['EVALUATOR'] == 'mc' else None
    rows = fraction_sweep(u, spec, parse_range(cfg['THETAS']), cfg['EVALUATOR'], sim_cfg)
    payload = {
        "utility": u.describe(),
        "arrivals": spec.describe(),
        "evaluator": cfg['EVALUATOR'],
        "rows": [{"theta": th, "value": v} for th, v in rows],
    }
    emit('sweep-fraction', cfg, payload, ['theta', 'value'], rows)


commands = [simulate, bernoulli_opt, optimize_fraction_cmd, sweep_fraction]
