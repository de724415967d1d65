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
from ehpolicy.services import DpConfig, compare, reproduce, solve_dp, upper_bound


def _dp_config(cfg) -> DpConfig:
    return DpConfig(grid_points=int(cfg['GRID']), action_points=int(cfg['ACTIONS']))


@click.command()
@utility_option
@arrivals_option
@click.option('--grid', type=int, default=None, help='Battery grid points')
@click.option('--actions', type=int, default=None, help='Action points per state')
@shared_options
@reports_errors
def dp(utility, arrivals, battery, grid, actions, seed, deterministic, emit_csv):
    """Relative value iteration oracle on the battery grid"""
    cfg = experiment_config(utility=utility, arrivals=arrivals, battery=battery, grid=grid, actions=actions,
                            seed=seed, deterministic=deterministic, emit_csv=emit_csv)
    u, spec = resolve_utility(cfg), resolve_arrivals(cfg)
    solution = solve_dp(u, spec, _dp_config(cfg))
    payload = {
        "utility": u.describe(),
        "arrivals": spec.describe(),
        "upper_bound": upper_bound(u, spec.mean),
        **solution.as_dict(),
    }
    emit('dp', cfg, payload, ['b', 'action'], zip(solution.policy.grid, solution.policy.actions))


@click.command('compare')
@utility_option
@arrivals_option
@sim_options
@click.option('--grid', type=int, default=None, help='Battery grid points for the DP row')
@shared_options
@reports_errors
def compare_cmd(utility, arrivals, battery, horizon, trials, warmup, initial_battery, grid,
                seed, deterministic, emit_csv):
    """FFP(q), FFP(theta*), Bernoulli-optimal and DP side by side"""
    cfg = experiment_config(utility=utility, arrivals=arrivals, battery=battery, horizon=horizon,
                            trials=trials, warmup=warmup, initial_battery=initial_battery, grid=grid,
                            seed=seed, deterministic=deterministic, emit_csv=emit_csv)
    u, spec = resolve_utility(cfg), resolve_arrivals(cfg)
    rows = compare(u, spec, resolve_sim_config(cfg), _dp_config(cfg))
    payload = {
        "utility": u.describe(),
        "arrivals": spec.describe(),
        "upper_bound": upper_bound(u, spec.mean),
        "rows": rows,
    }
    emit('compare', cfg, payload, ['policy', 'value', 'ratio', 'deficit', 'alpha'],
         ((r.policy, r.value, r.ratio, r.deficit, r.alpha) for r in rows))


@click.command('reproduce')
@click.option('--quick', is_flag=True, default=False, help='Smaller Monte Carlo and DP sizes')
@click.option('--only', type=int, multiple=True, help='Run only these criterion ids')
@shared_options
@reports_errors
def reproduce_cmd(quick, only, seed, deterministic, emit_csv):
    """Run the full acceptance battery; exit 1 on any failure"""
    cfg = experiment_config(seed=seed, deterministic=deterministic, emit_csv=emit_csv)
    result = reproduce(quick=quick, seed=int(cfg['SEED']), only=list(only) or None)
    emit('reproduce', cfg, result, ['id', 'name', 'pass'],
         ((c["id"], c["name"], c["pass"]) for c in result["criteria"]))
    if not result["pass"]:
        click.get_current_context().exit(1)


commands = [dp, compare_cmd, reproduce_cmd]
