import functools
import json
import logging
import sys

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

import config
from errors import HrstError
from experiments.experiment_manager import KINDS, ExperimentConfig, ExperimentManager
from render.render_manager import RenderManager, RenderSpec
from sampling.ppp import Stream, load_cloud, sample_ball, save_cloud
from tree.arcs import arc_formula_check
from tree.deviations import HorizonConfig, level_functionals, write_trace_csv
from tree.rst import build, load_tree, save_tree

logger = logging.getLogger("hrst")
console = Console()


def _setup_logging(level):
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def guarded(command):
    """Map library errors onto the CLI exit codes."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except HrstError as e:
            logger.error(f"❌ {type(e).__name__}: {e}")
            sys.exit(e.exit_code)
        except ValueError as e:
            logger.error(f"❌ Invalid input: {e}")
            sys.exit(2)
    return wrapper


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise click.BadParameter(f"expected a comma-separated list of numbers, got {text!r}")


def _params(pairs):
    params = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise click.BadParameter(f"expected key=value, got {pair!r}")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def _experiment_options(command):
    options = [
        click.option("--dim", "d", type=int, default=1, show_default=True),
        click.option("--lambda", "lam", type=float, default=1.0, show_default=True),
        click.option("--horizon", type=float, default=8.0, show_default=True),
        click.option("--margin", type=float, default=2.0, show_default=True),
        click.option("--shell", type=float, default=None, help="Gap between horizon and cloud boundary."),
        click.option("--levels", default="2,3,4,5", show_default=True),
        click.option("--kappa", type=float, default=1.0, show_default=True),
        click.option("--reps", type=int, default=100, show_default=True),
        click.option("--seed", type=int, default=None),
        click.option("--jobs", type=int, default=None, help="Replication threads (HRST_JOBS)."),
        click.option("--param", "param", multiple=True, help="Kind-specific key=value."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _config(kind, d, lam, horizon, margin, shell, levels, kappa, reps, seed, param):
    return ExperimentConfig(
        kind=kind,
        d=d,
        lam=lam,
        horizon=horizon,
        margin=margin,
        shell=config.SHELL if shell is None else shell,
        levels=_floats(levels),
        reps=reps,
        seed=config.SEED if seed is None else seed,
        kappa=kappa,
        params=_params(param),
    )


def _print_rows(report):
    table = Table(title=f"{report.kind} ({len(report.seeds)} replications)")
    for column in ("level", "statistic", "estimate", "95% CI", "n"):
        table.add_column(column)
    for row in report.rows:
        low = "-" if row["ci_low"] is None else f"{row['ci_low']:.4g}"
        high = "-" if row["ci_high"] is None else f"{row['ci_high']:.4g}"
        table.add_row(f"{row['level']:g}", row["statistic"], f"{row['estimate']:.4g}", f"[{low}, {high}]", str(row["n"]))
    console.print(table)


# ==========================================
# COMMANDS
# ==========================================
@click.group()
@click.option("--log-level", default=config.LOG_LEVEL, show_default=True)
def cli(log_level):
    """Hyperbolic radial spanning tree simulation toolkit."""
    _setup_logging(log_level.upper())


@cli.command()
@click.option("--dim", "d", type=int, default=1, show_default=True)
@click.option("--lambda", "lam", type=float, default=1.0, show_default=True)
@click.option("--radius", type=float, required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--build", "tree_out", type=click.Path(dir_okay=False), default=None, help="Also write the tree.")
@click.option("--method", type=click.Choice(["auto", "scan", "indexed", "brute"]), default="auto")
@guarded
def simulate(d, lam, radius, seed, out, tree_out, method):
    """Sample a Poisson cloud in B(radius) and optionally build its RST."""
    if d < 1:
        raise click.BadParameter("--dim must be >= 1")
    cloud = sample_ball(d, lam, radius, Stream(config.SEED if seed is None else seed))
    save_cloud(cloud, out)
    if tree_out:
        tree = build(cloud, method)
        save_tree(tree, tree_out)
    console.print(f"✅ {len(cloud)} points, d={d}, λ={lam}, R={radius}")


@cli.command()
@click.argument("tree_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default="render.svg", show_default=True)
@click.option("--edge-style", type=click.Choice(["arc", "geodesic"]), default="arc", show_default=True)
@click.option("--color/--no-color", default=True, show_default=True)
@click.option("--size", type=int, default=800, show_default=True)
@click.option("--samples", type=int, default=32, show_default=True)
@click.option("--stroke", type=float, default=0.6, show_default=True)
@guarded
def render(tree_file, out, edge_style, color, size, samples, stroke):
    """Draw a d=1 tree in the Poincaré disc."""
    spec = RenderSpec(size=size, edge_style=edge_style, color=color, samples=samples, stroke=stroke)
    RenderManager(spec).save(load_tree(tree_file), out)


@cli.command()
@click.argument("cloud_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--method", type=click.Choice(["auto", "scan", "indexed", "brute"]), default="auto")
@guarded
def tree(cloud_file, out, method):
    """Build the RST of a saved cloud."""
    save_tree(build(load_cloud(cloud_file), method), out)


@cli.command()
@click.argument("tree_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--level", type=float, required=True)
@click.option("--margin", type=float, default=2.0, show_default=True)
@click.option("--shell", type=float, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default="traces.csv", show_default=True)
@guarded
def traces(tree_file, level, margin, shell, out):
    """Per-crossing MBD and horizon traces of L_level."""
    rst = load_tree(tree_file)
    rows = level_functionals(rst, level, HorizonConfig.for_tree(rst, margin, shell))
    write_trace_csv(rows, out)
    check = arc_formula_check(rst)
    if check["violating_arcs"]:
        logger.warning(
            f"⚠️ Closed-form φ leaves [0, 1] on {check['violating_arcs']}/{check['bent_arcs']} bent arcs; "
            "traces use the chord direction"
        )
    console.print(f"✅ {len(rows)} crossings, {sum(r.thick for r in rows)} thick, "
                  f"{check['violating_arcs']} arcs off the closed form")


@cli.command()
@click.argument("kind", type=click.Choice(KINDS))
@_experiment_options
@click.option("--out", type=click.Path(dir_okay=False), default="report.json", show_default=True)
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False), default=None)
@click.option("--wall-clock", is_flag=True, help="Record elapsed time in the JSON report.")
@guarded
def experiment(kind, d, lam, horizon, margin, shell, levels, kappa, reps, seed, jobs, param, out, csv_out, wall_clock):
    """Run one Monte Carlo experiment and write its report."""
    cfg = _config(kind, d, lam, horizon, margin, shell, levels, kappa, reps, seed, param)
    report = ExperimentManager(jobs).run(cfg)
    report.save(out, csv_out, include_wall_clock=wall_clock)
    _print_rows(report)


@cli.command()
@click.argument("kind", type=click.Choice(KINDS))
@_experiment_options
@click.option("--lambdas", default="1", show_default=True)
@click.option("--horizons", default=None, help="Defaults to --horizon.")
@click.option("--out", type=click.Path(dir_okay=False), default="sweep.csv", show_default=True)
@guarded
def sweep(kind, d, lam, horizon, margin, shell, levels, kappa, reps, seed, jobs, param, lambdas, horizons, out):
    """Run one experiment over a (λ, R_h) grid and merge the rows."""
    cfg = _config(kind, d, lam, horizon, margin, shell, levels, kappa, reps, seed, param)
    manager = ExperimentManager(jobs)
    reports = manager.sweep(cfg, _floats(lambdas), _floats(horizons) if horizons else (horizon,))
    frame = manager.sweep_frame(reports)
    frame.to_csv(out, index=False)
    console.print(f"✅ {len(reports)} configurations, {len(frame)} rows written to {out}")


if __name__ == '__main__':
    cli()
