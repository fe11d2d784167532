#!/usr/bin/env python
"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0
"""
import logging
import sys

import click

from forms.certificate import structural_certificate
from forms.csmat_io import io_read, io_write, to_json
from forms.generators import gen_example
from solvers.fw_projection import INCONCLUSIVE, AtomList, project
from solvers.inner_solver import multi_start
from utils.configloader import (
    GAP_TOL,
    INIT,
    LOG_LEVEL,
    MAX_INNER,
    MAX_OUTER,
    MAX_SECONDS,
    MODE,
    REFINE,
    SEED,
    SLIDE,
    STARTS,
    THREADS,
    TOL_INNER,
    TOL_OUTER,
    RunConfig,
)
from utils.generic import (
    DimensionMismatch,
    MalformedFile,
    NotCompletelySymmetric,
    SymSepError,
    UnsupportedVersion,
    ZeroVectorAtom,
)
from utils.plotter import result_json, write_inner_trace, write_outer_trace, write_result

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CAP = 1
EXIT_IO = 3
EXIT_INPUT = 4

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def exit_code_for(error: Exception) -> int:
    """Maps failures to exit codes: 3 for files, 4 for invalid input forms, 1 otherwise"""
    if isinstance(error, (MalformedFile, UnsupportedVersion, OSError)):
        return EXIT_IO
    if isinstance(error, (NotCompletelySymmetric, DimensionMismatch, ZeroVectorAtom)):
        return EXIT_INPUT
    return EXIT_CAP


def load_input(path: str):
    """Reads a form; atom files are read as the low rank form they realize"""
    obj = io_read(path)
    return obj.as_form() if isinstance(obj, AtomList) else obj


def fail(ctx: click.Context, error: Exception):
    click.echo(f"{type(error).__name__}: {error}", err=True)
    ctx.exit(exit_code_for(error))


def emit(config: RunConfig, result: dict):
    """Prints the result with the echoed config and writes it to -o if given"""
    result = dict(command=config.command, result=result, config=config.to_dict())
    if config.output_path:
        write_result(config.output_path, result)
    click.echo(result_json(result))


def inner_options(function):
    options = [
        click.option("--seed", type=int, default=SEED, show_default=True),
        click.option("--tol-inner", "tol_inner", type=float, default=TOL_INNER, show_default=True),
        click.option("--max-inner", "max_inner", type=click.IntRange(min=1), default=MAX_INNER, show_default=True),
        click.option("--starts", type=click.IntRange(min=1), default=STARTS, show_default=True),
        click.option("--init", type=click.Choice(["sphere", "uniform"]), default=INIT, show_default=True),
        click.option("--threads", type=click.IntRange(min=1), default=THREADS, show_default=True),
        click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None),
        click.option("-o", "output_path", type=click.Path(dir_okay=False), default=None),
    ]
    for option in reversed(options):
        function = option(function)
    return function


@click.group()
@click.option("--verbose", "-v", count=True, help="-v for INFO, -vv for DEBUG")
def cli(verbose):
    """Best S-separable approximation of completely symmetric matrices"""
    level = {0: LOG_LEVEL, 1: "INFO"}.get(verbose, "DEBUG")
    logging.getLogger().setLevel(level)


@cli.command()
@click.option("--example", type=click.IntRange(1, 4), required=True)
@click.option("--n", "n", type=click.IntRange(min=2), required=True)
@click.option("--seed", type=int, default=SEED, show_default=True)
@click.option("-o", "output_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def gen(ctx, example, n, seed, output_path):
    """Writes one of the benchmark forms as csmat-v1"""
    config = RunConfig(command="gen", output_path=output_path, n=n, example=example, seed=seed)
    form = gen_example(example, n, seed)
    try:
        if output_path:
            io_write(output_path, form)
            saved = dict(path=output_path, repr=form.repr_name, n=form.n)
            click.echo(result_json(dict(command=config.command, result=saved, config=config.to_dict())))
        else:
            click.echo(to_json(form))
    except OSError as error:
        fail(ctx, error)


@cli.command()
@click.argument("input_path", type=click.Path(dir_okay=False))
@click.pass_context
def check(ctx, input_path):
    """Prints the structural certificate of a form"""
    try:
        form = load_input(input_path)
    except (SymSepError, OSError) as error:
        fail(ctx, error)
        return
    certificate = structural_certificate(form)
    click.echo(result_json(dict(command="check", input_path=input_path, certificate=certificate.to_dict())))


@cli.command("solve-inner")
@click.argument("input_path", type=click.Path(dir_okay=False))
@inner_options
@click.pass_context
def solve_inner(ctx, input_path, seed, tol_inner, max_inner, starts, init, threads, trace_path, output_path):
    """Maximizes f over the unit sphere"""
    config = RunConfig(
        command="solve-inner",
        input_path=input_path,
        output_path=output_path,
        seed=seed,
        tol_inner=tol_inner,
        max_inner=max_inner,
        starts=starts,
        init=init,
        threads=threads,
        trace_path=trace_path,
    )
    try:
        form = load_input(input_path)
        config.n = form.n
        result = multi_start(form, starts, seed, tol_inner, max_inner, init, threads)
        if trace_path:
            write_inner_trace(trace_path, result.trace)
        emit(config, result.to_dict())
    except (SymSepError, OSError) as error:
        fail(ctx, error)
        return
    ctx.exit(EXIT_OK if result.converged else EXIT_CAP)


@cli.command("project")
@click.argument("input_path", type=click.Path(dir_okay=False))
@inner_options
@click.option("--tol-outer", "tol_outer", type=float, default=TOL_OUTER, show_default=True)
@click.option("--gap-tol", "gap_tol", type=float, default=GAP_TOL, show_default=True)
@click.option("--max-outer", "max_outer", type=click.IntRange(min=1), default=MAX_OUTER, show_default=True)
@click.option("--mode", type=click.Choice(["cone", "convex"]), default=MODE, show_default=True)
@click.option("--no-refine", "no_refine", is_flag=True, default=not REFINE)
@click.option("--no-slide", "no_slide", is_flag=True, default=not SLIDE)
@click.option("--max-seconds", "max_seconds", type=float, default=MAX_SECONDS, show_default=True)
@click.option("--atoms-out", "atoms_out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def project_command(ctx, input_path, seed, tol_inner, max_inner, starts, init, threads, trace_path,
                    output_path, tol_outer, gap_tol, max_outer, mode, no_refine, no_slide, max_seconds,
                    atoms_out):
    """Projects a form onto the S-separable set"""
    config = RunConfig(
        command="project",
        input_path=input_path,
        output_path=output_path,
        seed=seed,
        tol_outer=tol_outer,
        tol_inner=tol_inner,
        gap_tol=gap_tol,
        max_outer=max_outer,
        max_inner=max_inner,
        starts=starts,
        mode=mode,
        refine=not no_refine,
        slide=not no_slide,
        init=init,
        threads=threads,
        max_seconds=max_seconds,
        trace_path=trace_path,
        atoms_out=atoms_out,
    )
    try:
        form = load_input(input_path)
        config.n = form.n
        result = project(
            form,
            tol_outer=tol_outer,
            max_outer=max_outer,
            tol_inner=tol_inner,
            max_inner=max_inner,
            gap_tol=gap_tol,
            starts=starts,
            mode=mode,
            refine=not no_refine,
            seed=seed,
            init=init,
            threads=threads,
            max_seconds=max_seconds,
            slide=not no_slide,
        )
        if trace_path:
            write_outer_trace(trace_path, result.trace)
        if atoms_out:
            io_write(atoms_out, result.approximation)
        emit(config, result.to_dict())
    except (SymSepError, OSError) as error:
        fail(ctx, error)
        return
    ctx.exit(EXIT_CAP if result.verdict == INCONCLUSIVE and result.at_cap else EXIT_OK)


def main():
    logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT, stream=sys.stderr)
    cli()


if __name__ == "__main__":
    main()
