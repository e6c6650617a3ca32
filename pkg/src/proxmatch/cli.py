"""Command-line front end.

Five subcommands: `rpmp` and `line` run the sampling experiments, `exact`
evaluates the combinatorial expectation machinery, `enumerate` lists the
stable matchings of a small instance, and `validate` runs the acceptance
gate.  Options may come from the command line or from a `key = value`
config file; explicit flags win over the file, the file wins over
defaults.  Exit codes: 0 success, 1 failed validation, 2 usage error.
"""

from __future__ import annotations

import json
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

import click

from . import acceptance
from . import exact_expectation as ee
from . import hypercube as hc
from . import line_poisson as lp
from . import match_core as mc
from . import reports
from .errors import SizeCapError


def _read_config(path: Optional[str]) -> dict[str, str]:
    """Parse a flat `key = value` file; '#' starts a comment."""
    if path is None:
        return {}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.UsageError(
                f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


_BOOL_WORDS = {"true": True, "yes": True, "1": True,
               "false": False, "no": False, "0": False}


def _coerce(key: str, value: str, kind):
    try:
        if kind is bool:
            return _BOOL_WORDS[value.lower()]
        return kind(value)
    except (ValueError, KeyError):
        raise click.UsageError(f"config value {key} = {value!r} is not a {kind.__name__}")


class Options:
    """Merged view of CLI flags and the config file for one command."""

    def __init__(self, cfg_path: Optional[str], known: dict[str, type]):
        self.raw = _read_config(cfg_path)
        unknown = set(self.raw) - set(known)
        if unknown:
            raise click.UsageError(
                f"unknown config key(s): {', '.join(sorted(unknown))}")
        self.known = known

    def get(self, key: str, cli_value, default=None):
        if cli_value is not None:
            return cli_value
        if key in self.raw:
            return _coerce(key, self.raw[key], self.known[key])
        return default

    def require_seed(self, cli_value) -> int:
        seed = self.get("seed", cli_value)
        if seed is None:
            raise click.UsageError("a seed is required (--seed or config)")
        return seed


def _emit(command: str, *, out: Optional[str], fmt: str, header, rows,
          summary: dict, config: dict, seed: int, clock, figures=None,
          no_plot: bool = False) -> None:
    """Write the report (+ manifest and figures) or print the summary."""
    if out is None:
        click.echo(json.dumps(summary, indent=2, sort_keys=True, default=str))
        return
    out_path = Path(out)
    if fmt == reports.CSV_FORMAT:
        reports.write_csv(out_path, header, rows)
    else:
        reports.write_json(out_path, {"summary": summary,
                                      "rows": [list(r) for r in rows]})
    outputs = [str(out_path)]
    if figures is not None and not no_plot:
        outputs.extend(str(p) for p in figures(out_path))
    started_at, t0 = clock
    manifest = reports.RunManifest(
        command=command, config=config, seed=seed, outputs=outputs,
        summary=summary, started_at=started_at,
        elapsed_seconds=round(time.monotonic() - t0, 3))
    manifest.write(out_path)
    for path in outputs:
        click.echo(path)
    click.echo(str(reports.manifest_path_for(out_path)))


def _common(f):
    for opt in (
        click.option("--seed", type=int, default=None,
                     help="Base seed; every quantity is a pure function of it."),
        click.option("--out", type=click.Path(dir_okay=False), default=None,
                     help="Report file; manifest and figures go beside it."),
        click.option("--format", "fmt", type=click.Choice(reports.FORMATS),
                     default=None, help="Report format (default csv)."),
        click.option("--config", "cfg", type=click.Path(exists=True,
                     dir_okay=False), default=None,
                     help="key = value option file."),
        click.option("--threads", type=int, default=None,
                     help="Worker processes for the trial loop."),
        click.option("--no-plot", is_flag=True, default=False,
                     help="Skip figure rendering."),
    ):
        f = opt(f)
    return f


@click.group()
@click.version_option(version="0.1.0", prog_name="proxmatch")
def main() -> None:
    """Stable matching under proximity-based preferences."""


@main.command()
@click.option("--n", type=int, default=None, help="Men per trial.")
@click.option("--k", type=int, default=None, help="Questions (hypercube dimension).")
@click.option("--metric", type=click.Choice([hc.HAMMING, hc.WEIGHTED]),
              default=None)
@click.option("--trials", type=int, default=None)
@click.option("--sample-size", type=int, default=None,
              help="Matched men sampled per trial for the X column.")
@click.option("--unbalanced-r", type=int, default=None,
              help="Extra women per trial (n + r women).")
@_common
def rpmp(n, k, metric, trials, sample_size, unbalanced_r, seed, out, fmt,
         cfg, threads, no_plot):
    """Random-profile matching on the hypercube."""
    opts = Options(cfg, {"n": int, "k": int, "metric": str, "trials": int,
                         "sample_size": int, "unbalanced_r": int, "seed": int,
                         "out": str, "format": str, "threads": int,
                         "no_plot": bool})
    clock = reports.start_clock()
    config = hc.RpmpConfig(
        n=opts.get("n", n, 64), k=opts.get("k", k, 4),
        metric=opts.get("metric", metric, hc.HAMMING),
        trials=opts.get("trials", trials, 100),
        seed=opts.require_seed(seed),
        agent_sample_size=opts.get("sample_size", sample_size, 1),
        unbalanced_r=opts.get("unbalanced_r", unbalanced_r, 0))
    stats = hc.rpmp_experiment(config, threads=opts.get("threads", threads, 1))
    from .figures import render_rpmp_figures
    _emit("rpmp", out=opts.get("out", out), fmt=opts.get("format", fmt, "csv"),
          header=hc.RPMP_CSV_HEADER, rows=stats.rows,
          summary=stats.summary_dict(), config=vars(config).copy(),
          seed=config.seed, clock=clock,
          figures=lambda p: render_rpmp_figures(stats, p),
          no_plot=opts.get("no_plot", no_plot or None, False))


@main.command()
@click.option("--lam", "--lambda", "lam", type=float, default=None,
              help="Blue (left-color) intensity.")
@click.option("--mu", type=float, default=None, help="Red intensity; mu > lam.")
@click.option("--window", type=float, default=None, help="Segment length.")
@click.option("--trials", type=int, default=None)
@click.option("--tail-grid", type=str, default=None,
              help="Comma list of radii for tail probability estimates.")
@_common
def line(lam, mu, window, trials, tail_grid, seed, out, fmt, cfg, threads,
         no_plot):
    """Poisson points on a segment: stable and queue matchings."""
    opts = Options(cfg, {"lam": float, "mu": float, "window": float,
                         "trials": int, "tail_grid": str, "seed": int,
                         "out": str, "format": str, "threads": int,
                         "no_plot": bool})
    clock = reports.start_clock()
    grid_text = opts.get("tail_grid", tail_grid, "")
    grid = tuple(float(tok) for tok in grid_text.split(",") if tok.strip())
    try:
        config = lp.LineExperimentConfig(
            lam=opts.get("lam", lam, 1.0), mu=opts.get("mu", mu, 2.0),
            window=opts.get("window", window, 1000.0),
            trials=opts.get("trials", trials, 1),
            seed=opts.require_seed(seed), tail_grid=grid)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    stats = lp.line_experiment(config, threads=opts.get("threads", threads, 1))
    from .figures import render_line_figures
    _emit("line", out=opts.get("out", out), fmt=opts.get("format", fmt, "csv"),
          header=lp.LINE_CSV_HEADER, rows=stats.csv_rows(),
          summary=stats.summary_dict(),
          config={**vars(config), "tail_grid": list(config.tail_grid)},
          seed=config.seed, clock=clock,
          figures=lambda p: render_line_figures(stats, p),
          no_plot=opts.get("no_plot", no_plot or None, False))


def _parse_gaps(text: str) -> tuple[Fraction, ...]:
    try:
        return ee.as_gaps([tok.strip() for tok in text.split(",") if tok.strip()])
    except (ValueError, ZeroDivisionError) as exc:
        raise click.UsageError(f"bad --gaps value: {exc}")


@main.command()
@click.option("--gaps", type=str, default=None,
              help="Comma list of gap lengths; fractions like 3/10 stay exact.")
@click.option("--op", type=click.Choice(["E", "D", "oracle", "partitions",
                                         "weights"]), default="E")
@click.option("--k", type=int, default=None,
              help="Sequence length for partitions/weights.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--config", "cfg", type=click.Path(exists=True, dir_okay=False),
              default=None)
def exact(gaps, op, k, out, cfg):
    """Exact expectation machinery over gap sequences."""
    opts = Options(cfg, {"gaps": str, "op": str, "k": int, "out": str})
    op = opts.get("op", op, "E")
    clock = reports.start_clock()
    if op in ("partitions", "weights"):
        k = opts.get("k", k)
        if k is None or k <= 0 or k % 2:
            raise click.UsageError(f"--op {op} needs a positive even --k")
        parts = ee.odd_partitions(k)
        result = {"op": op, "k": k,
                  "partitions": [list(o) for o in parts]}
        if op == "weights":
            result["weights"] = [reports.fraction_json(ee.partition_weight(o))
                                 for o in parts]
    else:
        text = opts.get("gaps", gaps)
        if text is None:
            raise click.UsageError(f"--op {op} needs --gaps")
        xs = _parse_gaps(text)
        try:
            value = {"E": ee.expected_greedy_cost,
                     "D": ee.greedy_cost,
                     "oracle": ee.permutation_oracle}[op](xs)
        except SizeCapError as exc:
            raise click.UsageError(str(exc))
        except ValueError as exc:
            raise click.UsageError(f"bad --gaps value: {exc}")
        result = {"op": op, "gaps": [str(x) for x in xs],
                  "value": reports.fraction_json(value)}
    out = opts.get("out", out)
    if out is None:
        click.echo(json.dumps(result, indent=2, sort_keys=True))
    else:
        out_path = Path(out)
        reports.write_json(out_path, result)
        started_at, t0 = clock
        reports.RunManifest(command="exact", config=result, seed=None,
                            outputs=[str(out_path)], summary=result,
                            started_at=started_at,
                            elapsed_seconds=round(time.monotonic() - t0, 3)
                            ).write(out_path)
        click.echo(str(out_path))
        click.echo(str(reports.manifest_path_for(out_path)))


ENUM_CSV_HEADER = ("matchingIndex", "man", "woman")


def _load_instance(ref: str) -> mc.MatchingInstance:
    path = Path(ref)
    if not path.exists():
        bundled = resources.files("proxmatch").joinpath("fixtures",
                                                        f"{ref}.json")
        if not bundled.is_file():
            raise click.UsageError(
                f"instance {ref!r}: no such file or bundled fixture")
        data = json.loads(bundled.read_text())
    else:
        data = json.loads(path.read_text())
    try:
        return mc.MatchingInstance.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise click.UsageError(f"bad instance file {ref!r}: {exc}")


@main.command("enumerate")
@click.option("--instance", "ref", type=str, required=True,
              help="Instance JSON path, or a bundled fixture name.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--format", "fmt", type=click.Choice(reports.FORMATS),
              default="json")
def enumerate_cmd(ref, out, fmt):
    """List every stable matching of a small instance."""
    inst = _load_instance(ref)
    clock = reports.start_clock()
    try:
        matchings = mc.enumerate_stable_matchings(inst)
    except SizeCapError as exc:
        raise click.UsageError(str(exc))
    result = {"count": len(matchings),
              "nMen": inst.n_men, "nWomen": inst.n_women,
              "matchings": [[[m, w] for m, w in mt.pairs()]
                            for mt in matchings]}
    rows = [(i, m, w) for i, mt in enumerate(matchings) for m, w in mt.pairs()]
    if out is None:
        click.echo(json.dumps(result, indent=2, sort_keys=True))
        return
    out_path = Path(out)
    if fmt == reports.CSV_FORMAT:
        reports.write_csv(out_path, ENUM_CSV_HEADER, rows)
    else:
        reports.write_json(out_path, result)
    started_at, t0 = clock
    reports.RunManifest(command="enumerate",
                        config={"instance": ref, "format": fmt}, seed=None,
                        outputs=[str(out_path)],
                        summary={"count": len(matchings)},
                        started_at=started_at,
                        elapsed_seconds=round(time.monotonic() - t0, 3)
                        ).write(out_path)
    click.echo(str(out_path))
    click.echo(str(reports.manifest_path_for(out_path)))


@main.command()
@click.option("--seed", type=int, default=None,
              help=f"Gate seed (default {acceptance.DEFAULT_SEED}).")
@click.option("--criteria", type=str, default=None,
              help="Comma list of criterion numbers (default: all).")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write machine-readable results JSON here.")
@click.option("--threads", type=int, default=1)
def validate(seed, criteria, out, threads):
    """Run the acceptance gate; exit 1 if any criterion fails."""
    ids = None
    if criteria:
        try:
            ids = [int(tok) for tok in criteria.split(",") if tok.strip()]
        except ValueError:
            raise click.UsageError(f"bad --criteria list: {criteria!r}")
        known = {cid for cid, _, _ in acceptance.CRITERIA}
        bad = [i for i in ids if i not in known]
        if bad:
            raise click.UsageError(f"unknown criteria: {bad}")
    results = acceptance.run_all(
        seed=seed if seed is not None else acceptance.DEFAULT_SEED,
        ids=ids, threads=threads)
    for res in results:
        click.echo(res.line())
    n_fail = sum(not r.passed for r in results)
    click.echo(f"{len(results) - n_fail}/{len(results)} criteria passed")
    if out is not None:
        payload = {
            "seed": seed if seed is not None else acceptance.DEFAULT_SEED,
            "allPassed": n_fail == 0,
            "results": [{"id": r.cid, "name": r.name, "passed": r.passed,
                         "measured": r.measured, "elapsedSeconds": r.elapsed,
                         "error": r.error} for r in results],
        }
        reports.write_json(Path(out), json.loads(
            json.dumps(payload, default=str)))
        click.echo(out)
    if n_fail:
        sys.exit(1)


if __name__ == "__main__":
    main()
