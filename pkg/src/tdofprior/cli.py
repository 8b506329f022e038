"""Command-line client for the service.

Every command builds a request, sends it through HTTP (a remote ``--server``
URL, or the bundled app mounted in process when no server is given) and
writes the returned artifacts under ``--out-dir``.  Flags have config-file
twins (flat ``key = value`` text, see ``--config``); explicit flags win.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from .dataio import load_numeric_csv, parse_config_file, write_rows_csv
from .errors import DataError, NumericError, TdofError
from .priors import PriorTable

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class ServiceClient:
    """Thin HTTP wrapper; in-process ASGI transport unless a server URL is set."""

    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=None)
        else:
            from fastapi.testclient import TestClient

            from .service.app import create_app

            self._client = TestClient(create_app())

    def request(self, method: str, path: str, **kwargs) -> dict:
        response = self._client.request(method, path, **kwargs)
        if response.status_code >= 400:
            try:
                payload = response.json()
            except ValueError:
                payload = {"error_type": "internal", "message": response.text}
            kind = payload.get("error_type", "internal")
            message = payload.get("message", str(payload))
            if kind in ("data", "domain") or response.status_code == 422:
                raise DataError(message)
            raise NumericError(message)
        return response.json()

    def post(self, path: str, body: dict) -> dict:
        return self.request("POST", path, json=body)

    def get(self, path: str, params: dict | None = None) -> dict:
        return self.request("GET", path, params=params)


class Settings:
    """Global flags merged with their config-file twins (flags win)."""

    def __init__(self, config: dict[str, str], server: str | None, seed: int | None, out_dir: str | None, threads: int | None):
        self.config = config
        self.server = server if server is not None else config.get("server")
        self.seed = seed if seed is not None else int(config.get("seed", 0))
        self.out_dir = Path(out_dir if out_dir is not None else config.get("out_dir", "."))
        self.threads = threads if threads is not None else int(config.get("threads", 1))
        self._client: ServiceClient | None = None

    def option(self, key: str, flag_value, default):
        if flag_value is not None:
            return flag_value
        if key in self.config:
            kind = type(default)
            return kind(self.config[key]) if default is not None else self.config[key]
        return default

    @property
    def client(self) -> ServiceClient:
        if self._client is None:
            self._client = ServiceClient(self.server)
        return self._client

    def write(self, name: str, text: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        path.write_text(text, encoding="utf-8")
        click.echo(f"wrote {path}")
        return path


@click.group()
@click.option("--server", default=None, help="Service URL; default runs the service in process.")
@click.option("--seed", type=int, default=None, help="Global random seed.")
@click.option("--config", "config_path", type=str, default=None, help="Flat key=value config file.")
@click.option("--out-dir", default=None, help="Directory for result files.")
@click.option("--threads", type=int, default=None, help="Worker count for replicated studies.")
@click.pass_context
def cli(ctx, server, seed, config_path, out_dir, threads):
    """Loss-based dof priors for heavy-tailed models: build, fit, validate."""
    config = parse_config_file(config_path) if config_path else {}
    ctx.obj = Settings(config, server, seed, out_dir, threads)


@cli.group()
def kl():
    """Divergence grids."""


@kl.command("grid")
@click.option("--d", "dims", type=int, multiple=True, required=True, help="Dimension(s) to compute.")
@click.option("--nu-max", type=int, default=None)
@click.option("--tol", type=float, default=None)
@click.pass_obj
def kl_grid(settings: Settings, dims, nu_max, tol):
    """Compute (or fetch cached) contiguous-dof divergence grids."""
    nu_max = settings.option("nu_max", nu_max, 30)
    tol = settings.option("tol", tol, 1e-10)
    for d in dims:
        out = settings.client.post(
            "/kl/grid", {"d": d, "nu_max": nu_max, "abs_tol": tol, "rel_tol": tol}
        )
        settings.write(f"kl_grid_d{d}.csv", out["csv"])
        click.echo(f"d={d}: nu_max={out['nu_max']} cached={out['cached']} normal_vs_prev={out['normal_vs_prev']:.6g}")


@cli.group()
def prior():
    """Dof prior tables."""


@prior.command("build")
@click.option("--model", type=click.Choice(["mvt", "copula", "anscombe", "jeffreys", "relles_rogers"]), required=True)
@click.option("--d", type=int, default=None)
@click.option("--nu-max", type=int, default=None)
@click.option("--rho", type=float, default=None)
@click.option("--n", "n_samples", type=int, default=None, help="Monte Carlo sample count (copula).")
@click.option("--estimator", type=click.Choice(["mc", "is"]), default=None)
@click.option("--tail-mode", type=click.Choice(["contiguous", "normal-limit"]), default=None)
@click.pass_obj
def prior_build(settings: Settings, model, d, nu_max, rho, n_samples, estimator, tail_mode):
    """Build a prior table and write it as JSON plus (nu, prob) plot data."""
    body = {
        "model": model,
        "d": settings.option("d", d, 2),
        "nu_max": settings.option("nu_max", nu_max, 30),
        "rho": settings.option("rho", rho, 0.0),
        "n_samples": settings.option("n_samples", n_samples, 1_000_000),
        "seed": settings.seed,
        "estimator": settings.option("estimator", estimator, "is"),
        "tail_mode": settings.option("tail_mode", tail_mode, "contiguous"),
    }
    out = settings.client.post("/priors/build", body)
    table = out["table"]
    suffix = f"{model}_d{table['d']}"
    settings.write(f"prior_{suffix}.json", json.dumps(table))
    settings.write(f"prior_{suffix}_plot.csv", out["plot_csv"])
    click.echo(f"pi(1)={table['probs'][0]:.4g} pi(2)={table['probs'][1]:.4g} cached={out['cached']}")


@prior.command("show")
@click.argument("table_path", type=str)
@click.pass_obj
def prior_show(settings: Settings, table_path):
    """Pretty-print a stored prior table and emit its plot data."""
    path = Path(table_path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    table = PriorTable.from_json(path.read_text(encoding="utf-8"))
    click.echo(f"kind={table.kind} d={table.d} nu_max={table.support.nu_max} rho_bucket={table.rho_bucket}")
    click.echo(f"estimator={table.estimator} n_samples={table.n_samples} seed={table.seed}")
    for nu in table.support.values():
        click.echo(f"  nu={nu:2d}  {table.prob(nu):.6e}")
    plot = write_rows_csv(["nu", "prob"], [[nu, table.prob(nu)] for nu in table.support.values()])
    settings.write(path.stem + "_plot.csv", plot)


@cli.group()
def fit():
    """Posterior analysis of a data file."""


def _write_fit_outputs(settings: Settings, tag: str, out: dict) -> None:
    settings.write(f"fit_{tag}_summary.json", json.dumps({"summary": out["summary"], "extras": out["extras"], "predictive_levels": out["predictive_levels"]}))
    settings.write(f"fit_{tag}_table.csv", out["table_csv"])
    settings.write(f"fit_{tag}_chain.csv", out["chain_csv"])
    settings.write(f"fit_{tag}_chain_meta.json", out["chain_meta"])
    if out["predictive_csv"]:
        settings.write(f"fit_{tag}_predictive.csv", out["predictive_csv"])


@fit.command("mvt")
@click.argument("csv_path", type=str)
@click.option("--nu-max", type=int, default=None)
@click.option("--paper-scale", is_flag=True, default=False)
@click.option("--competitors/--no-competitors", default=True)
@click.option("--predictive/--no-predictive", default=True)
@click.option("--grid-points", type=int, default=None)
@click.pass_obj
def fit_mvt(settings: Settings, csv_path, nu_max, paper_scale, competitors, predictive, grid_points):
    """Fit the multivariate t under the loss-based and competitor priors."""
    names, data = load_numeric_csv(csv_path)
    body = {
        "data": data.tolist(),
        "nu_max": settings.option("nu_max", nu_max, 30),
        "seed": settings.seed,
        "paper_scale": paper_scale,
        "competitors": competitors,
        "predictive": predictive,
        "grid_points": settings.option("grid_points", grid_points, 60),
    }
    out = settings.client.post("/fit/mvt", body)
    _write_fit_outputs(settings, "mvt", out)
    nu_summary = out["summary"]["discrete"]["nu"]
    click.echo(f"columns={names} nu_map={nu_summary['map']} credible_set={nu_summary['credible_set']}")


@fit.command("copula")
@click.argument("csv_path", type=str)
@click.option("--nu-max", type=int, default=None)
@click.option("--paper-scale", is_flag=True, default=False)
@click.option("--predictive/--no-predictive", default=True)
@click.option("--grid-points", type=int, default=None)
@click.option("--prior-n", "prior_n_samples", type=int, default=None, help="Samples for the rho=0 prior table.")
@click.option("--half-cauchy-scale", type=float, default=None)
@click.pass_obj
def fit_copula(settings: Settings, csv_path, nu_max, paper_scale, predictive, grid_points, prior_n_samples, half_cauchy_scale):
    """Fit the bivariate t-copula with t margins; reports tail dependence."""
    names, data = load_numeric_csv(csv_path)
    if data.shape[1] != 2:
        raise DataError(f"{csv_path}: expected exactly 2 columns, found {data.shape[1]}")
    body = {
        "data": data.tolist(),
        "nu_max": settings.option("nu_max", nu_max, 30),
        "seed": settings.seed,
        "paper_scale": paper_scale,
        "predictive": predictive,
        "grid_points": settings.option("grid_points", grid_points, 60),
        "prior_n_samples": settings.option("prior_n_samples", prior_n_samples, 200_000),
        "half_cauchy_scale": settings.option("half_cauchy_scale", half_cauchy_scale, 1.0),
    }
    out = settings.client.post("/fit/copula", body)
    _write_fit_outputs(settings, "copula", out)
    rho = out["summary"]["continuous"]["rho"]
    click.echo(
        f"columns={names} rho={rho['median']:.3f} lambda={out['extras']['lambda']['median']:.3f} "
        f"tau={out['extras']['tau']['median']:.3f}"
    )


@cli.group()
def study():
    """Frequentist validation studies."""


@study.command("frequentist")
@click.option("--model", type=click.Choice(["mvt", "copula"]), required=True)
@click.option("--d", type=int, default=None)
@click.option("--n", type=int, required=True)
@click.option("--nu-true", "nu_grid", type=int, multiple=True, required=True)
@click.option("--replicates", type=int, default=None)
@click.option("--prior", type=click.Choice(["lbp", "anscombe", "jeffreys", "relles_rogers"]), default=None)
@click.option("--rho", type=float, default=None)
@click.option("--paper-scale", is_flag=True, default=False, help="Use 250 replicates as in the reference protocol.")
@click.pass_obj
def study_frequentist(settings: Settings, model, d, n, nu_grid, replicates, prior, rho, paper_scale):
    """Coverage and RMSE of the dof posterior over replicated datasets."""
    if replicates is None:
        replicates = 250 if paper_scale else int(settings.config.get("replicates", 100))
    body = {
        "model": model,
        "d": settings.option("d", d, 2),
        "n": n,
        "nu_grid": list(nu_grid),
        "replicates": replicates,
        "prior": settings.option("prior", prior, "lbp"),
        "rho": rho,
        "seed": settings.seed,
        "threads": settings.threads,
    }
    out = settings.client.post("/study/frequentist", body)
    settings.write("study_report.csv", out["report_csv"])
    settings.write("study_coverage.csv", out["coverage_csv"])
    settings.write("study_rmse.csv", out["rmse_csv"])
    for row in out["rows"]:
        click.echo(
            f"nu_true={row['nu_true']:2d} coverage={row['coverage']:.3f} rmse={row['rmse']:.3f} "
            f"replicates={row['n_effective_replicates']}"
        )


@cli.group()
def tables():
    """Reference-value reproduction checks."""


@tables.command("reproduce")
@click.option("--d", "dims", type=int, multiple=True, default=(1, 2, 3))
@click.option("--table2/--skip-table2", "include_table2", default=True)
@click.option("--n", "n_samples", type=int, default=None, help="Monte Carlo samples for the copula prior check.")
@click.pass_obj
def tables_reproduce(settings: Settings, dims, include_table2, n_samples):
    """Recompute the published divergence grid and copula prior; print deltas."""
    body = {
        "d_list": list(dims),
        "include_table2": include_table2,
        "n_samples": settings.option("n_samples", n_samples, 1_000_000),
        "seed": settings.seed,
    }
    out = settings.client.post("/tables/reproduce", body)
    settings.write("tables_table1.csv", out["table1_csv"])
    if include_table2:
        settings.write("tables_table2.csv", out["table2_csv"])
    fails = [c for c in out["table1"] if not c["passed"]] + [c for c in out["table2"] if not c["passed"]]
    for cell in out["table1"]:
        if not cell["passed"]:
            click.echo(f"FAIL d={cell['d']} nu={cell['nu']} {cell['column']}: expected {cell['expected']:.4g} got {cell['actual']:.4g}")
    for cell in out["table2"]:
        status = "ok" if cell["passed"] else "FAIL"
        click.echo(f"table2 nu={cell['nu']}: expected {cell['expected']:.4g} got {cell['actual']:.4g} [{status}]")
    click.echo(f"table1 cells: {len(out['table1'])}, table2 cells: {len(out['table2'])}, failures: {len(fails)}")
    if fails:
        raise NumericError(f"{len(fails)} reference cells outside tolerance")
    click.echo("all reference checks passed")


@cli.command("tail")
@click.option("--nu", type=float, required=True)
@click.option("--rho", type=float, required=True)
@click.pass_obj
def tail(settings: Settings, nu, rho):
    """Tail-dependence coefficient and rank correlation of a t-copula."""
    out = settings.client.get("/tail/dependence", params={"nu": nu, "rho": rho})
    click.echo(f"lambda={out['lambda']:.6f} tau={out['tau']:.6f}")


@cli.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("tdofprior.service.app:app", host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return EXIT_USAGE
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except NumericError as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        return EXIT_NUMERIC
    except TdofError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except httpx.HTTPError as exc:
        click.echo(f"service unreachable: {exc}", err=True)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
