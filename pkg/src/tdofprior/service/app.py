"""FastAPI service exposing the prior-construction and inference pipelines.

Divergence grids and prior tables are cached in process and mirrored to a
cache directory (``TDOFPRIOR_CACHE``, default ``~/.cache/tdofprior``) so
repeated requests never recompute quadrature or Monte Carlo work.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..dataio import write_rows_csv
from ..divergence import KLGrid, build_kl_grid
from ..errors import DataError, DomainError, NumericError, TdofError
from ..mathcore import QuadratureSpec
from ..mcmc import McmcConfig
from ..pipelines import (
    AnalysisOptions,
    ScenarioSpec,
    reproduce_tables,
    run_copula_analysis,
    run_frequentist_study,
    run_mvt_analysis,
    tail_dependence,
)
from ..priors import PriorTable, build_prior_copula, build_prior_mvt, competitor_prior_table
from ..models import DofSupport
from . import schemas

__all__ = ["create_app", "app"]


def _default_cache_dir() -> Path:
    return Path(os.environ.get("TDOFPRIOR_CACHE", "~/.cache/tdofprior")).expanduser()


class _GridCache:
    def __init__(self, cache_dir: Path):
        self.cache_dir = cache_dir
        self.memory: dict[tuple, KLGrid] = {}

    def path_for(self, d: int, nu_max: int, tol: float) -> Path:
        return self.cache_dir / f"klgrid_d{d}_nu{nu_max}_tol{tol:g}.csv"

    def get(self, d: int, nu_max: int, spec: QuadratureSpec) -> tuple[KLGrid, bool]:
        key = (d, nu_max, spec.abs_tol)
        if key in self.memory:
            return self.memory[key], True
        path = self.path_for(d, nu_max, spec.abs_tol)
        if path.exists():
            grid = KLGrid.from_csv(path.read_text(encoding="utf-8"))
            self.memory[key] = grid
            return grid, True
        grid = build_kl_grid(d, nu_max, spec)
        self.memory[key] = grid
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(grid.to_csv(), encoding="utf-8")
        return grid, False


class _PriorCache:
    def __init__(self):
        self.memory: dict[tuple, PriorTable] = {}

    def get_or_build(self, key: tuple, builder) -> tuple[PriorTable, bool]:
        if key in self.memory:
            return self.memory[key], True
        table = builder()
        self.memory[key] = table
        return table, False


def _prior_to_model(table: PriorTable) -> schemas.PriorTableModel:
    return schemas.PriorTableModel(**json.loads(table.to_json()))


def _prior_plot_csv(table: PriorTable) -> str:
    return write_rows_csv(["nu", "prob"], [[nu, table.prob(nu)] for nu in table.support.values()])


def _chain_config(chain: schemas.ChainSettings | None, seed: int, paper_scale: bool) -> McmcConfig | None:
    if chain is not None:
        return McmcConfig(n_keep=chain.n_keep, burn_in=chain.burn_in, thin=chain.thin, seed=seed)
    if paper_scale:
        return McmcConfig(n_keep=5000, burn_in=5000, thin=50, seed=seed)
    return None


def create_app(cache_dir: Path | None = None) -> FastAPI:
    app = FastAPI(
        title="tdofprior",
        description="Loss-based dof priors, divergence grids and posterior inference",
        version=__version__,
    )
    grids = _GridCache(cache_dir or _default_cache_dir())
    priors = _PriorCache()
    app.state.grid_cache = grids
    app.state.prior_cache = priors

    @app.exception_handler(TdofError)
    async def tdof_error_handler(_request: Request, exc: TdofError):
        if isinstance(exc, DataError):
            status, kind = 400, "data"
        elif isinstance(exc, DomainError):
            status, kind = 422, "domain"
        elif isinstance(exc, NumericError):
            status, kind = 500, "numeric"
        else:
            status, kind = 500, "internal"
        return JSONResponse(status_code=status, content={"error_type": kind, "message": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/kl/grid", response_model=schemas.KLGridResponse)
    def kl_grid(req: schemas.KLGridRequest) -> schemas.KLGridResponse:
        spec = QuadratureSpec(abs_tol=req.abs_tol, rel_tol=req.rel_tol)
        grid, cached = grids.get(req.d, req.nu_max, spec)
        rows = [
            schemas.KLGridRow(
                nu=k + 1,
                dkl_prev=None if np.isnan(grid.dkl_prev[k]) else float(grid.dkl_prev[k]),
                dkl_next=None if np.isnan(grid.dkl_next[k]) else float(grid.dkl_next[k]),
            )
            for k in range(grid.nu_max)
        ]
        return schemas.KLGridResponse(
            d=grid.d,
            nu_max=grid.nu_max,
            method=grid.method,
            tol=grid.tol,
            rows=rows,
            normal_vs_prev=grid.normal_vs_prev,
            prev_vs_normal=grid.prev_vs_normal,
            csv=grid.to_csv(),
            cached=cached,
        )

    @app.post("/priors/build", response_model=schemas.PriorBuildResponse)
    def priors_build(req: schemas.PriorBuildRequest) -> schemas.PriorBuildResponse:
        if req.model == "mvt":
            key = ("mvt", req.d, req.nu_max, req.tail_mode)
            grid, _ = grids.get(req.d, req.nu_max, QuadratureSpec())
            table, cached = priors.get_or_build(
                key, lambda: build_prior_mvt(req.d, req.nu_max, grid, tail_mode=req.tail_mode)
            )
        elif req.model == "copula":
            key = ("copula", req.nu_max, req.rho, req.n_samples, req.seed, req.estimator, req.tail_mode)
            table, cached = priors.get_or_build(
                key,
                lambda: build_prior_copula(
                    2, req.nu_max, req.rho, req.n_samples, req.seed,
                    estimator=req.estimator, tail_mode=req.tail_mode,
                ),
            )
        else:
            key = (req.model, req.d, req.nu_max)
            table, cached = priors.get_or_build(
                key, lambda: competitor_prior_table(req.model, req.d, DofSupport(req.nu_max))
            )
        return schemas.PriorBuildResponse(table=_prior_to_model(table), plot_csv=_prior_plot_csv(table), cached=cached)

    @app.post("/fit/mvt", response_model=schemas.FitResponse)
    def fit_mvt(req: schemas.FitMvtRequest) -> schemas.FitResponse:
        data = np.asarray(req.data, dtype=float)
        options = AnalysisOptions(
            nu_max=req.nu_max,
            seed=req.seed,
            paper_scale=req.paper_scale,
            competitors=req.competitors,
            grid_points=req.grid_points,
            mcmc=_chain_config(req.chain, req.seed, req.paper_scale),
        )
        result = run_mvt_analysis(data, options)
        return schemas.FitResponse(
            summary=json.loads(result.summary.to_json()),
            table_csv=result.table_csv,
            chain_csv=result.chain.to_csv(),
            chain_meta=result.chain.meta_json(),
            predictive_csv=result.predictive_csv if req.predictive else "",
            predictive_levels=list(result.predictive_levels),
            extras=result.extras,
        )

    @app.post("/fit/copula", response_model=schemas.FitResponse)
    def fit_copula(req: schemas.FitCopulaRequest) -> schemas.FitResponse:
        data = np.asarray(req.data, dtype=float)
        key = ("copula", req.nu_max, 0.0, req.prior_n_samples, req.seed + 90, "is", "contiguous")
        prior_nu, _ = priors.get_or_build(
            key,
            lambda: build_prior_copula(2, req.nu_max, 0.0, req.prior_n_samples, req.seed + 90),
        )
        options = AnalysisOptions(
            nu_max=req.nu_max,
            seed=req.seed,
            paper_scale=req.paper_scale,
            grid_points=req.grid_points,
            mcmc=_chain_config(req.chain, req.seed, req.paper_scale),
            half_cauchy_scale=req.half_cauchy_scale,
        )
        result = run_copula_analysis(data, options, prior_nu=prior_nu)
        return schemas.FitResponse(
            summary=json.loads(result.summary.to_json()),
            table_csv=result.table_csv,
            chain_csv=result.chain.to_csv(),
            chain_meta=result.chain.meta_json(),
            predictive_csv=result.predictive_csv if req.predictive else "",
            predictive_levels=list(result.predictive_levels),
            extras=result.extras,
        )

    @app.post("/study/frequentist", response_model=schemas.StudyResponse)
    def study(req: schemas.StudyRequest) -> schemas.StudyResponse:
        chain = req.chain or schemas.ChainSettings()
        spec = ScenarioSpec(
            model=req.model,
            d=req.d,
            n=req.n,
            nu_grid=tuple(req.nu_grid),
            replicates=req.replicates,
            prior=req.prior,
            rho=req.rho,
            seed=req.seed,
            nu_max=req.nu_max,
            mcmc=McmcConfig(n_keep=chain.n_keep, burn_in=chain.burn_in, thin=chain.thin),
            threads=req.threads,
        )
        prior_table = None
        if req.model == "copula" and req.prior == "lbp":
            key = ("copula", req.nu_max, 0.0, req.prior_n_samples, 2025, "is", "contiguous")
            prior_table, _ = priors.get_or_build(
                key, lambda: build_prior_copula(2, req.nu_max, 0.0, req.prior_n_samples, 2025)
            )
        report = run_frequentist_study(spec, prior_table=prior_table)
        rows = [
            schemas.StudyRow(
                nu_true=r.nu_true, coverage=r.coverage, rmse=r.rmse, n_effective_replicates=r.n_effective
            )
            for r in report.rows
        ]
        return schemas.StudyResponse(
            rows=rows,
            report_csv=report.report_csv(),
            coverage_csv=report.coverage_csv(),
            rmse_csv=report.rmse_csv(),
        )

    @app.post("/tables/reproduce", response_model=schemas.TablesResponse)
    def tables(req: schemas.TablesRequest) -> schemas.TablesResponse:
        report = reproduce_tables(
            tuple(req.d_list),
            include_table2=req.include_table2,
            n_samples=req.n_samples,
            seed=req.seed,
        )
        t1 = [
            schemas.TableCellModel(
                d=c.d, nu=c.nu, column=c.column, expected=c.expected, actual=c.actual,
                delta=c.delta, interpretation=c.interpretation, passed=c.passed,
            )
            for c in report.table1
        ]
        t2 = [
            schemas.TableCellModel(
                nu=c.nu, expected=c.expected, actual=c.actual, delta=c.actual - c.expected, passed=c.passed
            )
            for c in report.table2
        ]
        return schemas.TablesResponse(
            passed=report.passed,
            table1=t1,
            table2=t2,
            table1_csv=report.table1_csv(),
            table2_csv=report.table2_csv(),
        )

    @app.get("/tail/dependence", response_model=schemas.TailResponse, response_model_by_alias=True)
    def tail(nu: float = Query(ge=1), rho: float = Query(gt=-1, lt=1)) -> schemas.TailResponse:
        dep = tail_dependence(nu, rho)
        return schemas.TailResponse(lam=dep.lam, tau=dep.tau)

    return app


app = create_app()
