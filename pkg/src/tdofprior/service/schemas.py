"""Pydantic request/response models for the service API."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class KLGridRequest(BaseModel):
    d: int = Field(ge=1, le=10)
    nu_max: int = Field(default=30, ge=3)
    abs_tol: float = Field(default=1e-10, gt=0)
    rel_tol: float = Field(default=1e-10, gt=0)


class KLGridRow(BaseModel):
    nu: int
    dkl_prev: float | None
    dkl_next: float | None


class KLGridResponse(BaseModel):
    d: int
    nu_max: int
    method: str
    tol: float
    rows: list[KLGridRow]
    normal_vs_prev: float
    prev_vs_normal: float
    csv: str
    cached: bool


class PriorBuildRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: str = Field(description="mvt | copula | anscombe | jeffreys | relles_rogers")
    d: int = Field(default=2, ge=1, le=10)
    nu_max: int = Field(default=30, ge=3)
    rho: float = Field(default=0.0, gt=-1.0, lt=1.0)
    n_samples: int = Field(default=1_000_000, ge=1000)
    seed: int = 0
    estimator: str = Field(default="is", pattern="^(mc|is)$")
    tail_mode: str = Field(default="contiguous", pattern="^(contiguous|normal-limit)$")


class PriorTableModel(BaseModel):
    kind: str
    d: int
    nu_max: int
    rho_bucket: float | None
    estimator: str | None
    n_samples: int | None
    seed: int | None
    probs: list[float]


class PriorBuildResponse(BaseModel):
    table: PriorTableModel
    plot_csv: str
    cached: bool


class ChainSettings(BaseModel):
    n_keep: int = Field(default=500, ge=1)
    burn_in: int = Field(default=1000, ge=0)
    thin: int = Field(default=10, ge=1)


class FitMvtRequest(BaseModel):
    data: list[list[float]]
    nu_max: int = Field(default=30, ge=3)
    seed: int = 0
    paper_scale: bool = False
    competitors: bool = True
    predictive: bool = True
    grid_points: int = Field(default=60, ge=10, le=400)
    chain: ChainSettings | None = None


class FitCopulaRequest(BaseModel):
    data: list[list[float]]
    nu_max: int = Field(default=30, ge=3)
    seed: int = 0
    paper_scale: bool = False
    predictive: bool = True
    grid_points: int = Field(default=60, ge=10, le=400)
    prior_n_samples: int = Field(default=200_000, ge=1000)
    half_cauchy_scale: float = Field(default=1.0, gt=0)
    chain: ChainSettings | None = None


class FitResponse(BaseModel):
    summary: dict
    table_csv: str
    chain_csv: str
    chain_meta: str
    predictive_csv: str
    predictive_levels: list[float]
    extras: dict = {}


class StudyRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: str = Field(pattern="^(mvt|copula)$")
    d: int = Field(default=2, ge=1, le=10)
    n: int = Field(ge=10)
    nu_grid: list[int]
    replicates: int = Field(default=100, ge=1)
    prior: str = Field(default="lbp", pattern="^(lbp|anscombe|jeffreys|relles_rogers)$")
    rho: float | None = None
    seed: int = 0
    nu_max: int = Field(default=30, ge=3)
    threads: int = Field(default=1, ge=1, le=64)
    prior_n_samples: int = Field(default=100_000, ge=1000)
    chain: ChainSettings | None = None


class StudyRow(BaseModel):
    nu_true: int
    coverage: float
    rmse: float
    n_effective_replicates: int


class StudyResponse(BaseModel):
    rows: list[StudyRow]
    report_csv: str
    coverage_csv: str
    rmse_csv: str


class TablesRequest(BaseModel):
    d_list: list[int] = Field(default=[1, 2, 3])
    include_table2: bool = True
    n_samples: int = Field(default=1_000_000, ge=1000)
    seed: int = 0


class TableCellModel(BaseModel):
    d: int | None = None
    nu: int
    column: str | None = None
    expected: float
    actual: float
    delta: float
    interpretation: str | None = None
    passed: bool


class TablesResponse(BaseModel):
    passed: bool
    table1: list[TableCellModel]
    table2: list[TableCellModel]
    table1_csv: str
    table2_csv: str


class TailResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lam: float = Field(alias="lambda")
    tau: float


class ErrorResponse(BaseModel):
    error_type: str
    message: str
