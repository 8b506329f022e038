"""Metropolis-within-Gibbs samplers for the t model and the bivariate t-copula.

The discrete dof parameters are drawn directly from their full conditionals
(a categorical over the truncated support), continuous parameters move by
random-walk Metropolis.  Restricted domains (positive scales, the correlation
interval) use truncated-Normal proposals with the exact ratio of truncation
normalizers in the acceptance probability.

A single chain is strictly sequential and deterministic given its seed;
parallelism belongs at the replicate level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special
from scipy.linalg import solve_triangular

from .errors import DomainError, NumericError, NotPositiveDefiniteError
from .mathcore import SpdMatrix, t_cdf_fast_int, t_quantile
from .models import (
    DofSupport,
    LOG_2PI,
    log_beta_rho,
    log_half_cauchy,
    log_mvt_const,
)
from .priors import PriorTable, bucket_for_rho

__all__ = [
    "McmcConfig",
    "ChainOutput",
    "ParamSummary",
    "DiscreteSummary",
    "PosteriorSummary",
    "gibbs_nu_draw",
    "rw_metropolis_step",
    "run_mvt_sampler",
    "run_copula_sampler",
    "adapt_scales",
    "summarize",
]

DOMAIN_REALS = "reals"
DOMAIN_POSITIVE = "positive"
DOMAIN_INTERVAL = "interval"

_DOMAIN_BOUNDS = {
    DOMAIN_POSITIVE: (0.0, math.inf),
    DOMAIN_INTERVAL: (-1.0, 1.0),
}


@dataclass(frozen=True)
class McmcConfig:
    n_keep: int = 500
    burn_in: int = 1000
    thin: int = 10
    proposal_scales: dict = field(default_factory=dict)
    target_accept: float = 0.30
    seed: int = 0
    adapt_interval: int = 100
    sigma12_positive: bool = False
    half_cauchy_scale: float = 1.0
    mean_prior_sd: float = 100.0

    def __post_init__(self) -> None:
        if self.n_keep < 1 or self.thin < 1 or self.burn_in < 0:
            raise DomainError("need n_keep >= 1, thin >= 1, burn_in >= 0")
        if any(s <= 0 for s in self.proposal_scales.values()):
            raise DomainError("proposal scales must be positive")

    def total_iterations(self) -> int:
        return self.burn_in + self.n_keep * self.thin


@dataclass(frozen=True)
class ChainOutput:
    draws: dict
    accept_rates: dict
    log_posterior_trace: np.ndarray
    config: McmcConfig

    def n_kept(self) -> int:
        return len(self.log_posterior_trace)

    def to_csv(self) -> str:
        names = list(self.draws)
        lines = [",".join(names + ["log_posterior"])]
        cols = [self.draws[n] for n in names]
        for i in range(self.n_kept()):
            cells = [repr(int(c[i])) if np.issubdtype(c.dtype, np.integer) else repr(float(c[i])) for c in cols]
            cells.append(repr(float(self.log_posterior_trace[i])))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def meta_json(self) -> str:
        return json.dumps(
            {
                "accept_rates": {k: float(v) for k, v in self.accept_rates.items()},
                "config": {
                    "n_keep": self.config.n_keep,
                    "burn_in": self.config.burn_in,
                    "thin": self.config.thin,
                    "seed": self.config.seed,
                    "target_accept": self.config.target_accept,
                    "proposal_scales": {k: float(v) for k, v in self.config.proposal_scales.items()},
                },
                "discrete": [k for k, v in self.draws.items() if np.issubdtype(v.dtype, np.integer)],
            }
        )

    @classmethod
    def from_csv(cls, csv_text: str, meta_text: str) -> "ChainOutput":
        meta = json.loads(meta_text)
        lines = [ln for ln in csv_text.strip().split("\n")]
        header = lines[0].split(",")
        raw = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
        draws = {}
        for k, name in enumerate(header[:-1]):
            col = raw[:, k]
            draws[name] = col.astype(int) if name in meta["discrete"] else col
        cfg = McmcConfig(
            n_keep=meta["config"]["n_keep"],
            burn_in=meta["config"]["burn_in"],
            thin=meta["config"]["thin"],
            seed=meta["config"]["seed"],
            target_accept=meta["config"]["target_accept"],
            proposal_scales=dict(meta["config"]["proposal_scales"]),
        )
        return cls(draws=draws, accept_rates=dict(meta["accept_rates"]), log_posterior_trace=raw[:, -1], config=cfg)


def gibbs_nu_draw(logpost_at, support: DofSupport, rng: np.random.Generator) -> int:
    """Draw a dof index from the categorical with the given log conditionals."""
    values = np.array([logpost_at(nu) for nu in support.values()], dtype=float)
    top = np.max(values)
    if not np.isfinite(top):
        raise NumericError("all dof conditionals are -inf")
    p = np.exp(values - top)
    cdf = np.cumsum(p)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, support.nu_max - 1) + 1


def _truncnorm_draw(x: float, scale: float, lo: float, hi: float, rng: np.random.Generator) -> float:
    a = special.ndtr((lo - x) / scale) if math.isfinite(lo) else 0.0
    b = special.ndtr((hi - x) / scale) if math.isfinite(hi) else 1.0
    u = a + rng.random() * (b - a)
    u = min(max(u, 1e-16), 1.0 - 1e-16)
    return x + scale * float(special.ndtri(u))


def _log_trunc_mass(center: float, scale: float, lo: float, hi: float) -> float:
    a = special.ndtr((lo - center) / scale) if math.isfinite(lo) else 0.0
    b = special.ndtr((hi - center) / scale) if math.isfinite(hi) else 1.0
    return math.log(max(b - a, 1e-300))


def rw_metropolis_step(
    current: float,
    logpost,
    scale: float,
    rng: np.random.Generator,
    domain: str = DOMAIN_REALS,
    logpost_current: float | None = None,
) -> tuple[float, bool]:
    """One random-walk Metropolis move; truncated proposals carry the Hastings ratio.

    On the unrestricted domain the Normal proposal is symmetric and needs no
    correction; on ``positive`` / ``interval`` the proposal is the Normal
    truncated to the domain and the acceptance ratio is multiplied by the
    ratio of truncation masses at the two centers.
    """
    if scale <= 0:
        raise DomainError("proposal scale must be positive")
    if domain == DOMAIN_REALS:
        proposal = current + scale * rng.standard_normal()
        correction = 0.0
    else:
        lo, hi = _DOMAIN_BOUNDS[domain]
        proposal = _truncnorm_draw(current, scale, lo, hi, rng)
        correction = _log_trunc_mass(current, scale, lo, hi) - _log_trunc_mass(proposal, scale, lo, hi)
    lp_current = logpost(current) if logpost_current is None else logpost_current
    lp_proposal = logpost(proposal)
    if math.isnan(lp_proposal):
        return current, False
    log_alpha = lp_proposal - lp_current + correction
    if log_alpha >= 0 or math.log(rng.random()) < log_alpha:
        return proposal, True
    return current, False


def adapt_scales(pilot: ChainOutput, config: McmcConfig) -> McmcConfig:
    """Rescale proposals toward the target acceptance rate, one multiplicative step."""
    new_scales = dict(config.proposal_scales)
    for name, rate in pilot.accept_rates.items():
        if name in new_scales:
            new_scales[name] = new_scales[name] * math.exp(rate - config.target_accept)
    return replace(config, proposal_scales=new_scales)


class _AcceptCounter:
    """Per-parameter acceptance bookkeeping plus burn-in-only scale adaptation."""

    def __init__(self, scales: dict, target: float, interval: int):
        self.scales = dict(scales)
        self.target = target
        self.interval = interval
        self.total = {k: 0 for k in scales}
        self.accepted = {k: 0 for k in scales}
        self._batch_total = {k: 0 for k in scales}
        self._batch_accepted = {k: 0 for k in scales}

    def record(self, name: str, accepted: bool) -> None:
        self.total[name] += 1
        self._batch_total[name] += 1
        if accepted:
            self.accepted[name] += 1
            self._batch_accepted[name] += 1

    def maybe_adapt(self, iteration: int, burn_in: int) -> None:
        if iteration >= burn_in or (iteration + 1) % self.interval:
            return
        for name in self.scales:
            if self._batch_total[name]:
                rate = self._batch_accepted[name] / self._batch_total[name]
                self.scales[name] *= math.exp(rate - self.target)
            self._batch_total[name] = 0
            self._batch_accepted[name] = 0

    def rates(self) -> dict:
        return {k: (self.accepted[k] / self.total[k] if self.total[k] else 0.0) for k in self.total}


def _sigma_param_names(d: int) -> list[str]:
    return [f"sigma_{j + 1}{k + 1}" for j in range(d) for k in range(j, d)]


def _chol_logdet_fast(m: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky factor and log-determinant; closed form for 2x2, else LAPACK.

    Raises :class:`NotPositiveDefiniteError` on a nonpositive pivot.
    """
    if m.shape == (2, 2):
        a, b, c = m[0, 0], m[0, 1], m[1, 1]
        if a <= 0:
            raise NotPositiveDefiniteError("leading pivot nonpositive")
        l11 = math.sqrt(a)
        l21 = b / l11
        rest = c - l21 * l21
        if rest <= 0:
            raise NotPositiveDefiniteError("trailing pivot nonpositive")
        l22 = math.sqrt(rest)
        return np.array([[l11, 0.0], [l21, l22]]), 2.0 * (math.log(l11) + math.log(l22))
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc
    return chol, 2.0 * float(np.sum(np.log(np.diag(chol))))


def _quad_form_fast(data: np.ndarray, mu: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Row-wise (x - mu)' Sigma^{-1} (x - mu) given the Cholesky factor."""
    if len(data) == 0:
        return np.empty(0)
    if chol.shape == (2, 2):
        d0 = data[:, 0] - mu[0]
        d1 = data[:, 1] - mu[1]
        z0 = d0 / chol[0, 0]
        z1 = (d1 - chol[1, 0] * z0) / chol[1, 1]
        return z0 * z0 + z1 * z1
    z = solve_triangular(chol, (data - mu).T, lower=True, check_finite=False)
    return np.sum(z * z, axis=0)


def _default_mvt_scales(data: np.ndarray, d: int) -> dict:
    n = max(len(data), 2)
    sd = np.std(data, axis=0, ddof=1) if len(data) > 1 else np.ones(d)
    sd = np.where(sd > 0, sd, 1.0)
    scales = {}
    for j in range(d):
        scales[f"mu_{j + 1}"] = 2.4 * sd[j] / math.sqrt(n)
    for j in range(d):
        for k in range(j, d):
            scales[f"sigma_{j + 1}{k + 1}"] = 2.4 * math.sqrt((sd[j] ** 2 * sd[k] ** 2 + (sd[j] * sd[k]) ** 2) / n)
    return scales


def _loglik_profile_over_nu(
    q: np.ndarray, logdet: float, d: int, nus: np.ndarray, consts: np.ndarray
) -> np.ndarray:
    """Log likelihood as a function of the dof index, sharing one quadratic form."""
    n = len(q)
    out = np.empty(len(nus) + 1)
    if n == 0:
        out[:] = 0.0
        return out
    s = np.sum(np.log1p(q[:, None] / nus[None, :]), axis=0)
    out[:-1] = n * consts - 0.5 * n * logdet - (nus + d) / 2.0 * s
    out[-1] = -0.5 * n * d * LOG_2PI - 0.5 * n * logdet - 0.5 * float(np.sum(q))
    return out


def run_mvt_sampler(
    data: np.ndarray,
    prior: PriorTable,
    config: McmcConfig,
    *,
    fixed_nuisance: tuple[np.ndarray, SpdMatrix] | None = None,
) -> ChainOutput:
    """Posterior sampler for the d-variate t under a dof prior table.

    Iterates a direct categorical dof draw, per-coordinate location moves and
    per-entry scale-matrix moves with outright rejection of any proposal that
    breaks positive definiteness.  With ``fixed_nuisance`` the location and
    scale stay pinned (used for prior-recovery checks on empty data).
    """
    data = np.atleast_2d(np.asarray(data, dtype=float)) if np.size(data) else np.empty((0, 0))
    support = prior.support
    if fixed_nuisance is not None:
        mu = np.asarray(fixed_nuisance[0], dtype=float).copy()
        sigma_values = fixed_nuisance[1].values.copy()
        d = sigma_values.shape[0]
        if data.size and data.shape[1] != d:
            raise DomainError("data dimension does not match fixed nuisance parameters")
    else:
        if data.size == 0:
            raise DomainError("empty data requires fixed_nuisance")
        n, d = data.shape
        if n <= d + 1:
            raise DomainError("posterior propriety requires more than d+1 observations")
        mu = np.median(data, axis=0)
        sigma_values = np.cov(data, rowvar=False) + 1e-8 * np.eye(d)

    if data.size == 0:
        data = np.empty((0, d))
    update_nuisance = fixed_nuisance is None
    log_prior_nu = prior.log_probs()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))

    scales = _default_mvt_scales(data, d) if update_nuisance else {}
    scales.update(config.proposal_scales)
    counter = _AcceptCounter(scales, config.target_accept, config.adapt_interval)

    nus_t = np.arange(1, support.nu_max, dtype=float)
    consts_t = np.array([log_mvt_const(d, v) for v in nus_t])
    chol, logdet = _chol_logdet_fast(sigma_values)
    q = _quad_form_fast(data, mu, chol)
    nu = support.nu_max // 2
    ll_profile = _loglik_profile_over_nu(q, logdet, d, nus_t, consts_t)
    n_data = len(data)

    def loglik_at(q_vec: np.ndarray, logdet_val: float, nu_val: int) -> float:
        if n_data == 0:
            return 0.0
        if support.is_normal(nu_val):
            return -0.5 * n_data * d * LOG_2PI - 0.5 * n_data * logdet_val - 0.5 * float(np.sum(q_vec))
        nu_f = float(nu_val)
        return (
            n_data * consts_t[nu_val - 1]
            - 0.5 * n_data * logdet_val
            - (nu_f + d) / 2.0 * float(np.sum(np.log1p(q_vec / nu_f)))
        )

    sigma_names = _sigma_param_names(d)
    names = ["nu"] + [f"mu_{j + 1}" for j in range(d)] + sigma_names
    kept = {name: [] for name in names}
    lp_trace = []

    total = config.total_iterations()
    for it in range(total):
        cond = ll_profile + log_prior_nu
        nu = gibbs_nu_draw(lambda v: cond[v - 1], support, rng)

        if update_nuisance:
            for j in range(d):
                name = f"mu_{j + 1}"

                def logpost_mu(v: float, j=j) -> float:
                    trial = mu.copy()
                    trial[j] = v
                    return loglik_at(_quad_form_fast(data, trial, chol), logdet, nu)

                current_lp = loglik_at(q, logdet, nu)
                new_val, acc = rw_metropolis_step(
                    mu[j], logpost_mu, counter.scales[name], rng, DOMAIN_REALS, logpost_current=current_lp
                )
                counter.record(name, acc)
                if acc:
                    mu[j] = new_val
                    q = _quad_form_fast(data, mu, chol)

            for j in range(d):
                for k in range(j, d):
                    name = f"sigma_{j + 1}{k + 1}"
                    restricted = j == k or config.sigma12_positive
                    domain = DOMAIN_POSITIVE if restricted else DOMAIN_REALS

                    def logpost_sigma(v: float, j=j, k=k) -> float:
                        trial = sigma_values.copy()
                        trial[j, k] = v
                        trial[k, j] = v
                        try:
                            chol_t, logdet_t = _chol_logdet_fast(trial)
                        except NotPositiveDefiniteError:
                            return -math.inf
                        return loglik_at(_quad_form_fast(data, mu, chol_t), logdet_t, nu) - 1.5 * logdet_t

                    current_lp = loglik_at(q, logdet, nu) - 1.5 * logdet
                    new_val, acc = rw_metropolis_step(
                        sigma_values[j, k], logpost_sigma, counter.scales[name], rng, domain, logpost_current=current_lp
                    )
                    counter.record(name, acc)
                    if acc:
                        sigma_values[j, k] = new_val
                        sigma_values[k, j] = new_val
                        chol, logdet = _chol_logdet_fast(sigma_values)
                        q = _quad_form_fast(data, mu, chol)

            ll_profile = _loglik_profile_over_nu(q, logdet, d, nus_t, consts_t)
            counter.maybe_adapt(it, config.burn_in)

        if it >= config.burn_in and (it - config.burn_in) % config.thin == config.thin - 1:
            kept["nu"].append(nu)
            for j in range(d):
                kept[f"mu_{j + 1}"].append(mu[j])
            for j in range(d):
                for k in range(j, d):
                    kept[f"sigma_{j + 1}{k + 1}"].append(sigma_values[j, k])
            lp_trace.append(ll_profile[nu - 1] + log_prior_nu[nu - 1] - 1.5 * logdet)

    draws = {"nu": np.array(kept["nu"], dtype=int)}
    for name in names[1:]:
        draws[name] = np.array(kept[name], dtype=float)
    return ChainOutput(
        draws=draws,
        accept_rates=counter.rates(),
        log_posterior_trace=np.array(lp_trace, dtype=float),
        config=replace(config, proposal_scales=dict(counter.scales)),
    )


class _CopulaState:
    """Cached per-margin transforms, quantiles and normalizing constants."""

    def __init__(self, data: np.ndarray, support: DofSupport, half_cauchy_scale: float, mean_prior_sd: float):
        self.data = data
        self.n = len(data)
        self.support = support
        self.hc_scale = half_cauchy_scale
        self.mean_sd = mean_prior_sd
        dofs = np.arange(1, support.nu_max, dtype=float)
        self.const_joint = np.array([log_mvt_const(2, v) for v in dofs])
        self.const_marg = np.array([log_mvt_const(1, v) for v in dofs])

    def _std_cdf(self, r: np.ndarray, nu: int) -> np.ndarray:
        u = special.ndtr(r) if self.support.is_normal(nu) else t_cdf_fast_int(r, nu)
        eps = 1e-14
        return np.minimum(np.maximum(u, eps), 1.0 - eps)

    def _std_logpdf_sum(self, r: np.ndarray, nu: int) -> float:
        if self.support.is_normal(nu):
            return float(np.sum(-0.5 * (LOG_2PI + r * r)))
        nu_f = float(nu)
        return float(
            len(r) * self.const_marg[nu - 1] - (nu_f + 1) / 2 * np.sum(np.log1p(r * r / nu_f))
        )

    def margin_parts(self, j: int, mu: float, sig: float, nu_j: int):
        r = (self.data[:, j] - mu) / sig
        u = self._std_cdf(r, nu_j)
        logf = self._std_logpdf_sum(r, nu_j) - self.n * math.log(sig)
        return u, logf

    def quantile_column(self, u_col: np.ndarray, nu: int) -> np.ndarray:
        if self.support.is_normal(nu):
            return special.ndtri(u_col)
        return t_quantile(u_col, float(nu))

    def copula_quantiles(self, u: np.ndarray, nu: int) -> np.ndarray:
        if self.support.is_normal(nu):
            return special.ndtri(u)
        return t_quantile(u, float(nu))

    def log_copula_sum(self, y: np.ndarray, nu: int, rho: float) -> float:
        one_m = 1.0 - rho * rho
        qf = (y[:, 0] ** 2 - 2.0 * rho * y[:, 0] * y[:, 1] + y[:, 1] ** 2) / one_m
        s = y[:, 0] ** 2 + y[:, 1] ** 2
        if self.support.is_normal(nu):
            return float(-0.5 * self.n * math.log(one_m) - 0.5 * np.sum(qf - s))
        nu_f = float(nu)
        joint = (
            self.n * self.const_joint[nu - 1]
            - 0.5 * self.n * math.log(one_m)
            - (nu_f + 2) / 2.0 * float(np.sum(np.log1p(qf / nu_f)))
        )
        marg = 2 * self.n * self.const_marg[nu - 1] - (nu_f + 1) / 2.0 * float(
            np.sum(np.log1p((y * y) / nu_f))
        )
        return joint - marg


def run_copula_sampler(
    data: np.ndarray,
    prior_nu: PriorTable,
    marginal_priors: tuple[PriorTable, PriorTable],
    config: McmcConfig,
    *,
    rho_bucket_tables: dict[float, PriorTable] | None = None,
) -> ChainOutput:
    """Posterior sampler for the bivariate t-copula with t margins.

    The three dof parameters are drawn directly from their categorical
    conditionals; locations move on the real line, scales on the positive
    half-line, and the correlation inside (-1, 1), all with the appropriate
    truncated-proposal corrections.  With ``rho_bucket_tables`` the copula dof
    prior is looked up at the bucket of the current correlation draw instead
    of staying pinned to the rho=0 table.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[1] != 2:
        raise DomainError("the copula sampler handles bivariate data")
    n = data.shape[0]
    if n < 10:
        raise DomainError("need at least 10 observations")
    support = prior_nu.support
    for table in marginal_priors:
        if table.support.nu_max != support.nu_max:
            raise DomainError("margin priors must share the copula dof support")

    state = _CopulaState(data, support, config.half_cauchy_scale, config.mean_prior_sd)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))

    mu = np.median(data, axis=0).astype(float)
    mad = np.median(np.abs(data - mu), axis=0) * 1.4826
    sig = np.where(mad > 0, mad, np.std(data, axis=0, ddof=1))
    from scipy.stats import kendalltau

    tau_hat = kendalltau(data[:, 0], data[:, 1]).statistic
    rho = float(np.clip(math.sin(math.pi * tau_hat / 2.0), -0.95, 0.95)) if np.isfinite(tau_hat) else 0.0
    nu = support.nu_max // 2
    nu_m = [support.nu_max // 2, support.nu_max // 2]

    scales = {
        "mu_1": 2.4 * sig[0] / math.sqrt(n),
        "mu_2": 2.4 * sig[1] / math.sqrt(n),
        "sigma_1": 1.7 * sig[0] / math.sqrt(n),
        "sigma_2": 1.7 * sig[1] / math.sqrt(n),
        "rho": 2.4 * (1.0 - rho * rho) / math.sqrt(n),
    }
    scales.update(config.proposal_scales)
    counter = _AcceptCounter(scales, config.target_accept, config.adapt_interval)

    log_prior_nu_default = prior_nu.log_probs()
    log_prior_margins = [t.log_probs() for t in marginal_priors]

    def nu_prior_logprob(nu_val: int, rho_val: float) -> float:
        if rho_bucket_tables is None:
            return float(log_prior_nu_default[nu_val - 1])
        bucket = bucket_for_rho(rho_val)
        table = rho_bucket_tables.get(bucket.representative)
        if table is None:
            return float(log_prior_nu_default[nu_val - 1])
        return math.log(max(table.prob(nu_val), 1e-300))

    u = np.empty_like(data)
    logf = [0.0, 0.0]
    for j in range(2):
        u[:, j], logf[j] = state.margin_parts(j, mu[j], sig[j], nu_m[j])
    y = state.copula_quantiles(u, nu)

    def mu_prior(v: float) -> float:
        return -0.5 * (LOG_2PI + 2 * math.log(state.mean_sd)) - 0.5 * (v / state.mean_sd) ** 2

    names = ["nu", "nu_1", "nu_2", "mu_1", "mu_2", "sigma_1", "sigma_2", "rho"]
    kept = {name: [] for name in names}
    lp_trace = []

    for it in range(config.total_iterations()):
        # copula dof: candidates share the current pseudo-observations u
        cond = np.empty(support.nu_max)
        y_cands = {}
        for cand in support.values():
            y_cand = y if cand == nu else state.copula_quantiles(u, cand)
            y_cands[cand] = y_cand
            cond[cand - 1] = state.log_copula_sum(y_cand, cand, rho) + nu_prior_logprob(cand, rho)
        nu_new = gibbs_nu_draw(lambda v: cond[v - 1], support, rng)
        if nu_new != nu:
            nu = nu_new
            y = y_cands[nu]

        # margin dofs: a candidate changes only that margin's transform, so
        # only column j of the copula quantiles moves; the quantile transform
        # is batched over all candidates in one call (same copula dof)
        for j in range(2):
            cond_m = np.empty(support.nu_max)
            u_mat = np.empty((support.nu_max, state.n))
            lf_vec = np.empty(support.nu_max)
            for cand in support.values():
                if cand == nu_m[j]:
                    u_mat[cand - 1] = u[:, j]
                    lf_vec[cand - 1] = logf[j]
                else:
                    u_mat[cand - 1], lf_vec[cand - 1] = state.margin_parts(j, mu[j], sig[j], cand)
            y_mat = state.quantile_column(u_mat, nu)
            y_trial = y.copy()
            for cand in support.values():
                y_trial[:, j] = y_mat[cand - 1]
                cond_m[cand - 1] = (
                    state.log_copula_sum(y_trial, nu, rho) + lf_vec[cand - 1] + log_prior_margins[j][cand - 1]
                )
            cand = gibbs_nu_draw(lambda v: cond_m[v - 1], support, rng)
            if cand != nu_m[j]:
                nu_m[j] = cand
                u[:, j] = u_mat[cand - 1]
                logf[j] = lf_vec[cand - 1]
            y[:, j] = y_mat[nu_m[j] - 1]

        def current_joint() -> float:
            return state.log_copula_sum(y, nu, rho) + logf[0] + logf[1]

        # locations and scales: again only column j moves
        for j in range(2):
            for pname, domain, prior_fn in (
                (f"mu_{j + 1}", DOMAIN_REALS, mu_prior),
                (f"sigma_{j + 1}", DOMAIN_POSITIVE, lambda v: log_half_cauchy(v, state.hc_scale)),
            ):
                is_mu = pname.startswith("mu")

                def logpost(v: float, j=j, is_mu=is_mu, prior_fn=prior_fn) -> float:
                    mu_v = v if is_mu else mu[j]
                    sig_v = sig[j] if is_mu else v
                    if sig_v <= 0:
                        return -math.inf
                    u_j, lf = state.margin_parts(j, mu_v, sig_v, nu_m[j])
                    y_trial = y.copy()
                    y_trial[:, j] = state.quantile_column(u_j, nu)
                    other = logf[1 - j]
                    return state.log_copula_sum(y_trial, nu, rho) + lf + other + prior_fn(v)

                current = mu[j] if is_mu else sig[j]
                lp_now = current_joint() + prior_fn(current)
                new_val, acc = rw_metropolis_step(
                    current, logpost, counter.scales[pname], rng, domain, logpost_current=lp_now
                )
                counter.record(pname, acc)
                if acc:
                    if is_mu:
                        mu[j] = new_val
                    else:
                        sig[j] = new_val
                    u[:, j], logf[j] = state.margin_parts(j, mu[j], sig[j], nu_m[j])
                    y[:, j] = state.quantile_column(u[:, j], nu)

        # correlation
        def logpost_rho(v: float) -> float:
            if not -1.0 < v < 1.0:
                return -math.inf
            return state.log_copula_sum(y, nu, v) + log_beta_rho(v) + nu_prior_logprob(nu, v)

        new_rho, acc = rw_metropolis_step(
            rho, logpost_rho, counter.scales["rho"], rng, DOMAIN_INTERVAL, logpost_current=logpost_rho(rho)
        )
        counter.record("rho", acc)
        if acc:
            rho = new_rho

        counter.maybe_adapt(it, config.burn_in)

        if it >= config.burn_in and (it - config.burn_in) % config.thin == config.thin - 1:
            for name, val in zip(names, (nu, nu_m[0], nu_m[1], mu[0], mu[1], sig[0], sig[1], rho)):
                kept[name].append(val)
            lp = (
                current_joint()
                + nu_prior_logprob(nu, rho)
                + log_prior_margins[0][nu_m[0] - 1]
                + log_prior_margins[1][nu_m[1] - 1]
                + mu_prior(mu[0])
                + mu_prior(mu[1])
                + log_half_cauchy(sig[0], state.hc_scale)
                + log_half_cauchy(sig[1], state.hc_scale)
                + log_beta_rho(rho)
            )
            lp_trace.append(lp)

    draws = {}
    for name in names:
        arr = np.array(kept[name])
        draws[name] = arr.astype(int) if name.startswith("nu") else arr.astype(float)
    return ChainOutput(
        draws=draws,
        accept_rates=counter.rates(),
        log_posterior_trace=np.array(lp_trace, dtype=float),
        config=replace(config, proposal_scales=dict(counter.scales)),
    )


@dataclass(frozen=True)
class ParamSummary:
    median: float
    lower: float
    upper: float


@dataclass(frozen=True)
class DiscreteSummary:
    map_value: int
    credible_set: tuple[int, ...]
    median: float
    lower: float
    upper: float


@dataclass(frozen=True)
class PosteriorSummary:
    continuous: dict
    discrete: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "continuous": {
                    k: {"median": v.median, "lower": v.lower, "upper": v.upper}
                    for k, v in self.continuous.items()
                },
                "discrete": {
                    k: {
                        "map": v.map_value,
                        "credible_set": list(v.credible_set),
                        "median": v.median,
                        "lower": v.lower,
                        "upper": v.upper,
                    }
                    for k, v in self.discrete.items()
                },
            }
        )


def _contiguous_credible_set(values: np.ndarray, mass: float = 0.95) -> tuple[int, ...]:
    lo_v, hi_v = int(values.min()), int(values.max())
    counts = np.zeros(hi_v - lo_v + 1)
    for v in values:
        counts[int(v) - lo_v] += 1
    freq = counts / len(values)
    best = None
    for a in range(len(freq)):
        cum = 0.0
        for b in range(a, len(freq)):
            cum += freq[b]
            if cum >= mass:
                width = b - a
                key = (width, -cum, a)
                if best is None or key < best[0]:
                    best = (key, (a, b))
                break
    if best is None:
        return tuple(range(lo_v, hi_v + 1))
    a, b = best[1]
    return tuple(range(lo_v + a, lo_v + b + 1))


def summarize(chain: ChainOutput) -> PosteriorSummary:
    """Medians, equal-tailed 95% intervals and, for dof draws, MAP and credible set."""
    if chain.n_kept() < 20:
        raise DomainError("summaries need at least 20 kept draws")
    continuous = {}
    discrete = {}
    for name, arr in chain.draws.items():
        lo, med, hi = (float(v) for v in np.quantile(arr, [0.025, 0.5, 0.975]))
        if np.issubdtype(arr.dtype, np.integer):
            values, counts = np.unique(arr, return_counts=True)
            map_value = int(values[np.argmax(counts)])
            discrete[name] = DiscreteSummary(
                map_value=map_value,
                credible_set=_contiguous_credible_set(arr),
                median=med,
                lower=lo,
                upper=hi,
            )
        else:
            continuous[name] = ParamSummary(median=med, lower=lo, upper=hi)
    return PosteriorSummary(continuous=continuous, discrete=discrete)
