"""Kullback-Leibler divergences between heavy-tailed models.

Three computational routes live here:

* t-vs-t divergence in any dimension, reduced to a single half-line integral
  through spherical coordinates (plus one closed-form expectation);
* Normal-vs-t divergence, the truncation-point limit, by the same reduction;
* copula-vs-copula divergence by plain Monte Carlo and by self-normalized
  importance sampling, with standard errors reported.

All normalizing constants are carried in log space; exponentiation happens
only at prior-construction time.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeightsError, DomainError
from .mathcore import QuadratureSpec, SpdMatrix, integrate_halfline
from .models import DofSupport, corr_matrix, log_copula_std, log_mvt_const
from scipy import special

__all__ = [
    "KLGrid",
    "McEstimate",
    "kl_t_t",
    "kl_normal_t",
    "kl_t_normal",
    "kl_copula_mc",
    "kl_copula_is",
    "build_kl_grid",
]

KLGRID_CSV_HEADER = ["d", "nu", "dkl_prev", "dkl_next", "method", "tol"]
MC_CHUNK = 1 << 18
ESS_GUARD_FRACTION = 0.01
KURTOSIS_WARN = 50.0


def kl_t_t(d: int, nu: float, nu_prime: float, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Divergence between standard d-variate t densities with dofs nu, nu_prime.

    The first expectation has the closed digamma form; the second is the
    one-dimensional spherical-coordinate integral, so the cost is independent
    of d.
    """
    if d < 1 or nu < 1 or nu_prime < 1:
        raise DomainError("kl_t_t requires d >= 1 and dofs >= 1")
    if nu == nu_prime:
        return 0.0
    e1 = special.psi((nu + d) / 2.0) - special.psi(nu / 2.0)
    log_pref = log_mvt_const(d, nu) + 0.5 * d * math.log(math.pi) - special.gammaln(d / 2.0)

    def integrand(t: float) -> float:
        return (
            (1.0 + t / nu) ** (-(nu + d) / 2.0)
            * t ** (d / 2.0 - 1.0)
            * math.log1p(t / nu_prime)
        )

    raw, _ = integrate_halfline(integrand, spec)
    e2 = math.exp(log_pref) * raw
    return float(
        log_mvt_const(d, nu)
        - log_mvt_const(d, nu_prime)
        - (nu + d) / 2.0 * e1
        + (nu_prime + d) / 2.0 * e2
    )


def kl_normal_t(d: int, nu_prime: float, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Divergence of the standard d-variate Normal from the t with dof nu_prime."""
    if d < 1 or nu_prime < 1:
        raise DomainError("kl_normal_t requires d >= 1 and nu_prime >= 1")

    def integrand(t: float) -> float:
        return math.exp(-t / 2.0) * t ** (d / 2.0 - 1.0) * math.log1p(t / nu_prime)

    raw, _ = integrate_halfline(integrand, spec)
    e2 = raw / (2.0 ** (d / 2.0) * math.exp(special.gammaln(d / 2.0)))
    return float(
        -0.5 * d * math.log(2.0 * math.pi)
        - log_mvt_const(d, nu_prime)
        - d / 2.0
        + (nu_prime + d) / 2.0 * e2
    )


def kl_t_normal(d: int, nu: float) -> float:
    """Divergence of the standard t with dof nu from the standard Normal.

    Closed form; infinite for nu <= 2 where the t second moment diverges.
    """
    if d < 1 or nu < 1:
        raise DomainError("kl_t_normal requires d >= 1 and nu >= 1")
    if nu <= 2:
        return math.inf
    e1 = special.psi((nu + d) / 2.0) - special.psi(nu / 2.0)
    return float(
        log_mvt_const(d, nu)
        + 0.5 * d * math.log(2.0 * math.pi)
        - (nu + d) / 2.0 * e1
        + d * nu / (2.0 * (nu - 2.0))
    )


@dataclass(frozen=True)
class McEstimate:
    """A Monte Carlo estimate with its sampling uncertainty."""

    value: float
    std_error: float
    n_samples: int
    seed: int
    ess: float | None = None
    heavy_tail_warning: bool = False

    def __post_init__(self) -> None:
        if self.n_samples < 2:
            raise DomainError("McEstimate needs n_samples >= 2")
        if self.std_error < 0:
            raise DomainError("std_error must be nonnegative")


def _as_corr(rho_or_corr: float | SpdMatrix) -> SpdMatrix:
    if isinstance(rho_or_corr, SpdMatrix):
        return rho_or_corr
    return SpdMatrix(corr_matrix(float(rho_or_corr)))


def _chunk_sizes(n: int) -> list[int]:
    sizes = [MC_CHUNK] * (n // MC_CHUNK)
    if n % MC_CHUNK:
        sizes.append(n % MC_CHUNK)
    return sizes


def _draw_copula_with_logpdf(
    corr: SpdMatrix, nu: float, gaussian: bool, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Copula draws plus the sampling copula's log density at those draws.

    The log density comes straight from the latent elliptical draw, avoiding
    a redundant quantile inversion.
    """
    d = corr.dim
    z = rng.standard_normal((n, d))
    x = z @ corr.chol.T
    if gaussian:
        u = special.ndtr(x)
        # cancelled Gaussian-copula form; z is exactly L^{-1}x for this draw
        logc = -0.5 * corr.logdet - 0.5 * (np.sum(z * z, axis=1) - np.sum(x * x, axis=1))
        return u, logc
    w_chi = rng.chisquare(nu, size=n)
    scale = np.sqrt(nu / w_chi)[:, None]
    x = x * scale
    u = special.stdtr(nu, x)
    q = np.sum(z * z, axis=1) * scale[:, 0] ** 2
    joint = log_mvt_const(d, nu) - 0.5 * corr.logdet - (nu + d) / 2.0 * np.log1p(q / nu)
    marg = (
        special.gammaln((nu + 1.0) / 2.0)
        - special.gammaln(nu / 2.0)
        - 0.5 * math.log(math.pi * nu)
        - (nu + 1.0) / 2.0 * np.log1p(x * x / nu)
    )
    return u, joint - np.sum(marg, axis=1)


def _excess_kurtosis(n: float, s1: float, s2: float, s3: float, s4: float) -> float:
    mean = s1 / n
    m2 = s2 / n - mean**2
    if m2 <= 0:
        return 0.0
    m4 = (s4 - 4 * mean * s3 + 6 * mean**2 * s2 - 3 * n * mean**4) / n
    return m4 / (m2 * m2) - 3.0


def kl_copula_mc(
    d: int,
    nu: int,
    nu_prime: int,
    rho_or_corr: float | SpdMatrix,
    n_samples: int,
    seed: int,
    support: DofSupport | None = DofSupport(),
) -> McEstimate:
    """Plain Monte Carlo estimate of the copula divergence D(c_nu || c_nu').

    With ``support`` given, a dof equal to ``support.nu_max`` is evaluated and
    sampled as the Gaussian copula; pass ``support=None`` to treat every dof
    as a genuine t-copula (the contiguous reading of the truncation point).
    """
    if n_samples < 1000:
        raise DomainError("kl_copula_mc requires n_samples >= 1000")
    corr = _as_corr(rho_or_corr)
    if corr.dim != d:
        raise DomainError("correlation dimension does not match d")
    if nu == nu_prime:
        return McEstimate(0.0, 0.0, n_samples, seed)
    num_gauss = support is not None and support.is_normal(nu)
    den_gauss = support is not None and support.is_normal(nu_prime)
    seq = np.random.SeedSequence(seed)
    children = seq.spawn(len(_chunk_sizes(n_samples)))
    s1 = s2 = s3 = s4 = 0.0
    for size, child in zip(_chunk_sizes(n_samples), children):
        rng = np.random.Generator(np.random.PCG64(child))
        u, log_num = _draw_copula_with_logpdf(corr, float(nu), num_gauss, size, rng)
        log_den = log_copula_std(u, corr, float(nu_prime), gaussian=den_gauss)
        g = log_num - log_den
        s1 += float(np.sum(g))
        s2 += float(np.sum(g * g))
        s3 += float(np.sum(g**3))
        s4 += float(np.sum(g**4))
    n = float(n_samples)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / (n - 1.0)
    return McEstimate(
        value=mean,
        std_error=math.sqrt(var / n),
        n_samples=n_samples,
        seed=seed,
        heavy_tail_warning=_excess_kurtosis(n, s1, s2, s3, s4) > KURTOSIS_WARN,
    )


def kl_copula_is(
    d: int,
    nu: int,
    nu_prime: int,
    rho_or_corr: float | SpdMatrix,
    n_samples: int,
    seed: int,
    support: DofSupport | None = DofSupport(),
) -> McEstimate:
    """Self-normalized importance-sampling estimate of D(c_nu || c_nu').

    The proposal is the copula with dof min{nu, nu_prime}; smaller dof means
    heavier tails, so the weights stay controlled.  An effective sample size
    below 1% of ``n_samples`` raises :class:`DegenerateWeightsError`.
    """
    if n_samples < 1000:
        raise DomainError("kl_copula_is requires n_samples >= 1000")
    corr = _as_corr(rho_or_corr)
    if corr.dim != d:
        raise DomainError("correlation dimension does not match d")
    if nu == nu_prime:
        return McEstimate(0.0, 0.0, n_samples, seed, ess=float(n_samples))
    num_gauss = support is not None and support.is_normal(nu)
    den_gauss = support is not None and support.is_normal(nu_prime)
    nu0 = min(nu, nu_prime)
    prop_gauss = support is not None and support.is_normal(nu0)
    seq = np.random.SeedSequence(seed)
    chunk_sizes = _chunk_sizes(n_samples)
    children = seq.spawn(len(chunk_sizes))
    sw = swg = sw2 = 0.0
    chunks: list[tuple[np.ndarray, np.ndarray]] = []
    for size, child in zip(chunk_sizes, children):
        rng = np.random.Generator(np.random.PCG64(child))
        u, log_prop = _draw_copula_with_logpdf(corr, float(nu0), prop_gauss, size, rng)
        if nu0 == nu and prop_gauss == num_gauss:
            log_num = log_prop
        else:
            log_num = log_copula_std(u, corr, float(nu), gaussian=num_gauss)
        log_den = log_copula_std(u, corr, float(nu_prime), gaussian=den_gauss)
        w = np.exp(log_num - log_prop)
        g = log_num - log_den
        sw += float(np.sum(w))
        swg += float(np.sum(w * g))
        sw2 += float(np.sum(w * w))
        chunks.append((w, g))
    ess = sw * sw / sw2 if sw2 > 0 else 0.0
    if ess < ESS_GUARD_FRACTION * n_samples:
        raise DegenerateWeightsError(
            f"effective sample size {ess:.1f} below {ESS_GUARD_FRACTION:.0%} of {n_samples}"
        )
    value = swg / sw
    dev = 0.0
    for w, g in chunks:
        dev += float(np.sum((w * (g - value)) ** 2))
    std_error = math.sqrt(dev) / sw
    return McEstimate(value=value, std_error=std_error, n_samples=n_samples, seed=seed, ess=ess)


@dataclass(frozen=True)
class KLGrid:
    """Contiguous-dof divergence grid for one dimension.

    ``dkl_prev[k]`` and ``dkl_next[k]`` hold the divergences of the t density
    with dof k+1 to its lower/upper dof neighbor, both read as genuine t
    densities (that is how the reference values tabulate the truncation row).
    The Normal-limit entries are kept separately:

    * ``normal_vs_prev`` -- D(Normal || t_{nu_max-1}), the exact truncation
      divergence;
    * ``prev_vs_normal`` -- D(t_{nu_max-1} || Normal), closed form, used by the
      generic-min prior mode.
    """

    d: int
    nu_max: int
    dkl_prev: np.ndarray
    dkl_next: np.ndarray
    normal_vs_prev: float
    prev_vs_normal: float
    method: str = "quadrature"
    tol: float = 1e-10

    def __post_init__(self) -> None:
        for name in ("dkl_prev", "dkl_next"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            if arr.shape != (self.nu_max,):
                raise DomainError(f"{name} must have length nu_max")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(KLGRID_CSV_HEADER)
        for k in range(self.nu_max):
            writer.writerow(
                [self.d, k + 1, repr(float(self.dkl_prev[k])), repr(float(self.dkl_next[k])), self.method, repr(float(self.tol))]
            )
        writer.writerow([self.d, self.nu_max - 1, repr(float("nan")), repr(float(self.prev_vs_normal)), "normal-limit", repr(float(self.tol))])
        writer.writerow([self.d, self.nu_max, repr(float(self.normal_vs_prev)), repr(float("nan")), "normal-limit", repr(float(self.tol))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "KLGrid":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != KLGRID_CSV_HEADER:
            raise DomainError("unexpected KL grid CSV header")
        body = rows[1:]
        t_rows = [r for r in body if r[4] != "normal-limit"]
        n_rows = [r for r in body if r[4] == "normal-limit"]
        if not t_rows or len(n_rows) != 2:
            raise DomainError("malformed KL grid CSV")
        d = int(t_rows[0][0])
        nu_max = max(int(r[1]) for r in t_rows)
        prev = np.full(nu_max, np.nan)
        nxt = np.full(nu_max, np.nan)
        for r in t_rows:
            prev[int(r[1]) - 1] = float(r[2])
            nxt[int(r[1]) - 1] = float(r[3])
        by_nu = {int(r[1]): r for r in n_rows}
        return cls(
            d=d,
            nu_max=nu_max,
            dkl_prev=prev,
            dkl_next=nxt,
            normal_vs_prev=float(by_nu[nu_max][2]),
            prev_vs_normal=float(by_nu[nu_max - 1][3]),
            method=t_rows[0][4],
            tol=float(t_rows[0][5]),
        )


def build_kl_grid(d: int, nu_max: int = 30, spec: QuadratureSpec = QuadratureSpec()) -> KLGrid:
    """Fill the contiguous divergence grid plus the Normal-limit entries."""
    if nu_max < 3:
        raise DomainError("build_kl_grid requires nu_max >= 3")
    prev = np.full(nu_max, np.nan)
    nxt = np.full(nu_max, np.nan)
    for nu in range(1, nu_max + 1):
        if nu >= 2:
            prev[nu - 1] = kl_t_t(d, nu, nu - 1, spec)
        if nu <= nu_max - 1:
            nxt[nu - 1] = kl_t_t(d, nu, nu + 1, spec)
    return KLGrid(
        d=d,
        nu_max=nu_max,
        dkl_prev=prev,
        dkl_next=nxt,
        normal_vs_prev=kl_normal_t(d, nu_max - 1, spec),
        prev_vs_normal=kl_t_normal(d, nu_max - 1),
        tol=spec.abs_tol,
    )
