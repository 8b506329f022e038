"""Regenerate the bundled synthetic data fixtures.

The two CSVs under ``src/tdofprior/data/`` are drawn from the models fitted
in the reference analyses, using the published point estimates and sample
sizes, with fixed seeds.  They stand in for the licensed return series the
analyses were originally run on; this script documents exactly how they were
produced.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from tdofprior.dataio import write_rows_csv
from tdofprior.mathcore import SpdMatrix
from tdofprior.models import CopulaModel, DofSupport, MarginSpec, MvtParams, sample_copula_observations, sample_mvt

OUT = Path(__file__).resolve().parent.parent / "src" / "tdofprior" / "data"

# bivariate t fit of the IBM / index daily log-return pair: posterior medians
MVT_PARAMS = dict(
    mu=np.array([4.33e-4, 8.54e-4]),
    sigma=np.array([[1.54e-4, 3.26e-5], [3.26e-5, 3.11e-5]]),
    nu=4,
    n=2528,
    seed=20240441,
)

# t-copula fit of the SMI / reinsurer daily log-return pair: posterior medians
COPULA_PARAMS = dict(
    mu1=3.17e-4, mu2=-2.14e-4, sigma1=8.13e-3, sigma2=1.18e-2,
    rho=0.69, nu=4, nu1=4, nu2=3,
    n=1769,
    seed=20240437,
)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    support = DofSupport(30)

    p = MvtParams(MVT_PARAMS["mu"], SpdMatrix(MVT_PARAMS["sigma"]), MVT_PARAMS["nu"], support)
    data = sample_mvt(p, MVT_PARAMS["n"], MVT_PARAMS["seed"])
    (OUT / "ibm_index_synthetic.csv").write_text(
        write_rows_csv(["ibm", "index"], [list(row) for row in data]), encoding="utf-8"
    )

    c = CopulaModel(
        nu=COPULA_PARAMS["nu"],
        margins=(
            MarginSpec(COPULA_PARAMS["mu1"], COPULA_PARAMS["sigma1"], COPULA_PARAMS["nu1"]),
            MarginSpec(COPULA_PARAMS["mu2"], COPULA_PARAMS["sigma2"], COPULA_PARAMS["nu2"]),
        ),
        rho=COPULA_PARAMS["rho"],
        support=support,
    )
    data = sample_copula_observations(c, COPULA_PARAMS["n"], COPULA_PARAMS["seed"])
    (OUT / "smi_reinsurer_synthetic.csv").write_text(
        write_rows_csv(["smi", "reinsurer"], [list(row) for row in data]), encoding="utf-8"
    )
    print("fixtures written to", OUT)


if __name__ == "__main__":
    main()
