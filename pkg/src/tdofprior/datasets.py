"""Accessors for the bundled synthetic log-return fixtures.

Both data sets are simulated from the published point estimates of the
corresponding reference analyses (see ``scripts/make_fixtures.py``), so the
pipelines can run end to end without the licensed originals.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

__all__ = ["fixture_path", "MVT_FIXTURE", "COPULA_FIXTURE"]

MVT_FIXTURE = "ibm_index_synthetic.csv"
COPULA_FIXTURE = "smi_reinsurer_synthetic.csv"


def fixture_path(name: str) -> Path:
    with resources.as_file(resources.files("tdofprior") / "data" / name) as path:
        return Path(path)
