import os
from typing import NamedTuple

ENVIRONMENT = os.getenv("ENVIRONMENT")
if ENVIRONMENT is None:
    from dotenv import load_dotenv

    load_dotenv(dotenv_path=f"{os.getcwd()}/.env")

# Environment variables
THREADS = max(1, int(os.getenv("PLUGNORM_THREADS", os.cpu_count() or 1)))
LOG_LEVEL = os.getenv("PLUGNORM_LOG_LEVEL", "INFO").upper()

# Stabilizer shared by every normalization and statistic.
EPS = 1e-5

PLUG_SITES = ("bottleneck", "skip1", "skip2", "skip3")
SINGLE_SITES = ("bottleneck",)

METHODS = [
    "baseline",
    "histequal",
    "s-adainseg",
    "m-adainseg",
    "s-dinseg",
    "m-dinseg",
]  # Row labels of the method comparison table.

METRIC_NAMES = ["dice", "jac", "hdb", "asd", "pre", "rec"]


class ExitCodes(NamedTuple):
    success = 0
    failure = 1
    config_error = 2
    invariant_violation = 3
    io_error = 4


class FileNames(NamedTuple):
    manifest = "manifest.tsv"
    checkpoint_manifest = "manifest.yaml"
    resolved_config = "resolved_config.yaml"
    run_log = "run.log"
    loss_curve = "loss_curve.csv"
    heldout_curve = "heldout.csv"
    report = "report.csv"
    profile = "profile.csv"
