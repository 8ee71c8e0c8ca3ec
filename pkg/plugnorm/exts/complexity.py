import argparse
import dataclasses

from loguru import logger

from plugnorm.constants import METHODS, FileNames
from plugnorm.nn.unet import build_unet
from plugnorm.pipeline import build_plugs, shape_units
from plugnorm.profiler import profile_method, write_profile
from plugnorm.utils.config import ExperimentConfig
from plugnorm.utils.helpers import parse_shape

# HistEqual transforms the input image and carries no transfer unit to account for.
PROFILED_METHODS = [method for method in METHODS if method != "histequal"]


def configure(args: argparse.Namespace, config: ExperimentConfig) -> ExperimentConfig:
    changes = {}
    if args.input is not None:
        parse_shape(args.input)
        changes["input"] = args.input
    if args.no_time:
        changes["time"] = False
    return dataclasses.replace(config, profile=dataclasses.replace(config.profile, **changes))


def profile(ctx) -> None:
    """Count FLOPs and parameters on the full-width network and time the desk-width one."""
    config = ctx.config
    settings = config.profile
    input_shape = settings.input_shape
    count_config = dataclasses.replace(config.unet, base_width=settings.base_width)
    count_config.check_input(input_shape)
    count_net = build_unet(count_config, config.seed)
    count_units = shape_units(count_net, config.plugs.kernel_size)

    timing_net = timing_units = None
    if settings.time:
        timing_net = build_unet(dataclasses.replace(config.unet, base_width=settings.time_base_width), config.seed)
        timing_net.freeze()
        timing_units = shape_units(timing_net, config.plugs.kernel_size)

    methods = PROFILED_METHODS if ctx.args.method == "all" else [ctx.args.method]
    reports = []
    for method in methods:
        reports.append(
            profile_method(
                method,
                count_net,
                input_shape,
                build_plugs(method, count_net, count_units),
                timing_net,
                build_plugs(method, timing_net, timing_units) if timing_net is not None else None,
                settings.warmup,
                settings.reps,
            )
        )

    path = write_profile(ctx.out / FileNames.profile, reports)
    logger.info(f"Wrote complexity report to {path}")


def setup(cli) -> None:
    parser = cli.add_command(
        "profile",
        profile,
        help="FLOPs, parameters and wall time, Transfer vs Whole.",
        default_out="runs/profile",
        configure=configure,
    )
    parser.add_argument("--method", default="s-dinseg", choices=[*PROFILED_METHODS, "all"])
    parser.add_argument("--input", help="Input size HxW (default profile.input, 400x400).")
    parser.add_argument("--no-time", action="store_true", help="Skip wall-time measurement.")
