"""Command-line interface.

Subcommands:

  gen        synthesize a cloud file (uniform, clusters, surface)
  serialize  compute one pattern's codes/order and dump a SER1 file
  group      print the patch plan an attention block would use
  stats      locality and neighborhood-quality report (optionally figures)
  bench      wall-time benchmarks (optionally figures)
  forward    run the full network on a cloud, write FTR1 features

Exit codes: 0 success, 1 data or runtime failure (unparseable file, grid
extent overflow), 2 usage error. Usage problems found while validating a
command's options are aggregated into a single diagnostic. All diagnostics
go to stderr; data goes to files or stdout.
"""

import argparse
import json
import sys

import numpy as np

from . import formats, synth
from .attn import init_block_params, block_forward
from .metrics import (
    MetricsReport,
    bench,
    knn_oracle,
    patch_knn_overlap,
    report_payload,
    serial_locality,
)
from .network import (
    NetworkConfig,
    init_network_params,
    params_from_tensors,
    params_to_tensors,
    unet_forward,
)
from .patch import KINDS, Interaction, pad_and_group
from .serialize import ExtentOverflowError, SerializationConfig, serialize_all


class UsageError(Exception):
    """Bad options or option combinations; maps to exit code 2."""


def _parse_patterns(text):
    patterns = tuple(p.strip() for p in text.split(",") if p.strip())
    return patterns


def _require(problems):
    if problems:
        raise UsageError("; ".join(problems))


def _interaction(args, problems):
    try:
        return Interaction(args.kind, dilation=args.dilation, seed=args.seed)
    except ValueError as bad:
        problems.append(str(bad))
        return None


def _serialization_config(args, problems, patterns=None):
    try:
        return SerializationConfig(
            args.grid_size, args.bits, patterns or _parse_patterns(args.patterns)
        )
    except ValueError as bad:
        problems.append(str(bad))
        return None


def _write_or_print(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        formats.atomic_write_text(path, text)


def _figures_dir(args):
    if getattr(args, "figures", None):
        import os

        os.makedirs(args.figures, exist_ok=True)
        return args.figures
    return None


# -- commands ------------------------------------------------------------

def _cmd_gen(args):
    problems = []
    if args.n < 1:
        problems.append("--n must be >= 1")
    if args.batches < 1:
        problems.append("--batches must be >= 1")
    elif args.batches > args.n:
        problems.append("--batches cannot exceed --n")
    if args.sigma < 0:
        problems.append("--sigma cannot be negative")
    if args.noise < 0:
        problems.append("--noise cannot be negative")
    if args.blobs < 1:
        problems.append("--blobs must be >= 1")
    _require(problems)
    cloud = synth.generate(
        args.kind, args.n, args.seed,
        batches=args.batches, blobs=args.blobs, sigma=args.sigma, noise=args.noise,
    )
    formats.write_cloud(args.output, cloud)
    return 0


def _cmd_serialize(args):
    problems = []
    cfg = _serialization_config(args, problems, patterns=(args.pattern,))
    _require(problems)
    cloud = formats.read_cloud(args.cloud)
    order = serialize_all(cloud, cfg)[0]
    formats.write_order(args.output, order, cfg.bits_per_axis, cfg.grid_size)
    return 0


def _cmd_group(args):
    problems = []
    cfg = _serialization_config(args, problems)
    interaction = _interaction(args, problems)
    if args.patch_size < 1:
        problems.append("--patch-size must be >= 1")
    if args.block < 0:
        problems.append("--block cannot be negative")
    _require(problems)
    cloud = formats.read_cloud(args.cloud)
    orders = serialize_all(cloud, cfg)
    from .patch import plan_for_block, shuffle_permutation

    perm = shuffle_permutation(len(cfg.patterns), interaction.seed)
    _, plan = plan_for_block(orders, args.block, args.patch_size, interaction, perm)
    _write_or_print(args.output, formats.plan_to_text(plan))
    return 0


def _cmd_stats(args):
    problems = []
    cfg = _serialization_config(args, problems)
    overlap_wanted = args.knn > 0
    if overlap_wanted and args.patch_size < 2:
        problems.append("--patch-size must be >= 2 to measure overlap")
    if overlap_wanted and cfg and args.knn >= args.patch_size:
        problems.append(f"--knn {args.knn} must be smaller than --patch-size {args.patch_size}")
    _require(problems)
    cloud = formats.read_cloud(args.cloud)
    orders = serialize_all(cloud, cfg)
    knn = knn_oracle(cloud, args.knn) if overlap_wanted else None

    reports = {}
    for order in orders:
        mean, p95 = serial_locality(cloud, order)
        overlap = float("nan")
        if knn is not None:
            overlap = patch_knn_overlap(pad_and_group(order, args.patch_size), knn, cloud)
        reports[order.pattern] = MetricsReport(order.pattern, mean, p95, overlap)

    payload = {p: report_payload(r) for p, r in reports.items()}
    _write_or_print(args.output, json.dumps(payload, sort_keys=True, indent=2) + "\n")

    directory = _figures_dir(args)
    if directory:
        from . import figures

        written = [figures.locality_figure(
            directory,
            [(p, r.mean_consecutive_distance, r.p95_consecutive_distance)
             for p, r in sorted(reports.items())],
        )]
        if knn is not None:
            written.append(figures.overlap_figure(
                directory, [(p, r.patch_knn_overlap) for p, r in sorted(reports.items())]
            ))
        for path in written:
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _cmd_bench(args):
    problems = []
    routines = tuple(r.strip() for r in args.routines.split(",") if r.strip())
    bad = [r for r in routines if r not in ("serialize", "knn", "attention")]
    if bad:
        problems.append(f"unknown routines: {', '.join(bad)}")
    if not routines:
        problems.append("--routines is empty")
    if args.iterations < 2:
        problems.append("--iterations must be >= 2")
    if args.n < 2:
        problems.append("--n must be >= 2")
    cfg = _serialization_config(args, problems, patterns=(args.pattern,))
    _require(problems)

    records = []
    for size in (args.n, 2 * args.n):
        cloud = synth.uniform(size, args.seed)
        if "serialize" in routines:
            records.append(bench(
                f"serialize-{args.pattern}-n{size}", lambda c=cloud: c,
                lambda c: serialize_all(c, cfg), args.iterations,
            ))
        if "knn" in routines:
            records.append(bench(
                f"knn-k{args.knn}-n{size}", lambda c=cloud: c,
                lambda c: knn_oracle(c, args.knn), args.iterations,
            ))
    if "attention" in routines:
        cloud = synth.uniform(args.n, args.seed)
        orders = serialize_all(cloud, cfg)
        params = init_block_params(32, 2, seed=args.seed)
        feats = np.ones((cloud.n, 32))
        interaction = Interaction("shift-order")
        for s in (args.patch_size, 2 * args.patch_size):
            records.append(bench(
                f"attention-s{s}-n{args.n}", lambda: None,
                lambda _, s=s: block_forward(
                    cloud, feats, orders, 0, interaction, params, s,
                    cfg.grid_size, None,
                ),
                args.iterations,
            ))

    payload = [
        {"label": r.label, "iterations": r.iterations, "mean_s": r.mean_s, "std_s": r.std_s}
        for r in records
    ]
    _write_or_print(args.output, json.dumps(payload, sort_keys=True, indent=2) + "\n")

    directory = _figures_dir(args)
    if directory:
        from . import figures

        path = figures.timing_figure(directory, records)
        print(f"wrote {path}", file=sys.stderr)
    return 0


def _cmd_forward(args):
    problems = []
    interaction = _interaction(args, problems)
    if args.patch_size < 1:
        problems.append("--patch-size must be >= 1")
    net_cfg = None
    if interaction is not None:
        try:
            net_cfg = NetworkConfig(
                grid_size=args.grid_size,
                bits_per_axis=args.bits,
                patterns=_parse_patterns(args.patterns),
                patch_size=args.patch_size,
                interaction=interaction,
                seed=args.seed,
            )
        except ValueError as bad:
            problems.append(str(bad))
    _require(problems)

    cloud = formats.read_cloud(args.cloud)
    if args.params:
        params = params_from_tensors(formats.read_tensors(args.params), net_cfg)
    else:
        params = init_network_params(net_cfg, cloud.channels, args.seed)
    if args.save_params:
        formats.write_tensors(args.save_params, params_to_tensors(params))
    feats = unet_forward(cloud, net_cfg, params, seed=args.seed, checked=args.checked)
    formats.write_features(args.output, feats.astype(np.float32))
    return 0


# -- parser --------------------------------------------------------------

def _add_serialization_options(p, patterns_plural=True):
    p.add_argument("--grid-size", dest="grid_size", type=float, default=0.02,
                   help="edge length of one grid cell in world units")
    p.add_argument("--bits", type=int, default=16, help="bits per axis (1..16)")
    if patterns_plural:
        p.add_argument("--patterns", default="Z,TZ,H,TH",
                       help="comma-separated curve patterns")
    else:
        p.add_argument("--pattern", default="Z", help="curve pattern (Z, TZ, H, TH)")


def _add_interaction_options(p):
    p.add_argument("--kind", default="shuffle-order", choices=KINDS,
                   help="patch interaction strategy")
    p.add_argument("--dilation", type=int, default=2)
    p.add_argument("--patch-size", dest="patch_size", type=int, default=32)


def build_parser():
    top = argparse.ArgumentParser(
        prog="serialpoint",
        description="Point-cloud serialization, patch attention, and metrics.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthesize a point cloud file")
    p.add_argument("kind", choices=synth.KINDS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batches", type=int, default=1)
    p.add_argument("--blobs", type=int, default=4, help="clusters: blob count")
    p.add_argument("--sigma", type=float, default=0.03, help="clusters: blob spread")
    p.add_argument("--noise", type=float, default=0.005, help="surface: jitter")
    p.add_argument("-o", "--output", required=True,
                   help="output file; .xyz writes text, anything else PCB1")
    p.set_defaults(run=_cmd_gen)

    p = sub.add_parser("serialize", help="dump codes and order for one pattern")
    p.add_argument("cloud")
    _add_serialization_options(p, patterns_plural=False)
    p.add_argument("--seed", type=int, default=0,
                   help="accepted on every command; serialize itself is deterministic")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(run=_cmd_serialize)

    p = sub.add_parser("group", help="print a block's patch plan")
    p.add_argument("cloud")
    _add_serialization_options(p)
    _add_interaction_options(p)
    p.add_argument("--block", type=int, default=0, help="attention block index")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(run=_cmd_group)

    p = sub.add_parser("stats", help="locality / neighborhood-quality report")
    p.add_argument("cloud")
    _add_serialization_options(p)
    p.add_argument("--patch-size", dest="patch_size", type=int, default=64)
    p.add_argument("--knn", type=int, default=0,
                   help="k for patch overlap; 0 skips the overlap metric")
    p.add_argument("--seed", type=int, default=0,
                   help="accepted on every command; stats itself is deterministic")
    p.add_argument("--figures", help="directory for rendered charts")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(run=_cmd_stats)

    p = sub.add_parser("bench", help="wall-time benchmarks")
    p.add_argument("--routines", default="serialize",
                   help="comma list from: serialize, knn, attention")
    p.add_argument("--n", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--knn", type=int, default=1)
    p.add_argument("--patch-size", dest="patch_size", type=int, default=64)
    p.add_argument("--iterations", type=int, default=5)
    _add_serialization_options(p, patterns_plural=False)
    p.add_argument("--figures", help="directory for rendered charts")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(run=_cmd_bench)

    p = sub.add_parser("forward", help="run the network, write FTR1 features")
    p.add_argument("cloud")
    _add_serialization_options(p)
    _add_interaction_options(p)
    p.add_argument("--seed", type=int, default=0,
                   help="drives weight init and the shuffle-order schedule")
    p.add_argument("--params", help="PTW1 weights; omitted = seeded weights "
                   "(--seed still picks the shuffle-order schedule)")
    p.add_argument("--save-params", dest="save_params",
                   help="write the weights that were used as PTW1")
    p.add_argument("--checked", action="store_true",
                   help="verify finiteness after every stage")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(run=_cmd_forward)

    return top


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except UsageError as bad:
        print(f"error: {bad}", file=sys.stderr)
        return 2
    except (formats.FormatError, ExtentOverflowError) as bad:
        print(f"error: {bad}", file=sys.stderr)
        return 1
    except OSError as bad:
        print(f"error: {bad}", file=sys.stderr)
        return 1
    except ValueError as bad:
        print(f"error: {bad}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
