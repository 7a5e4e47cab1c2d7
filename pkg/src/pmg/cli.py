"""The ``pmg`` command line tool.

Subcommands: preprocess (raw capture -> clip), generate (command schedule ->
trajectory), sysid (response record -> motor parameters), zerocal (pose
samples -> zero-point offsets), serve (streaming service), bench
(generator throughput).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from pmg import __version__, _kernels, clips, generator, ground, sysid, zerocal
from pmg.robot import load_robot_model
from pmg.schema import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmg", description="parameterized motion generation toolkit")
    parser.add_argument("--log-level", default="warning", choices=["debug", "info", "warning", "error"])
    parser.add_argument("--version", action="version", version=f"pmg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="extract one smoothed gait cycle from a raw capture")
    p.add_argument("--raw", required=True, help="raw capture CSV (t, q..., contactL, contactR[, base vel])")
    p.add_argument("--rate", type=float, required=True, help="capture rate in Hz")
    p.add_argument("--channel", required=True, choices=["vx", "vx-", "vy", "vy-", "wz", "wz-"])
    p.add_argument("--name", default=None)
    p.add_argument("--dof", type=int, default=None)
    p.add_argument("--smooth-std", type=float, default=clips.DEFAULT_KERNEL_STD, help="boundary kernel std in frames")
    p.add_argument("--out", default=None, help="write the clip to this JSON file")
    p.add_argument("--into", default=None, help="insert/replace the clip in this clip-set JSON file")

    p = sub.add_parser("generate", help="run a command schedule into a reference trajectory")
    p.add_argument("--robot", required=True)
    p.add_argument("--clips", required=True)
    p.add_argument("--commands", required=True, help="schedule CSV (t, vx, vy, wz, pitch, roll, height)")
    p.add_argument("--out", required=True, help="trajectory CSV")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--no-gco", action="store_true")
    p.add_argument("--no-slew", action="store_true")
    p.add_argument("--slew-rate", type=float, default=generator.DEFAULT_SLEW_RATE)
    p.add_argument("--diagnostics", default=None, help="write slip/correction CSV here")

    p = sub.add_parser("sysid", help="identify motor parameters from a response record")
    p.add_argument("--record", required=True, help="CSV (t, q_cmd, q_meas)")
    p.add_argument("--bounds", required=True, help="JSON {param: [lo, hi]}")
    p.add_argument("--pop", type=int, default=12)
    p.add_argument("--max-evals", type=int, default=6000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau-max", type=float, default=None, help="fixed torque limit Nm")
    p.add_argument("--out", required=True, help="report JSON")

    p = sub.add_parser("zerocal", help="estimate zero-point offsets from recorded pose samples")
    p.add_argument("--samples", required=True, help="pose-sample JSON file")
    p.add_argument("--dof", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--tau", type=float, default=0.02)
    p.add_argument("--eps", type=float, default=0.001)
    p.add_argument("--m-conv", type=int, default=3)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--unobservable", type=int, nargs="*", default=[], help="joint indices not visible to the IMU")
    p.add_argument("--out", required=True, help="report JSON")

    p = sub.add_parser("serve", help="run the streaming service")
    p.add_argument("--robot", required=True)
    p.add_argument("--clips", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--no-gco", action="store_true")
    p.add_argument("--assets", default=None, help="operator console bundle directory")

    p = sub.add_parser("bench", help="measure generator + correction throughput")
    p.add_argument("--robot", required=True)
    p.add_argument("--clips", required=True)
    p.add_argument("--frames", type=int, default=100000)
    p.add_argument("--dt", type=float, default=0.01)

    return parser


def _cmd_preprocess(args) -> int:
    if args.out is None and args.into is None:
        print("preprocess: one of --out/--into is required", file=sys.stderr)
        return 2
    raw = clips.read_raw_capture(args.raw, dof=args.dof)
    name = args.name or Path(args.raw).stem
    channel = args.channel[:-1] if args.channel.endswith("-") else args.channel
    clip = clips.extract_cycle(raw, rate=args.rate, name=name, channel=channel)
    clip = clips.smooth_boundary(clip, kernel_std=args.smooth_std)
    if args.out:
        clips.save_clip(clip, args.out)
        print(f"wrote clip {clip.name!r}: {clip.n_frames} frames, T={clip.T:.3f} s -> {args.out}")
    if args.into:
        target = Path(args.into)
        if target.exists():
            clipset = clips.load_clipset(target)
        else:
            clipset = clips.ClipSet(dynamic={}, static={})
        clipset.dynamic[args.channel] = clip
        clips.save_clipset(clipset, target)
        print(f"updated {target} ({len(clipset.dynamic)} dynamic clips)")
    return 0


def _cmd_generate(args) -> int:
    model = load_robot_model(args.robot)
    clipset = clips.load_clipset(args.clips)
    schedule = generator.read_schedule(args.commands)
    session = generator.GaitSession(
        model,
        clipset,
        dt=args.dt,
        gco=not args.no_gco,
        slew_rate=None if args.no_slew else args.slew_rate,
    )
    frames = generator.generate_schedule(session, schedule, duration=args.duration)
    generator.write_trajectory(frames, args.out)
    print(f"wrote {len(frames)} frames -> {args.out}")
    if args.diagnostics:
        ground.write_diagnostics(frames, args.diagnostics)
        print(f"wrote diagnostics -> {args.diagnostics}")
    return 0


def _cmd_sysid(args) -> int:
    record = sysid.read_response_record(args.record)
    bounds = sysid.read_bounds(args.bounds)
    config = sysid.IdentifyConfig(
        bounds=bounds,
        popsize=args.pop,
        max_evals=args.max_evals,
        seed=args.seed,
        tau_max=args.tau_max if args.tau_max is not None else float("inf"),
    )
    report = sysid.identify_joint(record, config)
    report.save(args.out)
    eta = ", ".join(f"{k}={getattr(report.params, k):.5g}" for k in report.param_names)
    print(f"identified {eta}; loss {report.loss_initial:.4g} -> {report.loss_final:.4g} -> {args.out}")
    for flag in report.flags:
        print(f"flag: {flag}", file=sys.stderr)
    return 0


def _cmd_zerocal(args) -> int:
    samples = zerocal.load_pose_samples(args.samples)
    dof = args.dof if args.dof is not None else len(samples[0].r)
    observable = np.ones(dof, dtype=bool)
    for idx in args.unobservable:
        observable[idx] = False
    state = zerocal.ZeroCalibState(
        z=np.zeros(dof),
        alpha=args.alpha,
        tau=args.tau,
        eps_conv=args.eps,
        m_conv=args.m_conv,
        max_iters=args.max_iters,
        observable=observable,
    )
    report = zerocal.calibrate(lambda z: samples, state)
    report.save(args.out)
    print(
        f"offsets {np.array2string(report.z, precision=4)} after {report.iterations} iterations "
        f"({'converged' if report.converged else 'NOT converged'}) -> {args.out}"
    )
    return 0


def _cmd_serve(args) -> int:
    from pmg import server

    model = load_robot_model(args.robot)
    clipset = clips.load_clipset(args.clips)
    config = server.ServiceConfig(dt=args.dt, gco=not args.no_gco, assets_dir=args.assets)
    print(f"serving on ws://{args.host}:{args.port}/session (dt={args.dt} s)")
    server.serve(model, clipset, config, host=args.host, port=args.port)
    return 0


def _cmd_bench(args) -> int:
    model = load_robot_model(args.robot)
    clipset = clips.load_clipset(args.clips)
    session = generator.GaitSession(model, clipset, dt=args.dt, gco=True, slew_rate=None)
    scale = model.nominal_scales
    cmd = generator.CommandVector(vx=0.6 * scale["vx"], vy=0.4 * scale["vy"], wz=0.3 * scale["wz"])
    _kernels.warmup()
    for _ in range(100):  # warm the JIT and caches before timing
        session.step(cmd)
    start = time.perf_counter()
    for _ in range(args.frames):
        session.step(cmd)
    elapsed = time.perf_counter() - start
    fps = args.frames / elapsed
    print(f"{args.frames} frames in {elapsed:.3f} s: {fps:.0f} frames/s (dof={model.dof}, gco on)")
    return 0


HANDLERS = {
    "preprocess": _cmd_preprocess,
    "generate": _cmd_generate,
    "sysid": _cmd_sysid,
    "zerocal": _cmd_zerocal,
    "serve": _cmd_serve,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return HANDLERS[args.command](args)
    except (OSError, ValueError, KeyError, SchemaError, zerocal.CalibrationError) as exc:
        print(f"pmg {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
