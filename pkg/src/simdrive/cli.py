"""Command-line tools: simrun, scnlint, record, play, validate.

Exit codes: 0 success/pass, 1 verdict failure (or a failed operation), 2 usage
or setup failure.  No other codes are returned.
"""
from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading
from pathlib import Path

from .bus import UdpConference
from .dmcp import ConfigError, ConfigurationSet
from .drivers import resolve_sut
from .dsl import DslSyntaxError, RouteGraph, Scenario, Situation, parse_file, validate
from .recording import RecordingError, play, record_live
from .serialization import MalformedFrame
from .validators import ValidatorConfigError, build_suite, evaluate_recording
from .virtualization import RunConfiguration, RunReport, Simulation, TraceDumper
from .world import SetupError

EXIT_PASS, EXIT_FAIL, EXIT_SETUP = 0, 1, 2

log = logging.getLogger("simdrive")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage already; keep it from printing to stdout
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_SETUP)


def _fail(message: str, code: int = EXIT_SETUP) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_model(path: str, kind: type):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{path}: no such file")
    try:
        model = parse_file(p)
    except DslSyntaxError as exc:
        raise UsageError("\n".join(f"{path}:{e}" for e in exc.errors)) from None
    except UnicodeDecodeError as exc:
        raise UsageError(f"{path}: not UTF-8 ({exc})") from None
    if not isinstance(model, kind):
        raise UsageError(f"{path}: expected a {kind.__name__.lower()} file")
    return model


def _load_config(path: str) -> ConfigurationSet:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{path}: no such file")
    try:
        return ConfigurationSet.load(p)
    except ConfigError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


# -- simrun -------------------------------------------------------------------

def simrun(scenario: str, situation: str, config: str, suite: str | None, out: str,
           seed: int | None = None, dump_trace: bool = False) -> tuple[int, RunReport | None]:
    scn = _load_model(scenario, Scenario)
    sit = _load_model(situation, Situation)
    cfg = _load_config(config)
    suite_cfg = _load_config(suite) if suite else None
    try:
        if seed is None:
            if "sim.seed" not in cfg:
                raise UsageError("no random seed: pass --seed or set sim.seed")
            seed = cfg.get_int("sim.seed")
        rc = RunConfiguration(
            seed=seed,
            scenario=scn,
            situation=sit,
            duration=cfg.get_float("sim.duration", 60.0),
            step=cfg.get_int("sim.step", 10_000),
            config=cfg,
            suite=suite_cfg,
            stop_when_final=cfg.get("sim.stopwhenfinal", "false").lower() in ("1", "true", "yes"),
        )
        sim = Simulation(rc)
        factory = resolve_sut(cfg.get("sim.sut", "follower"))
        vehicles = sim.external_vehicles
        if not vehicles:
            raise SetupError("the situation has no EXTERNALDRIVER object for the SUT")
        for vid in vehicles:
            sim.add(factory(), vid)
    except (ConfigError, ValueError) as exc:
        raise UsageError(str(exc)) from None

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rc.recording = out_dir / "recording.rec"
    trace_fp = open(out_dir / "trace.csv", "w", encoding="utf-8", newline="\n") if dump_trace else None
    try:
        if trace_fp is not None:
            sim.add(TraceDumper(trace_fp))
        report = sim.run()
    finally:
        if trace_fp is not None:
            trace_fp.close()
    (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    return (EXIT_PASS if report.passed else EXIT_FAIL), report


def simrun_main(argv=None) -> int:
    ap = _Parser(prog="simrun", description="Run a virtual test drive and report validator verdicts.")
    ap.add_argument("--scenario", required=True)
    ap.add_argument("--situation", required=True)
    ap.add_argument("--config", required=True)
    ap.add_argument("--suite", help="validator suite configuration")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--dump-trace", action="store_true", help="write per-slice vehicle poses to trace.csv")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        code, report = simrun(args.scenario, args.situation, args.config, args.suite, args.out, args.seed,
                              args.dump_trace)
    except (UsageError, SetupError, ValidatorConfigError) as exc:
        return _fail(str(exc))
    except OSError as exc:
        return _fail(str(exc))
    except Exception as exc:  # anything unforeseen is still a setup-class failure, never a crash code
        log.exception("simrun failed")
        return _fail(f"{type(exc).__name__}: {exc}")
    sys.stdout.write(report.to_text())
    return code


# -- scnlint ------------------------------------------------------------------

def scnlint_main(argv=None) -> int:
    ap = _Parser(prog="scnlint", description="Parse and validate a scenario or situation file.")
    ap.add_argument("file")
    ap.add_argument("--scenario", help="scenario the situation refers to (enables reference checks)")
    args = ap.parse_args(argv)
    try:
        p = Path(args.file)
        if not p.is_file():
            return _fail(f"{args.file}: no such file")
        try:
            model = parse_file(p)
        except DslSyntaxError as exc:
            for e in exc.errors:
                print(f"{args.file}:{e}")
            return EXIT_FAIL
        scenario = _load_model(args.scenario, Scenario) if args.scenario else None
    except (UsageError, OSError, UnicodeDecodeError) as exc:
        return _fail(str(exc))
    problems = validate(model, scenario)
    for e in problems:
        print(f"{args.file}: {e}")
    return EXIT_FAIL if problems else EXIT_PASS


# -- record / play ------------------------------------------------------------

def record_main(argv=None) -> int:
    ap = _Parser(prog="record", description="Record every container on a live conference.")
    ap.add_argument("--conference", type=int, required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--duration", type=float, help="stop after this many seconds (default: until interrupted)")
    ap.add_argument("--loopback", action="store_true", help="also receive this host's own sends")
    args = ap.parse_args(argv)
    stop = threading.Event()
    if args.duration is not None:
        threading.Timer(args.duration, stop.set).start()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        conference = UdpConference(args.conference, loopback=args.loopback)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    try:
        with conference, open(args.out, "wb") as fp:
            n = record_live(conference, fp, stop)
    except OSError as exc:
        return _fail(f"write failed, recording is partial: {exc}", EXIT_FAIL)
    print(f"recorded {n} containers to {args.out}")
    return EXIT_PASS


def play_main(argv=None) -> int:
    ap = _Parser(prog="play", description="Replay a recording onto a live conference.")
    ap.add_argument("--in", dest="input", required=True)
    ap.add_argument("--conference", type=int, required=True)
    ap.add_argument("--timescale", type=float, default=1.0, help="speed-up factor; 0 = as fast as possible")
    args = ap.parse_args(argv)
    if args.timescale < 0:
        return _fail("--timescale must be >= 0")
    if not Path(args.input).is_file():
        return _fail(f"{args.input}: no such file")
    try:
        conference = UdpConference(args.conference)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    with conference:
        try:
            n = play(args.input, conference.send_frame, args.timescale)
        except (RecordingError, MalformedFrame) as exc:
            return _fail(str(exc), EXIT_FAIL)
    print(f"replayed {n} containers")
    return EXIT_PASS


# -- validate -----------------------------------------------------------------

def validate_main(argv=None) -> int:
    ap = _Parser(prog="validate", description="Evaluate a validator suite offline over a recording.")
    ap.add_argument("--recording", required=True)
    ap.add_argument("--scenario", required=True)
    ap.add_argument("--suite", required=True)
    ap.add_argument("--situation", help="situation whose EXTERNALDRIVER objects are validated")
    args = ap.parse_args(argv)
    try:
        scn = _load_model(args.scenario, Scenario)
        suite = _load_config(args.suite)
        vehicles = []
        if args.situation:
            sit = _load_model(args.situation, Situation)
            vehicles = [o.id for o in sit.external_objects()]
        elif "suite.vehicles" not in suite:
            raise UsageError("pass --situation or set suite.vehicles")
        validators = build_suite(suite, RouteGraph.from_scenario(scn), vehicles)
        if not Path(args.recording).is_file():
            raise UsageError(f"{args.recording}: no such file")
        verdicts = evaluate_recording(args.recording, validators)
    except (UsageError, ValidatorConfigError, OSError) as exc:
        return _fail(str(exc))
    except (RecordingError, MalformedFrame) as exc:
        return _fail(str(exc), EXIT_FAIL)
    for v in verdicts:
        print(v.line())
    return EXIT_PASS if all(v.passed for v in verdicts) else EXIT_FAIL


COMMANDS = {
    "simrun": simrun_main,
    "scnlint": scnlint_main,
    "record": record_main,
    "play": play_main,
    "validate": validate_main,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in COMMANDS:
        print(f"usage: python -m simdrive {{{','.join(COMMANDS)}}} ...", file=sys.stderr)
        return EXIT_SETUP
    return COMMANDS[argv[0]](argv[1:])
