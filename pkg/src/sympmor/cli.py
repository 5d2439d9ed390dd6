"""Command line interface.

Verbs: offline (reference solve + reduction, writes the package and
offline CSV files), online (replays the reduced systems from a
package), full (both stages plus all configured outputs), check
(validate a config and print a summary).

Exit codes: 0 success, 2 configuration or contract violation,
3 numerical failure, 4 I/O error, 5 package format error,
1 unexpected error.
"""

import argparse
import os
import sys
import traceback

from .config import load_raw, merge_overrides, validate_config
from .errors import (ConfigError, ContractError, NumericalFailure,
                     PackageFormatError)
from .experiment import (emit_offline_csv, emit_online_csv, offline_package,
                         restore_offline, run_full, run_offline, run_online)
from .package_io import load_package, save_package


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sympmor",
        description="Symplectic model reduction experiments: offline basis "
                    "construction, online reduced runs, delimited reports.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_common(p, needs_config):
        if needs_config:
            p.add_argument("-c", "--config", required=False, default=None,
                           help="YAML config file (omit to use built-in defaults)")
        p.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                       dest="overrides",
                       help="override a config entry, e.g. integrator.dt=0.005 "
                            "or reductions.0.k=50")
        p.add_argument("-o", "--output-dir", default=None,
                       help="output directory (overrides output.directory)")
        p.add_argument("--no-figures", action="store_true",
                       help="skip PNG rendering (CSV output is unaffected)")

    p_off = sub.add_parser("offline", help="reference solve and reduction; "
                                           "writes the offline package")
    add_common(p_off, True)
    p_on = sub.add_parser("online", help="run the reduced systems from a package")
    p_on.add_argument("-p", "--package", required=True, help="offline package file")
    add_common(p_on, False)
    p_full = sub.add_parser("full", help="offline and online stages in one go")
    add_common(p_full, True)
    p_check = sub.add_parser("check", help="validate a config file")
    p_check.add_argument("-c", "--config", required=False, default=None)
    p_check.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                         dest="overrides")
    return parser


def _load_config(args):
    raw = load_raw(args.config) if args.config else {}
    raw = merge_overrides(raw, args.overrides)
    if getattr(args, "no_figures", False):
        raw.setdefault("output", {})["figures"] = False
    return validate_config(raw)


def _outdir(cfg, args):
    return args.output_dir if args.output_dir else cfg["output"]["directory"]


def _cmd_check(args):
    cfg = _load_config(args)
    names = ", ".join(r["name"] for r in cfg["reductions"])
    print(f"config OK: model={cfg['model']['kind']} "
          f"scheme={cfg['integrator']['scheme']} "
          f"dt={cfg['integrator']['dt']} t_final={cfg['integrator']['t_final']} "
          f"variants=[{names}]")
    return 0


def _cmd_offline(args):
    cfg = _load_config(args)
    outdir = _outdir(cfg, args)
    offline = run_offline(cfg)
    os.makedirs(outdir, exist_ok=True)
    pkg_path = os.path.join(outdir, "offline.spmr")
    save_package(offline_package(offline), pkg_path)
    print(f"wrote {pkg_path}")
    if cfg["output"]["csv"]:
        for path in emit_offline_csv(offline, outdir):
            print(f"wrote {path}")
    return 0


def _cmd_online(args):
    pkg = load_package(args.package)
    raw = pkg.metadata.get("config")
    raw = merge_overrides(raw, args.overrides)
    if getattr(args, "no_figures", False):
        raw.setdefault("output", {})["figures"] = False
    cfg = validate_config(raw)
    pkg.metadata["config"] = cfg
    offline = restore_offline(pkg)
    outdir = _outdir(cfg, args)
    online = run_online(offline)
    for msg in online.messages:
        print(f"note: {msg}", file=sys.stderr)
    if cfg["output"]["csv"]:
        for path in emit_online_csv(online, outdir):
            print(f"wrote {path}")
    if cfg["output"]["figures"]:
        from .figures import render_figures
        for path in render_figures(offline, online, outdir):
            print(f"wrote {path}")
    return 0


def _cmd_full(args):
    cfg = _load_config(args)
    outdir = _outdir(cfg, args)
    offline, online, written = run_full(cfg, outdir)
    for msg in online.messages:
        print(f"note: {msg}", file=sys.stderr)
    for path in written:
        print(f"wrote {path}")
    return 0


_COMMANDS = {"check": _cmd_check, "offline": _cmd_offline,
             "online": _cmd_online, "full": _cmd_full}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except (ConfigError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except PackageFormatError as exc:
        print(f"package error: {exc}", file=sys.stderr)
        return 5
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
