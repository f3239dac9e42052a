"""Command-line entry point: ``decoup caps|verify|ratio|sweep|plot``.

Every option can also come from an INI file (``--config FILE``), one
section per subcommand with the long option names as keys; flags given on
the command line win.  Outputs land in ``<root>/<config-hash>/`` where the
root is ``--out``, else ``$DECOUP_RESULTS_DIR``, else ``./results``.

Exit codes: 0 success, 1 a check failed, 2 bad configuration, 3 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from pathlib import Path

from .caps import KINDS, cap_family, dumps_family, family_to_csv
from .checks import CSV_HEADER, run_verify
from .errors import DecoupError
from .harness import ENSEMBLE_KINDS, Ensemble, SweepConfig, decoupling_ratio, sweep
from .results import RunDirectory, canonical_json, results_root

log = logging.getLogger("decoup")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _float_list(text: str) -> list[float]:
    out = []
    for v in str(text).replace(" ", "").split(","):
        if not v:
            continue
        if "/" in v:
            a, b = v.split("/")
            out.append(float(a) / float(b))
        else:
            out.append(float(v))
    return out


def _str_list(text: str) -> list[str]:
    return [v for v in str(text).replace(" ", "").split(",") if v]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


# name -> (type, default, help); "flag" marks a store_true option
OPTIONS = {
    "caps": {
        "R": (int, 256, "scale (R^(1/(2m)) must be a power of 2)"),
        "m": (int, 2, "half-degree of the phase"),
        "d": (int, 3, "frequency dimension"),
        "kind": (str, "f4", f"family kind, one of {', '.join(KINDS)}"),
        "uniform-axes": (_int_list, None, "0-based uniform axes for f4mixed"),
    },
    "verify": {
        "R": (int, 256, "family scale"),
        "K": (int, 16, "intermediate scale"),
        "m": (int, 2, "half-degree"),
        "tol": (float, 1e-9, "relative tolerance of the conjugation identity"),
        "samples": (int, 100, "space points per conjugation check"),
        "caps-per-kind": (int, 20, "random caps per family kind"),
        "seed": (int, 0, "random seed"),
        "paper-printed-map": ("flag", False, "use the inverted diagonal variant of the map"),
    },
    "ratio": {
        "R": (int, 256, "scale"),
        "p": (_float_list, [10 / 3], "exponent (fractions like 10/3 allowed)"),
        "m": (int, 2, "half-degree"),
        "d": (int, 3, "frequency dimension"),
        "kind": (str, "f4", "family kind"),
        "ensemble": (str, "random_phase", f"one of {', '.join(ENSEMBLE_KINDS)}"),
        "lattice-n": (int, 4, "lattice spacing 1/N for atomic_lattice"),
        "seed": (int, 0, "random seed"),
        "budget": (int, 20_000, "Monte Carlo points per side"),
        "rhs-weight": (str, "paper", "indicator or paper"),
        "workers": (int, 1, "threads (results do not depend on it)"),
    },
    "sweep": {
        "R": (_int_list, [16, 256, 4096], "comma-separated scales"),
        "p": (_float_list, [10 / 3], "comma-separated exponents"),
        "m": (int, 2, "half-degree"),
        "d": (int, 3, "frequency dimension"),
        "kind": (str, "f4", "family kind"),
        "ensembles": (_str_list, ["random_phase"], "comma-separated ensemble kinds"),
        "lattice-n": (int, 4, "lattice spacing 1/N for atomic_lattice"),
        "seeds": (_int_list, [0, 1, 2], "comma-separated seeds"),
        "budget": (int, 20_000, "Monte Carlo points per side"),
        "rhs-weight": (str, "paper", "indicator or paper"),
        "workers": (int, 1, "threads (results do not depend on it)"),
        "force": ("flag", False, "recompute cells already on disk"),
    },
    "plot": {
        "run": (str, None, "result directory (or its config hash under the root)"),
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decoup", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI file; flags override it")
        sp.add_argument("--out", help="results root directory")
        for opt, (typ, _default, hlp) in opts.items():
            if typ == "flag":
                sp.add_argument(f"--{opt}", action="store_true", default=None, help=hlp)
            else:
                sp.add_argument(f"--{opt}", type=typ, default=None, help=hlp)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the INI section, then explicit flags."""
    opts = OPTIONS[args.command]
    values = {opt: default for opt, (_t, default, _h) in opts.items()}
    if args.config:
        ini = configparser.ConfigParser()
        ini.optionxform = str  # keep "R" and "K" case-sensitive
        try:
            with open(args.config) as fh:
                ini.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if ini.has_section(args.command):
            for key, raw in ini.items(args.command):
                opt = key.replace("_", "-")
                if opt not in opts:
                    raise ConfigError(f"unknown key {key!r} in [{args.command}]")
                typ = opts[opt][0]
                try:
                    values[opt] = _bool(raw) if typ == "flag" else typ(raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    for opt in opts:
        given = getattr(args, opt.replace("-", "_"))
        if given is not None:
            values[opt] = given
    return values


def _root(args) -> Path:
    return results_root(args.out)


def cmd_caps(args, cfg: dict) -> int:
    if cfg["kind"] not in KINDS:
        raise ConfigError(f"unknown kind {cfg['kind']!r}")
    fam = cap_family(cfg["R"], cfg["m"], cfg["d"], cfg["kind"], cfg["uniform-axes"])
    from .plotting import plot_family
    run = RunDirectory(_root(args), {"command": "caps", **cfg}).prepare()
    (run.path / "caps.json").write_text(dumps_family(fam) + "\n")
    (run.path / "caps.csv").write_text(family_to_csv(fam))
    plot_family(fam, run.path / "caps.svg")
    print(f"{fam.family_id}: {len(fam)} caps, axis counts {list(fam.shape)} -> {run.path}")
    return EXIT_OK


def cmd_verify(args, cfg: dict) -> int:
    results = run_verify(cfg["R"], cfg["K"], cfg["m"], cfg["tol"], cfg["samples"],
                         cfg["caps-per-kind"], cfg["seed"], bool(cfg["paper-printed-map"]))
    run = RunDirectory(_root(args), {"command": "verify", **cfg}).prepare()
    with (run.path / "verify.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in results:
            writer.writerow(r.row())
    failed = [r for r in results if not r.passed]
    if failed:
        with (run.path / "failures.json").open("w") as fh:
            json.dump([{"check": r.check, "subject": r.subject, "value": r.value, **r.detail}
                       for r in failed], fh, indent=1)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in results:
        writer.writerow(r.row())
    print(f"# {len(results) - len(failed)}/{len(results)} checks passed -> {run.path}")
    if failed:
        worst = max((r for r in failed if r.check == "conjugation"), key=lambda r: r.value,
                    default=failed[0])
        print(f"# FAIL: {len(failed)} checks; worst {worst.check} {worst.subject} "
              f"value={worst.value!r} threshold {worst.threshold}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _ensemble(kind: str, n: int) -> Ensemble:
    if kind not in ENSEMBLE_KINDS:
        raise ConfigError(f"unknown ensemble {kind!r}; expected one of {ENSEMBLE_KINDS}")
    return Ensemble(kind, N=n)


def _check_weight(w: str) -> None:
    if w not in ("paper", "indicator"):
        raise ConfigError(f"rhs-weight must be 'paper' or 'indicator', not {w!r}")


def cmd_ratio(args, cfg: dict) -> int:
    _check_weight(cfg["rhs-weight"])
    fam = cap_family(cfg["R"], cfg["m"], cfg["d"], cfg["kind"])
    ens = _ensemble(cfg["ensemble"], cfg["lattice-n"]).with_seed(cfg["seed"])
    key = {k: v for k, v in cfg.items() if k != "workers"}
    run = RunDirectory(_root(args), {"command": "ratio", **key}).prepare()
    records = []
    for p in cfg["p"]:
        rec = decoupling_ratio(ens, p, cfg["R"], fam, cfg["rhs-weight"], cfg["budget"],
                               cfg["seed"], workers=cfg["workers"])
        records.append(rec)
        print(canonical_json(rec.to_json()))
    run.write_records(records)
    run.write_summary(records, [], [])
    return EXIT_OK


def cmd_sweep(args, cfg: dict) -> int:
    _check_weight(cfg["rhs-weight"])
    ensembles = [_ensemble(k, cfg["lattice-n"]) for k in cfg["ensembles"]]
    conf = SweepConfig(R_list=cfg["R"], p_list=cfg["p"], d=cfg["d"], m=cfg["m"],
                       kind=cfg["kind"], ensembles=ensembles, budget=cfg["budget"],
                       seeds=cfg["seeds"], rhs_weight=cfg["rhs-weight"], workers=cfg["workers"])
    for R in set(conf.R_list):  # fail fast on bad scales
        cap_family(R, conf.m, 1)
    run = RunDirectory(_root(args), {"command": "sweep", **conf.to_json()}).prepare()
    done = {} if cfg["force"] else run.completed()
    if cfg["force"] and run.records_file.exists():
        run.records_file.unlink()
    result = sweep(conf, sink=run.append_record, done=done)
    run.write_records(result.records)
    run.write_summary(result.records, result.fits, result.failures)
    from .plotting import plot_sweep
    plot_sweep(result.records, result.fits, run.path / "sweep.svg")
    if result.skipped:
        print(f"skipped {result.skipped} cells already in {run.records_file}")
    for fit in result.fits:
        print(f"p={fit.p:.4g} {fit.ensemble}: eps_hat={fit.epsilon:.4f} "
              f"medians={[round(v, 4) for v in fit.medians]}")
    for msg in result.failures:
        print(f"failed: {msg}", file=sys.stderr)
    print(f"results -> {run.path}")
    return EXIT_OK


def cmd_plot(args, cfg: dict) -> int:
    if not cfg["run"]:
        raise ConfigError("--run is required")
    path = Path(cfg["run"])
    if not path.exists():
        path = _root(args) / cfg["run"]
    if not path.is_dir():
        raise ConfigError(f"no result directory {cfg['run']!r}")
    from .plotting import plot_family, plot_sweep
    made = []
    if (path / "caps.json").exists():
        from .caps import family_from_json
        fam = family_from_json(json.loads((path / "caps.json").read_text()))
        plot_family(fam, path / "caps.svg")
        made.append("caps.svg")
    if (path / "records.jsonl").exists():
        from .harness import GrowthFit
        recs = RunDirectory.at(path).load_records()
        fits = []
        if (path / "summary.json").exists():
            fits = [GrowthFit(**f) for f in json.loads((path / "summary.json").read_text())["fits"]]
        plot_sweep(recs, fits, path / "sweep.svg")
        made.append("sweep.svg")
    if not made:
        raise ConfigError(f"nothing to plot in {path}")
    print(f"wrote {', '.join(made)} in {path}")
    return EXIT_OK


COMMANDS = {"caps": cmd_caps, "verify": cmd_verify, "ratio": cmd_ratio, "sweep": cmd_sweep,
            "plot": cmd_plot}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, DecoupError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
