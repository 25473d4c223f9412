"""Command line driver: ``fullduplex <command> [options]``.

Commands
--------
run <campaign.json>   campaign document (see README)
sweep-si              SE gains against sigma_SI^2
cdf                   per-topology gain CDFs
cci-sweep             SE against the uplink-to-downlink user distance
cci-blind             CCI-aware against CCI-blind designs
converge              per-iteration traces of both algorithms
timing                wall-clock over N_T and K_D ladders
replay <out dir>      regenerate a finished campaign and compare its records
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .channel_model import ScenarioConfig
from .convex_core import kernels
from .experiments import Campaign, load_scenario, replay, run_campaign, write_outputs

log = logging.getLogger("fullduplex")

DEFAULTS = {
    "sweep-si": dict(scenario="pico_fixed_2x2", values=[-130, -110, -100, -90, -80, -70, -55],
                     trials=50),
    "cdf": dict(scenario="pico_random_drop", values=[], trials=10, topologies=100),
    "cci-sweep": dict(scenario="cci_pair", values=[20, 40, 60, 80, 100, 120, 150, 180],
                      trials=10),
    "cci-blind": dict(scenario="pico_random_drop", values=[], trials=5, topologies=100),
    "converge": dict(scenario="iid_benchmark", values=[], trials=1, topologies=1),
    "timing": dict(scenario="pico_random_drop", values=[2, 4, 6, 8, None, 2, 4, 6], trials=3),
}


def _common(p, kind):
    d = DEFAULTS[kind]
    p.add_argument("--scenario", default=d["scenario"],
                   help="shipped scenario name or path to a scenario JSON (default: %(default)s)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--trials", type=int, default=d["trials"], help="channel trials per point")
    p.add_argument("--out", default=None, help="output directory (default: results/<command>)")
    p.add_argument("--algo", choices=["1", "2", "both", "race"], default="1")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a scenario field, e.g. --set sigma_si2_db=-90")
    if kind in ("sweep-si", "cci-sweep"):
        p.add_argument("--values", type=float, nargs="+", default=d["values"],
                       help="sweep points (dB for sweep-si, metres for cci-sweep)")
    if kind in ("cdf", "cci-blind", "converge"):
        p.add_argument("--topologies", type=int, default=d["topologies"],
                       help="random topologies (seeds for converge)")
    if kind == "timing":
        p.add_argument("--n-tx", type=int, nargs="+", default=[2, 4, 6, 8])
        p.add_argument("--k-dl", type=int, nargs="+", default=[2, 4, 6])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fullduplex", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a campaign JSON document")
    p.add_argument("campaign")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--algo", choices=["1", "2", "both", "race"], default=None)
    p.add_argument("--jobs", type=int, default=1)
    for kind in DEFAULTS:
        _common(sub.add_parser(kind, help=f"{kind} campaign"), kind)
    p = sub.add_parser("replay", help="regenerate a campaign from its manifest")
    p.add_argument("out")
    p.add_argument("--jobs", type=int, default=1)
    return ap


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _base(args) -> ScenarioConfig:
    base = load_scenario(args.scenario)
    if args.set:
        doc = base.to_dict()
        for item in args.set:
            key, _, val = item.partition("=")
            for unit in ("_dbm", "_db"):
                if key.endswith(unit):
                    doc.pop(key[: -len(unit)], None)
            doc[key] = _parse_value(val)
        base = ScenarioConfig.from_dict(doc)
    if args.seed is not None:
        base = base.replace(seed=args.seed)
    return base


def _campaign(args) -> Campaign:
    kind = args.command
    base = _base(args)
    if kind == "timing":
        values = tuple(args.n_tx) + (None,) + tuple(args.k_dl)
        return Campaign(kind, base, values=values, trials=args.trials, algo="both")
    values = tuple(getattr(args, "values", ()) or ())
    return Campaign(kind, base, values=values, trials=args.trials,
                    topologies=getattr(args, "topologies", 1),
                    algo="both" if kind == "converge" else args.algo)


def _print_rows(rows, limit=40):
    if not rows:
        return
    keys = [k for k in rows[0] if k not in ("config_hash", "seed")]
    print(",".join(keys))
    for r in rows[:limit]:
        print(",".join(f"{r[k]:.6g}" if isinstance(r[k], float) else str(r[k]) for k in keys))
    if len(rows) > limit:
        print(f"... {len(rows) - limit} more rows")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    log.info("kernel backend: %s", kernels.BACKEND)
    if args.command == "replay":
        res = replay(args.out, jobs=args.jobs)
        print(json.dumps(res, indent=2))
        return 0 if res["identical"] else 1
    if args.command == "run":
        doc = json.loads(Path(args.campaign).read_text())
        for key in ("trials", "algo"):
            if getattr(args, key) is not None:
                doc[key] = getattr(args, key)
        if args.seed is not None:
            doc["seed"] = args.seed
        campaign = Campaign.from_dict(doc)
    else:
        campaign = _campaign(args)
    out = Path(args.out or Path("results") / (campaign.name or campaign.kind))
    result = run_campaign(campaign, jobs=args.jobs)
    paths = write_outputs(result, out)
    _print_rows(result.rows)
    print(f"wrote {', '.join(sorted(p.name for p in paths.values()))} to {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
