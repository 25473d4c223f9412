"""Monte Carlo campaigns comparing full-duplex designs with the half-duplex baseline.

Every campaign is split into independent tasks (one per channel trial,
or per topology and trial), mapped over a process pool and reduced in
task order, so ``--jobs`` never changes the output.  Random streams are
keyed by ``make_rng(seed, STREAM, topology, trial, ...)``; sweep points
of one trial share their small-scale fading (common random numbers).

CSV schema (``sweep_si.csv``, ``cci_sweep.csv``, ``cdf_topologies.csv``,
``cci_blind.csv``); SEs in bits/s/Hz, gains in percent:

``point, value, label, n``
    sweep index, swept value (dB, metres or topology id), FD design label
    (``alg1``, ``alg2``, ``race``) and number of trials averaged.
``fd_dl, fd_ul, fd_total``
    mean extracted-beamformer SE of the full-duplex design.
``hd_dl, hd_ul, hd_total``
    mean half-duplex SE after the 50 % time share.
``gain_{dl,ul,total}_pct``
    mean over trials of ``100 (FD - HD) / HD``.
``gain_{dl,ul,total}_pct_of_means``
    ``100 (mean FD - mean HD) / mean HD``.
``config_hash, seed``
    identify the base configuration for regeneration.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from scipy import stats

from . import __version__
from . import algorithms, baselines
from . import rate_model as rm
from .channel_model import (ScenarioConfig, Topology, as_jsonable, db_to_lin, draw_topology,
                            fixed_topology, generate, make_rng)
from .rate_model import Design

__all__ = ["Campaign", "CampaignResult", "KINDS", "run_campaign", "sweep_sigma_si",
           "topology_cdf", "sweep_cci_distance", "compare_cci_blind", "convergence_report",
           "timing_report", "cci_geometry", "trend_test", "empirical_cdf", "write_outputs",
           "replay", "load_scenario", "scenario_path", "records_digest", "strip_timing"]

# random stream tags
TOPO, CHAN, INIT, EXTRACT, HD = 1, 2, 3, 4, 5

LABELS = {"1": ("alg1",), "2": ("alg2",), "both": ("alg1", "alg2"),
          "race": ("alg1", "alg2", "race")}
KINDS = ("sweep-si", "cdf", "cci-sweep", "cci-blind", "converge", "timing")

SCENARIO_DIR = Path(__file__).with_name("scenarios")


def scenario_path(name: str) -> Path:
    p = Path(name)
    if p.suffix == ".json" and p.exists():
        return p
    cand = SCENARIO_DIR / f"{name}.json"
    if not cand.exists():
        known = sorted(q.stem for q in SCENARIO_DIR.glob("*.json"))
        raise FileNotFoundError(f"unknown scenario {name!r}; shipped: {known}")
    return cand


def load_scenario(name: str) -> ScenarioConfig:
    """A shipped scenario by name, or any scenario JSON by path."""
    return ScenarioConfig.from_json(scenario_path(name))


@dataclass(frozen=True)
class Campaign:
    """One experiment: a base scenario, a sweep axis and a trial budget.

    ``values`` holds sigma_SI^2 in dB for ``sweep-si``, d_CCI in metres for
    ``cci-sweep``, N_T then K_D ladders for ``timing`` (see
    :func:`timing_report`) and is ignored by ``cdf`` / ``cci-blind`` /
    ``converge``, which iterate over ``topologies`` random drops (or seeds).
    """

    kind: str
    base: ScenarioConfig
    values: tuple = ()
    trials: int = 50
    topologies: int = 1
    algo: str = "1"
    hd_algo: int = 2
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown campaign kind {self.kind!r}")
        if self.trials < 1 or self.topologies < 1:
            raise ValueError("trials and topologies must be >= 1")
        if self.kind in ("sweep-si", "cci-sweep", "timing") and not self.values:
            raise ValueError(f"{self.kind} needs a nonempty sweep")
        if str(self.algo) not in LABELS:
            raise ValueError(f"algo must be one of {sorted(LABELS)}")
        object.__setattr__(self, "algo", str(self.algo))
        object.__setattr__(self, "values", tuple(self.values))

    @property
    def seed(self) -> int:
        return self.base.seed

    @property
    def labels(self):
        return LABELS[self.algo]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "config": self.base.to_dict(), "values": list(self.values),
                "trials": self.trials, "topologies": self.topologies, "algo": self.algo,
                "hd_algo": self.hd_algo, "name": self.name}

    @classmethod
    def from_dict(cls, doc: dict) -> "Campaign":
        doc = dict(doc)
        if "scenario" in doc:
            base = _apply_overrides(load_scenario(doc.pop("scenario")), doc.pop("overrides", {}))
        else:
            base = ScenarioConfig.from_dict(doc.pop("config"))
        if "seed" in doc:
            base = base.replace(seed=int(doc.pop("seed")))
        return cls(base=base, **doc)

    @property
    def config_hash(self) -> str:
        return self.base.config_hash()

    def campaign_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _apply_overrides(base: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    if not overrides:
        return base
    merged = base.to_dict()
    for key in ("p_bs_dbm", "q_bar_dbm", "sigma_si2_db"):
        if key in overrides:
            merged.pop(key[: key.rfind("_")], None)
    merged.update(overrides)
    return ScenarioConfig.from_dict(merged)


@dataclass
class CampaignResult:
    campaign: Campaign
    rows: List[dict]
    records: List[dict]
    tables: Dict[str, List[dict]] = field(default_factory=dict)
    seconds: float = 0.0

    def column(self, key, label=None):
        return np.array([r[key] for r in self.rows if label is None or r["label"] == label])


# per-realization solving --------------------------------------------------

def _solve_fd(config: ScenarioConfig, channels, labels, topo: int, trial: int,
              init_channels=None) -> Dict[str, algorithms.Solution]:
    """Run the requested designs from one shared random start."""
    init = algorithms.initialize(config, channels if init_channels is None else init_channels,
                                 make_rng(config.seed, INIT, topo, trial))
    out = {}
    for lab in labels:
        if lab == "race":
            continue
        algo = lab[-1]
        rng = make_rng(config.seed, EXTRACT, topo, trial, int(algo))
        out[lab] = algorithms.run(algo, config, channels, init=init, rng=rng)
    if "race" in labels:
        # the better design is judged on the extracted beamformers
        best = max(("alg1", "alg2"), key=lambda k: _se(out[k])[2])
        out["race"] = out[best]
    return out


def _se(sol: algorithms.Solution):
    if sol.status == "error" or sol.extraction is None:
        return (math.nan, math.nan, math.nan)
    r = sol.extraction.rates
    return (r.total_dl, r.total_ul, r.total)


def _hd(config, channels, topo, trial, hd_algo):
    return baselines.half_duplex(config, channels, make_rng(config.seed, HD, topo, trial), hd_algo)


def _fd_record(sol, lab, winner=None) -> dict:
    rec = sol.to_record()
    rec.pop("design", None)
    rec["label"] = lab
    if winner is not None:
        rec["winner"] = winner
    return rec


def _record(campaign_kind, config, point, value, topo, trial, lab, sol, hd, winner=None, **extra):
    dl, ul, tot = _se(sol)
    rec = {"campaign": campaign_kind, "config_hash": config.config_hash(), "seed": config.seed,
           "point": point, "value": value, "topology": topo, "trial": trial, "label": lab,
           "fd_dl": dl, "fd_ul": ul, "fd_total": tot,
           "hd": None if hd is None else hd.as_dict(),
           "run": _fd_record(sol, lab, winner)}
    rec.update(extra)
    return rec


def _records_for(kind, cfg, point, value, topo, trial, sols, hd, **extra):
    out = []
    for lab, sol in sols.items():
        winner = None
        if lab == "race":
            winner = next(k for k in ("alg1", "alg2") if sols[k] is sol)
        out.append(_record(kind, cfg, point, value, topo, trial, lab, sol, hd, winner, **extra))
    return out


# tasks (module level so they pickle) --------------------------------------

def _topology_for(cfg: ScenarioConfig, topo: int) -> Optional[Topology]:
    if cfg.channel_mode == "iid":
        return None
    return fixed_topology(cfg) or draw_topology(cfg, make_rng(cfg.seed, TOPO, topo))


def _task_sweep_si(args):
    campaign, trial = args
    base = campaign.base
    topo = _topology_for(base, 0)
    recs = []
    ch0 = generate(base, make_rng(base.seed, CHAN, 0, trial), topo)
    hd = _hd(base, ch0, 0, trial, campaign.hd_algo)
    for p, s_db in enumerate(campaign.values):
        cfg = base.replace(sigma_si2=float(db_to_lin(s_db)))
        ch = generate(cfg, make_rng(base.seed, CHAN, 0, trial), topo)
        sols = _solve_fd(cfg, ch, campaign.labels, 0, trial)
        recs += _records_for(campaign.kind, base, p, float(s_db), 0, trial, sols, hd)
    return recs


def _task_cdf(args):
    campaign, topo_id, trial = args
    cfg = campaign.base
    topo = _topology_for(cfg, topo_id)
    ch = generate(cfg, make_rng(cfg.seed, CHAN, topo_id, trial), topo)
    hd = _hd(cfg, ch, topo_id, trial, campaign.hd_algo)
    sols = _solve_fd(cfg, ch, campaign.labels, topo_id, trial)
    return _records_for(campaign.kind, cfg, topo_id, float(topo_id), topo_id, trial, sols, hd)


def cci_geometry(d_cci_m: float, radius_km: float):
    """Positions (km) with D1 at distance r on the x axis and U1 on the 0.85 r circle.

    Returns ``(dl_positions, ul_positions)`` whose user separation is
    ``d_cci_m`` metres; valid for ``0.15 r <= d_cci <= 1.85 r``.
    """
    r, ru = radius_km, 0.85 * radius_km
    d = d_cci_m / 1000.0
    if not (r - ru - 1e-12 <= d <= r + ru + 1e-12):
        raise ValueError(f"d_CCI must lie in [{1e3 * (r - ru):.6g}, {1e3 * (r + ru):.6g}] m")
    c = np.clip((r * r + ru * ru - d * d) / (2.0 * r * ru), -1.0, 1.0)
    phi = float(np.arccos(c))
    return ((r, 0.0),), ((ru * np.cos(phi), ru * np.sin(phi)),)


def _task_cci_sweep(args):
    campaign, trial = args
    base = campaign.base
    recs = []
    hd = None
    for p, d_m in enumerate(campaign.values):
        dl, ul = cci_geometry(d_m, base.cell_radius_km)
        cfg = base.replace(dl_positions=dl, ul_positions=ul)
        ch = generate(cfg, make_rng(base.seed, CHAN, 0, trial))
        if hd is None:
            # user-to-BS distances do not move, so one baseline serves the sweep
            hd = _hd(base, ch, 0, trial, campaign.hd_algo)
        sols = _solve_fd(cfg, ch, campaign.labels, 0, trial)
        recs += _records_for(campaign.kind, base, p, float(d_m), 0, trial, sols, hd)
    return recs


def _evaluate_on(channels, sol: algorithms.Solution):
    relaxed = rm.rates(channels, sol.design)
    if sol.beamformers is None:
        return relaxed, relaxed
    return relaxed, rm.rates(channels, Design.from_beamformers(sol.beamformers, sol.design.q_ul))


def _task_cci_blind(args):
    campaign, topo_id, trial = args
    cfg = campaign.base
    topo = _topology_for(cfg, topo_id)
    ch = generate(cfg, make_rng(cfg.seed, CHAN, topo_id, trial), topo)
    aware = _solve_fd(cfg, ch, campaign.labels, topo_id, trial)
    blind = _solve_fd(cfg, ch.without_cci(), campaign.labels, topo_id, trial, init_channels=ch)
    recs = []
    for lab in aware:
        relaxed, extracted = _evaluate_on(ch, blind[lab])
        rec = _record(campaign.kind, cfg, topo_id, float(topo_id), topo_id, trial, lab,
                      aware[lab], None)
        rec.update({"blind_dl": extracted.total_dl, "blind_ul": extracted.total_ul,
                    "blind_total": extracted.total, "blind_relaxed_total": relaxed.total,
                    "blind_run": _fd_record(blind[lab], lab)})
        recs.append(rec)
    return recs


def _task_converge(args):
    campaign, k = args
    cfg = campaign.base.replace(seed=campaign.base.seed + k)
    topo = _topology_for(cfg, 0)
    ch = generate(cfg, make_rng(cfg.seed, CHAN, 0, 0), topo)
    labels = tuple(l for l in LABELS["both"])
    sols = _solve_fd(cfg, ch, labels, 0, 0)
    return _records_for(campaign.kind, cfg, k, float(cfg.seed), 0, 0, sols, None)


def _timing_points(campaign):
    """``values`` = (N_T ladder..., None, K_D ladder...) or a single N_T ladder."""
    vals = list(campaign.values)
    if None in vals:
        cut = vals.index(None)
        return [("n_tx", v) for v in vals[:cut]] + [("k_dl", v) for v in vals[cut + 1:]]
    return [("n_tx", v) for v in vals]


def _task_timing(args):
    campaign, p, trial = args
    axis, v = _timing_points(campaign)[p]
    cfg = campaign.base.replace(**{axis: int(v)})
    topo = _topology_for(cfg, trial)
    ch = generate(cfg, make_rng(cfg.seed, CHAN, p, trial), topo)
    sols = _solve_fd(cfg, ch, LABELS["both"], p, trial)
    return _records_for(campaign.kind, campaign.base, p, float(v), 0, trial, sols, None, axis=axis)


def _tasks(campaign: Campaign):
    c = campaign
    if c.kind == "sweep-si":
        return _task_sweep_si, [(c, t) for t in range(c.trials)]
    if c.kind == "cci-sweep":
        return _task_cci_sweep, [(c, t) for t in range(c.trials)]
    if c.kind == "cdf":
        return _task_cdf, [(c, k, t) for k in range(c.topologies) for t in range(c.trials)]
    if c.kind == "cci-blind":
        return _task_cci_blind, [(c, k, t) for k in range(c.topologies) for t in range(c.trials)]
    if c.kind == "converge":
        return _task_converge, [(c, k) for k in range(c.topologies)]
    n = len(_timing_points(c))
    return _task_timing, [(c, p, t) for p in range(n) for t in range(c.trials)]


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map keeps task order, which fixes the reduction order
        return list(pool.map(fn, tasks, chunksize=1))


# reductions ---------------------------------------------------------------

def _gain(fd, hd):
    fd, hd = np.asarray(fd, float), np.asarray(hd, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 100.0 * (fd - hd) / hd


def _summary(recs, key_fd=("fd_dl", "fd_ul"), hd=True) -> dict:
    dl = np.array([r[key_fd[0]] for r in recs])
    ul = np.array([r[key_fd[1]] for r in recs])
    row = {"n": len(recs), "fd_dl": float(dl.mean()), "fd_ul": float(ul.mean())}
    row["fd_total"] = row["fd_dl"] + row["fd_ul"]
    if hd:
        hdl = np.array([r["hd"]["dl"] for r in recs])
        hul = np.array([r["hd"]["ul"] for r in recs])
        row.update({"hd_dl": float(hdl.mean()), "hd_ul": float(hul.mean())})
        row["hd_total"] = row["hd_dl"] + row["hd_ul"]
        for part, f, h in (("dl", dl, hdl), ("ul", ul, hul), ("total", dl + ul, hdl + hul)):
            row[f"gain_{part}_pct"] = float(np.mean(_gain(f, h)))
            row[f"gain_{part}_pct_of_means"] = float(_gain(f.mean(), h.mean()))
    return row


def _group(records, keys):
    out: Dict[tuple, list] = {}
    for r in records:
        out.setdefault(tuple(r[k] for k in keys), []).append(r)
    return out


def _point_rows(campaign, records, hd=True):
    rows = []
    for (p, lab), recs in sorted(_group(records, ("point", "label")).items(),
                                 key=lambda kv: (kv[0][0], campaign.labels.index(kv[0][1]))):
        row = {"point": p, "value": recs[0]["value"], "label": lab}
        row.update(_summary(recs, hd=hd))
        row.update({"config_hash": campaign.config_hash, "seed": campaign.seed})
        rows.append(row)
    return rows


def empirical_cdf(samples):
    """Sorted samples and their CDF levels ``k / n``."""
    x = np.sort(np.asarray(samples, float))
    return x, np.arange(1, x.size + 1) / x.size


def trend_test(x, y):
    """Spearman rank correlation with both one-sided p-values."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = np.isfinite(x) & np.isfinite(y)
    res = stats.spearmanr(x[ok], y[ok])
    rho = float(res.statistic if hasattr(res, "statistic") else res[0])
    p = float(res.pvalue if hasattr(res, "pvalue") else res[1])
    half = p / 2.0
    return {"rho": rho, "p_two_sided": p,
            "p_decreasing": half if rho < 0 else 1.0 - half,
            "p_increasing": half if rho > 0 else 1.0 - half, "n": int(ok.sum())}


# campaign entry points ----------------------------------------------------

def run_campaign(campaign: Campaign, jobs: int = 1) -> CampaignResult:
    t0 = time.perf_counter()
    fn, tasks = _tasks(campaign)
    records = [r for chunk in _map(fn, tasks, jobs) for r in chunk]
    rows, tables = _reduce(campaign, records)
    return CampaignResult(campaign, rows, records, tables, time.perf_counter() - t0)


def _reduce(campaign, records):
    kind = campaign.kind
    tables = {}
    if kind in ("sweep-si", "cci-sweep"):
        rows = _point_rows(campaign, records)
    elif kind == "cdf":
        rows = _point_rows(campaign, records)
        cdf_rows = []
        for lab in campaign.labels:
            sel = [r for r in rows if r["label"] == lab]
            for metric in ("gain_dl_pct", "gain_ul_pct", "gain_total_pct"):
                x, f = empirical_cdf([r[metric] for r in sel])
                cdf_rows += [{"label": lab, "metric": metric, "rank": i + 1, "value": float(v),
                              "cdf": float(c)} for i, (v, c) in enumerate(zip(x, f))]
        tables["cdf"] = cdf_rows
    elif kind == "cci-blind":
        rows = []
        for (p, lab), recs in sorted(_group(records, ("point", "label")).items(),
                                     key=lambda kv: (kv[0][0], campaign.labels.index(kv[0][1]))):
            row = {"point": p, "value": recs[0]["value"], "label": lab}
            row.update(_summary(recs, hd=False))
            blind = _summary(recs, key_fd=("blind_dl", "blind_ul"), hd=False)
            row.update({"blind_dl": blind["fd_dl"], "blind_ul": blind["fd_ul"],
                        "blind_total": blind["fd_total"]})
            row["aware_minus_blind"] = row["fd_total"] - row["blind_total"]
            row.update({"config_hash": campaign.config_hash, "seed": campaign.seed})
            rows.append(row)
        for lab in campaign.labels:
            for metric in ("fd_total", "blind_total"):
                x, f = empirical_cdf([r[metric] for r in rows if r["label"] == lab])
                tables.setdefault("cdf", []).extend(
                    {"label": lab, "metric": metric, "rank": i + 1, "value": float(v),
                     "cdf": float(c)} for i, (v, c) in enumerate(zip(x, f)))
    elif kind == "converge":
        rows = []
        for r in records:
            for it in r["run"]["trace"]:
                rows.append({"seed": r["seed"], "label": r["label"], "iteration": it["index"],
                             "surrogate_nats": it["surrogate"], "se_total": float(it["se_total"]),
                             "accepted": it["accepted"]})
    else:
        rows = []
        for (p, lab), recs in sorted(_group(records, ("point", "label")).items()):
            secs = np.array([r["run"]["timing"]["total_s"] for r in recs])
            its = np.array([r["run"]["iterations"] for r in recs])
            rows.append({"point": p, "axis": recs[0]["axis"], "value": recs[0]["value"],
                         "label": lab, "n": len(recs), "mean_s": float(secs.mean()),
                         "mean_iterations": float(its.mean()),
                         "mean_s_per_iteration": float((secs / np.maximum(its, 1)).mean())})
    return rows, tables


def sweep_sigma_si(campaign: Campaign, jobs: int = 1) -> CampaignResult:
    """Mean FD and HD SE and gains at each sigma_SI^2 (dB) of ``campaign.values``."""
    return run_campaign(dataclasses.replace(campaign, kind="sweep-si"), jobs)


def topology_cdf(campaign: Campaign, jobs: int = 1) -> CampaignResult:
    """Per-topology mean gains over ``trials`` channels and their empirical CDFs."""
    return run_campaign(dataclasses.replace(campaign, kind="cdf"), jobs)


def sweep_cci_distance(campaign: Campaign, jobs: int = 1) -> CampaignResult:
    """SE against the uplink-to-downlink user distance (metres in ``values``)."""
    return run_campaign(dataclasses.replace(campaign, kind="cci-sweep"), jobs)


def compare_cci_blind(campaign: Campaign, jobs: int = 1) -> CampaignResult:
    """CCI-aware designs against designs that ignore the user-to-user links.

    The blind design is optimized with ``g = 0`` from the same random start
    and scored on the true channels.
    """
    return run_campaign(dataclasses.replace(campaign, kind="cci-blind"), jobs)


def convergence_report(config: ScenarioConfig, seeds: int = 1, jobs: int = 1) -> CampaignResult:
    """Per-iteration surrogate and true SE of both algorithms on ``seeds`` instances."""
    return run_campaign(Campaign("converge", config, topologies=seeds, algo="both"), jobs)


def timing_report(config: ScenarioConfig, n_tx=(2, 4, 6, 8), k_dl=(2, 4, 6), trials: int = 3,
                  jobs: int = 1) -> CampaignResult:
    """Mean wall-clock per design over an N_T ladder and a K_D ladder."""
    values = tuple(n_tx) + (None,) + tuple(k_dl)
    return run_campaign(Campaign("timing", config, values=values, trials=trials, algo="both"),
                        jobs)


# outputs ------------------------------------------------------------------

TIMING_NOTE = ("# wall-clock seconds of the built-in barrier solver on this machine; "
               "not comparable with timings of other solvers or hardware\n")

_CSV_NAMES = {"sweep-si": "sweep_si", "cdf": "cdf_topologies", "cci-sweep": "cci_sweep",
              "cci-blind": "cci_blind", "converge": "convergence", "timing": "timing"}


def strip_timing(obj):
    """Drop every ``timing`` entry, recursively (wall-clock is not reproducible)."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k != "timing"}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def _canonical(records) -> List[str]:
    return [json.dumps(strip_timing(as_jsonable(r)), sort_keys=True) for r in records]


def records_digest(records) -> str:
    h = hashlib.sha256()
    for line in _canonical(records):
        h.update(line.encode())
        h.update(b"\n")
    return h.hexdigest()


def _csv_text(rows, header="") -> str:
    buf = io.StringIO()
    buf.write(header)
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


_PLOT_SCRIPT = '''"""Plot {csv}; needs matplotlib."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv}"
with open(path) as fh:
    rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
series = defaultdict(list)
for r in rows:
    series[r["{group}"]].append((float(r["{x}"]), [float(r[c]) for c in {ys!r}]))
fig, axes = plt.subplots(1, {n}, figsize=(4.5 * {n}, 3.5), squeeze=False)
for lab, pts in sorted(series.items()):
    pts.sort()
    xs = [p[0] for p in pts]
    for k, col in enumerate({ys!r}):
        axes[0][k].plot(xs, [p[1][k] for p in pts], marker="o", label=lab)
        axes[0][k].set_title(col)
        axes[0][k].set_xlabel("{xlabel}")
for ax in axes[0]:
    ax.grid(True, alpha=0.3)
    ax.legend()
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''

_PLOT_SPEC = {
    "sweep-si": ("value", "label", ["gain_dl_pct", "gain_ul_pct", "gain_total_pct"],
                 "sigma_SI^2 (dB)"),
    "cci-sweep": ("value", "label", ["fd_dl", "fd_ul", "fd_total"], "d_CCI (m)"),
    "cdf": ("value", "metric", ["cdf"], "gain (%)"),
    "cci-blind": ("value", "metric", ["cdf"], "total SE (bits/s/Hz)"),
    "converge": ("iteration", "label", ["se_total"], "iteration"),
    "timing": ("value", "label", ["mean_s"], "N_T or K_D"),
}


def write_outputs(result: CampaignResult, out) -> Dict[str, Path]:
    """CSV tables, ``records.jsonl``, ``manifest.json`` and a plotting script."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    c = result.campaign
    stem = _CSV_NAMES[c.kind]
    paths = {}
    header = TIMING_NOTE if c.kind == "timing" else ""
    paths["csv"] = out / f"{stem}.csv"
    paths["csv"].write_text(_csv_text(result.rows, header))
    for name, rows in result.tables.items():
        paths[name] = out / f"{stem}_{name}.csv"
        paths[name].write_text(_csv_text(rows))
    paths["records"] = out / "records.jsonl"
    with open(paths["records"], "w") as fh:
        for r in result.records:
            fh.write(json.dumps(as_jsonable(r), sort_keys=True) + "\n")
    x, group, ys, xlabel = _PLOT_SPEC[c.kind]
    plot_csv = paths.get("cdf", paths["csv"]).name
    paths["plot"] = out / f"plot_{stem}.py"
    paths["plot"].write_text(_PLOT_SCRIPT.format(csv=plot_csv, x=x, group=group, ys=ys,
                                                 n=len(ys), xlabel=xlabel))
    manifest = {
        "package_version": __version__,
        "campaign": c.to_dict(),
        "config_hash": c.config_hash,
        "campaign_hash": c.campaign_hash(),
        "seed": c.seed,
        "n_records": len(result.records),
        "records_sha256": records_digest(result.records),
        "files": sorted(p.name for p in paths.values()),
        "timing": {"total_s": result.seconds},
    }
    paths["manifest"] = out / "manifest.json"
    paths["manifest"].write_text(json.dumps(as_jsonable(manifest), indent=2, sort_keys=True))
    return paths


def replay(out, jobs: int = 1) -> dict:
    """Regenerate a campaign from its manifest and compare the records.

    Returns ``{"identical": bool, "expected", "actual", "n_records"}``;
    timing fields are excluded from the comparison.
    """
    out = Path(out)
    manifest = json.loads((out / "manifest.json").read_text())
    doc = dict(manifest["campaign"])
    base = ScenarioConfig.from_dict(doc.pop("config"))
    doc["values"] = tuple(doc["values"])
    campaign = Campaign(base=base, **doc)
    if campaign.config_hash != manifest["config_hash"]:
        raise ValueError("manifest configuration does not match its hash")
    result = run_campaign(campaign, jobs)
    actual = records_digest(result.records)
    stored = [json.loads(line) for line in (out / "records.jsonl").read_text().splitlines()]
    return {"identical": actual == manifest["records_sha256"] == records_digest(stored),
            "expected": manifest["records_sha256"], "actual": actual,
            "n_records": len(result.records)}
