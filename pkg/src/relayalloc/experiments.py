"""Experiment harness: scenario sweeps over Monte-Carlo trials, CSV output.

An experiment is a sweep over one axis (R-D SNR, transmit power, or relay
position) with a fixed number of trials per sweep point.  Every scheme in the
configuration sees the identical channel realization for a given
(sweep value, trial) pair, and the instance seed depends only on the trial,
so the whole pipeline is deterministic given the configuration.  Rows are
sorted by (scheme, sweep value, trial) before writing; wall-clock timings go
to the optional diagnostics stream, never into the CSV.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field, replace

from . import alloc_finite, alloc_ideal, oracle
from .alloc_ideal import violation_count
from .netmodel import (
    Cost231Params,
    NetworkDims,
    NetworkInstance,
    gen_geometric_instance,
    gen_iid_channels,
    snr_config_from_db,
    two_relay_layout,
)

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "run_experiment",
    "preset",
    "PRESET_NAMES",
    "certify_tiny_instances",
    "write_csv",
]

SCENARIOS = ("iid", "cost231", "two_relay_geometry")
SWEEP_AXES = ("snr_rd_db", "tx_power_dbm", "relay_position")
ALL_SCHEMES = (
    "ubsb_ideal",
    "lbsb_ideal",
    "block_exhaustive_ideal",
    "block_decentralized_ideal",
    "ubsb_finite",
    "lbsb_finite",
    "ubbb",
    "lbbb",
    "decentralized",
    "direct",
)
IDEAL_SCHEMES = ("ubsb_ideal", "lbsb_ideal", "block_exhaustive_ideal", "block_decentralized_ideal")
FINITE_SCHEMES = ("ubsb_finite", "lbsb_finite", "ubbb", "lbbb", "decentralized")

CSV_COLUMNS = (
    "scenario",
    "scheme",
    "sweep_value",
    "trial",
    "seed",
    "min_rate",
    "per_source_rates",
    "solver_status",
    "violation_count",
)


@dataclass
class ExperimentConfig:
    scenario: str = "iid"
    k: int = 3
    j: int = 2
    n: int = 8
    sweep_axis: str = "snr_rd_db"
    sweep_values: tuple = (5.0, 10.0, 15.0, 20.0, 25.0)
    snr_sd_db: float = 5.0
    snr_sr_db: float = 10.0
    snr_rd_db: float = 10.0
    tx_power_dbm: float = 30.0
    bandwidth_hz_per_subcarrier: float = 312.5e3
    relay_position: float = 0.5
    relay_perp_offset_m: float = 30.0
    trials: int = 50
    base_seed: int = 1234
    schemes: tuple = FINITE_SCHEMES + ("direct",)
    cost231: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    out: str | None = None
    workers: int = 1

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; known: {SCENARIOS}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.sweep_axis!r}; known: {SWEEP_AXES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.sweep_values:
            raise ValueError("sweep_values must be nonempty")
        if not self.schemes:
            raise ValueError("schemes must be nonempty")
        unknown = [s for s in self.schemes if s not in ALL_SCHEMES]
        if unknown:
            raise ValueError(f"unknown schemes {unknown}; known: {ALL_SCHEMES}")
        if self.sweep_axis == "snr_rd_db" and self.scenario != "iid":
            raise ValueError("the snr_rd_db sweep applies to the iid scenario only")
        if self.sweep_axis == "relay_position" and self.scenario != "two_relay_geometry":
            raise ValueError("the relay_position sweep requires the two_relay_geometry scenario")
        if self.sweep_axis == "tx_power_dbm" and self.scenario == "iid":
            raise ValueError("the tx_power_dbm sweep requires a geometric scenario")
        if min(self.k, self.j, self.n) < 1:
            raise ValueError("k, j, n must be positive")
        return self


@dataclass
class ResultRow:
    scenario: str
    scheme: str
    sweep_value: float
    trial: int
    seed: int
    min_rate: float
    per_source_rates: list
    solver_status: str
    violation_count: list | None = None
    solve_time_ms: float = 0.0
    iterations: int = 0

    def sort_key(self):
        return (self.scheme, float(self.sweep_value), self.trial)


def build_instance(cfg: ExperimentConfig, sweep_value, seed: int) -> NetworkInstance:
    """Deterministic instance for one (sweep value, trial seed) pair."""
    dims = NetworkDims(cfg.k, cfg.j, cfg.n)
    if cfg.scenario == "iid":
        rd = sweep_value if cfg.sweep_axis == "snr_rd_db" else cfg.snr_rd_db
        return NetworkInstance(
            channels=gen_iid_channels(dims, seed),
            snrs=snr_config_from_db(dims, cfg.snr_sd_db, cfg.snr_sr_db, rd),
        )
    params = Cost231Params(**cfg.cost231)
    tx = sweep_value if cfg.sweep_axis == "tx_power_dbm" else cfg.tx_power_dbm
    layout = None
    if cfg.scenario == "two_relay_geometry":
        pos = sweep_value if cfg.sweep_axis == "relay_position" else cfg.relay_position
        layout = two_relay_layout(pos, cfg.relay_perp_offset_m, params.area_side_m)
    ch, snrs, layout = gen_geometric_instance(
        dims, params, tx, cfg.bandwidth_hz_per_subcarrier, seed, layout=layout
    )
    return NetworkInstance(channels=ch, snrs=snrs, layout=layout)


def _run_schemes(cfg, inst, schemes):
    """Run the requested schemes on one instance, sharing relaxation solves."""
    ch, snrs = inst.channels, inst.snrs
    cache = {}

    def get(name):
        if name in cache:
            return cache[name]
        if name == "ubsb_ideal":
            res = alloc_ideal.ubsb_ideal(ch, snrs, solver_options=cfg.solver)
        elif name == "lbsb_ideal":
            res = alloc_ideal.lbsb_ideal(get("ubsb_ideal"), ch, snrs)
        elif name == "block_exhaustive_ideal":
            res = alloc_ideal.block_exhaustive_ideal(ch, snrs)
        elif name == "block_decentralized_ideal":
            res = alloc_ideal.block_decentralized_ideal(ch, snrs)
        elif name == "ubsb_finite":
            res = alloc_finite.ubsb_finite(ch, snrs, solver_options=cfg.solver)
        elif name == "lbsb_finite":
            res = alloc_finite.lbsb_finite(get("ubsb_finite"), ch, snrs)
        elif name == "ubbb":
            res = alloc_finite.ubbb_finite(ch, snrs, solver_options=cfg.solver)
        elif name == "lbbb":
            res = alloc_finite.lbbb_finite(get("ubbb"), ch, snrs)
        elif name == "decentralized":
            res = alloc_finite.decentralized_finite(ch, snrs)
        elif name == "direct":
            res = alloc_finite.direct_only(ch, snrs)
        else:
            raise ValueError(f"unknown scheme {name!r}")
        cache[name] = res
        return res

    out = {}
    for name in schemes:
        t0 = time.perf_counter()
        res = get(name)
        out[name] = (res, (time.perf_counter() - t0) * 1000.0)
    return out


def _one_task(cfg: ExperimentConfig, sweep_value, trial: int) -> list[ResultRow]:
    seed = cfg.base_seed + trial
    inst = build_instance(cfg, sweep_value, seed)
    results = _run_schemes(cfg, inst, cfg.schemes)
    rows = []
    for name in cfg.schemes:
        res, ms = results[name]
        vio = None
        if name == "ubsb_ideal":
            vio = violation_count(res.allocation).tolist()
        rows.append(
            ResultRow(
                scenario=cfg.scenario,
                scheme=name,
                sweep_value=float(sweep_value),
                trial=trial,
                seed=seed,
                min_rate=res.min_rate,
                per_source_rates=list(map(float, res.per_source)),
                solver_status=res.status,
                violation_count=vio,
                solve_time_ms=ms,
                iterations=res.iterations,
            )
        )
    return rows


def run_experiment(cfg: ExperimentConfig, diagnostics_path: str | None = None) -> list[ResultRow]:
    """Run all (sweep value, trial) tasks; optionally write CSV and JSONL."""
    cfg.validate()
    tasks = [(sv, t) for sv in cfg.sweep_values for t in range(cfg.trials)]
    rows: list[ResultRow] = []
    if cfg.workers > 1:
        import multiprocessing as mp

        with mp.Pool(cfg.workers) as pool:
            for chunk in pool.starmap(_one_task, [(cfg, sv, t) for sv, t in tasks]):
                rows.extend(chunk)
    else:
        for sv, t in tasks:
            rows.extend(_one_task(cfg, sv, t))
    rows.sort(key=ResultRow.sort_key)
    if cfg.out:
        write_csv(rows, cfg.out)
    if diagnostics_path:
        with open(diagnostics_path, "w") as fh:
            for row in rows:
                rec = asdict(row)
                fh.write(json.dumps(rec) + "\n")
    return rows


def _fmt(x) -> str:
    return f"{float(x):.9g}"


def write_csv(rows: list[ResultRow], path: str) -> None:
    """Deterministic CSV: fixed column order, 9 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.scenario,
                    row.scheme,
                    _fmt(row.sweep_value),
                    row.trial,
                    row.seed,
                    _fmt(row.min_rate),
                    ";".join(_fmt(v) for v in row.per_source_rates),
                    row.solver_status,
                    ";".join(str(v) for v in row.violation_count)
                    if row.violation_count is not None
                    else "",
                ]
            )


_PRESETS = {
    # i.i.d. channels, relays always able to decode, R-D SNR sweep
    "fig2": ExperimentConfig(
        scenario="iid",
        k=3,
        j=2,
        n=32,
        sweep_axis="snr_rd_db",
        sweep_values=(5.0, 10.0, 15.0, 20.0, 25.0, 30.0),
        snr_sd_db=5.0,
        schemes=IDEAL_SCHEMES + ("direct",),
    ),
    # geometric scenario, ideal decoding, transmit-power sweep
    "fig3": ExperimentConfig(
        scenario="cost231",
        k=3,
        j=2,
        n=16,
        sweep_axis="tx_power_dbm",
        sweep_values=(30.0, 35.0, 40.0, 45.0, 50.0),
        schemes=IDEAL_SCHEMES + ("direct",),
    ),
    # one source-destination pair across the diagonal, relay-position sweep
    "fig4": ExperimentConfig(
        scenario="two_relay_geometry",
        k=1,
        j=2,
        n=16,
        sweep_axis="relay_position",
        sweep_values=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
        schemes=IDEAL_SCHEMES + ("direct",),
    ),
    # i.i.d. channels, finite S-R links, R-D SNR sweep
    "fig5": ExperimentConfig(
        scenario="iid",
        k=3,
        j=2,
        n=8,
        sweep_axis="snr_rd_db",
        sweep_values=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0),
        snr_sd_db=5.0,
        snr_sr_db=10.0,
        schemes=FINITE_SCHEMES + ("direct",),
    ),
    "fig6": None,  # fig5 with one more source; filled in below
    # geometric scenario, finite S-R links, transmit-power sweep
    "fig7": ExperimentConfig(
        scenario="cost231",
        k=3,
        j=2,
        n=8,
        sweep_axis="tx_power_dbm",
        sweep_values=(35.0, 40.0, 45.0, 50.0, 55.0),
        schemes=FINITE_SCHEMES + ("direct",),
    ),
}
_PRESETS["fig6"] = replace(_PRESETS["fig5"], k=4)

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset(name: str) -> ExperimentConfig:
    """A fresh copy of one of the named experiment presets."""
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")
    return replace(_PRESETS[name])


def certify_tiny_instances(
    n_instances: int = 50,
    base_seed: int = 7000,
    levels: int = 21,
    snr_sd_db: float = 5.0,
    snr_sr_db: float = 10.0,
    snr_rd_db: float = 10.0,
    solver_options: dict | None = None,
    verbose: bool = False,
):
    """Certify the solver and heuristics against the grid oracles.

    Runs tiny instances (K=2, J alternating 1/2, N=2), checks the sandwich
    LB - 1e-9 <= oracle <= UB + 1e-9 for the subcarrier and block families,
    and returns (all_ok, report rows).
    """
    opts = {"gap_tol": 1e-11}
    opts.update(solver_options or {})
    rows = []
    ok = True
    for i in range(n_instances):
        dims = NetworkDims(2, 1 + (i % 2), 2)
        ch = gen_iid_channels(dims, base_seed + i)
        snrs = snr_config_from_db(dims, snr_sd_db, snr_sr_db, snr_rd_db)
        ub_s = alloc_finite.ubsb_finite(ch, snrs, solver_options=opts)
        lb_s = alloc_finite.lbsb_finite(ub_s, ch, snrs)
        ub_b = alloc_finite.ubbb_finite(ch, snrs, solver_options=opts)
        lb_b = alloc_finite.lbbb_finite(ub_b, ch, snrs)
        orc_s = oracle.grid_oracle_subcarrier(ch, snrs, levels=levels)
        orc_b = oracle.grid_oracle_block(ch, snrs, levels=levels)
        checks = {
            "sub_lb_le_oracle": lb_s.min_rate - 1e-9 <= orc_s,
            "sub_oracle_le_ub": orc_s <= ub_s.min_rate + 1e-9,
            "blk_lb_le_oracle": lb_b.min_rate - 1e-9 <= orc_b,
            "blk_oracle_le_ub": orc_b <= ub_b.min_rate + 1e-9,
        }
        row = {
            "instance": i,
            "seed": base_seed + i,
            "j": dims.j,
            "lbsb": lb_s.min_rate,
            "oracle_sub": orc_s,
            "ubsb": ub_s.min_rate,
            "lbbb": lb_b.min_rate,
            "oracle_blk": orc_b,
            "ubbb": ub_b.min_rate,
            "ok": all(checks.values()),
            "checks": checks,
        }
        ok = ok and row["ok"]
        rows.append(row)
        if verbose:
            state = "ok" if row["ok"] else "FAIL"
            print(
                f"[{state}] instance {i:3d} (J={dims.j}): "
                f"sub {lb_s.min_rate:.6f} <= {orc_s:.6f} <= {ub_s.min_rate:.6f} | "
                f"blk {lb_b.min_rate:.6f} <= {orc_b:.6f} <= {ub_b.min_rate:.6f}"
            )
    return ok, rows
