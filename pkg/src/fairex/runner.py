"""Executes one scenario and writes its output directory.

Output contract (every kind):
  resolved.ini   every key the run read, including defaulted ones
  summary.csv    key,value rows; includes workload_hash and, where meaningful,
                 <metric>_p50/_p90/_p99 rows that `compare` consumes
  *.csv          kind-specific row files, one header line each

Config parsing happens before any output exists, so an invalid or unknown
key fails fast with nothing written. Checks built into a kind (exact laws,
qualitative orderings) are evaluated after the outputs are written; a failed
check raises CheckFailure so results stay on disk for inspection while the
process exits nonzero.
"""

from __future__ import annotations

import csv
import hashlib
import os
import shutil
from statistics import median

import numpy as np

from .core import NS_PER_MS, NS_PER_S, NS_PER_US, ConfigError, NodeAddr, Order
from .engine import MatchingEngine, dump_trades_csv, reference_match
from .fastpath import run_outbound_auto
from .hold_release import p_fair, percentile_ns
from .inbound import (
    InboundParams,
    dump_matching_rate_csv,
    dump_order_latency_csv,
    fairness_oracle,
    run_inbound,
    unfairness_ratio,
)
from .montecarlo import HedgeModel, dump_cdf_csv, run_model, summarize
from .netsim import VmProfile
from .outbound import OutboundParams, OutboundRun
from .rng import hash64, randint_span
from .scenario import Scenario
from .sequencer import HeartbeatState, Sequencer
from .tree import ACCEPT, DUPLICATE, ERROR, DedupBuffer, dedup_accept, parent_index
from .workload import (
    burst_orders,
    burst_windows,
    dump_orders_csv,
    engine_instance,
    fairness_workload,
    in_windows,
)


class CheckFailure(AssertionError):
    """A scenario's built-in check did not hold; outputs are kept on disk."""


# -- small helpers ------------------------------------------------------------


def _write_rows(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _write_summary(path: str, mapping: dict) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["key", "value"])
        for k, v in mapping.items():
            w.writerow([k, v])


def _pcts(summary: dict, metric: str, values: list[int]) -> None:
    s = sorted(values)
    for frac, tag in ((0.50, "p50"), (0.90, "p90"), (0.99, "p99")):
        summary[f"{metric}_{tag}"] = percentile_ns(s, frac) if s else 0
    summary[f"{metric}_count"] = len(values)


def _fingerprint(*parts) -> str:
    return hashlib.sha256(":".join(str(p) for p in parts).encode()).hexdigest()


def _file_hash(path: str) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def _int_list(scn: Scenario, section: str, key: str, default: str) -> list[int]:
    text = scn.get_str(section, key, default)
    try:
        return [int(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected comma-separated integers, got {text!r}")


# -- outbound family -----------------------------------------------------------


def _outbound_params(scn: Scenario, **over) -> tuple[OutboundParams, str]:
    """Shared [tree]/[latency]/[vm]/[workload]/[features] parse for mcast kinds."""
    n = scn.get_int("tree", "n", 100)
    fanout = scn.get_int("tree", "fanout", 0)
    depth = scn.get_int("tree", "depth", 0)
    params = OutboundParams(
        n_receivers=n,
        seed=scn.seed,
        rate_msgs_s=scn.get_int("workload", "rate_msgs_s", 5000),
        n_messages=scn.get_int("workload", "n_messages", 2000),
        size_bytes=scn.get_int("workload", "size_bytes", 466),
        hedge=scn.get_int("tree", "hedge", 0),
        rotate=scn.get_bool("tree", "rrps", True),
        root_hedging=scn.get_bool("tree", "root_hedging", True),
        receiver_hedging=scn.get_bool("tree", "receiver_hedging", False),
        direct_unicast=scn.get_bool("tree", "direct_unicast", False),
        fanout_override=fanout or None,
        depth_override=depth or None,
        hold_release=scn.get_bool("features", "hold_release", True),
        margin_us=scn.get_float("features", "margin_us", 25.0),
        report_period_ms=scn.get_float("features", "report_period_ms", 100.0),
        clock_err_ns=scn.get_int("vm", "clock_err_ns", 100),
        latency=scn.latency_model(),
        root_profile=scn.vm_profile("root"),
        proxy_profile=scn.vm_profile("proxy"),
        leaf_profile=scn.vm_profile("leaf"),
    )
    for k, v in over.items():
        params = params.__class__(**{**params.__dict__, k: v})
    engine = scn.get_choice("features", "engine", "auto", ("auto", "event", "fast"))
    return params, engine


def parse_outbound(scn: Scenario) -> dict:
    params, engine = _outbound_params(scn)
    return {"params": params, "engine": engine}


def exec_outbound(cfg: dict, out: str) -> tuple[dict, list]:
    params, engine = cfg["params"], cfg["engine"]
    res = run_outbound_auto(params, engine)
    _write_rows(
        os.path.join(out, "messages.csv"),
        ["msg_id", "send_true_ns", "oml_ns", "dws_ns", "dws_raw_ns", "misses", "lost"],
        [
            (r.msg_id, r.send_true_ns, r.oml_ns, r.dws_ns, r.dws_raw_ns, r.misses, r.lost)
            for r in res.rows
        ],
    )
    summary = {
        "workload_hash": _fingerprint(
            "mcast", params.seed, params.rate_msgs_s, params.n_messages, params.size_bytes
        ),
        "messages": res.summary.messages,
        "misses": res.summary.misses,
        "lost": res.summary.lost,
        "drops": res.total_drops,
        "p_fair": res.summary.p_fair,
    }
    _pcts(summary, "oml", [r.oml_ns for r in res.rows])
    _pcts(summary, "dws", [r.dws_ns for r in res.rows if r.lost == 0])
    _pcts(summary, "dws_raw", [r.dws_raw_ns for r in res.rows if r.lost == 0])
    return summary, []


def parse_hold_exact(scn: Scenario) -> dict:
    base, engine = _outbound_params(scn)
    return {
        "base": base,
        "engine": engine,
        "n_list": _int_list(scn, "experiment", "n_list", "10,100"),
        "err_list": _int_list(scn, "experiment", "err_list_ns", "0,100"),
    }


def exec_hold_exact(cfg: dict, out: str) -> tuple[dict, list]:
    rows = []
    checks = []
    for n in cfg["n_list"]:
        for err in cfg["err_list"]:
            params = OutboundParams(
                **{**cfg["base"].__dict__, "n_receivers": n, "clock_err_ns": err}
            )
            res = run_outbound_auto(params, cfg["engine"])
            max_dws = max(r.dws_ns for r in res.rows)
            misses = sum(r.misses for r in res.rows)
            bound = 2 * err
            ok = misses == 0 and (max_dws == 0 if err == 0 else max_dws <= bound)
            rows.append((n, err, len(res.rows), misses, max_dws, bound, int(ok)))
            checks.append(
                (
                    f"dws_bound_n{n}_err{err}",
                    ok,
                    f"misses={misses} max_dws={max_dws} bound={bound}",
                )
            )
    _write_rows(
        os.path.join(out, "hold_exact.csv"),
        ["n", "clock_err_ns", "messages", "misses", "max_dws_ns", "bound_ns", "ok"],
        rows,
    )
    base = cfg["base"]
    summary = {
        "workload_hash": _fingerprint(
            "mcast", base.seed, base.rate_msgs_s, base.n_messages, base.size_bytes
        )
    }
    return summary, checks


def parse_fair_trend(scn: Scenario) -> dict:
    base, engine = _outbound_params(scn)
    return {
        "base": base,
        "engine": engine,
        "n_list": _int_list(scn, "experiment", "n_list", "100,1000"),
        "p_fair_floor": scn.get_float("experiment", "p_fair_floor", 85.0),
        "threshold_ns": int(round(scn.get_float("experiment", "threshold_us", 1.0) * NS_PER_US)),
    }


def exec_fair_trend(cfg: dict, out: str) -> tuple[dict, list]:
    rows = []
    stats = []
    for n in cfg["n_list"]:
        params = OutboundParams(**{**cfg["base"].__dict__, "n_receivers": n})
        res = run_outbound_auto(params, cfg["engine"])
        dws = [r.dws_ns for r in res.rows if r.lost == 0]
        oml = sorted(r.oml_ns for r in res.rows)
        pf = p_fair(dws, threshold_ns=cfg["threshold_ns"])
        pcts = tuple(percentile_ns(oml, f) for f in (0.50, 0.90, 0.99))
        misses = sum(r.misses for r in res.rows)
        lost = sum(1 for r in res.rows if r.lost)
        rows.append((n, pf, *pcts, misses, lost))
        stats.append((n, pf, pcts))
    _write_rows(
        os.path.join(out, "fair_trend.csv"),
        ["n_receivers", "p_fair", "oml_p50_ns", "oml_p90_ns", "oml_p99_ns", "misses", "lost"],
        rows,
    )
    first_n, first_pf, _ = stats[0]
    checks = [
        (
            f"p_fair_floor_n{first_n}",
            first_pf >= cfg["p_fair_floor"],
            f"{first_pf} >= {cfg['p_fair_floor']:g}",
        ),
        (
            "p_fair_non_increasing",
            all(stats[i + 1][1] <= stats[i][1] for i in range(len(stats) - 1)),
            " -> ".join(f"N={n}: {pf}" for n, pf, _ in stats),
        ),
    ]
    for j, tag in enumerate(("p50", "p90", "p99")):
        checks.append(
            (
                f"oml_{tag}_non_decreasing",
                all(stats[i + 1][2][j] >= stats[i][2][j] for i in range(len(stats) - 1)),
                " -> ".join(f"N={n}: {p[j]}" for n, _, p in stats),
            )
        )
    base = cfg["base"]
    summary = {
        "workload_hash": _fingerprint(
            "fair_trend", base.seed, base.rate_msgs_s, base.n_messages, base.size_bytes,
            *cfg["n_list"],
        )
    }
    for n, pf, pcts in stats:
        summary[f"p_fair_n{n}"] = pf
        summary[f"oml_p99_n{n}"] = pcts[2]
    return summary, checks


def parse_hedge_sweep(scn: Scenario) -> dict:
    base, engine = _outbound_params(scn)
    return {
        "base": base,
        "engine": engine,
        "hedges": _int_list(scn, "experiment", "hedges", "0,1,2"),
        "audit_messages": scn.get_int("experiment", "audit_messages", 300),
    }


def exec_hedge_sweep(cfg: dict, out: str) -> tuple[dict, list]:
    base = cfg["base"]
    rows = []
    stats = {}
    checks = []
    for h in cfg["hedges"]:
        params = OutboundParams(**{**base.__dict__, "hedge": h})
        res = run_outbound_auto(params, cfg["engine"])
        oml99 = percentile_ns(sorted(r.oml_ns for r in res.rows), 0.99)
        dws99 = percentile_ns(sorted(r.dws_ns for r in res.rows), 0.99)

        audit = OutboundParams(
            **{**base.__dict__, "hedge": h, "n_messages": cfg["audit_messages"]}
        )
        ares = run_outbound_auto(audit, "event")
        counts = set(ares.copies.values())
        audit_ok = (
            counts == {h + 1}
            and ares.total_drops == 0
            and all(r.lost == 0 for r in ares.rows)
        )
        rows.append(
            (
                h,
                oml99,
                dws99,
                cfg["audit_messages"],
                min(counts),
                max(counts),
                ares.total_drops,
                int(audit_ok),
            )
        )
        stats[h] = (oml99, dws99)
        checks.append((f"copies_exact_h{h}", audit_ok, f"copy counts seen: {sorted(counts)}"))
    _write_rows(
        os.path.join(out, "hedging.csv"),
        [
            "hedge",
            "oml_p99_ns",
            "dws_p99_ns",
            "audit_messages",
            "copies_min",
            "copies_max",
            "audit_drops",
            "audit_ok",
        ],
        rows,
    )
    hs = cfg["hedges"]
    if len(hs) >= 2:
        a, b = stats[hs[0]], stats[hs[1]]
        checks.append(("oml_p99_improves_h1", b[0] < a[0], f"h{hs[1]}={b[0]} vs h{hs[0]}={a[0]}"))
        checks.append(("dws_p99_improves_h1", b[1] < a[1], f"h{hs[1]}={b[1]} vs h{hs[0]}={a[1]}"))
    if len(hs) >= 3:
        a, b, c = (stats[h] for h in hs[:3])
        for i, name in ((0, "oml"), (1, "dws")):
            first = a[i] - b[i]
            second = b[i] - c[i]
            checks.append(
                (
                    f"{name}_p99_diminishing_h2",
                    second < first,
                    f"gain h{hs[0]}->h{hs[1]}={first} gain h{hs[1]}->h{hs[2]}={second}",
                )
            )
    summary = {
        "workload_hash": _fingerprint(
            "mcast", base.seed, base.rate_msgs_s, base.n_messages, base.size_bytes
        )
    }
    for h, (o, d) in stats.items():
        summary[f"oml_p99_h{h}"] = o
        summary[f"dws_p99_h{h}"] = d
    return summary, checks


def parse_maxrate(scn: Scenario) -> dict:
    return {
        "seed": scn.seed,
        "fanout": scn.get_int("tree", "fanout", 5),
        "depth": scn.get_int("tree", "depth", 2),
        "hedges": _int_list(scn, "experiment", "hedges", "0,1"),
        "size_bytes": scn.get_int("workload", "size_bytes", 466),
        "proxy_proc_us": scn.get_float("experiment", "proxy_proc_us", 10.0),
        "proxy_queue": scn.get_int("experiment", "proxy_queue", 16),
        "probe_messages": scn.get_int("experiment", "probe_messages", 1200),
        "audit_messages": scn.get_int("experiment", "audit_messages", 100),
        "ladder_lo": scn.get_float("experiment", "ladder_lo_frac", 0.85),
        "ladder_hi": scn.get_float("experiment", "ladder_hi_frac", 1.10),
        "ladder_steps": scn.get_int("experiment", "ladder_steps", 11),
        "tol_frac": scn.get_float("experiment", "tol_frac", 0.05),
        "latency": scn.latency_model(),
    }


def exec_maxrate(cfg: dict, out: str) -> tuple[dict, list]:
    F, D = cfg["fanout"], cfg["depth"]
    n = F**D
    proc = cfg["proxy_proc_us"]
    rows = []
    audit_rows = []
    checks = []
    max_rate = {}
    for h in cfg["hedges"]:
        # packets-per-message audit at an easy rate, unlimited queues
        audit = OutboundParams(
            n_receivers=n,
            seed=cfg["seed"],
            rate_msgs_s=5000,
            n_messages=cfg["audit_messages"],
            size_bytes=cfg["size_bytes"],
            hedge=h,
            fanout_override=F,
            depth_override=D,
            hold_release=False,
            clock_err_ns=0,
            latency=cfg["latency"],
        )
        ares = run_outbound_auto(audit, "event")
        sends = set(ares.sends_per_proxy_msg.values())
        expected = (h + 1) * F
        ok = sends == {expected}
        audit_rows.append((h, expected, min(sends), max(sends), int(ok)))
        checks.append((f"packets_per_msg_h{h}", ok, f"expected {expected}, saw {sorted(sends)}"))

        # loss-free ladder: layer-0 ingress models a fixed-capacity NIC
        analytic = 1e9 / ((h + 1) * proc * NS_PER_US)
        lo, hi, steps = cfg["ladder_lo"], cfg["ladder_hi"], cfg["ladder_steps"]
        best = None
        overflowed = False
        for k in range(steps):
            frac = lo + (hi - lo) * k / (steps - 1)
            rate = max(1, int(round(analytic * frac)))
            params = OutboundParams(
                n_receivers=n,
                seed=cfg["seed"],
                rate_msgs_s=rate,
                n_messages=cfg["probe_messages"],
                size_bytes=cfg["size_bytes"],
                hedge=h,
                fanout_override=F,
                depth_override=D,
                hold_release=False,
                clock_err_ns=0,
                latency=cfg["latency"],
                proxy_profile=VmProfile(
                    ingress_queue_pkts=cfg["proxy_queue"], proc_delay_us=proc
                ),
            )
            res = run_outbound_auto(params, "event")
            rows.append((h, rate, res.total_drops))
            if res.total_drops == 0:
                best = rate
            else:
                overflowed = True
        max_rate[h] = best
        checks.append(
            (
                f"ladder_resolved_h{h}",
                best is not None and overflowed,
                f"max drop-free rate {best}, saw overflow above: {overflowed}",
            )
        )
    _write_rows(os.path.join(out, "maxrate.csv"), ["hedge", "rate_msgs_s", "drops"], rows)
    _write_rows(
        os.path.join(out, "packets_audit.csv"),
        ["hedge", "expected_per_proxy_msg", "seen_min", "seen_max", "ok"],
        audit_rows,
    )
    hs = cfg["hedges"]
    summary = {
        "workload_hash": _fingerprint(
            "maxrate", cfg["seed"], F, D, cfg["size_bytes"], cfg["probe_messages"]
        )
    }
    for h, r in max_rate.items():
        summary[f"max_rate_h{h}"] = r if r is not None else "NONE"
    if len(hs) >= 2 and max_rate[hs[0]] and max_rate[hs[1]]:
        r0, r1 = max_rate[hs[0]], max_rate[hs[1]]
        err = abs(2 * r1 - r0) / r0
        summary["halving_error_frac"] = f"{err:.4f}"
        checks.append(
            (
                "rate_halves_with_hedge",
                err <= cfg["tol_frac"],
                f"max h{hs[0]}={r0}, max h{hs[1]}={r1}, error {err:.3%}",
            )
        )
    return summary, checks


def parse_spike_ab(scn: Scenario) -> dict:
    base, engine = _outbound_params(scn)
    if base.hedge != 0:
        raise ConfigError("[tree] hedge: spike_ab isolates one path, requires hedge = 0")
    return {
        "base": base,
        "magnitude_us": scn.get_float("experiment", "spike_magnitude_us", 300.0),
        "window_frac": scn.get_float("experiment", "window_frac", 0.10),
        "window_start_frac": scn.get_float("experiment", "window_start_frac", 0.30),
        "victim_leaf": scn.get_int("experiment", "victim_leaf", 0),
    }


def exec_spike_ab(cfg: dict, out: str) -> tuple[dict, list]:
    base = cfg["base"]
    duration = base.n_messages * (NS_PER_S // base.rate_msgs_s)
    t0 = int(duration * cfg["window_start_frac"])
    dur_ms = duration * cfg["window_frac"] / NS_PER_MS
    mag_ns = int(cfg["magnitude_us"] * NS_PER_US)
    victim = cfg["victim_leaf"]

    def owd_at_victim(params: OutboundParams, spiked: bool) -> dict[int, int]:
        run = OutboundRun(params)
        if spiked:
            leaf_layer = run.plan.leaf_layer
            src = NodeAddr(
                leaf_layer - 1, parent_index(run.plan, leaf_layer, victim, 0, rotate=False)
            )
            run.sim.inject_spike(
                (src, NodeAddr(leaf_layer, victim)), t0, cfg["magnitude_us"], dur_ms
            )
        res = run.run()
        send = {r.msg_id: r.send_true_ns for r in res.rows}
        return {
            m: arr - send[m] for (m, leaf, _, arr) in res.delivery_rows if leaf == victim
        }

    rows = []
    fracs = {}
    for rotate in (True, False):
        params = OutboundParams(
            **{**base.__dict__, "rotate": rotate, "hold_release": False, "clock_err_ns": 0}
        )
        clean = owd_at_victim(params, spiked=False)
        spiked = owd_at_victim(params, spiked=True)
        gap = NS_PER_S // base.rate_msgs_s
        window = [m for m in clean if t0 <= m * gap < t0 + int(duration * cfg["window_frac"])]
        inflated = sum(1 for m in window if spiked[m] - clean[m] >= mag_ns // 2)
        frac = inflated / len(window) if window else 0.0
        fracs[rotate] = frac
        rows.append(("rrps_on" if rotate else "rrps_off", len(window), inflated, f"{frac:.4f}"))
    _write_rows(
        os.path.join(out, "spike.csv"),
        ["variant", "window_msgs", "inflated_msgs", "fraction"],
        rows,
    )
    summary = {
        "workload_hash": _fingerprint(
            "mcast", base.seed, base.rate_msgs_s, base.n_messages, base.size_bytes
        ),
        "inflated_frac_rrps_on": f"{fracs[True]:.4f}",
        "inflated_frac_rrps_off": f"{fracs[False]:.4f}",
    }
    checks = [
        (
            "rrps_contains_spike",
            fracs[True] < fracs[False],
            f"on={fracs[True]:.4f} off={fracs[False]:.4f}",
        ),
        ("spike_visible_without_rrps", fracs[False] > 0.0, f"off={fracs[False]:.4f}"),
    ]
    return summary, checks


# -- inbound family ------------------------------------------------------------


def _inbound_params(scn: Scenario, n_mps: int, queue_mode: str, use_tree: bool) -> InboundParams:
    fanout = scn.get_int("tree", "fanout", 0)
    depth = scn.get_int("tree", "depth", 0)
    return InboundParams(
        n_mps=n_mps,
        seed=scn.seed,
        use_tree=use_tree,
        fanout_override=(fanout or None) if use_tree else None,
        depth_override=(depth or None) if use_tree else None,
        use_sequencer=scn.get_bool("features", "sequencer", True),
        queue_mode=queue_mode,
        w=scn.get_int("engine", "w", 2),
        initial_mid=scn.get_int("engine", "initial_mid", 100),
        closed_loop=scn.get_bool("engine", "closed_loop", False),
        md_delay_us=scn.get_float("engine", "md_delay_us", 5.0),
        clock_err_ns=scn.get_int("vm", "clock_err_ns", 0),
        heartbeat_period_us=scn.get_float("experiment", "heartbeat_period_us", 200.0),
        pacing=scn.get_bool("features", "pacing", False),
        pace_target_us=scn.get_float("features", "pace_target_us", 50.0),
        pace_window_ms=scn.get_float("features", "pace_window_ms", 50.0),
        order_bytes=scn.get_int("workload", "order_bytes", 1024),
        retto_us=scn.get_float("experiment", "retto_us", 200.0),
        latency=scn.latency_model(),
        gateway_profile=scn.vm_profile("gateway", 0.05),
        proxy_profile=scn.vm_profile("proxy", 0.05),
        root_profile=scn.vm_profile("root", 16.0),
        drain_slack_ms=scn.get_float("experiment", "drain_slack_ms", 200.0),
    )


def _burst_workload(scn: Scenario, n_mps: int, seed: int | None = None) -> list[Order]:
    return burst_orders(
        scn.seed if seed is None else seed,
        n_mps=n_mps,
        duration_ms=scn.get_float("workload", "duration_ms", 30.0),
        base_rate_s=scn.get_float("workload", "order_rate_s", 300.0),
        burst_factor=scn.get_float("workload", "burst_factor", 20.0),
        burst_period_ms=scn.get_float("workload", "burst_period_ms", 10.0),
        burst_duty=scn.get_float("workload", "burst_duty", 0.25),
        initial_mid=scn.get_int("engine", "initial_mid", 100),
        w=scn.get_int("engine", "w", 2),
        critical_pct=scn.get_int("workload", "critical_pct", 50),
    )


def _inbound_outputs(out: str, res, window_us: float) -> dict:
    dump_order_latency_csv(os.path.join(out, "order_latency.csv"), res)
    dump_matching_rate_csv(os.path.join(out, "matching_rate.csv"), res, window_us)
    dump_trades_csv(os.path.join(out, "trades.csv"), res.trades)
    summary = {
        "orders": len(res.submitted),
        "arrivals": len(res.arrivals),
        "trades": len(res.trades),
        "matched_orders": len(res.first_fill_ns),
        "drops": res.drops,
        "retransmits": res.retransmits,
        "undelivered": res.undelivered,
        "epoch_skew": res.epoch_skew,
    }
    _pcts(summary, "match_latency", [t - g for (g, _), t in res.first_fill_ns.items()])
    by_key = {}
    for a in res.arrivals:
        by_key.setdefault((a.gen_ts, a.mp), a.arrival_ns)
    _pcts(summary, "arrival_latency", [arr - g for (g, _), arr in by_key.items()])
    rep = unfairness_ratio(res.arrivals, res.trades)
    summary["unfair_count"] = rep.unfair_count
    summary["unfairness_ratio"] = f"{rep.ratio:.6f}"
    return summary


def parse_inbound(scn: Scenario) -> dict:
    n_mps = scn.get_int("tree", "n", 9)
    queue_mode = "loq" if scn.get_bool("features", "loq", True) else "fifo"
    use_tree = scn.get_bool("features", "tree_inbound", True)
    return {
        "params": _inbound_params(scn, n_mps, queue_mode, use_tree),
        "workload": _burst_workload(scn, n_mps),
        "window_us": scn.get_float("output", "rate_window_us", 1000.0),
    }


def exec_inbound(cfg: dict, out: str) -> tuple[dict, list]:
    wl_path = os.path.join(out, "orders.csv")
    dump_orders_csv(wl_path, cfg["workload"])
    res = run_inbound(cfg["params"], cfg["workload"])
    summary = _inbound_outputs(out, res, cfg["window_us"])
    summary["workload_hash"] = _file_hash(wl_path)
    return summary, []


def parse_inbound_tree_ab(scn: Scenario) -> dict:
    n_mps = scn.get_int("tree", "n", 25)
    queue_mode = "loq" if scn.get_bool("features", "loq", True) else "fifo"
    tree = _inbound_params(scn, n_mps, queue_mode, use_tree=True)
    flat = InboundParams(
        **{**tree.__dict__, "use_tree": False, "fanout_override": None, "depth_override": None}
    )
    return {
        "tree": tree,
        "flat": flat,
        "workload": _burst_workload(scn, n_mps),
        "duration_ms": scn.get_float("workload", "duration_ms", 30.0),
        "burst_period_ms": scn.get_float("workload", "burst_period_ms", 10.0),
        "burst_duty": scn.get_float("workload", "burst_duty", 0.25),
    }


def exec_inbound_tree_ab(cfg: dict, out: str) -> tuple[dict, list]:
    wl_path = os.path.join(out, "orders.csv")
    dump_orders_csv(wl_path, cfg["workload"])
    wins = burst_windows(cfg["duration_ms"], cfg["burst_period_ms"], cfg["burst_duty"])
    rows = []
    stats = {}
    for variant in ("tree", "flat"):
        res = run_inbound(cfg[variant], cfg["workload"])
        recv = sum(1 for a in res.arrivals if in_windows(a.arrival_ns, wins))
        rows.append((variant, recv, res.drops, res.retransmits, res.undelivered, len(res.trades)))
        stats[variant] = (recv, res.drops, res.undelivered)
    _write_rows(
        os.path.join(out, "ab_tree.csv"),
        ["variant", "recv_in_burst", "drops", "retransmits", "undelivered", "trades"],
        rows,
    )
    summary = {
        "workload_hash": _file_hash(wl_path),
        "tree_recv_in_burst": stats["tree"][0],
        "flat_recv_in_burst": stats["flat"][0],
        "tree_drops": stats["tree"][1],
        "flat_drops": stats["flat"][1],
    }
    checks = [
        (
            "tree_receives_more_in_bursts",
            stats["tree"][0] > stats["flat"][0],
            f"tree={stats['tree'][0]} flat={stats['flat'][0]}",
        ),
        (
            "tree_drops_fewer",
            stats["tree"][1] < stats["flat"][1],
            f"tree={stats['tree'][1]} flat={stats['flat'][1]}",
        ),
        (
            "tree_run_lossless",
            stats["tree"][1] == 0 and stats["tree"][2] == 0,
            f"drops={stats['tree'][1]} undelivered={stats['tree'][2]}",
        ),
    ]
    return summary, checks


def parse_loq_sweep(scn: Scenario) -> dict:
    n_mps = scn.get_int("tree", "n", 9)
    loq = _inbound_params(scn, n_mps, "loq", use_tree=True)
    fifo = InboundParams(**{**loq.__dict__, "queue_mode": "fifo"})
    return {
        "loq": loq,
        "fifo": fifo,
        "n_mps": n_mps,
        "denoms": _int_list(scn, "experiment", "denominators", "3,5,7,9,11"),
        "seeds": scn.get_int("experiment", "seeds_per_point", 4),
        "crit_rate_s": scn.get_float("experiment", "critical_rate_s", 100.0),
        "duration_ms": scn.get_float("workload", "duration_ms", 30.0),
        "burst_factor": scn.get_float("workload", "burst_factor", 20.0),
        "burst_period_ms": scn.get_float("workload", "burst_period_ms", 10.0),
        "burst_duty": scn.get_float("workload", "burst_duty", 0.25),
        "initial_mid": scn.get_int("engine", "initial_mid", 100),
        "w": scn.get_int("engine", "w", 2),
    }


def exec_loq_sweep(cfg: dict, out: str) -> tuple[dict, list]:
    # Matching rate "during bursts" counts fills completed while the bursty
    # phase is still active (exec <= run end). First-fill-inside-each-window
    # counting is unusable here: queueing delay spans several window periods,
    # so which window a fill lands in is phase noise, not responsiveness.
    end_ns = int(cfg["duration_ms"] * NS_PER_MS)
    rows = []
    advantage = {}
    checks = []
    hash_parts = []
    for denom in cfg["denoms"]:
        agg = {"loq": [0, []], "fifo": [0, []]}  # in-run matched count, latencies
        for s in range(cfg["seeds"]):
            seed = cfg["loq"].seed + s
            wl = burst_orders(
                seed,
                n_mps=cfg["n_mps"],
                duration_ms=cfg["duration_ms"],
                base_rate_s=cfg["crit_rate_s"] * denom,
                burst_factor=cfg["burst_factor"],
                burst_period_ms=cfg["burst_period_ms"],
                burst_duty=cfg["burst_duty"],
                initial_mid=cfg["initial_mid"],
                w=cfg["w"],
                critical_pct=round(100 / denom),
            )
            hash_parts.append((denom, seed, len(wl)))
            medians = {}
            in_run = {}
            for mode in ("loq", "fifo"):
                params = InboundParams(**{**cfg[mode].__dict__, "seed": seed})
                res = run_inbound(params, wl)
                in_run[mode] = sum(1 for t in res.first_fill_ns.values() if t <= end_ns)
                lats = [t - g for (g, _), t in res.first_fill_ns.items()]
                agg[mode][0] += in_run[mode]
                agg[mode][1].extend(lats)
                medians[mode] = median(lats)
                if res.undelivered != 0:
                    checks.append(
                        (f"delivery_complete_d{denom}_s{s}_{mode}", False, "undelivered > 0")
                    )
            checks.append(
                (
                    f"loq_matches_no_later_d{denom}_s{s}",
                    medians["loq"] <= medians["fifo"],
                    f"loq={medians['loq']:.0f} fifo={medians['fifo']:.0f}",
                )
            )
            checks.append(
                (
                    f"loq_rate_not_worse_d{denom}_s{s}",
                    in_run["loq"] >= in_run["fifo"],
                    f"loq={in_run['loq']} fifo={in_run['fifo']}",
                )
            )
        adv = agg["loq"][0] / max(agg["fifo"][0], 1)
        advantage[denom] = adv
        rows.append(
            (
                denom,
                round(100 / denom),
                agg["loq"][0],
                agg["fifo"][0],
                f"{median(agg['loq'][1]):.0f}",
                f"{median(agg['fifo'][1]):.0f}",
                f"{adv:.4f}",
            )
        )
    _write_rows(
        os.path.join(out, "loq_sweep.csv"),
        [
            "denominator",
            "critical_pct",
            "loq_matched_in_run",
            "fifo_matched_in_run",
            "loq_median_latency_ns",
            "fifo_median_latency_ns",
            "rate_advantage",
        ],
        rows,
    )
    ds = cfg["denoms"]
    trend_ok = all(advantage[ds[i + 1]] >= advantage[ds[i]] for i in range(len(ds) - 1))
    checks.append(
        (
            "advantage_grows_with_nc_fraction",
            trend_ok,
            " -> ".join(f"1/{d}: {advantage[d]:.3f}" for d in ds),
        )
    )
    summary = {"workload_hash": _fingerprint("loq_sweep", *[p for t in hash_parts for p in t])}
    for d in ds:
        summary[f"advantage_denom{d}"] = f"{advantage[d]:.4f}"
    return summary, checks


def parse_unfairness(scn: Scenario) -> dict:
    return {
        "seed": scn.seed,
        "n_workloads": scn.get_int("experiment", "n_workloads", 60),
        "max_mps": scn.get_int("experiment", "max_mps", 5),
        "max_orders": scn.get_int("experiment", "max_orders", 140),
        "max_epochs": scn.get_int("experiment", "max_epochs", 3),
        "fanout": scn.get_int("tree", "fanout", 3),
        "depth": scn.get_int("tree", "depth", 2),
        "latency": scn.latency_model(),
    }


def _oracle_workload_dims(seed: int, k: int, cfg: dict) -> tuple[int, int, int]:
    n_mps = 1 + randint_span(hash64(seed, 0xFA, k, 0), 0, cfg["max_mps"] - 1)
    n_orders = randint_span(hash64(seed, 0xFA, k, 1), 20, cfg["max_orders"])
    n_epochs = 1 + randint_span(hash64(seed, 0xFA, k, 2), 0, cfg["max_epochs"] - 1)
    return n_mps, n_orders, n_epochs


def _oracle_pipeline(cfg: dict, seed: int, k: int, queue_mode: str):
    n_mps, n_orders, n_epochs = _oracle_workload_dims(seed, k, cfg)
    orders, script, m0 = fairness_workload(
        hash64(seed, 0xFB, k) % (2**31), n_mps=n_mps, n_orders=n_orders, n_epochs=n_epochs
    )
    params = InboundParams(
        n_mps=n_mps,
        seed=seed + k,
        use_tree=True,
        fanout_override=cfg["fanout"],
        depth_override=cfg["depth"],
        queue_mode=queue_mode,
        epoch_script=script,
        initial_mid=m0,
        latency=cfg["latency"],
    )
    return run_inbound(params, orders)


def exec_unfairness(cfg: dict, out: str) -> tuple[dict, list]:
    rows = []
    bad_ratio = 0
    bad_oracle = 0
    for k in range(cfg["n_workloads"]):
        for mode in ("fifo", "loq"):
            res = _oracle_pipeline(cfg, cfg["seed"], k, mode)
            rep = unfairness_ratio(res.arrivals, res.trades)
            oracle_ok = fairness_oracle(res).ok if mode == "loq" else True
            if mode == "fifo":
                keys = [(a.gen_ts, a.mp) for a in res.arrivals]
                oracle_ok = keys == sorted(keys)
            bad_ratio += rep.ratio != 0.0
            bad_oracle += not oracle_ok
            rows.append(
                (
                    k,
                    mode,
                    len(res.submitted),
                    len(res.trades),
                    rep.unfair_count,
                    rep.matched_count,
                    f"{rep.ratio:.6f}",
                    int(oracle_ok),
                )
            )
    _write_rows(
        os.path.join(out, "unfairness.csv"),
        ["workload", "mode", "orders", "trades", "unfair", "matched", "ratio", "ordering_ok"],
        rows,
    )
    summary = {
        "workload_hash": _fingerprint("unfairness", cfg["seed"], cfg["n_workloads"]),
        "workloads": cfg["n_workloads"],
        "nonzero_ratios": bad_ratio,
        "ordering_failures": bad_oracle,
    }
    checks = [
        ("all_ratios_zero", bad_ratio == 0, f"{bad_ratio} nonzero"),
        ("all_orderings_exact", bad_oracle == 0, f"{bad_oracle} failures"),
    ]
    return summary, checks


# -- montecarlo ---------------------------------------------------------------


def parse_montecarlo(scn: Scenario) -> dict:
    return {
        "seed": scn.seed,
        "fanout": scn.get_int("montecarlo", "fanout", 10),
        "depths": _int_list(scn, "montecarlo", "depths", "1,2,3,4"),
        "hedges": _int_list(scn, "montecarlo", "hedges", "0,1,2"),
        "fixed_depth": scn.get_int("montecarlo", "fixed_depth", 3),
        "iters": scn.get_int("montecarlo", "iters", 100_000),
        "dist": scn.get_choice("montecarlo", "dist", "uniform", ("uniform", "constant")),
        "hop_lo_us": scn.get_int("montecarlo", "hop_lo_us", 20),
        "hop_hi_us": scn.get_int("montecarlo", "hop_hi_us", 80),
        "hop_const_us": scn.get_int("montecarlo", "hop_const_us", 50),
    }


def exec_montecarlo(cfg: dict, out: str) -> tuple[dict, list]:
    def model(depth: int, hedge: int) -> HedgeModel:
        return HedgeModel(
            depth=depth,
            fanout=cfg["fanout"],
            hedge=hedge,
            dist=cfg["dist"],
            hop_lo_us=cfg["hop_lo_us"],
            hop_hi_us=cfg["hop_hi_us"],
            hop_const_us=cfg["hop_const_us"],
            iterations=cfg["iters"],
            seed=cfg["seed"],
        )

    combos = [(d, 0) for d in cfg["depths"]]
    combos += [(cfg["fixed_depth"], h) for h in cfg["hedges"] if (cfg["fixed_depth"], h) not in combos]
    rows = []
    stats = {}
    samples_at_fixed = {}
    for depth, hedge in combos:
        samples = run_model(model(depth, hedge))
        s = summarize(samples)
        dump_cdf_csv(os.path.join(out, f"cdf_d{depth}_f{cfg['fanout']}_h{hedge}.csv"), s)
        mean_us = s.mean_ns / NS_PER_US
        std_us = s.std_ns / NS_PER_US
        p50 = float(np.percentile(samples, 50)) / NS_PER_US
        p99 = float(np.percentile(samples, 99)) / NS_PER_US
        rows.append(
            (
                depth,
                cfg["fanout"],
                hedge,
                f"{mean_us:.3f}",
                f"{std_us:.3f}",
                f"{p50:.3f}",
                f"{p99:.3f}",
            )
        )
        stats[(depth, hedge)] = (mean_us, std_us)
        if depth == cfg["fixed_depth"]:
            samples_at_fixed[hedge] = samples
    _write_rows(
        os.path.join(out, "trends.csv"),
        ["depth", "fanout", "hedge", "mean_us", "std_us", "p50_us", "p99_us"],
        rows,
    )
    checks = []
    ds = cfg["depths"]
    for i in range(len(ds) - 1):
        a, b = stats[(ds[i], 0)], stats[(ds[i + 1], 0)]
        checks.append(
            (f"mean_grows_d{ds[i]}_to_d{ds[i+1]}", b[0] > a[0], f"{a[0]:.2f} -> {b[0]:.2f}")
        )
        checks.append(
            (f"std_grows_d{ds[i]}_to_d{ds[i+1]}", b[1] > a[1], f"{a[1]:.2f} -> {b[1]:.2f}")
        )
    hs = sorted(h for h in cfg["hedges"])
    for i in range(len(hs) - 1):
        a = stats[(cfg["fixed_depth"], hs[i])]
        b = stats[(cfg["fixed_depth"], hs[i + 1])]
        checks.append(
            (f"mean_falls_h{hs[i]}_to_h{hs[i+1]}", b[0] < a[0], f"{a[0]:.2f} -> {b[0]:.2f}")
        )
        checks.append(
            (f"std_falls_h{hs[i]}_to_h{hs[i+1]}", b[1] < a[1], f"{a[1]:.2f} -> {b[1]:.2f}")
        )
        pathwise = bool(np.all(samples_at_fixed[hs[i + 1]] <= samples_at_fixed[hs[i]]))
        checks.append(
            (
                f"pathwise_min_monotone_h{hs[i]}_to_h{hs[i+1]}",
                pathwise,
                "every shared-draw sample",
            )
        )
    summary = {
        "workload_hash": _fingerprint(
            "mc", cfg["seed"], cfg["iters"], cfg["dist"],
            cfg["hop_lo_us"], cfg["hop_hi_us"], cfg["hop_const_us"],
        )
    }
    for (d, h), (m, sd) in stats.items():
        summary[f"mean_us_d{d}_h{h}"] = f"{m:.3f}"
        summary[f"std_us_d{d}_h{h}"] = f"{sd:.3f}"
    return summary, checks


# -- oracles -------------------------------------------------------------------


def parse_seq_oracle(scn: Scenario) -> dict:
    return {
        "seed": scn.seed,
        "n_workloads": scn.get_int("experiment", "n_workloads", 1000),
        "max_sources": scn.get_int("experiment", "max_sources", 10),
        "max_orders": scn.get_int("experiment", "max_orders", 500),
        "heartbeat_period": scn.get_int("experiment", "heartbeat_period", 400),
    }


def _seq_oracle_one(seed: int, k: int, cfg: dict) -> tuple[int, int]:
    """Feed one randomized workload; returns (orders, mismatches).

    Heartbeats are emitted in source time (so their stamps respect each
    source's monotone gen_ts stream) and reach the gate over the same FIFO
    channel as the real orders, exactly as a silent gateway would keep the
    sequencer open.
    """
    h0 = hash64(seed, 0xE0, k)
    n_src = 1 + randint_span(h0, 0, cfg["max_sources"] - 1)
    n_orders = randint_span(hash64(seed, 0xE1, k), 0, cfg["max_orders"])
    period = cfg["heartbeat_period"]
    all_orders: list[Order] = []
    per_source_times: list[list[int]] = []
    per_source_orders: list[list[Order]] = []
    max_t = 0
    for src in range(n_src):
        count = n_orders // n_src + (1 if src < n_orders % n_src else 0)
        t = randint_span(hash64(seed, 0xE2, k, src), 0, 50)
        times: list[int] = []
        orders: list[Order] = []
        for i in range(count):
            t += 1 + randint_span(hash64(seed, 0xE3, k, src, i), 0, 40)
            o = Order(mp=src, gen_ts=t, price=100, qty=1)
            times.append(t)
            orders.append(o)
            all_orders.append(o)
            max_t = max(max_t, t)
        per_source_times.append(times)
        per_source_orders.append(orders)
    end_t = max_t + 2 * period + 1
    arrivals: list[tuple[int, int, int, Order]] = []
    for src in range(n_src):
        hb = HeartbeatState(mp=src, period_ns=period)
        emissions: list[tuple[int, Order]] = []
        oi = 0
        times, orders = per_source_times[src], per_source_orders[src]
        tick = period
        while tick <= end_t or oi < len(times):
            while oi < len(times) and times[oi] <= tick:
                hb.note_activity(times[oi])
                emissions.append((times[oi], orders[oi]))
                oi += 1
            d = hb.maybe_emit(tick)
            if d is not None:
                emissions.append((tick, d))
            tick += period
        arr = 0
        for j, (emit_t, o) in enumerate(emissions):
            delay = randint_span(hash64(seed, 0xE4, k, src, j), 1, 300)
            arr = max(arr + 1, emit_t + delay)  # FIFO channel keeps source order
            arrivals.append((arr, src, j, o))
    arrivals.sort(key=lambda x: (x[0], x[1], x[2]))
    seq = Sequencer(n_src, keep_trace=False)
    released: list[Order] = []
    for _, src, _, o in arrivals:
        seq.enqueue(o, src)
        released.extend(seq.drain())
    expected = sorted(all_orders, key=lambda o: (o.gen_ts, o.mp))
    mism = sum(
        1
        for a, b in zip(released, expected)
        if (a.gen_ts, a.mp) != (b.gen_ts, b.mp)
    ) + abs(len(released) - len(expected))
    return len(all_orders), mism


def exec_seq_oracle(cfg: dict, out: str) -> tuple[dict, list]:
    total = 0
    mismatches = 0
    failed = 0
    for k in range(cfg["n_workloads"]):
        n, m = _seq_oracle_one(cfg["seed"], k, cfg)
        total += n
        mismatches += m
        failed += m > 0
    _write_rows(
        os.path.join(out, "seq_oracle.csv"),
        ["workloads", "orders_total", "workloads_failed", "mismatched_positions"],
        [(cfg["n_workloads"], total, failed, mismatches)],
    )
    summary = {
        "workload_hash": _fingerprint("seq_oracle", cfg["seed"], cfg["n_workloads"]),
        "workloads": cfg["n_workloads"],
        "orders_total": total,
        "mismatches": mismatches,
    }
    return summary, [("released_equals_sorted_merge", mismatches == 0, f"{failed} workloads failed")]


def parse_loq_oracle(scn: Scenario) -> dict:
    return {
        "seed": scn.seed,
        "n_workloads": scn.get_int("experiment", "n_workloads", 500),
        "max_mps": scn.get_int("experiment", "max_mps", 5),
        "max_orders": scn.get_int("experiment", "max_orders", 200),
        "max_epochs": scn.get_int("experiment", "max_epochs", 3),
        "fanout": scn.get_int("tree", "fanout", 3),
        "depth": scn.get_int("tree", "depth", 2),
        "latency": scn.latency_model(),
    }


def exec_loq_oracle(cfg: dict, out: str) -> tuple[dict, list]:
    failures = 0
    trades_total = 0
    orders_total = 0
    first_bad = None
    for k in range(cfg["n_workloads"]):
        res = _oracle_pipeline(cfg, cfg["seed"], k, "loq")
        rep = fairness_oracle(res)
        if not (rep.ok and res.undelivered == 0):
            failures += 1
            if first_bad is None:
                first_bad = k
        trades_total += rep.n_pipeline_trades
        orders_total += len(res.submitted)
    _write_rows(
        os.path.join(out, "loq_oracle.csv"),
        ["workloads", "orders_total", "trades_total", "failures"],
        [(cfg["n_workloads"], orders_total, trades_total, failures)],
    )
    summary = {
        "workload_hash": _fingerprint("loq_oracle", cfg["seed"], cfg["n_workloads"]),
        "workloads": cfg["n_workloads"],
        "trades_total": trades_total,
        "failures": failures,
    }
    detail = "all equal" if failures == 0 else f"{failures} failed, first at workload {first_bad}"
    return summary, [("pipeline_trades_equal_oracle", failures == 0, detail)]


def parse_engine_oracle(scn: Scenario) -> dict:
    return {
        "seed": scn.seed,
        "n_instances": scn.get_int("experiment", "n_instances", 1000),
        "max_orders": scn.get_int("experiment", "max_orders", 50),
    }


def exec_engine_oracle(cfg: dict, out: str) -> tuple[dict, list]:
    failures = 0
    trades_total = 0
    for k in range(cfg["n_instances"]):
        orders = engine_instance(hash64(cfg["seed"], 0xEE, k) % (2**31), cfg["max_orders"])
        eng = MatchingEngine()
        got = []
        for i, o in enumerate(sorted(orders, key=lambda o: o.key())):
            got.extend(t.essence() for t in eng.submit(o, exec_ts=i))
        expected = reference_match(sorted(orders, key=lambda o: o.key()))
        failures += got != expected
        trades_total += len(got)
    _write_rows(
        os.path.join(out, "engine_oracle.csv"),
        ["instances", "trades_total", "failures"],
        [(cfg["n_instances"], trades_total, failures)],
    )
    summary = {
        "workload_hash": _fingerprint("engine_oracle", cfg["seed"], cfg["n_instances"]),
        "instances": cfg["n_instances"],
        "trades_total": trades_total,
        "failures": failures,
    }
    return summary, [("trades_match_brute_force", failures == 0, f"{failures} instances differ")]


def parse_dedup_oracle(scn: Scenario) -> dict:
    nbuf = scn.get_int("experiment", "nbuf", 1024)
    window = scn.get_int("experiment", "window", 512)
    if window >= nbuf:
        raise ConfigError("[experiment] window: must be < nbuf for bounded reordering")
    return {
        "seed": scn.seed,
        "n_ids": scn.get_int("experiment", "n_ids", 1_000_000),
        "nbuf": nbuf,
        "window": window,
        "dup_pct": scn.get_int("experiment", "dup_pct", 30),
    }


def exec_dedup_oracle(cfg: dict, out: str) -> tuple[dict, list]:
    buf = DedupBuffer(cfg["nbuf"])
    seen: set[int] = set()
    head = 0
    mismatches = 0
    dups = 0
    for i in range(cfg["n_ids"]):
        h = hash64(cfg["seed"], 0xDD, i)
        if randint_span(h, 1, 100) <= cfg["dup_pct"] and head > 0:
            back = randint_span(hash64(h, 1), 0, min(cfg["window"] - 1, head))
            msg_id = head - back
        else:
            head += 1
            msg_id = head
        expected = DUPLICATE if msg_id in seen else ACCEPT
        got = dedup_accept(buf, msg_id)
        mismatches += got != expected
        dups += expected == DUPLICATE
        seen.add(msg_id)

    # wraparound: a stale id one full buffer behind must be flagged, not accepted
    wrap = DedupBuffer(cfg["nbuf"])
    assert dedup_accept(wrap, 7) == ACCEPT
    assert dedup_accept(wrap, 7 + cfg["nbuf"]) == ACCEPT
    stale = dedup_accept(wrap, 7)
    wrap_flagged = stale == ERROR and wrap.violations == 1

    _write_rows(
        os.path.join(out, "dedup_oracle.csv"),
        ["ids", "duplicates", "mismatches", "violations_in_window", "wraparound_flagged"],
        [(cfg["n_ids"], dups, mismatches, buf.violations, int(wrap_flagged))],
    )
    summary = {
        "workload_hash": _fingerprint("dedup", cfg["seed"], cfg["n_ids"], cfg["nbuf"]),
        "ids": cfg["n_ids"],
        "duplicates": dups,
        "mismatches": mismatches,
        "violations": buf.violations,
    }
    checks = [
        ("filter_matches_hash_set", mismatches == 0, f"{mismatches} disagreements"),
        ("no_spurious_violations", buf.violations == 0, f"{buf.violations} flagged in-window"),
        ("wraparound_flagged", wrap_flagged, f"stale id outcome: {stale}"),
    ]
    return summary, checks


# -- dispatch ------------------------------------------------------------------

_KIND_TABLE = {
    "outbound": (parse_outbound, exec_outbound),
    "hold_exact": (parse_hold_exact, exec_hold_exact),
    "fair_trend": (parse_fair_trend, exec_fair_trend),
    "hedge_sweep": (parse_hedge_sweep, exec_hedge_sweep),
    "maxrate": (parse_maxrate, exec_maxrate),
    "spike_ab": (parse_spike_ab, exec_spike_ab),
    "inbound": (parse_inbound, exec_inbound),
    "inbound_tree_ab": (parse_inbound_tree_ab, exec_inbound_tree_ab),
    "loq_sweep": (parse_loq_sweep, exec_loq_sweep),
    "unfairness": (parse_unfairness, exec_unfairness),
    "montecarlo": (parse_montecarlo, exec_montecarlo),
    "seq_oracle": (parse_seq_oracle, exec_seq_oracle),
    "loq_oracle": (parse_loq_oracle, exec_loq_oracle),
    "engine_oracle": (parse_engine_oracle, exec_engine_oracle),
    "dedup_oracle": (parse_dedup_oracle, exec_dedup_oracle),
}


def run_scenario(scn: Scenario, out_base: str = "out") -> str:
    """Parse, validate, execute, and write outputs. Returns the output dir."""
    name = scn.name
    kind = scn.kind
    seed = scn.seed
    out = scn.output_dir(out_base)
    parse, execute = _KIND_TABLE[kind]
    cfg = parse(scn)
    scn.reject_unknown_keys()

    if os.path.isdir(out):
        shutil.rmtree(out)
    os.makedirs(out)
    try:
        with open(os.path.join(out, "resolved.ini"), "w") as f:
            f.write(scn.resolved_text())
        summary, checks = execute(cfg, out)
        ordered = {"scenario": name, "kind": kind, "seed": seed}
        ordered.update(summary)
        for cname, ok, detail in checks:
            ordered[f"check_{cname}"] = "pass" if ok else f"FAIL ({detail})"
        _write_summary(os.path.join(out, "summary.csv"), ordered)
    except Exception:
        shutil.rmtree(out, ignore_errors=True)  # never leave partial outputs
        raise
    failed = [(c, d) for c, ok, d in checks if not ok]
    if failed:
        lines = "; ".join(f"{c}: {d}" for c, d in failed)
        raise CheckFailure(f"scenario {name}: {len(failed)} check(s) failed: {lines}")
    return out


# -- compare -------------------------------------------------------------------


def load_summary(run_dir: str) -> dict[str, str]:
    path = os.path.join(run_dir, "summary.csv")
    if not os.path.isfile(path):
        raise ConfigError(f"not a completed run directory (no summary.csv): {run_dir}")
    out = {}
    with open(path, newline="") as f:
        r = csv.reader(f)
        next(r, None)
        for row in r:
            if len(row) == 2:
                out[row[0]] = row[1]
    return out


def compare_runs(dir_a: str, dir_b: str, metric: str) -> tuple[dict[str, int], str]:
    """Percentile deltas (b - a) for one metric, plus a sign verdict."""
    a = load_summary(dir_a)
    b = load_summary(dir_b)
    ha, hb = a.get("workload_hash"), b.get("workload_hash")
    if ha is None or hb is None:
        raise ConfigError("workload_hash missing from a summary; cannot compare")
    if ha != hb:
        raise ConfigError(
            f"workload hashes differ ({ha[:12]}.. vs {hb[:12]}..); refusing to compare"
        )
    deltas = {}
    for tag in ("p50", "p90", "p99"):
        key = f"{metric}_{tag}"
        if key not in a or key not in b:
            known = sorted(
                {k.rsplit("_", 1)[0] for k in a if k.endswith(("_p50", "_p90", "_p99"))}
            )
            raise ConfigError(f"metric {metric!r} not in both summaries; available: {known}")
        deltas[tag] = int(b[key]) - int(a[key])
    if all(v == 0 for v in deltas.values()):
        sign = "flat"
    elif all(v <= 0 for v in deltas.values()):
        sign = "improved"
    elif all(v >= 0 for v in deltas.values()):
        sign = "regressed"
    else:
        sign = "mixed"
    return deltas, sign
