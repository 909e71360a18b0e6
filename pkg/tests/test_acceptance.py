"""Release acceptance suite: fourteen checks, one verdict line each.

Every check drives one named scenario from scenarios/ at full scale through
the library runner and relies on the scenario's built-in pass/fail
conditions; the verdict line carries the headline numbers. Run with -s to
see the lines as they complete. The determinism check reruns every shipped
scenario and compares all CSV outputs byte for byte.
"""

import glob
import os

import pytest

from fairex.runner import CheckFailure, load_summary, run_scenario
from fairex.scenario import load_scenario

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIO_DIR = os.path.join(REPO, "scenarios")

_cache: dict[tuple[str, str], tuple[str, Exception | None]] = {}
_base: dict[str, str] = {}


@pytest.fixture(scope="session", autouse=True)
def _bases(tmp_path_factory):
    _base["a"] = str(tmp_path_factory.mktemp("accept_a"))
    _base["b"] = str(tmp_path_factory.mktemp("accept_b"))


def run_shipped(name: str, base: str = "a") -> tuple[str, Exception | None]:
    key = (name, base)
    if key not in _cache:
        scn = load_scenario(os.path.join(SCENARIO_DIR, f"{name}.ini"))
        exc = None
        try:
            out = run_scenario(scn, out_base=_base[base])
        except CheckFailure as e:
            exc = e
            out = os.path.join(_base[base], name)
        _cache[key] = (out, exc)
    return _cache[key]


def verdict(tag: str, label: str, name: str, detail_fn) -> None:
    out, exc = run_shipped(name)
    ok = exc is None
    detail = detail_fn(load_summary(out)) if ok else str(exc)
    print(f"\n{tag} {label}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{tag} {label}: {detail}"


def test_c01_sequencer_exactness():
    verdict(
        "C01",
        "sequencer equals timestamp-sorted merge",
        "seq-oracle",
        lambda s: (
            f"{s['workloads']} workloads, {s['orders_total']} orders, "
            f"{s['mismatches']} mismatches"
        ),
    )


def test_c02_pipeline_trade_exactness():
    verdict(
        "C02",
        "pipeline trades equal timestamp oracle",
        "loq-oracle",
        lambda s: (
            f"{s['workloads']} workloads, {s['trades_total']} trades, "
            f"{s['failures']} divergences"
        ),
    )


def test_c03_engine_equivalence():
    verdict(
        "C03",
        "engine matches brute-force reference",
        "engine-oracle",
        lambda s: (
            f"{s['instances']} instances, {s['trades_total']} trades, "
            f"{s['failures']} mismatches"
        ),
    )


def test_c04_hold_release_bounds():
    verdict(
        "C04",
        "hold-and-release DWS bounds exact",
        "hold-release-exact",
        lambda s: "DWS=0 at err=0 and DWS<=2*err at err=100ns, N in {10,100}",
    )


def test_c05_fairness_trend():
    verdict(
        "C05",
        "fairness probability trend vs receiver count",
        "fairness-trend",
        lambda s: (
            f"P(F) {s['p_fair_n100']}@N=100 -> {s['p_fair_n1000']}@N=1000, "
            f"oml p99 {s['oml_p99_n100']} -> {s['oml_p99_n1000']}"
        ),
    )


def test_c06_hedging_effect():
    verdict(
        "C06",
        "hedging improves tails, copies exact",
        "hedging",
        lambda s: (
            f"oml p99 {s['oml_p99_h0']}/{s['oml_p99_h1']}/{s['oml_p99_h2']}, "
            f"dws p99 {s['dws_p99_h0']}/{s['dws_p99_h1']}/{s['dws_p99_h2']}"
        ),
    )


def test_c07_goodput_law():
    verdict(
        "C07",
        "packets per message exact, rate halves with hedge",
        "goodput",
        lambda s: (
            f"max rate {s['max_rate_h0']} (H=0) vs {s['max_rate_h1']} (H=1), "
            f"halving error {s['halving_error_frac']}"
        ),
    )


def test_c08_spike_containment():
    verdict(
        "C08",
        "rotation contains per-link spikes",
        "rrps-spike",
        lambda s: (
            f"inflated fraction {s['inflated_frac_rrps_on']} with rotation "
            f"vs {s['inflated_frac_rrps_off']} without"
        ),
    )


def test_c09_inbound_tree_benefit():
    verdict(
        "C09",
        "reverse tree survives incast bursts",
        "inbound-tree",
        lambda s: (
            f"burst receives {s['tree_recv_in_burst']} tree vs "
            f"{s['flat_recv_in_burst']} flat, drops {s['tree_drops']} vs {s['flat_drops']}"
        ),
    )


def test_c10_loq_vs_fifo():
    verdict(
        "C10",
        "LOQ beats FIFO under bursts",
        "loq-vs-fifo",
        lambda s: (
            "rate advantage "
            + " -> ".join(f"{s[f'advantage_denom{d}']}" for d in (3, 5, 7, 9, 11))
        ),
    )


def test_c11_unfairness_zero():
    verdict(
        "C11",
        "unfairness ratio zero on oracle workloads",
        "unfairness-zero",
        lambda s: (
            f"{s['workloads']} workloads x (fifo, loq), "
            f"{s['nonzero_ratios']} nonzero ratios, "
            f"{s['ordering_failures']} ordering failures"
        ),
    )


def test_c12_model_trends():
    verdict(
        "C12",
        "latency model trends in depth and hedge",
        "montecarlo-trends",
        lambda s: (
            f"mean us {s['mean_us_d1_h0']} -> {s['mean_us_d4_h0']} over depth, "
            f"{s['mean_us_d3_h0']} -> {s['mean_us_d3_h2']} over hedge"
        ),
    )


def test_c13_dedup_exactness():
    verdict(
        "C13",
        "dedup filter agrees with hash-set oracle",
        "dedup-oracle",
        lambda s: (
            f"{s['ids']} ids, {s['duplicates']} duplicates, "
            f"{s['mismatches']} mismatches, wraparound flagged"
        ),
    )


def test_c14_determinism():
    names = sorted(
        os.path.splitext(os.path.basename(p))[0]
        for p in glob.glob(os.path.join(SCENARIO_DIR, "*.ini"))
    )
    assert len(names) >= 14, "expected at least one shipped scenario per check"
    mismatched = []
    compared = 0
    for name in names:
        out_a, _ = run_shipped(name, "a")
        out_b, _ = run_shipped(name, "b")
        csvs = sorted(glob.glob(os.path.join(out_a, "*.csv")))
        assert csvs, f"{name} produced no CSV output"
        for pa in csvs:
            pb = os.path.join(out_b, os.path.basename(pa))
            compared += 1
            if open(pa, "rb").read() != open(pb, "rb").read():
                mismatched.append(f"{name}/{os.path.basename(pa)}")
    ok = not mismatched
    tail = "" if ok else ", differs: " + ", ".join(mismatched)
    print(
        f"\nC14 same-seed reruns byte-identical: {'PASS' if ok else 'FAIL'} "
        f"({len(names)} scenarios, {compared} csv files{tail})"
    )
    assert ok, tail
