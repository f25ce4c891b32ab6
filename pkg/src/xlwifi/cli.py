"""Command line front end: scenario runs, sweeps, and table emission.

Every artifact of one invocation lands in a single output directory with a
manifest JSON describing what produced it. Scenario positional arguments
accept either a file path or the name of a bundled preset; `--set` applies
`section.key=value` overrides on top, and the XLWIFI_SEED environment
variable overrides the seed last. Config problems exit 2 with the
offending field path; internal faults exit 1.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

import numpy as np

from . import analytics, rates
from .engine import run_scenario
from .errors import ConfigError, NonFinite, UndefinedMcs
from .precoding import (
    bd_precoders,
    evaluate_sinr,
    perturb_precoder,
    quantization_sigma,
    svd_su_precoder,
    zf_precoders,
)
from .scenario import (
    ScenarioConfig,
    _parse_scalar,
    config_from_mapping,
    dumps,
    parse_text,
)


def _scenario_dir():
    return resources.files("xlwifi").joinpath("data", "scenarios")


def bundled_presets() -> list[str]:
    return sorted(
        p.name[: -len(".scn")] for p in _scenario_dir().iterdir() if p.name.endswith(".scn")
    )


def _load_scenario_text(name: str) -> tuple[str, str]:
    """Return (source label, text) for a path or a bundled preset name."""
    if os.path.exists(name):
        with open(name, "r", encoding="utf-8") as fh:
            return name, fh.read()
    stem = name if name.endswith(".scn") else name + ".scn"
    res = _scenario_dir().joinpath(stem)
    if res.is_file():
        return stem, res.read_text(encoding="utf-8")
    raise ConfigError(
        "scenario", f"{name!r} is neither a file nor a bundled preset {bundled_presets()}"
    )


def _apply_set(mapping: dict, assignments: list[str]) -> None:
    for item in assignments:
        if "=" not in item:
            raise ConfigError("--set", f"expected section.key=value, got {item!r}")
        path, _, raw = item.partition("=")
        path = path.strip()
        if "." not in path:
            raise ConfigError(path or "--set", "override key must be section.key")
        section, key = path.split(".", 1)
        if "," in raw:
            value: object = tuple(_parse_scalar(v) for v in raw.split(","))
        else:
            value = _parse_scalar(raw)
        mapping.setdefault(section, {})[key] = value


def _resolve(mapping: dict) -> ScenarioConfig:
    env_seed = os.environ.get("XLWIFI_SEED")
    if env_seed is not None:
        try:
            mapping.setdefault("general", {})["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError("XLWIFI_SEED", f"not an integer: {env_seed!r}") from None
    return config_from_mapping(mapping)


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _emit(text: str, out: str | None) -> None:
    if out:
        _write(out, text)
    else:
        sys.stdout.write(text)


def _run_dir(base: str | None, label: str) -> str:
    stem = os.path.splitext(os.path.basename(label))[0]
    path = base or os.path.join("runs", stem)
    os.makedirs(path, exist_ok=True)
    return path


def _manifest(path: str, **fields) -> None:
    _write(os.path.join(path, "manifest.json"), json.dumps(fields, sort_keys=True, indent=2) + "\n")


def _run_one(mapping: dict, out_dir: str) -> dict:
    cfg = _resolve(mapping)
    result = run_scenario(cfg)
    _write(os.path.join(out_dir, "metrics.csv"), result.log.csv_text())
    _write(os.path.join(out_dir, "summary.json"), result.log.json_text())
    _write(os.path.join(out_dir, "config.scn"), dumps(cfg))
    s = result.summary
    return {
        "seed": cfg.seed,
        "throughput_mbps": result.mean_throughput_mbps(),
        "delivered": sum(c["delivered"] for c in s["flows"].values()),
        "dropped": sum(c["dropped"] for c in s["flows"].values()),
        "txops": s["txops"],
        "collisions": s["collisions"],
        "conserved": s["conserved"],
    }


def cmd_run(args) -> int:
    label, text = _load_scenario_text(args.scenario)
    mapping = parse_text(text)
    _apply_set(mapping, args.set or [])
    out_dir = _run_dir(args.out, label)
    row = _run_one(mapping, out_dir)
    _manifest(
        out_dir,
        command="run",
        scenario=label,
        overrides=sorted(args.set or []),
        seed=row["seed"],
        artifacts=["config.scn", "metrics.csv", "summary.json"],
    )
    print(
        f"{label}: {row['throughput_mbps']:.3f} Mbps, txops={row['txops']}, "
        f"collisions={row['collisions']}, conserved={row['conserved']}"
    )
    return 0


def _sweep_point(payload) -> tuple[str, dict]:
    mapping, out_dir = payload
    return out_dir, _run_one(mapping, out_dir)


def cmd_sweep(args) -> int:
    label, text = _load_scenario_text(args.scenario)
    base = parse_text(text)
    _apply_set(base, args.set or [])
    paths = [p.strip() for p in args.param.split(",")]
    for p in paths:
        if "." not in p:
            raise ConfigError(p, "sweep parameter must be section.key")
    values = [_parse_scalar(v) for v in args.values.split(",")]
    out_dir = _run_dir(args.out, label)

    jobs = []
    for value in values:
        mapping = copy.deepcopy(base)
        for p in paths:
            section, key = p.split(".", 1)
            mapping.setdefault(section, {})[key] = value
        point_dir = os.path.join(out_dir, f"{paths[0].split('.', 1)[1]}={value}")
        os.makedirs(point_dir, exist_ok=True)
        jobs.append((mapping, point_dir))
    # every point is an independent deterministic run, so ordering and
    # parallelism degree cannot change any output byte
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]

    buf = io.StringIO()
    # csv quoting keeps a multi-key --param (which contains commas) one field
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["param", "value", "throughput_mbps", "delivered", "dropped",
         "txops", "collisions", "conserved"]
    )
    for value, (_, row) in zip(values, results):
        writer.writerow(
            [args.param, value, f"{row['throughput_mbps']:.4f}", row["delivered"],
             row["dropped"], row["txops"], row["collisions"], str(row["conserved"]).lower()]
        )
    _write(os.path.join(out_dir, "sweep.csv"), buf.getvalue())
    _manifest(
        out_dir,
        command="sweep",
        scenario=label,
        param=args.param,
        values=[str(v) for v in values],
        overrides=sorted(args.set or []),
        artifacts=["sweep.csv"],
    )
    print(f"{label}: swept {args.param} over {len(values)} points -> {out_dir}/sweep.csv")
    return 0


def _exchanges_csv() -> str:
    lines = ["standard,rate_mbps,msdu_octets,n_mpdus,ack,duration_us,throughput_mbps,efficiency"]
    for r in analytics.reference_exchanges():
        lines.append(
            f"{r['standard']},{r['rate_mbps']:g},{r['msdu_octets']},{r['n_mpdus']},{r['ack']},"
            f"{r['duration_us']:.1f},{r['throughput_mbps']:.4f},{r['efficiency']:.4f}"
        )
    return "\n".join(lines) + "\n"


def _saturation_csv() -> str:
    lines = ["scenario,scheme,sounding_interval_ms,throughput_mbps"]
    for r in analytics.saturation_grid():
        lines.append(
            f"{r['scenario']},{r['scheme']},{r['sounding_interval_ms']:g},{r['throughput_mbps']:.4f}"
        )
    return "\n".join(lines) + "\n"


def _ah_capacity_csv(msdu: int, cycle_s: float, bandwidths: list[int]) -> str:
    lines = ["bandwidth_mhz,mcs_index,scheme,duration_us,max_stations"]
    for bw in bandwidths:
        for r in analytics.ah_capacity_rows(bw, msdu, cycle_s):
            lines.append(
                f"{bw},{r['mcs_index']},{r['scheme']},{r['duration_us']:.1f},{r['max_stations']}"
            )
    return "\n".join(lines) + "\n"


def cmd_analytics(args) -> int:
    if args.table == "exchanges":
        _emit(_exchanges_csv(), args.out)
    elif args.table == "saturation":
        _emit(_saturation_csv(), args.out)
    else:
        bandwidths = [1, 2] if args.bandwidth == "both" else [int(args.bandwidth)]
        _emit(_ah_capacity_csv(args.msdu, args.cycle, bandwidths), args.out)
    return 0


def cmd_dump_mcs(args) -> int:
    lines = ["standard,bandwidth_mhz,index,n_ss,gi,rate_bps"]
    for r in rates.mcs_catalog():
        lines.append(
            f"{r['standard']},{r['bandwidth_mhz']},{r['index']},{r['n_ss']},{r['gi']},{r['rate_bps']}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_precode_check(args) -> int:
    rng = np.random.default_rng(args.seed)

    def cplx(n, m):
        return (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / math.sqrt(2)

    def check(name, ok):
        if not ok:
            print(f"FAIL: {name}")
            raise NonFinite(name)
        print(f"ok: {name}")

    users = [cplx(1, 4) for _ in range(3)]
    pset = zf_precoders(users)
    cross = max(
        abs((users[i] @ pset.effective(j)).item())
        for i in range(3)
        for j in range(3)
        if i != j
    )
    check("channel inversion zeroes cross-user interference", cross < 1e-9)
    total = sum(float(np.linalg.norm(pset.effective(u)) ** 2) for u in range(3))
    check("transmit power splits to the antenna budget", abs(total - 4.0) < 1e-9)

    pair = [cplx(2, 6), cplx(2, 6)]
    bset = bd_precoders(pair)
    leak = max(
        float(np.linalg.norm(pair[i] @ bset.effective(j)))
        for i in range(2)
        for j in range(2)
        if i != j
    )
    check("block diagonalization leaks nothing across blocks", leak < 1e-9)

    H = cplx(2, 4)
    sset = svd_su_precoder(H, n_ss=1)
    sinr = evaluate_sinr([H], sset, 1e-2)[0]
    sigma1 = float(np.linalg.svd(H, compute_uv=False)[0])
    check(
        "single-user SVD hits the dominant-mode SNR",
        abs(10 ** (sinr / 10) - sigma1**2 * 4 / 1e-2) < 1e-6 * sigma1**2 * 400,
    )

    coarse = quantization_sigma(2, 4)
    fine = quantization_sigma(5, 7)
    check("more feedback bits mean less quantization noise", fine < coarse)
    basis = np.linalg.qr(cplx(4, 2))[0]
    q = perturb_precoder(basis, fine, rng)
    check(
        "perturbed steering basis stays orthonormal",
        float(np.linalg.norm(q.conj().T @ q - np.eye(2))) < 1e-9,
    )
    print("all precoding checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xlwifi",
        description="Cross-layer WLAN simulator and analytics tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and write its artifacts")
    run_p.add_argument("scenario", help="scenario file path or bundled preset name")
    run_p.add_argument("--out", help="output directory (default runs/<scenario>)")
    run_p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config value; repeatable")
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a scenario once per parameter value")
    sweep_p.add_argument("scenario")
    sweep_p.add_argument("--param", required=True,
                         help="section.key to vary (comma list sets several keys at once)")
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated values (use --values=-10,0,10 for negatives)")
    sweep_p.add_argument("--out", help="output directory")
    sweep_p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    sweep_p.add_argument("--jobs", type=int, default=1, help="parallel runs")
    sweep_p.set_defaults(func=cmd_sweep)

    ana_p = sub.add_parser("analytics", help="emit closed-form tables as CSV")
    ana_sub = ana_p.add_subparsers(dest="table", required=True)
    ex_p = ana_sub.add_parser("exchanges", help="single-exchange duration/efficiency grid")
    ex_p.add_argument("--out")
    ex_p.set_defaults(func=cmd_analytics)
    sat_p = ana_sub.add_parser("saturation", help="downlink saturation throughput grid")
    sat_p.add_argument("--out")
    sat_p.set_defaults(func=cmd_analytics)
    ah_p = ana_sub.add_parser("ah-capacity", help="sub-GHz sensor capacity per ACK scheme")
    ah_p.add_argument("--msdu", type=int, default=64, help="sensor payload octets")
    ah_p.add_argument("--cycle", type=float, default=5.0, help="refresh cycle in seconds")
    ah_p.add_argument("--bandwidth", choices=["1", "2", "both"], default="both")
    ah_p.add_argument("--out")
    ah_p.set_defaults(func=cmd_analytics)

    dump_p = sub.add_parser("dump-mcs", help="emit the full MCS catalog as CSV")
    dump_p.add_argument("--out")
    dump_p.set_defaults(func=cmd_dump_mcs)

    chk_p = sub.add_parser("precode-check", help="verify precoding invariants")
    chk_p.add_argument("--seed", type=int, default=1)
    chk_p.set_defaults(func=cmd_precode_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UndefinedMcs) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal faults
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
