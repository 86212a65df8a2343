"""Command-line entry point: ``vanetauth <subcommand>``.

Exit status is 0 on success, 1 when a protocol check or scenario assertion
fails, and 2 for usage, configuration or state-directory problems.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import bench, store
from .baseline import BaselineTA, BaselineTaSecrets, SystemParams, baseline_setup, pad_id
from .errors import (
    AssertionFailed,
    ConfigError,
    ProtocolError,
    StateExists,
    UnknownList,
    VanetError,
)
from .primitives import default_rng, keypair_from_secret, keypair_generate
from .proposed import TrustedAuthority
from .scenario import ScenarioRunner, bundled_scenarios, parse_scenario
from .simnet import SimConfig, Simulator

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

NOT_FOR_PRODUCTION = (
    "NOTICE: this state directory holds TA and RSU secrets in plain files.\n"
    "It exists to drive a simulator and is NOT suitable for production use."
)

TA_SECRET = "ta_secret"
BASELINE_PARAMS = "baseline_params"
BASELINE_SECRET = "baseline_secret"
RSU_KEYS = "rsu_keys"
LISTS = {
    "registration": "registration.jsonl",
    "auth_list": "auth_list.jsonl",
    "message_log": "message_log.jsonl",
    "baseline_registration": "baseline_registration.jsonl",
}


@dataclass
class CliConfig:
    state_dir: Path = Path("vanet-state")
    sim: SimConfig = field(default_factory=SimConfig)
    modulus_bits: int = 2048
    fp_target: float = 0.01
    output_format: str = "csv"
    rsus: tuple[str, ...] = ("rsu0",)

    def __post_init__(self):
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"output_format must be csv or json, not {self.output_format!r}")
        if not 0 < self.fp_target < 1:
            raise ConfigError("fp_target must be in (0, 1)")
        if self.modulus_bits < 16:
            raise ConfigError("modulus_bits must be at least 16")
        if not self.rsus:
            raise ConfigError("at least one RSU name is required")


_SIM_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}
_TOP_KEYS = {"state_dir", "modulus_bits", "fp_target", "output_format", "rsus"}


def _coerce(key: str, raw: str):
    try:
        if key in ("wireless_latency_ms", "secure_latency_ms"):
            lo, hi = (int(v) for v in raw.split(","))
            return (lo, hi)
        if key in ("fp_target", "wireless_drop_rate"):
            return float(raw)
        if key == "retry_timeout_ms":
            return None if raw.lower() in ("", "none") else int(raw)
        if key in ("state_dir",):
            return Path(raw)
        if key == "output_format":
            return raw
        if key == "rsus":
            return tuple(n.strip() for n in raw.split(",") if n.strip())
        return int(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def read_config_file(path: Path | str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",))
    try:
        cp.read_string("[vanetauth]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = {}
    for key, raw in cp["vanetauth"].items():
        if key not in _TOP_KEYS and key not in _SIM_FIELDS:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        out[key] = _coerce(key, raw.strip())
    return out


def build_config(file_values: dict, overrides: dict) -> CliConfig:
    merged = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
    sim_args = {k: v for k, v in merged.items() if k in _SIM_FIELDS}
    # fp_target and modulus_bits are shared with the simulator
    for shared in ("fp_target", "modulus_bits"):
        if shared in merged:
            sim_args[shared] = merged[shared]
    try:
        sim = SimConfig(**sim_args)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    top = {k: v for k, v in merged.items() if k in _TOP_KEYS}
    return CliConfig(sim=sim, **top)


# -- state directory --------------------------------------------------------

def _require_state(cfg: CliConfig) -> Path:
    d = Path(cfg.state_dir)
    if not (d / TA_SECRET).is_file():
        raise ConfigError(f"{d} is not an initialized state directory (run setup first)")
    return d


def _load_ta(d: Path) -> TrustedAuthority:
    secret = bytes.fromhex(store.read_json(d / TA_SECRET)["master_secret"])
    ta = TrustedAuthority(secret)
    ta.load_records(store.read_jsonl(d / LISTS["registration"]))
    return ta


def _load_baseline(d: Path) -> BaselineTA:
    params = SystemParams.from_json(store.read_json(d / BASELINE_PARAMS))
    secrets = BaselineTaSecrets.from_json(store.read_json(d / BASELINE_SECRET))
    bta = BaselineTA(params, secrets)
    for row in store.read_jsonl(d / LISTS["baseline_registration"]):
        bta.registered.add(pad_id(bytes.fromhex(row["id"])))
    return bta


def _load_rsu_keys(d: Path) -> dict:
    rows = store.read_json(d / RSU_KEYS)
    return {name: keypair_from_secret(bytes.fromhex(sec)) for name, sec in rows.items()}


def cmd_setup(cfg: CliConfig, out) -> int:
    d = Path(cfg.state_dir)
    if d.exists() and (not d.is_dir() or any(d.iterdir())):
        raise StateExists(f"{d} already exists and is not empty")
    d.mkdir(parents=True, exist_ok=True)
    with store.dir_lock(d):
        rng = default_rng()
        params, secrets = baseline_setup(cfg.modulus_bits, rng)
        rsu_keys = {name: keypair_generate(rng).secret.hex() for name in cfg.rsus}
        store.write_json(d / BASELINE_PARAMS, params.to_json())
        store.write_json(d / BASELINE_SECRET, secrets.to_json(), mode=0o600)
        store.write_json(d / RSU_KEYS, rsu_keys, mode=0o600)
        for name in LISTS.values():
            store.write_jsonl(d / name, [])
        # written last: its presence marks the directory as initialized
        store.write_json(d / TA_SECRET, {"master_secret": rng.randbytes(32).hex()}, mode=0o600)
    print(NOT_FOR_PRODUCTION, file=sys.stderr)
    print(f"initialized {d} (modulus {params.p.bit_length()} bits, RSUs: {', '.join(cfg.rsus)})", file=out)
    return EXIT_OK


def cmd_register(cfg: CliConfig, id: bytes, pw: bytes, scheme: str, out) -> int:
    d = _require_state(cfg)
    with store.dir_lock(d):
        if scheme == "proposed":
            ta = _load_ta(d)
            card, prov = ta.register(id, pw)
            store.write_jsonl(d / LISTS["registration"], ta.dump_records())
            rsu_pub = {n: kp.public.hex() for n, kp in _load_rsu_keys(d).items()}
            payload = {"scheme": scheme, "id": id.hex(), "k_r": prov.k_r.hex(), "z_r": prov.z_r.hex(),
                       "rsu_public_keys": rsu_pub}
        else:
            bta = _load_baseline(d)
            card = bta.register(id)
            rows = store.read_jsonl(d / LISTS["baseline_registration"]) + [{"id": id.hex()}]
            store.write_jsonl(d / LISTS["baseline_registration"], rows)
            payload = {"scheme": scheme, "id": id.hex(), "k": card.k.hex(), "params": card.params.to_json()}
    print(json.dumps(payload, indent=2, sort_keys=True), file=out)
    return EXIT_OK


def cmd_revoke(cfg: CliConfig, id: bytes, out) -> int:
    d = _require_state(cfg)
    with store.dir_lock(d):
        ta = _load_ta(d)
        ta.revoke(id)
        store.write_jsonl(d / LISTS["registration"], ta.dump_records())
    print(f"revoked {id.hex()}", file=out)
    return EXIT_OK


def cmd_inspect(cfg: CliConfig, list_name: str, out) -> int:
    if list_name not in LISTS:
        raise UnknownList(f"{list_name!r} (choose from {', '.join(LISTS)})")
    d = _require_state(cfg)
    rows = store.read_jsonl(d / LISTS[list_name])
    print(json.dumps(rows, indent=2, sort_keys=True), file=out)
    return EXIT_OK


# -- simulate ---------------------------------------------------------------

def _sim_for(cfg: CliConfig) -> tuple[Simulator, dict]:
    sim = Simulator(cfg.sim)
    d = Path(cfg.state_dir)
    if (d / TA_SECRET).is_file():
        secret = bytes.fromhex(store.read_json(d / TA_SECRET)["master_secret"])
        params = SystemParams.from_json(store.read_json(d / BASELINE_PARAMS))
        secrets = BaselineTaSecrets.from_json(store.read_json(d / BASELINE_SECRET))
        sim.add_ta(master_secret=secret, baseline=(params, secrets))
        return sim, _load_rsu_keys(d)
    sim.add_ta()
    return sim, {}


def write_run(out_dir: Path, sim: Simulator, report: list[str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    store.atomic_write(out_dir / "transcript.jsonl", sim.transcript.to_jsonl())
    store.write_json(out_dir / "stats.json", sim.stats.to_json())
    store.write_jsonl(out_dir / "errors.jsonl", [e.to_json() for e in sim.errors])
    store.atomic_write(out_dir / "report.txt", "".join(line + "\n" for line in report))
    lists = out_dir / "lists"
    lists.mkdir(exist_ok=True)
    for name, rows in sim.persisted_lists().items():
        store.write_jsonl(lists / name, rows)


def cmd_simulate(cfg: CliConfig, scenario: str | None, out_dir: Path | None, out) -> int:
    if scenario is None:
        suite = bundled_scenarios()
    else:
        try:
            suite = {Path(scenario).name: Path(scenario).read_text(encoding="utf-8")}
        except OSError as exc:
            raise ConfigError(f"cannot read scenario {scenario}: {exc}") from exc
    # parse everything first so a bad file fails before any run
    parsed = {name: parse_scenario(text) for name, text in suite.items()}
    failures = []
    for name, cmds in parsed.items():
        sim, rsu_keys = _sim_for(cfg)
        result = ScenarioRunner(sim, rsu_keys).run(cmds, name)
        status = "PASS" if result.passed else "FAIL"
        print(f"== {name}: {status} (trace {sim.trace_digest()[:16]})", file=out)
        for line in result.report:
            print(f"   {line}", file=out)
        if out_dir is not None:
            write_run(Path(out_dir) / Path(name).stem, sim, result.report)
        if not result.passed:
            failures.append(f"{name}: {result.first_failure}")
    if failures:
        raise AssertionFailed("; ".join(failures))
    return EXIT_OK


# -- bench ------------------------------------------------------------------

def cmd_bench(cfg: CliConfig, args, out) -> int:
    bits = cfg.modulus_bits
    if args.reference_costs:
        costs, measured = bench.REFERENCE_COSTS, None
    else:
        costs = bench.measure_primitives(args.iterations, bits)
        measured = {s: bench.measure_auth(s, args.iterations, bits) for s in bench.IMPLEMENTED}
    rows = bench.build_table(costs, include_reference_rows=not args.no_reference, measured=measured,
                             modulus_bits=bits)
    # the human table goes to stderr when stdout carries the machine format
    human = out if (args.out or args.plot_data) else sys.stderr
    print(f"primitive costs ({costs.source}): T_e={costs.t_e_ms:.4f} T_m={costs.t_m_ms:.4f}"
          f"{' (reference)' if costs.t_m_is_reference else ''} T_h={costs.t_h_ms:.4f} "
          f"T_enc={costs.t_enc_ms:.4f} T_xor={costs.t_xor_ms:.4f} ms", file=human)
    print(bench.format_table(rows), file=human)
    fmt = args.format or cfg.output_format
    if args.plot_data:
        print("\n".join(f"{s},{t}" for s, t in bench.plot_data(rows)), file=out)
    if args.out:
        bench.emit_results(rows, fmt, args.out)
        print(f"wrote {args.out}", file=out)
    elif not args.plot_data:
        out.write(bench.render_results(rows, fmt))
    return EXIT_OK


# -- argument parsing ------------------------------------------------------

def _id_arg(s: str) -> bytes:
    return s.encode()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vanetauth", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--state-dir", help="directory holding keys and persisted lists")
    p.add_argument("--seed", type=int, help="simulation seed")
    p.add_argument("--format", choices=("csv", "json"), help="machine-readable output format")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("setup", help="generate TA, baseline and RSU secrets")
    s.add_argument("--modulus-bits", type=int)
    s.add_argument("--rsu", action="append", dest="rsus", help="RSU name (repeatable)")

    s = sub.add_parser("register", help="register a vehicle identity")
    s.add_argument("--id", required=True, type=_id_arg)
    s.add_argument("--pw", type=_id_arg, default=b"")
    s.add_argument("--scheme", choices=("proposed", "baseline"), default="proposed")

    s = sub.add_parser("revoke", help="revoke a registered identity")
    s.add_argument("--id", required=True, type=_id_arg)

    s = sub.add_parser("inspect", help="print a persisted list")
    s.add_argument("list", help=", ".join(LISTS))

    s = sub.add_parser("simulate", help="run a scenario file, or the bundled suite")
    s.add_argument("scenario", nargs="?")
    s.add_argument("--out", type=Path, help="directory for transcript, stats, errors and lists")

    s = sub.add_parser("bench", help="operation counts and timing table")
    s.add_argument("--reference-costs", action="store_true", help="evaluate with the reference costs only")
    s.add_argument("--iterations", type=int, default=1000)
    s.add_argument("--modulus-bits", type=int)
    s.add_argument("--no-reference", action="store_true", help="omit formula-only rows")
    s.add_argument("--out", type=Path)
    s.add_argument("--plot-data", action="store_true", help="print scheme,total_ms pairs")
    s.add_argument("--format", choices=("csv", "json"), dest="bench_format")
    return p


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {"state_dir": Path(args.state_dir) if args.state_dir else None,
                     "seed": args.seed, "output_format": args.format,
                     "modulus_bits": getattr(args, "modulus_bits", None),
                     "rsus": tuple(args.rsus) if getattr(args, "rsus", None) else None}
        cfg = build_config(file_values, overrides)
        if args.command == "setup":
            return cmd_setup(cfg, out)
        if args.command == "register":
            return cmd_register(cfg, args.id, args.pw, args.scheme, out)
        if args.command == "revoke":
            return cmd_revoke(cfg, args.id, out)
        if args.command == "inspect":
            return cmd_inspect(cfg, args.list, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.scenario, args.out, out)
        if args.command == "bench":
            if args.iterations < 1000 and not args.reference_costs:
                raise ConfigError("--iterations must be at least 1000")
            args.format = args.bench_format or args.format
            return cmd_bench(cfg, args, out)
    except (ProtocolError, AssertionFailed) as exc:
        print(f"error: {exc.label}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except VanetError as exc:
        print(f"error: {exc.label}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
