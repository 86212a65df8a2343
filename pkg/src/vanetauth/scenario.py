"""Line-oriented JSON scenario files driving a :class:`Simulator`.

Each non-blank line is ``{"at_ms": int, "action": str, "args": {...}}``.
String arguments are UTF-8 text; any argument may instead be given hex
encoded under a ``<name>_hex`` key.  Lines run in ``at_ms`` order (file
order breaks ties).  ``expect`` lines are the scenario's assertions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import AssertionFailed, ScenarioParseError, VanetError
from .proposed import TrafficMessage
from .simnet import Simulator

REQUIRED = {
    "add_rsu": ("name",),
    "register": ("obu", "id", "pw", "rsu"),
    "login": ("obu", "pw"),
    "authenticate": ("obu",),
    "send_message": ("obu", "m"),
    "revoke": ("id",),
    "replay": (),
    "tamper": ("offset",),
    "inject": ("raw", "dst"),
    "emit_notification": ("rsu",),
    "expect": ("entity",),
}
BYTES_ARGS = {"id", "pw", "m", "raw"}
CHECKS = ("error", "no_errors", "auth_success", "auth_failure", "messages_validated",
          "messages_rejected", "peer_valid", "session", "key_agreement", "traces")


@dataclass
class Command:
    line: int
    at_ms: int
    action: str
    args: dict


@dataclass
class ScenarioResult:
    name: str
    passed: bool
    report: list[str] = field(default_factory=list)
    first_failure: str | None = None


def _decode_args(args: dict, lineno: int) -> dict:
    out = {}
    for key, val in args.items():
        if key.endswith("_hex"):
            try:
                out[key[:-4]] = bytes.fromhex(val)
            except (TypeError, ValueError):
                raise ScenarioParseError(f"line {lineno}: {key} is not valid hex") from None
        elif key in BYTES_ARGS:
            if not isinstance(val, str):
                raise ScenarioParseError(f"line {lineno}: {key} must be a string")
            out[key] = val.encode()
        else:
            out[key] = val
    return out


def parse_scenario(text: str) -> list[Command]:
    cmds = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioParseError(f"line {lineno}: {exc.msg}") from None
        if not isinstance(obj, dict) or set(obj) - {"at_ms", "action", "args"}:
            raise ScenarioParseError(f"line {lineno}: expected an object with at_ms, action, args")
        at, action, args = obj.get("at_ms"), obj.get("action"), obj.get("args", {})
        if not isinstance(at, int) or isinstance(at, bool) or at < 0:
            raise ScenarioParseError(f"line {lineno}: at_ms must be a non-negative integer")
        if action not in REQUIRED:
            raise ScenarioParseError(f"line {lineno}: unknown action {action!r}")
        if not isinstance(args, dict):
            raise ScenarioParseError(f"line {lineno}: args must be an object")
        args = _decode_args(args, lineno)
        missing = [k for k in REQUIRED[action] if k not in args]
        if missing:
            raise ScenarioParseError(f"line {lineno}: {action} is missing {', '.join(missing)}")
        if action in ("replay", "tamper") and ("index" in args) == ("select" in args):
            raise ScenarioParseError(f"line {lineno}: {action} needs exactly one of index, select")
        if action == "tamper" and ("byte" in args) == ("xor" in args):
            raise ScenarioParseError(f"line {lineno}: tamper needs exactly one of byte, xor")
        if action == "expect" and not any(c in args for c in CHECKS):
            raise ScenarioParseError(f"line {lineno}: expect needs one of {', '.join(CHECKS)}")
        cmds.append(Command(lineno, at, action, args))
    cmds.sort(key=lambda c: (c.at_ms, c.line))
    return cmds


def load_scenario(path: Path | str) -> list[Command]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    return parse_scenario(text)


def bundled_scenarios() -> dict[str, str]:
    pkg = resources.files("vanetauth") / "scenarios"
    return {p.name: p.read_text(encoding="utf-8")
            for p in sorted(pkg.iterdir(), key=lambda p: p.name) if p.name.endswith(".jsonl")}


class ScenarioRunner:
    def __init__(self, sim: Simulator, rsu_keys: dict | None = None):
        self.sim = sim
        self.rsu_keys = rsu_keys or {}
        self.report: list[str] = []

    def _select(self, cmd: Command) -> int:
        if "index" in cmd.args:
            return int(cmd.args["index"])
        sel = dict(cmd.args["select"])
        nth = sel.pop("nth", 0)
        hits = self.sim.transcript.select(**sel)
        if len(hits) <= nth:
            raise AssertionFailed(f"line {cmd.line}: no transcript frame matches {cmd.args['select']}")
        return hits[nth]

    def _await_frame(self, cmd: Command, deadline: int) -> int:
        """Step the simulation until the selected frame is on the air."""
        while True:
            try:
                return self._select(cmd)
            except AssertionFailed:
                if not self.sim.step(deadline):
                    raise

    def run(self, cmds: list[Command], name: str = "scenario", settle_ms: int | None = None) -> ScenarioResult:
        sim = self.sim
        result = ScenarioResult(name, True, self.report)
        for cmd in cmds:
            sim.run_until(max(cmd.at_ms, sim.now))
            try:
                self._apply(cmd)
            except (VanetError, ValueError) as exc:
                if not isinstance(exc, AssertionFailed):
                    exc = AssertionFailed(f"line {cmd.line}: {cmd.action} failed: {type(exc).__name__}: {exc}")
                result.passed = False
                result.first_failure = result.first_failure or str(exc)
                self.report.append(f"FAIL {exc}")
        cfg = sim.config
        settle = settle_ms if settle_ms is not None else cfg.retry_timeout * cfg.retry_limit
        sim.run_until(sim.now + settle)
        return result

    def _apply(self, cmd: Command) -> None:
        sim, a = self.sim, cmd.args
        if cmd.action == "add_rsu":
            sim.add_rsu(a["name"], self.rsu_keys.get(a["name"]))
        elif cmd.action == "register":
            sim.add_obu(a["obu"], a["id"], a["pw"], a["rsu"], a.get("scheme", "proposed"))
        elif cmd.action in ("login", "authenticate", "send_message", "revoke", "emit_notification"):
            sim.schedule(sim.now, cmd.action, **a)
        elif cmd.action == "replay":
            sim.adversary_replay(self._select(cmd), sim.now, a.get("dst"))
        elif cmd.action == "tamper":
            idx = self._await_frame(cmd, sim.now + a.get("within_ms", 10_000)) if a.get("await") else self._select(cmd)
            offset = int(a["offset"])
            if "xor" in a:
                if not 0 <= offset < len(sim.transcript[idx].raw):
                    raise AssertionFailed(f"line {cmd.line}: offset {offset} outside the frame")
                new = sim.transcript[idx].raw[offset] ^ int(a["xor"])
            else:
                new = int(a["byte"])
            sim.adversary_tamper(idx, offset, new, sim.now, a.get("dst"))
        elif cmd.action == "inject":
            sim.adversary_inject(a["raw"], a["dst"], sim.now)
        elif cmd.action == "expect":
            self._expect(cmd)

    def _expect(self, cmd: Command) -> None:
        sim, a = self.sim, cmd.args
        ent = a["entity"]
        label = a.get("label")
        if "error" in a:
            ok = a["error"] in sim.errors_for(ent)
            what = f"{ent} logged {a['error']}"
            shown = f"{label}: {a['error']}" if label else what
        elif "no_errors" in a:
            logged = sim.errors_for(ent)
            ok = not logged
            what = shown = label or f"{ent} has no errors (logged: {logged})"
        elif "session" in a:
            node = sim.obu_node(ent)
            ok = bool(node.session_keys) == bool(a["session"])
            what = shown = label or f"{ent} session={bool(node.session_keys)}"
        elif "key_agreement" in a:
            ok = self._key_agreement(ent)
            what = shown = label or f"{ent} key agreement"
        elif "traces" in a:
            spec = a["traces"]
            frame = sim.transcript[self._select(Command(cmd.line, cmd.at_ms, "trace", {"select": spec["select"]}))]
            tm = TrafficMessage.from_bytes(frame.raw)
            got = sim.rsu(ent).report_malicious(tm.t2, tm.m)
            want = spec["id"].encode() if isinstance(spec["id"], str) else spec["id"]
            ok = got == want
            what = shown = label or f"{ent} traced message to {got!r}"
        else:
            key = next(c for c in CHECKS if c in a)
            got = getattr(sim.stats, key)[ent]
            ok = got == a[key]
            what = f"{ent} {key}={got} (want {a[key]})"
            shown = f"{label}: {what}" if label else what
        if not ok:
            raise AssertionFailed(f"line {cmd.line}: expected {what}")
        self.report.append(f"ok   line {cmd.line}: {shown}")

    def _key_agreement(self, ent: str) -> bool:
        node = self.sim.obu_node(ent)
        if not node.session_keys:
            return False
        k = node.session_keys[-1]
        if node.scheme == "baseline":
            return k in self.sim.nodes[self.sim.ta_name].baseline_keys.values()
        return any(e.k_s == k for e in self.sim.rsu(node.rsu).l_auth) and node.obu.session_key == k


def run_scenario(sim: Simulator, text: str, name: str = "scenario", rsu_keys: dict | None = None) -> ScenarioResult:
    return ScenarioRunner(sim, rsu_keys).run(parse_scenario(text), name)
