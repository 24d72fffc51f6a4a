"""Command-line entry point.

Every run reads one JSON config (``--config``) and writes into ``--out``::

    python -m spiderweb construct --config run.json --out results/

Exit codes: 0 success, 2 falsified or invalid input, 3 indeterminate or
precision lost, 1 internal error.  Output files are byte-stable for a fixed
config apart from their ``timestamp`` field.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from . import __version__
from .certificate import SpidersWebCertificate, build_certificate, check_certificate
from .constructor import (
    ConstructionState,
    DeltaSpec,
    check_ledger,
    init,
    run_schedule,
    verify_eps_bounds,
    verify_g_convexity,
    verify_lemma_large,
    verify_lemma_small,
    verify_R_spacing,
)
from .entire import EntireFunction, cubic_model, slow_growth_family
from .errors import InvalidInput, SpiderwebError, Verdict
from .escape import ray_scan, rows_to_csv
from .growth import build_ladder, fill_eps
from .xnum import ExtReal, precision

log = logging.getLogger("spiderweb")

SCHEMA_VERSION = 1
COMMANDS = ("construct", "certify", "check", "eps", "classify", "verify")


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    precision: int = 128
    seed: int = 0
    version: int = SCHEMA_VERSION
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path, command: str) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidInput("config must be a JSON object")
        version = data.pop("version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise InvalidInput(f"config schema {version} is not supported (expected {SCHEMA_VERSION})")
        bits = data.pop("precision", 128)
        seed = data.pop("seed", 0)
        if not isinstance(bits, int) or bits < 32:
            raise InvalidInput("precision must be an integer of at least 32 bits")
        for key, val in data.items():
            if key.endswith(("_max", "horizon", "samples", "budget", "density")) and isinstance(val, (int, float)):
                if val < 0:
                    raise InvalidInput(f"{key} must be non-negative")
        return cls(command, data, bits, seed, version, path.parent)

    def get(self, key, default=None):
        return self.params.get(key, default)

    def path(self, key) -> Path:
        if key not in self.params:
            raise InvalidInput(f"config needs {key!r}")
        p = Path(self.params[key])
        return p if p.is_absolute() else self.base_dir / p

    def echo(self) -> dict:
        return {"command": self.command, "params": self.params, "precision": self.precision,
                "seed": self.seed, "version": self.version}


def _stamp(payload: dict) -> dict:
    payload["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    payload["tool_version"] = __version__
    return payload


def _write_json(out: Path, name: str, payload: dict) -> Path:
    target = out / name
    target.write_text(json.dumps(_stamp(payload), indent=2, sort_keys=True) + "\n")
    return target


def _error(exc: BaseException) -> dict:
    return {"error": type(exc).__name__, "message": str(exc)}


def _function(cfg: RunConfig) -> EntireFunction:
    spec = cfg.get("function")
    if spec is None:
        raise InvalidInput("config needs a 'function' entry")
    if isinstance(spec, str):
        spec = {"file": spec}
    family = spec.get("family")
    if family == "cubic":
        return cubic_model()
    if family == "slow_growth":
        return slow_growth_family(
            a1=int(spec.get("a1", 10**6)), count=int(spec.get("count", 40)), p=int(spec.get("p", 1))
        )
    if "file" in spec:
        p = Path(spec["file"])
        p = p if p.is_absolute() else cfg.base_dir / p
        data = json.loads(p.read_text())
        if "zeros" in data and "delta" in data:
            return ConstructionState.from_json(data).function()
        return EntireFunction.from_json(data)
    raise InvalidInput(f"unknown function spec {spec!r}")


def _delta(cfg: RunConfig) -> DeltaSpec:
    d = cfg.get("delta", {"kind": "constant", "c": "9/20"})
    kind = d.get("kind", "constant")
    if kind == "constant":
        return DeltaSpec.constant(Fraction(str(d["c"])))
    if kind == "harmonic":
        return DeltaSpec.harmonic(Fraction(str(d["c"])))
    if kind == "list":
        return DeltaSpec.explicit(Fraction(str(v)) for v in d["values"])
    raise InvalidInput(f"unknown delta rule {kind!r}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_construct(cfg: RunConfig, out: Path) -> int:
    delta = _delta(cfg)
    state = init(
        delta,
        ExtReal.parse(str(cfg.get("log_a1", "20"))),
        prec=cfg.precision,
        slack=int(cfg.get("slack", 2)),
        budget=int(cfg.get("budget", 10_000)),
    )
    code, outcome = 0, {"status": "complete"}
    try:
        run_schedule(state, int(cfg.get("k_max", 1)))
    except SpiderwebError as exc:
        code, outcome = exc.exit_code, {"status": "stopped", **_error(exc)}
    payload = {"config": cfg.echo(), "outcome": outcome, "construction": state.to_json()}
    _write_json(out, "construction.json", payload)
    lines = [f"outcome: {outcome['status']}" + (f" ({outcome['error']}: {outcome['message']})" if code else "")]
    lines.append(f"zeros placed: {len(state.zeros)}")
    for z in state.zeros:
        lines.append(f"  a_{z.index}: log a = {z.log_a.mid()}  zone {z.zone}  delta {z.delta}")
    for e in state.schedule():
        lines.append(f"block {e['k']}: N_kj = {e['N_kj']}  N_k = {e['N_k']}")
    for t in state.traces:
        T = ", ".join(f"{float(x.mid()):.6g}" for x in t.T)
        lines.append(f"stage m = {t.m} [{t.status}] placements {t.placements}  T: {T}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return code


def cmd_certify(cfg: RunConfig, out: Path) -> int:
    F = _function(cfg)
    cert = build_certificate(
        F, ExtReal.parse(str(cfg.get("R", 10))), int(cfg.get("horizon", 4)), max_N=int(cfg.get("max_N", 8))
    )
    verdict = check_certificate(F, cert)
    _write_json(out, "certificate.json", {"config": cfg.echo(), "certificate": cert.to_json(), "verdict": str(verdict)})
    return verdict.exit_code


def cmd_check(cfg: RunConfig, out: Path) -> int:
    F = _function(cfg)
    data = json.loads(cfg.path("certificate").read_text())
    cert = SpidersWebCertificate.from_json(data.get("certificate", data))
    verdict = check_certificate(F, cert)
    _write_json(out, "check.json", {"config": cfg.echo(), "verdict": str(verdict)})
    return verdict.exit_code


def cmd_eps(cfg: RunConfig, out: Path) -> int:
    F = _function(cfg)
    table = build_ladder(F, ExtReal.parse(str(cfg.get("R", 10))), int(cfg.get("horizon", 8)))
    fill_eps(table, grid_density=int(cfg.get("grid_density", 32)), certified=bool(cfg.get("certified", False)))
    (out / "eps.csv").write_text(table.to_csv())
    return 0 if table.degraded_at is None else 3


def cmd_classify(cfg: RunConfig, out: Path) -> int:
    F = _function(cfg)
    rows = ray_scan(
        F,
        ExtReal.parse(str(cfg.get("u_lo", 0))),
        ExtReal.parse(str(cfg.get("u_hi", 10))),
        int(cfg.get("samples", 20)),
        ExtReal.parse(str(cfg.get("R", 10))),
        int(cfg.get("lag_max", 1)),
        int(cfg.get("n_max", 6)),
    )
    (out / "scan.csv").write_text(rows_to_csv(rows))
    return 0


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    data = json.loads(cfg.path("construction").read_text())
    state = ConstructionState.from_json(data.get("construction", data))
    rng = random.Random(cfg.seed)
    checks: list[dict] = []

    def record(name: str, verdict: Verdict, detail: str = ""):
        checks.append({"check": name, "verdict": verdict.value, "detail": detail})

    for index, message in check_ledger(state):
        record(f"ledger zero {index}", Verdict.FALSIFIED, message)
    bits = int(cfg.get("verify_bits", 256))
    F = state.function()
    for k in range(1, len(state.zeros) + 1):
        record(f"trough zero {k}", verify_lemma_small(F, k, int(cfg.get("samples", 50)), bits).verdict)
        record(f"jump zero {k}", verify_lemma_large(F, k, bits).verdict)
    for _ in range(int(cfg.get("convexity_samples", 100))):
        u, t = rng.uniform(0, 200), rng.uniform(2, 20)
        v = verify_g_convexity(F, ExtReal(u), ExtReal(t), bits)
        if v is not Verdict.VERIFIED:
            record("g convexity", v, f"u = {u!r}, t = {t!r}")
            break
    else:
        record("g convexity", Verdict.VERIFIED)
    with precision(bits):
        table = build_ladder(F, 10, int(cfg.get("horizon", 12)))
        record("rung spacing", verify_R_spacing(F, table, bits).verdict)
        record("eps bounds", verify_eps_bounds(F, table).verdict)
    overall = Verdict.combine(Verdict(c["verdict"]) for c in checks)
    _write_json(out, "verify.json", {"config": cfg.echo(), "checks": checks, "overall": overall.value})
    return {Verdict.FALSIFIED: 2, Verdict.INDETERMINATE: 3}.get(overall, 0)


HANDLERS = {
    "construct": cmd_construct,
    "certify": cmd_certify,
    "check": cmd_check,
    "eps": cmd_eps,
    "classify": cmd_classify,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spiderweb", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=".", help="output directory")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        cfg = RunConfig.load(args.config, args.command)
        with precision(cfg.precision):
            code = HANDLERS[args.command](cfg, out)
    except SpiderwebError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        try:
            _write_json(out, f"{args.command}-error.json", _error(exc))
        except OSError:
            pass
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - reported as an internal error
        log.exception("internal error: %s", exc)
        return 1
    log.info("%s finished with exit code %d", args.command, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
