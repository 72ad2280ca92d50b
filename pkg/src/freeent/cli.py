"""Command-line front end.

Usage::

    freeent {entropy,verblunsky,mc,tempered} [--config PATH] [--seed N]
            [--workers N] [--out DIR] [--print-config] [--experiment NAME]

A config is a JSON object with ``"schema": 1``.  ``--print-config`` prints
the normalized config, with every default filled in, and exits.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import blockmat as bm
from . import entropy as ent
from . import montecarlo as mc
from . import pdf
from .free_group import Alphabet, from_str, length_lex_chain, to_str

SCHEMA = 1
COMMANDS = ("entropy", "verblunsky", "mc", "tempered")


class ConfigError(ValueError):
    pass


DEFAULT_FUNCTION = {"kind": "haagerup", "rank": 2, "k": 1, "radius": None, "payload": {"values": [[0.4, 0.0], [0.4, 0.0]]}}

DEFAULTS = {
    "entropy": {"n_max": None, "tol": 1e-8, "max_words": 500, "verblunsky_words": 200},
    "verblunsky": {"mode": "extract", "n": 2, "coeffs": None, "roundtrip": True, "roundtrip_tol": 1e-9},
    "tempered": {"N": 24, "rate_tol": ent.RATE_TOL, "c": None, "expect": None},
}

EXPERIMENT_DEFAULTS = {
    "kn-independence": {"r": 2, "k": 1, "n": 64, "steps": 4, "samples": 20000, "alpha": 0.01, "corr_tol": 0.05},
    "ldp-slope": {"F": ["e", "a"], "offdiag": [0.3, 0.0], "eps": 0.1, "n_grid": list(range(10, 51, 5)), "samples": 1000000, "r": 2, "k": 1},
    "sigma-check": {"n": 16, "l": 3, "k": 1, "samples": 20000, "alpha": 0.01},
    "trace-check": {"r": 2, "ns": [32, 64, 128], "words": ["a"], "samples": 2000},
    "types-volume": {"Q": 0.64, "width": 0.05, "n_grid": list(range(20, 81, 5)), "samples": 20000, "slope_tol": 0.05},
}


def _normalize_function(desc: dict) -> dict:
    """Fill defaults and accept the shorthand ``{"kind": "haagerup", "t": 0.4}``."""
    d = dict(desc)
    kind = d.get("kind")
    if kind not in pdf.KINDS:
        raise ConfigError(f"function.kind must be one of {pdf.KINDS}, got {kind!r}")
    rank = d.get("rank")
    if not isinstance(rank, int) or rank < 1:
        raise ConfigError("function.rank must be a positive integer")
    out = {"kind": kind, "rank": rank, "k": int(d.get("k", 1)), "radius": d.get("radius")}
    payload = dict(d.get("payload", {}))
    if kind == "haagerup":
        if "t" in d:
            payload["values"] = [[float(d["t"]), 0.0]] * rank
        vals = payload.get("values")
        if vals is None:
            raise ConfigError("haagerup needs payload.values or t")
        payload["values"] = [[float(v[0]), float(v[1])] if isinstance(v, (list, tuple)) else [float(v), 0.0] for v in vals]
    elif kind == "mollified":
        if "s" in d:
            payload["s"] = float(d["s"])
        if "base" in d:
            payload["base"] = d["base"]
        if "s" not in payload or "base" not in payload:
            raise ConfigError("mollified needs s and base")
        payload["base"] = _normalize_function(payload["base"])
        payload["s"] = float(payload["s"])
    elif kind == "table":
        if "values" not in payload:
            raise ConfigError("table needs payload.values")
        if out["radius"] is None:
            raise ConfigError("table needs an explicit radius")
    out["payload"] = payload
    return out


def normalize(cfg: dict, command: str | None = None) -> dict:
    """Validate a config and fill every default explicitly."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    schema = cfg.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported schema {schema!r}; expected {SCHEMA}")
    command = command or cfg.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}")
    known = {"schema", "command", "function", "alphabet", "seed", "workers", "out", "experiment"} | set(DEFAULTS)
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {"schema": SCHEMA, "command": command, "seed": int(cfg.get("seed", 0)), "workers": int(cfg.get("workers", 1)), "out": str(cfg.get("out", "out"))}
    if out["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if command == "mc":
        exp = cfg.get("experiment", {"name": "kn-independence"})
        name = exp.get("name")
        if name not in EXPERIMENT_DEFAULTS:
            raise ConfigError(f"experiment.name must be one of {sorted(EXPERIMENT_DEFAULTS)}")
        params = copy.deepcopy(EXPERIMENT_DEFAULTS[name])
        extra = set(exp.get("params", {})) - set(params)
        if extra:
            raise ConfigError(f"unknown parameters for {name}: {sorted(extra)}")
        params.update(exp.get("params", {}))
        out["experiment"] = {"name": name, "params": params}
        return out
    fn = _normalize_function(cfg.get("function", DEFAULT_FUNCTION))
    out["function"] = fn
    alphabet = cfg.get("alphabet") or Alphabet(fn["rank"]).order_string()
    try:
        Alphabet.from_string(fn["rank"], alphabet)
    except ValueError as exc:
        raise ConfigError(f"alphabet: {exc}") from exc
    out["alphabet"] = alphabet
    section = copy.deepcopy(DEFAULTS[command])
    given = cfg.get(command, {})
    extra = set(given) - set(section)
    if extra:
        raise ConfigError(f"unknown keys in {command}: {sorted(extra)}")
    section.update(given)
    out[command] = section
    return out


def _fmt(x):
    if x is None:
        return ""
    return mc.fmt(x)


def _jsonable(x):
    if isinstance(x, float):
        return mc.fmt(x) if math.isinf(x) else x
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return _jsonable(x.item())
    return x


def _write(outdir: Path, name: str, text: str):
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / name).write_text(text)


def _write_json(outdir: Path, name: str, obj):
    _write(outdir, name, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _function(cfg: dict) -> pdf.PdFunction:
    return pdf.from_json(cfg["function"])


def report_csv(rep: ent.EntropyReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["n", "seq1", "seq2", "avg", "seward_partial", "verblunsky_partial"]
    w.writerow(cols)
    for row in rep.rows():
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def _interleaves(rep: ent.EntropyReport, slack: float = 1e-9) -> bool:
    s1, s2 = rep.seq1, rep.seq2
    ok = all(s1[n] <= s2[n] + slack for n in range(len(s1)) if math.isfinite(s2[n]))
    return ok and all(s2[n + 1] <= s1[n] + slack for n in range(len(s1) - 1) if math.isfinite(s1[n]))


def cmd_entropy(cfg: dict) -> int:
    phi = _function(cfg)
    opts = cfg["entropy"]
    alphabet = Alphabet.from_string(phi.rank, cfg["alphabet"])
    rep = ent.h_ann(phi, n_max=opts["n_max"], alphabet=alphabet, tol=opts["tol"], max_words=opts["max_words"], verblunsky_words=opts["verblunsky_words"])
    out = Path(cfg["out"])
    _write(out, "entropy.csv", report_csv(rep))
    finite = [(a, b) for a, b in zip(rep.seward_partial, rep.avg) if math.isfinite(a) and math.isfinite(b)]
    verdicts = {
        "interleaving": _interleaves(rep),
        "seward_equals_average": all(abs(a - b) <= 1e-9 for a, b in finite),
    }
    body = {
        "config": cfg,
        "scale": "log-det units; seq1(n) = h_{B_{n+1}}, seward_partial = (seq1 + seq2) / 2",
        "value": rep.value,
        "gap": rep.gap,
        "converged": rep.converged,
        "bracket": list(rep.bracket),
        "upper_bound": rep.upper_bound,
        "negative_witness": rep.negative,
        "first_singular_n": rep.first_singular_n,
        "radius": rep.radius,
        "rows": rep.rows(),
        "notes": rep.notes,
    }
    _write_json(out, "entropy.json", body)
    _write_json(out, "verdict.json", {"command": "entropy", "verdicts": verdicts, "passed": all(verdicts.values())})
    print(f"{'n':>3} {'seq1':>22} {'seq2':>22} {'avg':>22} {'seward':>22} {'verblunsky':>22}")
    for row in rep.rows():
        print(f"{row['n']:>3} " + " ".join(f"{_fmt(row[c]) or '-':>22}" for c in ("seq1", "seq2", "avg", "seward_partial", "verblunsky_partial")))
    print(f"value {_fmt(rep.value)}  gap {_fmt(rep.gap)}  converged {rep.converged}  bracket [{_fmt(rep.bracket[0])}, {_fmt(rep.bracket[1])}]")
    if rep.first_singular_n is not None:
        print(f"singular determinant first at n = {rep.first_singular_n} (radius {2 * (rep.first_singular_n + 1)})")
    return 0 if all(verdicts.values()) else 1


def cmd_verblunsky(cfg: dict) -> int:
    opts = cfg["verblunsky"]
    phi = _function(cfg)
    alphabet = Alphabet.from_string(phi.rank, cfg["alphabet"])
    chain = length_lex_chain(opts["n"], alphabet)
    out = Path(cfg["out"])
    verdicts = {}
    if opts["mode"] == "extract":
        seq = pdf.verblunsky_extract(phi, chain)
        body = {"config": cfg, **seq.to_json()}
        rows = [(to_str(chain.words[i + 1]), float(np.linalg.norm(C, 2))) for i, C in enumerate(seq.coeffs)]
        if opts["roundtrip"]:
            rec = pdf.verblunsky_reconstruct(seq, phi.k)
            err = max(float(np.max(np.abs(rec.value(w) - phi.value(w)))) for w in rec.params["table"])
            body["roundtrip_max_error"] = err
            verdicts["roundtrip"] = err <= opts["roundtrip_tol"]
            print(f"round-trip max error {err:.3e}")
        for word, norm in rows:
            print(f"{word:>8} |C| = {norm:.12f}")
    elif opts["mode"] == "reconstruct":
        coeffs = opts["coeffs"]
        k = phi.k
        if coeffs is None:
            coeffs = []
            for i in range(chain.steps):
                outer, _ = pdf.step_split(chain.words[: i + 1], chain.directions[i])
                coeffs.append(np.zeros((k * len(outer), k)))
        else:
            coeffs = [bm.matrix_from_json(c) for c in coeffs]
        seq = pdf.VerblunskySeq(chain, coeffs, [bm.is_strict(c) for c in coeffs])
        rec = pdf.verblunsky_reconstruct(seq, k)
        body = {"config": cfg, "function": pdf.to_json(rec)}
        if opts["roundtrip"]:
            again = pdf.verblunsky_extract(rec, length_lex_chain(min(opts["n"], rec.radius // 2), alphabet))
            err = max((float(np.max(np.abs(a - b))) for a, b in zip(again.coeffs, coeffs)), default=0.0)
            body["roundtrip_max_error"] = err
            verdicts["roundtrip"] = err <= opts["roundtrip_tol"]
            print(f"round-trip max error {err:.3e}")
        print(f"reconstructed values on radius {rec.radius}")
    else:
        raise ConfigError("verblunsky.mode must be extract or reconstruct")
    _write_json(out, "verblunsky.json", body)
    _write_json(out, "verdict.json", {"command": "verblunsky", "verdicts": verdicts, "passed": all(verdicts.values())})
    return 0 if all(verdicts.values()) else 1


def run_experiment(cfg: dict) -> mc.McReport:
    exp = cfg["experiment"]
    params = dict(exp["params"])
    name = exp["name"]
    if name == "ldp-slope":
        z = params.pop("offdiag")
        params["offdiag"] = complex(z[0], z[1]) if isinstance(z, (list, tuple)) else complex(z)
    return mc.EXPERIMENTS[name](seed=cfg["seed"], workers=cfg["workers"], **params)


def cmd_mc(cfg: dict) -> int:
    rep = run_experiment(cfg)
    out = Path(cfg["out"])
    name = cfg["experiment"]["name"]
    _write(out, f"{name}.csv", rep.to_csv())
    _write_json(out, f"{name}.json", {"config": cfg, **rep.to_json()})
    _write_json(out, "verdict.json", {"command": "mc", "experiment": name, "verdicts": rep.verdicts, "passed": rep.passed})
    for k, v in rep.summary.items():
        print(f"{k}: {_fmt(v)}")
    for k, v in rep.verdicts.items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    return 0 if rep.passed else 1


def cmd_tempered(cfg: dict) -> int:
    phi = _function(cfg)
    opts = cfg["tempered"]
    res = ent.tempered_test(phi, opts["N"], opts["rate_tol"])
    N2 = max(1, opts["N"] // 2)
    sn = ent.sphere_norms(phi, N2, opts["c"])
    out = Path(cfg["out"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "w", "W"])
    for n, (a, b) in enumerate(zip(sn.w, sn.W), start=1):
        w.writerow([n, _fmt(a), _fmt(b)])
    _write(out, "tempered.csv", buf.getvalue())
    body = {"config": cfg, "classification": res.classification, "slope": res.slope, "sphere_norms": res.norms}
    print(f"slope {_fmt(res.slope)}  class {res.classification}")
    if opts["c"] is not None:
        bound = ent.hann_aux_bound(phi, float(opts["c"]), N2)
        body["hann_aux_bound"] = bound
        print(f"lower bound on -h_ann: {_fmt(bound)}")
    verdicts = {}
    if opts["expect"] is not None:
        verdicts["expected_class"] = res.classification == opts["expect"]
    _write_json(out, "tempered.json", body)
    _write_json(out, "verdict.json", {"command": "tempered", "verdicts": verdicts, "passed": all(verdicts.values())})
    return 0 if all(verdicts.values()) else 1


HANDLERS = {"entropy": cmd_entropy, "verblunsky": cmd_verblunsky, "mc": cmd_mc, "tempered": cmd_tempered}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freeent", description="Annealed entropy of positive definite functions on free groups.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON config (schema 1)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--workers", type=int, help="override the worker count")
    p.add_argument("--out", help="output directory")
    p.add_argument("--experiment", choices=sorted(EXPERIMENT_DEFAULTS), help="mc experiment when no config is given")
    p.add_argument("--print-config", action="store_true", help="print the normalized config and exit")
    return p


def load_config(args) -> dict:
    raw = json.loads(args.config.read_text()) if args.config else {}
    raw.setdefault("command", args.command)
    if raw["command"] != args.command:
        raise ConfigError(f"config is for {raw['command']!r}, not {args.command!r}")
    if args.experiment:
        raw.setdefault("experiment", {})["name"] = args.experiment
    for key in ("seed", "workers", "out"):
        val = getattr(args, key)
        if val is not None:
            raw[key] = val
    return normalize(raw, args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.print_config:
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        return HANDLERS[args.command](cfg)
    except (ConfigError, pdf.RadiusError, bm.SingularError, bm.NotPsdError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
