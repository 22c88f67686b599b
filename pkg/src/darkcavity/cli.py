"""Command line entry point: ``darkcavity <subcommand> ...``.

Outputs go to ``$DARKCAVITY_OUT/<scenario name>`` (default ./darkcavity-out),
or to ``--out``. On success a JSON summary is printed to stdout and the exit
code is 0; on failure a JSON error object goes to stderr with exit code 2 for
invalid input and 1 for runtime failures.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import yaml

from .multiphoton import PRESETS
from .scenario import BUNDLED, ScenarioError, load_scenario, run_scenario, scenario_from_dict

OUT_ENV = "DARKCAVITY_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _mev(x: float) -> str:
    return f"{x!r} meV"


def _fs(x: float) -> str:
    return f"{x!r} fs"


def _out_root(args) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, "darkcavity-out"))


def _field_cfg(a):
    return {"name": a.name or "field", "kind": "field",
            "field": {"z0": a.z0, "approx": a.approx, "terms": a.terms,
                      "rho_max": a.rho_max, "samples": a.samples}}


def _spectrum_cfg(a):
    if a.nu_range is None:
        a.nu_range = [-3 * a.rabi * max(a.n_qubits) ** 0.5, 3 * a.rabi * max(a.n_qubits) ** 0.5]
    return {"name": a.name or "spectrum", "kind": "spectrum", "cavity": {"decay": _mev(a.mu)},
            "spectrum": {"qubits": a.n_qubits, "rabi": _mev(a.rabi),
                         "method": "numeric" if a.numeric else "analytic",
                         "nu": {"start": _mev(a.nu_range[0]), "stop": _mev(a.nu_range[1]),
                                "samples": a.samples}}}


def _block_cfg(a):
    init = a.initial
    if init not in PRESETS:
        p = Path(init)
        if not p.exists():
            raise UsageError(f"--initial: {init!r} is neither a preset {list(PRESETS)} "
                             "nor an amplitude file")
        init = yaml.safe_load(p.read_text())
    t_max = a.t_max if a.t_max is not None else 40 * 658.2119569 / a.mu
    return {"name": a.name or "block", "kind": "block", "cavity": {"decay": _mev(a.mu)},
            "block": {"qubits": a.n_qubits, "photons": a.m_photons, "rabi": _mev(a.rabi),
                      "initial": init},
            "time": {"start": "0 fs", "stop": _fs(t_max), "samples": a.samples}}


def _sse_cfg(a):
    det = a.detunings if a.detunings is not None else [0.0] * len(a.rabi)
    cfg = {"name": a.name or "sse", "kind": "sse", "seed": a.seed,
           "cavity": {"decay": _mev(a.mu)},
           "ensemble": {"rabi": [_mev(x) for x in a.rabi], "detunings": [_mev(x) for x in det]},
           "relaxation": {"inelastic": _mev(a.gamma), "elastic": _mev(a.gamma_el)},
           "initial": {"preset": "qubit", "index": a.excite},
           "time": {"start": "0 fs", "stop": _fs(a.t_max), "samples": a.samples},
           "sse": {"trajectories": a.trajectories, "dephasing_noise": a.dephasing_noise}}
    if a.dt is not None:
        cfg["sse"]["dt"] = _fs(a.dt)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="darkcavity", description="Emitter ensembles in a lossy nanocavity.")
    p.add_argument("--version", action="store_true", help="print version and exit")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name>)")
        sp.add_argument("--name", help="run name (output subdirectory)")

    f = sub.add_parser("field", help="field profile E(rho) below the sphere")
    f.add_argument("--z0", type=float, required=True, help="sphere centre height / radius")
    f.add_argument("--approx", choices=["series", "point", "line"], default="series")
    f.add_argument("--terms", type=int, default=20)
    f.add_argument("--rho-max", type=float, default=2.0)
    f.add_argument("--samples", type=int, default=201)
    common(f)

    for cmd, hlp in (("evolve", "single-excitation trajectory from a scenario file"),
                     ("modes", "normal modes (Re p, Im p) of a scenario ensemble"),
                     ("inhomog", "detuned-ensemble trajectory from a scenario file")):
        sp = sub.add_parser(cmd, help=hlp)
        sp.add_argument("config", help="scenario file, manifest.json, or bundled name")
        common(sp)

    s = sub.add_parser("spectrum", help="emission spectra for equal couplings")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--analytic", action="store_true", default=True)
    g.add_argument("--numeric", action="store_true")
    s.add_argument("--n-qubits", type=int, nargs="+", required=True)
    s.add_argument("--rabi", type=float, required=True, help="per-emitter coupling, meV")
    s.add_argument("--mu", type=float, required=True, help="cavity decay, meV")
    s.add_argument("--nu-range", type=float, nargs=2, metavar=("LO", "HI"), help="meV")
    s.add_argument("--samples", type=int, default=2001)
    common(s)

    b = sub.add_parser("block", help="M-excitation block dynamics")
    b.add_argument("--n-qubits", type=int, required=True)
    b.add_argument("--m-photons", type=int, required=True)
    b.add_argument("--rabi", type=float, required=True, help="meV")
    b.add_argument("--mu", type=float, required=True, help="meV")
    b.add_argument("--initial", default="pair-excited",
                   help=f"preset {list(PRESETS)} or YAML/JSON file mapping '1,2' -> amplitude")
    b.add_argument("--t-max", type=float, help="fs (default 40/mu)")
    b.add_argument("--samples", type=int, default=401)
    common(b)

    e = sub.add_parser("sse", help="stochastic trajectory ensemble averages")
    e.add_argument("--trajectories", type=int, default=1000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--dt", type=float, help="fs (default 0.01 / fastest rate)")
    e.add_argument("--mu", type=float, required=True, help="cavity decay, meV")
    e.add_argument("--gamma", type=float, default=0.0, help="emitter decay, meV")
    e.add_argument("--gamma-el", type=float, default=0.0, help="pure dephasing, meV")
    e.add_argument("--rabi", type=float, nargs="+", required=True, help="meV, one per emitter")
    e.add_argument("--detunings", type=float, nargs="+", help="meV, one per emitter")
    e.add_argument("--excite", type=int, default=1, help="initially excited emitter (1-based)")
    e.add_argument("--t-max", type=float, default=200.0, help="fs")
    e.add_argument("--samples", type=int, default=41)
    e.add_argument("--dephasing-noise", choices=["amplitude-weighted", "constant"],
                   default="amplitude-weighted")
    common(e)

    r = sub.add_parser("reproduce-all", help="run every bundled scenario")
    r.add_argument("--out", help=f"output root (default ${OUT_ENV})")
    r.add_argument("--only", nargs="+", choices=BUNDLED)
    return p


def _dispatch(a) -> dict:
    if a.cmd == "reproduce-all":
        root = _out_root(a)
        runs = []
        for name in a.only or BUNDLED:
            res = run_scenario(load_scenario(name), root / name)
            runs.append({"name": name, "out_dir": str(res.out_dir),
                         "wall_time_s": res.manifest["wall_time_s"]})
        return {"status": "ok", "runs": runs}
    if a.cmd in ("evolve", "modes", "inhomog"):
        s = load_scenario(a.config)
        if s.kind != a.cmd:
            if a.cmd == "modes" and s.ensemble is not None:
                cfg = {k: v for k, v in s.config.items()
                       if k in ("name", "seed", "cavity", "ensemble")}
                cfg["kind"] = "modes"
                cfg["name"] = f"{s.name}-modes"
                s = scenario_from_dict(cfg, a.config)
            elif {a.cmd, s.kind} != {"evolve", "inhomog"}:
                raise UsageError(f"{a.config} is a {s.kind!r} scenario, not {a.cmd!r}")
    else:
        cfg = {"field": _field_cfg, "spectrum": _spectrum_cfg, "block": _block_cfg,
               "sse": _sse_cfg}[a.cmd](a)
        s = scenario_from_dict(cfg, f"{a.cmd} flags")
    out = Path(a.out) if a.out else _out_root(a) / (a.name or s.name)
    res = run_scenario(s, out)
    return {"status": "ok", "out_dir": str(res.out_dir), "files": [f.name for f in res.files],
            "config_sha256": res.manifest["config_sha256"],
            "wall_time_s": res.manifest["wall_time_s"]}


def _fail(obj: dict, code: int) -> int:
    sys.stderr.write(json.dumps(obj) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        if a.version:
            from . import __version__
            print(__version__)
            return 0
        if a.cmd is None:
            raise UsageError("a subcommand is required")
        summary = _dispatch(a)
    except ScenarioError as e:
        return _fail(e.to_json(), 2)
    except UsageError as e:
        return _fail({"error": "UsageError", "message": str(e)}, 2)
    except Exception as e:  # surfaced to the caller as JSON, not a traceback
        cause = e.__cause__ or e
        return _fail({"error": type(cause).__name__, "message": str(e)}, 1)
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
