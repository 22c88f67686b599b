"""Scenario files: parsing, validation, execution and tabular output.

A scenario is YAML. Every dimensional quantity carries a unit suffix
("120 meV", "20 fs", "0.5 ps", "1000 /mu"); bare numbers are accepted only
for dimensionless fields. Loading normalizes to meV / fs and keeps the
normalized mapping, which is what the manifest records. Feeding a manifest
back to ``load_scenario`` rebuilds the same scenario.
"""
from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass, field as dfield
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .core import HBAR, QubitEnsemble, RelaxationSpec, SingleExcitationState
from .field import Approx, SphereGeometry, rabi_profile
from .inhomog import SpectralDensity, eigenmode_evolution, normal_modes, uniform_random_detunings
from .multiphoton import (PRESETS, build_block, decompose_bright_dark, evolve_block,
                          layer_populations, preset_state)
from .single import evolve_detuned_numeric, evolve_resonant_analytic
from .spectrum import c10_single_excited, peak_summary, spectrum_analytic, spectrum_numeric
from .sse import SSESpec, ensemble_average, sample_trajectories

KINDS = ("field", "evolve", "modes", "inhomog", "spectrum", "block", "sse")
BUNDLED = ("fig2", "fig3", "fig5", "spectra", "block-fig6", "block-fig7", "sse")

_ENERGY = {"mev": 1.0, "ev": 1e3, "uev": 1e-3, "µev": 1e-3}
_TIME = {"fs": 1.0, "ps": 1e3, "ns": 1e6}
_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(/?\s*[A-Za-zµ]+)\s*$")


class ScenarioError(ValueError):
    """All problems found in a scenario, each as (field path, message)."""

    def __init__(self, errors: list[tuple[str, str]], source: str = ""):
        self.errors = list(errors)
        self.source = source
        head = f"{source}: " if source else ""
        lines = "; ".join(f"{p}: {m}" for p, m in self.errors)
        super().__init__(f"{head}{len(self.errors)} validation error(s): {lines}")

    def to_json(self) -> dict:
        return {"error": "ScenarioError", "source": self.source,
                "errors": [{"path": p, "message": m} for p, m in self.errors]}


# ----------------------------------------------------------------------------
# unit parsing with error collection
# ----------------------------------------------------------------------------

def parse_quantity(text) -> tuple[float, str]:
    """"120 meV" -> (120.0, "mev"); "1000 /mu" -> (1000.0, "/mu")."""
    if isinstance(text, bool) or not isinstance(text, str):
        raise ValueError(f"expected a quantity with a unit, got {text!r}")
    m = _QTY.match(text)
    if not m:
        raise ValueError(f"cannot parse quantity {text!r}")
    return float(m.group(1)), m.group(2).replace(" ", "").lower()


def fmt_energy(x: float) -> str:
    return f"{float(x)!r} meV"


def fmt_time(x: float) -> str:
    return f"{float(x)!r} fs"


class _Checker:
    def __init__(self):
        self.errors: list[tuple[str, str]] = []

    def err(self, path: str, msg: str):
        self.errors.append((path, msg))

    def section(self, d: dict, key: str, path: str, required=True):
        v = d.get(key)
        if v is None:
            if required:
                self.err(_join(path, key), "missing")
            return None
        if not isinstance(v, dict):
            self.err(_join(path, key), "must be a mapping")
            return None
        return v

    def _qty(self, v, path, table, what, nonneg=True, positive=False):
        try:
            x, unit = parse_quantity(v)
        except ValueError as e:
            self.err(path, str(e))
            return None
        if unit not in table:
            self.err(path, f"unit {unit!r} is not a {what} unit ({', '.join(table)})")
            return None
        x *= table[unit]
        if positive and not x > 0:
            self.err(path, "must be > 0")
        elif nonneg and x < 0:
            self.err(path, "must be >= 0")
        return x

    def energy(self, d, key, path, required=True, nonneg=True, positive=False):
        if key not in d or d[key] is None:
            if required:
                self.err(_join(path, key), "missing")
            return None
        return self._qty(d[key], _join(path, key), _ENERGY, "energy", nonneg, positive)

    def energy_list(self, d, key, path, nonneg=True):
        v = d.get(key)
        if not isinstance(v, list) or not v:
            self.err(_join(path, key), "must be a non-empty list of energies")
            return None
        out = [self._qty(x, f"{_join(path, key)}[{i}]", _ENERGY, "energy", nonneg)
               for i, x in enumerate(v)]
        return None if any(x is None for x in out) else out

    def time(self, d, key, path, mu=None, required=True, positive=False):
        if key not in d or d[key] is None:
            if required:
                self.err(_join(path, key), "missing")
            return None
        p = _join(path, key)
        try:
            x, unit = parse_quantity(d[key])
        except ValueError as e:
            self.err(p, str(e))
            return None
        if unit == "/mu":
            if mu is None or mu <= 0:
                self.err(p, "'/mu' times need a valid positive cavity decay")
                return None
            x *= HBAR / mu
        elif unit in _TIME:
            x *= _TIME[unit]
        else:
            self.err(p, f"unit {unit!r} is not a time unit (fs, ps, ns, /mu)")
            return None
        if positive and not x > 0:
            self.err(p, "must be > 0")
        return x

    def integer(self, d, key, path, required=True, lo=None, default=None):
        if key not in d or d[key] is None:
            if required:
                self.err(_join(path, key), "missing")
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.err(_join(path, key), f"must be an integer, got {v!r}")
            return default
        if lo is not None and v < lo:
            self.err(_join(path, key), f"must be >= {lo}")
        return v

    def number(self, d, key, path, required=True, default=None, positive=False):
        if key not in d or d[key] is None:
            if required:
                self.err(_join(path, key), "missing")
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.err(_join(path, key), f"must be a plain number, got {v!r}")
            return default
        if positive and not v > 0:
            self.err(_join(path, key), "must be > 0")
        return float(v)

    def choice(self, d, key, path, options, default=None):
        v = d.get(key, default)
        if v is None:
            self.err(_join(path, key), "missing")
        elif v not in options:
            self.err(_join(path, key), f"must be one of {list(options)}, got {v!r}")
            return None
        return v


def _join(path, key):
    return f"{path}.{key}" if path else str(key)


# ----------------------------------------------------------------------------
# scenario object
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated scenario. ``config`` is the normalized mapping (meV, fs)."""

    name: str
    kind: str
    config: dict
    seed: int | None = None
    mu: float | None = None
    ensemble: QubitEnsemble | None = None
    initial: SingleExcitationState | None = None
    times: np.ndarray | None = None
    extra: dict = dfield(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.config).encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def _cavity(ck: _Checker, raw: dict, norm: dict):
    if raw.get("cavity") is None:
        ck.err("cavity.decay", "missing (or give cavity.lifetime)")
        return None
    cav = ck.section(raw, "cavity", "")
    if cav is None:
        return None
    if "decay" in cav and "lifetime" in cav:
        ck.err("cavity", "give either decay or lifetime, not both")
        return None
    if "lifetime" in cav:
        tau = ck.time(cav, "lifetime", "cavity", positive=True)
        mu = HBAR / tau if tau and tau > 0 else None
    elif "decay" in cav:
        mu = ck.energy(cav, "decay", "cavity")
    else:
        ck.err("cavity.decay", "missing (or give cavity.lifetime)")
        return None
    if mu is not None:
        norm["cavity"] = {"decay": fmt_energy(mu)}
    return mu


def _time_grid(ck: _Checker, raw: dict, norm: dict, mu):
    tg = ck.section(raw, "time", "")
    if tg is None:
        return None
    start = ck.time(tg, "start", "time", mu, required=False)
    start = 0.0 if start is None else start
    stop = ck.time(tg, "stop", "time", mu)
    n = ck.integer(tg, "samples", "time", lo=2)
    if stop is None or n is None or n < 2:
        return None
    if stop <= start:
        ck.err("time.stop", "must exceed time.start")
        return None
    norm["time"] = {"start": fmt_time(start), "stop": fmt_time(stop), "samples": n}
    return np.linspace(start, stop, n)


def _ensemble(ck: _Checker, raw: dict, norm: dict, seed):
    ens = ck.section(raw, "ensemble", "")
    if ens is None:
        return None, None
    out: dict = {}
    rabi = det = None
    if "rabi" in ens:
        rabi = ck.energy_list(ens, "rabi", "ensemble")
        if rabi is not None:
            out["rabi"] = [fmt_energy(x) for x in rabi]
    elif "count" in ens or "peak_rabi" in ens or "field" in ens:
        n = ck.integer(ens, "count", "ensemble", lo=1)
        fld = ck.section(ens, "field", "ensemble", required=False)
        if fld is None:
            ck.err("ensemble.field", "required when qubits are placed in the field profile")
        peak = ck.energy(ens, "peak_rabi", "ensemble", positive=True)
        extent = ck.number(ens, "extent", "ensemble", required=False, default=1.0, positive=True)
        if fld is not None:
            z0 = ck.number(fld, "z0", "ensemble.field")
            approx = ck.choice(fld, "approx", "ensemble.field", [a.value for a in Approx], "line")
            terms = ck.integer(fld, "terms", "ensemble.field", required=False, lo=1, default=20)
            if z0 is not None and not z0 > 1:
                ck.err("ensemble.field.z0", "must be > 1 (sphere radius units)")
            elif None not in (n, peak, z0, approx, terms) and n >= 1:
                rho = np.linspace(0.0, extent, n)
                rabi = list(rabi_profile(SphereGeometry(z0), approx, peak, rho, terms))
                out.update(count=n, extent=extent, peak_rabi=fmt_energy(peak),
                           field={"z0": z0, "approx": approx, "terms": terms})
    else:
        ck.err("ensemble.rabi", "missing (or give count, field and peak_rabi)")
    n = len(rabi) if rabi is not None else None
    if "detunings" in ens:
        det = ck.energy_list(ens, "detunings", "ensemble", nonneg=False)
        if det is not None:
            if n is not None and len(det) != n:
                ck.err("ensemble.detunings", f"has {len(det)} entries, rabi has {n}")
            out["detunings"] = [fmt_energy(x) for x in det]
    elif "detuning" in ens:
        dd = ck.section(ens, "detuning", "ensemble")
        if dd is not None:
            dist = ck.choice(dd, "distribution", "ensemble.detuning",
                             ["none", "uniform", "gaussian-quantile"], "none")
            if dist in ("uniform", "gaussian-quantile"):
                hw = ck.energy(dd, "half_width", "ensemble.detuning", positive=True)
                if dist == "uniform" and seed is None:
                    ck.err("seed", "required for uniformly random detunings")
                if hw is not None and n is not None and (dist != "uniform" or seed is not None):
                    if dist == "uniform":
                        det = list(uniform_random_detunings(n, hw, seed))
                    else:
                        det = list(SpectralDensity.gaussian(hw).sample(n))
                    out["detuning"] = {"distribution": dist, "half_width": fmt_energy(hw)}
            elif dist == "none":
                out["detuning"] = {"distribution": "none"}
    norm["ensemble"] = out
    if rabi is None:
        return None, out
    det = np.zeros(len(rabi)) if det is None else np.asarray(det)
    if det.shape != (len(rabi),):
        return None, out
    return QubitEnsemble(det, np.asarray(rabi)), out


def _initial(ck: _Checker, raw: dict, norm: dict, ensemble):
    ini = ck.section(raw, "initial", "")
    if ini is None:
        return None
    preset = ck.choice(ini, "preset", "initial", ["qubit", "photon", "bright", "explicit"])
    if preset is None or ensemble is None:
        return None
    n = ensemble.n
    if preset == "qubit":
        j = ck.integer(ini, "index", "initial", required=False, lo=1, default=1)
        if j is not None and j > n:
            ck.err("initial.index", f"qubit {j} does not exist (N = {n})")
            return None
        norm["initial"] = {"preset": "qubit", "index": j}
        return SingleExcitationState.qubit_excited(n, j - 1)
    if preset == "photon":
        norm["initial"] = {"preset": "photon"}
        return SingleExcitationState.photon(n)
    if preset == "bright":
        norm["initial"] = {"preset": "bright"}
        return SingleExcitationState.bright(ensemble.rabi)
    c0 = ini.get("c0")
    try:
        c10 = complex(ini.get("c10", 0))
        c0 = np.array([complex(x) for x in c0], complex)
    except (TypeError, ValueError):
        ck.err("initial.c0", "explicit state needs c0: list of (complex) numbers")
        return None
    if len(c0) != n:
        ck.err("initial.c0", f"has {len(c0)} entries, ensemble has {n}")
        return None
    nrm = abs(c10) ** 2 + float(np.sum(np.abs(c0) ** 2))
    if not 0 < nrm <= 1 + 1e-12:
        ck.err("initial", f"excited norm {nrm:.6g} must lie in (0, 1]")
        return None
    norm["initial"] = {"preset": "explicit", "c10": repr(c10),
                       "c0": [repr(complex(x)) for x in c0]}
    return SingleExcitationState(np.sqrt(max(1 - nrm, 0.0)), c10, c0)


def _validate(raw, source: str = "") -> Scenario:
    ck = _Checker()
    if not isinstance(raw, dict):
        raise ScenarioError([("", "scenario must be a mapping")], source)
    if "scenario" in raw and "config_sha256" in raw:  # a run manifest
        raw = raw["scenario"]
        if not isinstance(raw, dict):
            raise ScenarioError([("scenario", "must be a mapping")], source)
    name = raw.get("name")
    if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", name or ""):
        ck.err("name", "missing or not a simple identifier")
    kind = ck.choice(raw, "kind", "", KINDS)
    seed = ck.integer(raw, "seed", "", required=False, lo=0)
    known = {"name", "kind", "seed", "description", "cavity", "time", "ensemble", "initial",
             "field", "spectrum", "block", "sse", "relaxation", "sweep", "method"}
    for k in raw:
        if k not in known:
            ck.err(str(k), "unknown key")
    norm: dict = {"name": name, "kind": kind}
    if seed is not None:
        norm["seed"] = seed
    if isinstance(raw.get("description"), str):
        norm["description"] = raw["description"]
    mu = ens = ini = times = None
    extra: dict = {}
    if kind == "field":
        extra = _field_section(ck, raw, norm)
    elif kind in ("evolve", "inhomog", "modes", "sse"):
        mu = _cavity(ck, raw, norm)
        ens, _ = _ensemble(ck, raw, norm, seed)
        if kind != "modes":
            ini = _initial(ck, raw, norm, ens)
            times = _time_grid(ck, raw, norm, mu)
        if kind == "evolve":
            m = ck.choice(raw, "method", "", ["ode", "analytic", "eigen"], "ode")
            if m == "analytic" and ens is not None and not ens.is_resonant:
                ck.err("method", "analytic evolution requires zero detunings")
            norm["method"] = m
            extra["method"] = m
        if kind == "inhomog" and "sweep" in raw:
            extra["sweep"] = _sweep(ck, raw, norm)
        if kind == "sse":
            extra.update(_sse_section(ck, raw, norm, ens, seed))
    elif kind == "spectrum":
        mu = _cavity(ck, raw, norm)
        extra = _spectrum_section(ck, raw, norm, mu)
    elif kind == "block":
        mu = _cavity(ck, raw, norm)
        times = _time_grid(ck, raw, norm, mu)
        extra = _block_section(ck, raw, norm)
    if ck.errors:
        raise ScenarioError(ck.errors, source)
    return Scenario(name, kind, norm, seed, mu, ens, ini, times, extra)


def _field_section(ck, raw, norm) -> dict:
    f = ck.section(raw, "field", "")
    if f is None:
        return {}
    z0 = ck.number(f, "z0", "field")
    if z0 is not None and not z0 > 1:
        ck.err("field.z0", "must be > 1 (sphere radius units)")
    approx = ck.choice(f, "approx", "field", [a.value for a in Approx], "series")
    terms = ck.integer(f, "terms", "field", required=False, lo=1, default=20)
    rho_max = ck.number(f, "rho_max", "field", required=False, default=2.0, positive=True)
    samples = ck.integer(f, "samples", "field", required=False, lo=2, default=201)
    out = {"z0": z0, "approx": approx, "terms": terms, "rho_max": rho_max, "samples": samples}
    norm["field"] = out
    return out


def _sweep(ck, raw, norm) -> list[float] | None:
    sw = ck.section(raw, "sweep", "")
    if sw is None:
        return None
    if "peak_rabi" not in sw:
        ck.err("sweep.peak_rabi", "missing (only peak_rabi sweeps are supported)")
        return None
    if "peak_rabi" not in (raw.get("ensemble") or {}):
        ck.err("sweep.peak_rabi", "needs a field-generated ensemble")
    vals = ck.energy_list(sw, "peak_rabi", "sweep")
    if vals is not None:
        norm["sweep"] = {"peak_rabi": [fmt_energy(v) for v in vals]}
    return vals


def _spectrum_section(ck, raw, norm, mu) -> dict:
    sp = ck.section(raw, "spectrum", "")
    if sp is None:
        return {}
    qs = sp.get("qubits")
    if not isinstance(qs, list) or not qs or not all(isinstance(q, int) and q >= 1 for q in qs):
        ck.err("spectrum.qubits", "must be a non-empty list of positive integers")
        qs = None
    rabi = ck.energy(sp, "rabi", "spectrum", positive=True)
    method = ck.choice(sp, "method", "spectrum", ["analytic", "numeric"], "analytic")
    nu = ck.section(sp, "nu", "spectrum")
    lo = hi = n = None
    if nu is not None:
        lo = ck.energy(nu, "start", "spectrum.nu", nonneg=False)
        hi = ck.energy(nu, "stop", "spectrum.nu", nonneg=False)
        n = ck.integer(nu, "samples", "spectrum.nu", lo=3)
        if lo is not None and hi is not None and hi <= lo:
            ck.err("spectrum.nu.stop", "must exceed spectrum.nu.start")
    if mu is not None and mu <= 0:
        ck.err("cavity.decay", "spectra need a positive cavity decay")
    out = {"qubits": qs, "rabi": rabi, "method": method, "nu": (lo, hi, n)}
    if None not in (rabi, lo, hi, n) and qs is not None:
        norm["spectrum"] = {"qubits": qs, "rabi": fmt_energy(rabi), "method": method,
                            "nu": {"start": fmt_energy(lo), "stop": fmt_energy(hi), "samples": n}}
    return out


def _block_section(ck, raw, norm) -> dict:
    b = ck.section(raw, "block", "")
    if b is None:
        return {}
    N = ck.integer(b, "qubits", "block", lo=1)
    M = ck.integer(b, "photons", "block", lo=1)
    rabi = ck.energy(b, "rabi", "block", positive=True)
    init = b.get("initial")
    track = b.get("track", [])
    entries = None
    if isinstance(init, str):
        if init not in PRESETS:
            ck.err("block.initial", f"unknown preset {init!r}; presets: {list(PRESETS)}")
    elif isinstance(init, dict) and init:
        entries = {}
        for k, v in init.items():
            try:
                members = tuple(sorted(int(x) for x in str(k).split(",")))
                entries[members] = complex(v)
            except ValueError:
                ck.err(f"block.initial.{k}", "keys are comma-separated qubit labels, values amplitudes")
        if N is not None and M is not None:
            for members in entries:
                if len(members) != M or len(set(members)) != M or \
                        not all(1 <= q <= N for q in members):
                    ck.err(f"block.initial.{','.join(map(str, members))}",
                           f"must name {M} distinct qubits in 1..{N}")
    else:
        ck.err("block.initial", "missing: a preset name or a mapping of subsets to amplitudes")
    if not isinstance(track, list) or not all(isinstance(t, list) for t in track):
        ck.err("block.track", "must be a list of qubit-label lists")
        track = []
    if N is not None and M is not None and 2 * M > N and isinstance(init, str):
        pass  # presets check their own domain at run time
    out = {"qubits": N, "photons": M, "rabi": rabi, "initial": init, "entries": entries,
           "track": [tuple(sorted(t)) for t in track]}
    nb = {"qubits": N, "photons": M, "rabi": fmt_energy(rabi) if rabi is not None else None,
          "initial": init if isinstance(init, str) else
          {",".join(map(str, k)): repr(v) for k, v in (entries or {}).items()}}
    if track:
        nb["track"] = [list(t) for t in out["track"]]
    norm["block"] = nb
    return out


def _sse_section(ck, raw, norm, ens, seed) -> dict:
    s = ck.section(raw, "sse", "")
    rel = ck.section(raw, "relaxation", "", required=False) or {}
    if seed is None:
        ck.err("seed", "required for stochastic runs")
    if s is None:
        return {}
    k = ck.integer(s, "trajectories", "sse", lo=2)
    dt = ck.time(s, "dt", "sse", positive=True, required=False)
    form = ck.choice(s, "dephasing_noise", "sse", ["amplitude-weighted", "constant"],
                     "amplitude-weighted")
    gi = ck.energy(rel, "inelastic", "relaxation", required=False) or 0.0
    ge = ck.energy(rel, "elastic", "relaxation", required=False) or 0.0
    ns = {"trajectories": k, "dephasing_noise": form}
    if dt is not None:
        ns["dt"] = fmt_time(dt)
    norm["sse"] = ns
    norm["relaxation"] = {"inelastic": fmt_energy(gi), "elastic": fmt_energy(ge)}
    return {"trajectories": k, "dt": dt, "form": form, "inelastic": gi, "elastic": ge}


# ----------------------------------------------------------------------------
# loading
# ----------------------------------------------------------------------------

def bundled_path(name: str) -> Path:
    p = resources.files("darkcavity") / "scenarios" / f"{name}.scenario"
    return Path(str(p))


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario or run-manifest file.

    A bare bundled name (e.g. "fig2") resolves to the packaged scenario.
    """
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = bundled_path(str(path))
    try:
        text = p.read_text()
    except OSError as e:
        raise ScenarioError([("", f"cannot read file: {e.strerror}")], str(path)) from e
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScenarioError([("", f"parse error: {e}")], str(path)) from e
    return _validate(raw, str(path))


def scenario_from_dict(raw: dict, source: str = "<dict>") -> Scenario:
    return _validate(raw, source)


# ----------------------------------------------------------------------------
# running
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class RunResult:
    out_dir: Path
    files: tuple[Path, ...]
    manifest: dict


def _write_csv(path: Path, s: Scenario, columns: list[str], data: np.ndarray,
               notes: dict | None = None):
    head = [f"darkcavity {__version__}", f"scenario: {s.name} ({s.kind})",
            f"seed: {s.seed if s.seed is not None else 'none'}",
            f"config-sha256: {s.config_hash}"]
    for k, v in (notes or {}).items():
        head.append(f"{k}: {v}")
    with open(path, "w", newline="\n") as fh:
        for line in head:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        np.savetxt(fh, np.atleast_2d(data), fmt="%.17g", delimiter=",")


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    """(header notes, column names, data) of a file written by run_scenario."""
    notes, cols, rows = {}, None, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[2:].rstrip("\n").partition(": ")
                notes[k] = v
            elif cols is None:
                cols = line.strip().split(",")
            elif line.strip():
                rows.append([float(x) for x in line.split(",")])
    return notes, cols or [], np.array(rows)


def _traj_table(tr, rabi):
    f = tr.coupling_amplitude(rabi)
    cols = ["t_fs", "photon"] + [f"qubit_{j + 1}" for j in range(tr.n)] + \
        ["qubit_total", "re_F", "im_F"]
    data = np.column_stack([tr.times, tr.photon_population, tr.qubit_populations,
                            tr.qubit_population, f.real, f.imag])
    return cols, data


def _run_traj(s: Scenario, ens: QubitEnsemble, initial):
    m = s.extra.get("method", "eigen" if s.kind == "inhomog" else "ode")
    if m == "analytic":
        return evolve_resonant_analytic(initial, s.mu, ens.rabi, s.times)
    if m == "eigen":
        return eigenmode_evolution(initial, s.mu, ens.rabi, ens.detunings, s.times)
    return evolve_detuned_numeric(initial, s.mu, ens.rabi, ens.detunings, t_grid=s.times)


def _run(s: Scenario, out: Path) -> list[Path]:
    files: list[Path] = []
    if s.kind == "field":
        from .field import field as efield
        f = s.extra
        rho = np.linspace(0.0, f["rho_max"], f["samples"])
        e = efield(SphereGeometry(f["z0"]), rho, f["approx"], f["terms"])
        p = out / "field.csv"
        _write_csv(p, s, ["rho", "E"], np.column_stack([rho, e]))
        files.append(p)
    elif s.kind in ("evolve", "inhomog"):
        sweep = s.extra.get("sweep")
        if sweep:
            base = s.ensemble.rabi / s.ensemble.rabi[0]
            for i, peak in enumerate(sweep):
                ens = QubitEnsemble(s.ensemble.detunings, base * peak)
                tr = _run_traj(s, ens, s.initial)
                cols, data = _traj_table(tr, ens.rabi)
                p = out / f"trajectory_{i}.csv"
                _write_csv(p, s, cols, data, {"peak_rabi_meV": repr(float(peak)),
                                             "collective_rabi_meV": repr(ens.collective_rabi)})
                files.append(p)
        else:
            tr = _run_traj(s, s.ensemble, s.initial)
            cols, data = _traj_table(tr, s.ensemble.rabi)
            p = out / "trajectory.csv"
            _write_csv(p, s, cols, data,
                       {"collective_rabi_meV": repr(s.ensemble.collective_rabi)})
            files.append(p)
    elif s.kind == "modes":
        nm = normal_modes(s.mu, s.ensemble.rabi, s.ensemble.detunings)
        p = out / "modes.csv"
        _write_csv(p, s, ["re_p_meV", "im_p_meV"], np.column_stack([nm.roots.real,
                                                                    nm.roots.imag]))
        files.append(p)
    elif s.kind == "spectrum":
        files += _run_spectrum(s, out)
    elif s.kind == "block":
        files += _run_block(s, out)
    elif s.kind == "sse":
        files += _run_sse(s, out)
    return files


def _run_spectrum(s: Scenario, out: Path) -> list[Path]:
    x = s.extra
    lo, hi, n = x["nu"]
    nu = np.linspace(lo, hi, n)
    cols, data, peaks = ["nu_meV"], [nu], []
    for q in x["qubits"]:
        if x["method"] == "analytic":
            sp = spectrum_analytic(nu, x["rabi"], s.mu, q)
        else:
            dt = 0.01 * HBAR / max(s.mu, x["rabi"] * np.sqrt(q))
            m = int(np.ceil(40 * HBAR / s.mu / dt))  # cutoff on the grid
            t = np.arange(2 * m + 1) * dt
            sp = spectrum_numeric(t, c10_single_excited(t, x["rabi"], s.mu, q), nu, m * dt, m * dt)
        cols.append(f"S_N{q}")
        data.append(sp.S)
        for pk in peak_summary(sp):
            peaks.append([q, pk.position, pk.height, pk.fwhm])
    p1, p2 = out / "spectrum.csv", out / "peaks.csv"
    _write_csv(p1, s, cols, np.column_stack(data))
    _write_csv(p2, s, ["qubits", "position_meV", "height", "fwhm_meV"],
               np.array(peaks) if peaks else np.zeros((0, 4)))
    return [p1, p2]


def _run_block(s: Scenario, out: Path) -> list[Path]:
    x = s.extra
    N, M = x["qubits"], x["photons"]
    if isinstance(x["initial"], str):
        blk = preset_state(x["initial"], N, M)
    else:
        blk = build_block(N, M).from_subsets(x["entries"])
    amps = evolve_block(blk, x["rabi"], s.mu, s.times)
    pops = np.array([layer_populations(blk, a) for a in amps])
    dec = decompose_bright_dark(blk)
    cols = ["t_fs"] + [f"layer_p{p}" for p in range(pops.shape[1])] + ["total"]
    data = [s.times, pops, pops.sum(axis=1)]
    for t in x["track"]:
        cols.append("C_" + "_".join(map(str, t)))
        data.append(np.abs(amps[:, blk.index(t)]) ** 2)
    p = out / "layers.csv"
    _write_csv(p, s, cols, np.column_stack(data),
               {"retained_fraction": repr(float(dec.retained_fraction))})
    return [p]


def _run_sse(s: Scenario, out: Path) -> list[Path]:
    x = s.extra
    n = s.ensemble.n
    rel = RelaxationSpec(np.full(n, x["inelastic"]), np.full(n, x["elastic"]))
    spec = SSESpec(s.mu, rel, x["form"])
    trajs = sample_trajectories(s.initial, spec, s.ensemble, s.times, x["trajectories"],
                                s.seed, x["dt"])
    obs = {"photon": lambda tr: tr.photon_population,
           "qubit_total": lambda tr: tr.qubit_population,
           "norm": lambda tr: tr.norm,
           "re_rho_0_1": lambda tr: (np.conj(tr.c00) * tr.c0[:, 0]).real,
           "im_rho_0_1": lambda tr: (np.conj(tr.c00) * tr.c0[:, 0]).imag}
    cols, data = ["t_fs"], [s.times]
    for k, f in obs.items():
        m, e = ensemble_average(trajs, f)
        cols += [k, f"{k}_stderr"]
        data += [m, e]
    p = out / "sse_mean.csv"
    _write_csv(p, s, cols, np.column_stack(data))
    return [p]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_scenario(s: Scenario, out_dir) -> RunResult:
    """Run ``s`` into ``out_dir`` (created). Writes CSVs and manifest.json.

    CSV bytes depend only on the scenario; wall time lives in the manifest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        files = _run(s, out)
    except Exception as e:
        raise RuntimeError(f"scenario {s.name!r} ({s.kind}) failed: "
                           f"{type(e).__name__}: {e}") from e
    wall = time.perf_counter() - t0
    manifest = {"name": s.name, "kind": s.kind, "version": __version__, "seed": s.seed,
                "config_sha256": s.config_hash, "wall_time_s": round(wall, 6),
                "outputs": {f.name: _sha256(f) for f in files}, "scenario": s.config}
    mp = out / "manifest.json"
    mp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(out, tuple(files), manifest)
