"""Batch experiment runner: ``resonorm <subcommand> --config <file.yaml> --out <dir>``.

Every numeric input lives in the YAML config; flags only select the
subcommand and paths.  Each run writes its data files, a ``summary.json`` and
a ``manifest.json`` (config echo, library version, seed, output list) into
the output directory.  Failures exit with a nonzero status and write
``error.json`` naming the offending config field when there is one.
Outputs are deterministic: the same config gives byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .cocycle import PeriodicGermCocycle, PeriodicLinearCocycle, cocycle_from_text, oseledec_reduce
from .jets import PolyMapJet, from_text, to_text
from .normalform import full_normal_form, renormalize_limit
from .spectrum import ContractionSpectrum, build_table
from .dynamics import (
    ProjectiveEndomorphism,
    birkhoff_lyapunov_oracle,
    cycle_lyapunov_estimate,
    find_periodic_points,
    repelling_density_check,
    verify_nt,
)

__all__ = ["main", "run", "ConfigError", "COMMANDS"]


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field: Optional[str], message: str):
        super().__init__(message)
        self.field = field


# --------------------------------------------------------------------------
# config access
# --------------------------------------------------------------------------
_MISSING = object()


class Section:
    """Read-only view of a mapping that reports dotted field names in errors."""

    def __init__(self, data: Any, path: str = ""):
        if not isinstance(data, dict):
            raise ConfigError(path or None, "expected a mapping")
        self.data = data
        self.path = path

    def _name(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def __contains__(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default: Any = _MISSING) -> Any:
        if key not in self.data:
            if default is _MISSING:
                raise ConfigError(self._name(key), "required field is missing")
            return default
        return self.data[key]

    def section(self, key: str) -> "Section":
        return Section(self.raw(key), self._name(key))

    def _convert(self, key: str, conv: Callable[[Any], Any], default: Any, what: str, check=None, why: str = ""):
        v = self.raw(key, default)
        if v is default and default is not _MISSING:
            return v
        try:
            out = conv(v)
        except (TypeError, ValueError):
            raise ConfigError(self._name(key), f"expected {what}, got {v!r}") from None
        if check is not None and not check(out):
            raise ConfigError(self._name(key), why or f"invalid value {v!r}")
        return out

    def int(self, key: str, default: Any = _MISSING, minimum: Optional[int] = None) -> int:
        def conv(v):
            if isinstance(v, bool) or not isinstance(v, int):
                raise TypeError
            return v

        chk = None if minimum is None else (lambda x: x >= minimum)
        return self._convert(key, conv, default, "an integer", chk, f"must be >= {minimum}")

    def float(self, key: str, default: Any = _MISSING, positive: bool = False) -> float:
        def conv(v):
            if isinstance(v, bool):
                raise TypeError
            x = float(v)
            if not math.isfinite(x):
                raise ValueError
            return x

        chk = (lambda x: x > 0) if positive else None
        return self._convert(key, conv, default, "a finite number", chk, "must be > 0")

    def complex_list(self, key: str, default: Any = _MISSING) -> List[complex]:
        v = self.raw(key, default)
        if v is default and default is not _MISSING:
            return v
        if not isinstance(v, list) or not v:
            raise ConfigError(self._name(key), "expected a non-empty list of numbers")
        return [_complex(x, f"{self._name(key)}[{i}]") for i, x in enumerate(v)]

    def int_range(self, key: str) -> List[int]:
        """``[a, b]`` (inclusive) or ``{start, stop}`` or a single integer."""
        v = self.raw(key)
        name = self._name(key)
        if isinstance(v, int) and not isinstance(v, bool):
            vals = [v]
        elif isinstance(v, dict):
            s = Section(v, name)
            vals = list(range(s.int("start", minimum=1), s.int("stop", minimum=1) + 1))
        elif isinstance(v, list) and len(v) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in v):
            vals = list(range(v[0], v[1] + 1))
        else:
            raise ConfigError(name, "expected an integer, [first, last] or {start, stop}")
        if not vals or min(vals) < 1:
            raise ConfigError(name, "range must be non-empty and start at n >= 1")
        return vals


def _complex(v: Any, name: str) -> complex:
    try:
        if isinstance(v, bool):
            raise TypeError
        if isinstance(v, (list, tuple)):
            if len(v) != 2:
                raise ValueError
            return complex(float(v[0]), float(v[1]))
        if isinstance(v, str):
            return complex(v.replace(" ", ""))
        return complex(float(v))
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a number, [re, im] or a complex literal, got {v!r}") from None


def _seed(cfg: Section) -> int:
    return cfg.int("seed", minimum=0)


# --------------------------------------------------------------------------
# object builders
# --------------------------------------------------------------------------
def _build_map(sec: Section) -> ProjectiveEndomorphism:
    kinds = [k for k in ("polynomial", "product", "components") if k in sec]
    if len(kinds) != 1:
        raise ConfigError(sec.path, "give exactly one of polynomial, product, components")
    kind = kinds[0]
    try:
        if kind == "polynomial":
            return ProjectiveEndomorphism.from_polynomial(sec.complex_list("polynomial"))
        if kind == "product":
            pq = sec.raw("product")
            if not isinstance(pq, list) or len(pq) != 2:
                raise ConfigError(sec._name("product"), "expected two coefficient lists")
            inner = Section({"p": pq[0], "q": pq[1]}, sec._name("product"))
            return ProjectiveEndomorphism.product(inner.complex_list("p"), inner.complex_list("q"))
        comps = sec.raw("components")
        if not isinstance(comps, list) or len(comps) < 2:
            raise ConfigError(sec._name("components"), "expected k+1 lists of [exponents, coefficient] terms")
        out = []
        for ci, comp in enumerate(comps):
            name = f"{sec._name('components')}[{ci}]"
            if not isinstance(comp, list):
                raise ConfigError(name, "expected a list of terms")
            terms = {}
            for ti, term in enumerate(comp):
                tname = f"{name}[{ti}]"
                if not (isinstance(term, list) and len(term) == 2 and isinstance(term[0], list)):
                    raise ConfigError(tname, "expected [[e0, ..., ek], coefficient]")
                exps = tuple(term[0])
                if not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in exps):
                    raise ConfigError(tname, "exponents must be non-negative integers")
                terms[exps] = terms.get(exps, 0) + _complex(term[1], tname)
            out.append(terms)
        return ProjectiveEndomorphism(out)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(sec.path, str(exc)) from None


def _read_relative(base: Path, rel: Any, name: str) -> str:
    if not isinstance(rel, str):
        raise ConfigError(name, "expected a file path")
    p = Path(rel)
    if not p.is_absolute():
        p = base / p
    try:
        return p.read_text()
    except OSError as exc:
        raise ConfigError(name, f"cannot read {p}: {exc.strerror}") from None


def _build_jet(v: Any, name: str, base: Path) -> PolyMapJet:
    """Jet given inline as ``{dim, degree, terms: [[i, [a1..ak], c], ...]}`` or as ``{file: path}``."""
    sec = Section(v, name)
    try:
        if "file" in sec:
            return from_text(_read_relative(base, sec.raw("file"), sec._name("file")))
        dim = sec.int("dim", minimum=1)
        degree = sec.int("degree", minimum=1)
        terms = sec.raw("terms")
        if not isinstance(terms, list):
            raise ConfigError(sec._name("terms"), "expected a list of [component, [a1..ak], coefficient]")
        coeffs: Dict = {}
        for ti, t in enumerate(terms):
            tname = f"{sec._name('terms')}[{ti}]"
            if not (isinstance(t, list) and len(t) == 3 and isinstance(t[0], int) and isinstance(t[1], list)):
                raise ConfigError(tname, "expected [component, [a1..ak], coefficient]")
            key = (t[0], tuple(t[1]))
            coeffs[key] = coeffs.get(key, 0) + _complex(t[2], tname)
        return PolyMapJet(dim, degree, coeffs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


def _build_cocycle(v: Any, name: str, base: Path) -> PeriodicGermCocycle:
    sec = Section(v, name)
    try:
        if "file" in sec:
            return cocycle_from_text(_read_relative(base, sec.raw("file"), sec._name("file")))
        germs = sec.raw("germs")
        if not isinstance(germs, list) or not germs:
            raise ConfigError(sec._name("germs"), "expected a non-empty list of jets")
        return PeriodicGermCocycle(tuple(_build_jet(g, f"{sec._name('germs')}[{i}]", base) for i, g in enumerate(germs)))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


def _build_matrix(v: Any, name: str) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ConfigError(name, "expected a square matrix (list of rows)")
    rows = [[_complex(x, f"{name}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(v)]
    if any(len(r) != len(rows) for r in rows):
        raise ConfigError(name, "matrix must be square")
    return np.array(rows, dtype=complex)


def _build_spectrum(sec: Section) -> ContractionSpectrum:
    ex = sec.raw("exponents")
    if not isinstance(ex, list) or not ex:
        raise ConfigError(sec._name("exponents"), "expected a non-empty list")
    exps = tuple(Section({"x": x}, f"{sec._name('exponents')}[{i}]").float("x") for i, x in enumerate(ex))
    mult = sec.raw("multiplicities", [1] * len(exps))
    if not isinstance(mult, list) or len(mult) != len(exps) or not all(isinstance(m, int) and m >= 1 for m in mult):
        raise ConfigError(sec._name("multiplicities"), "expected positive integers, one per exponent")
    eps = sec.float("epsilon", positive=True)
    try:
        return ContractionSpectrum(exps, tuple(mult), eps)
    except ValueError as exc:
        raise ConfigError(sec.path, str(exc)) from None


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------
def _fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "nan" if math.isnan(x) else format(x, ".16e")
    return str(x)


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


class Outputs:
    def __init__(self, out: Path):
        self.out = out
        self.files: List[str] = []

    def _write(self, name: str, text: str) -> None:
        (self.out / name).write_text(text)
        self.files.append(name)

    def csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
        self._write(name, buf.getvalue())

    def json(self, name: str, data: Any) -> None:
        self._write(name, json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")

    def text(self, name: str, text: str) -> None:
        self._write(name, text)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------
def _cmd_resonance(cfg: Section, out: Outputs, base: Path) -> Dict[str, Any]:
    spec = _build_spectrum(cfg.section("spectrum"))
    delta = cfg.float("delta_res", None, positive=True)
    table = build_table(spec, delta)
    entries = table.rows()
    rows = [(j + 1, " ".join(map(str, a)), c.value, gap) for j, a, c, gap in entries]
    out.csv("resonance.csv", ["block", "alpha", "class", "gap"], rows)
    return {
        "zeta": table.zeta,
        "q_tilde": spec.q_tilde,
        "resonant": [{"block": j + 1, "alpha": list(a)} for j, a, c, _ in entries if c.value == "resonant"],
    }


def _cmd_normalize(cfg: Section, out: Outputs, base: Path) -> Dict[str, Any]:
    G = _build_cocycle(cfg.raw("cocycle"), "cocycle", base)
    eps = cfg.float("epsilon", 0.05, positive=True)
    tol = cfg.float("tol", 1e-12, positive=True)
    n_max = cfg.int("n_max", 400, minimum=1)
    nf = full_normal_form(G, eps=eps, tol=tol, n_max=n_max)
    for i, (v, r) in enumerate(zip(nf.V, nf.R)):
        out.text(f"V_{i}.jet", to_text(v))
        out.text(f"R_{i}.jet", to_text(r))
    return {
        "residual": nf.residual,
        "exponents": list(nf.spectrum.exponents),
        "multiplicities": list(nf.spectrum.multiplicities),
        "q_tilde": nf.spectrum.q_tilde,
        "zeta": nf.table.zeta,
        "h_bound": nf.reduction.h_bound,
        "renorm_iterations": nf.renorm.iterations,
        "renorm_residual": nf.renorm.residual,
    }


def _cmd_renorm(cfg: Section, out: Outputs, base: Path) -> Dict[str, Any]:
    F = _build_cocycle(cfg.raw("F"), "F", base)
    N = _build_cocycle(cfg.raw("N"), "N", base)
    q = cfg.int("q", minimum=1)
    rep = renormalize_limit(
        F,
        N,
        q,
        radius=cfg.float("radius", 0.05, positive=True),
        n_max=cfg.int("n_max", 200, minimum=1),
        tol=cfg.float("tol", 1e-12, positive=True),
        theta=cfg.float("theta", None, positive=True),
    )
    out.csv("deltas.csv", ["n", "delta"], [(i + 1, d) for i, d in enumerate(rep.deltas)])
    for i, t in enumerate(rep.T):
        out.text(f"T_{i}.jet", to_text(t))
    return {
        "converged": rep.converged,
        "iterations": rep.iterations,
        "fitted_ratio": rep.fitted_ratio,
        "theta": rep.theta,
        "theta_min": rep.theta_min,
        "m": rep.m,
        "M": rep.M,
        "residual": rep.residual,
        "tangency": rep.tangency,
        "error_law": list(rep.error_law),
    }


def _cmd_reduce(cfg: Section, out: Outputs, base: Path) -> Dict[str, Any]:
    mats = cfg.raw("matrices")
    if not isinstance(mats, list) or not mats:
        raise ConfigError("matrices", "expected a non-empty list of matrices")
    Ms = [_build_matrix(m, f"matrices[{i}]") for i, m in enumerate(mats)]
    if len({m.shape for m in Ms}) != 1:
        raise ConfigError("matrices", "all matrices must have the same size")
    red = oseledec_reduce(PeriodicLinearCocycle(tuple(Ms)), cfg.float("epsilon", 0.05, positive=True))
    rows = []
    for i, (C, A) in enumerate(zip(red.change_of_basis, red.conjugated)):
        for (r, c), v in np.ndenumerate(C):
            rows.append((i, "C", r, c, v.real, v.imag))
        for (r, c), v in np.ndenumerate(A):
            rows.append((i, "A", r, c, v.real, v.imag))
    out.csv("reduction.csv", ["index", "matrix", "row", "col", "re", "im"], rows)
    chk = red.check()
    return {
        "exponents": list(red.spectrum.exponents),
        "multiplicities": list(red.spectrum.multiplicities),
        "h_bound": red.h_bound,
        "achieved_eps": red.achieved_eps,
        "delta_J": red.delta_J,
        "conjugation_residual": red.conjugation_residual,
        "regular": chk.passed,
    }


def _s_values(cfg: Section, k: int) -> List[int]:
    v = cfg.raw("s", list(range(1, k + 1)))
    vals = v if isinstance(v, list) else [v]
    if not vals or not all(isinstance(x, int) and not isinstance(x, bool) and 1 <= x <= k for x in vals):
        raise ConfigError("s", f"expected integers in 1..{k}")
    return sorted(set(vals))


def _oracle(f: ProjectiveEndomorphism, sec: Section, s: int, seed: int):
    return birkhoff_lyapunov_oracle(
        f,
        s=s,
        n_transient=sec.int("n_transient", 60, minimum=0),
        n_average=sec.int("n_average", 20, minimum=1),
        n_samples=sec.int("n_samples", 10000, minimum=2),
        seed=seed,
    )


def _cmd_cycles(cfg: Section, out: Outputs, base: Path) -> Dict[str, Any]:
    f = _build_map(cfg.section("map"))
    ns = cfg.int_range("n")
    svals = _s_values(cfg, f.dim)
    oracle = {}
    if "oracle" in cfg:
        sec = cfg.section("oracle")
        seed = _seed(cfg)
        for s in svals:
            oracle[s] = _oracle(f, sec, s, seed)
    header = ["n", "card_Rn", "card_Rn_star"]
    header += [f"estimate_s{s}" for s in svals] + [f"estimate_star_s{s}" for s in svals]
    header += ["jacobian_average", "gamma", "complete"]
    for s in oracle:
        header += [f"oracle_s{s}", f"stderr_s{s}"]
    rows = []
    for n in ns:
        e = cycle_lyapunov_estimate(f, n, svals)
        row = [n, e.card_Rn, e.card_Rn_star]
        row += [e.estimates[s] for s in svals] + [e.estimates_primitive[s] for s in svals]
        row += [e.jacobian_average, e.gamma, e.complete]
        for s, o in oracle.items():
            row += [o.value, o.stderr]
        rows.append(row)
    out.csv("cycles.csv", header, rows)
    return {
        "topological_degree": f.topological_degree,
        "n": ns,
        "s": svals,
        "oracle": {s: {"value": o.value, "stderr": o.stderr, "resampled": o.resampled} for s, o in oracle.items()},
    }


def _cmd_birkhoff(cfg: Section, out: Outputs, base: Path) -> Dict[str, Any]:
    f = _build_map(cfg.section("map"))
    seed = _seed(cfg)
    sec = Section(cfg.data, "")
    res = {}
    for s in _s_values(cfg, f.dim):
        o = _oracle(f, sec, s, seed)
        res[s] = {
            "value": o.value,
            "stderr": o.stderr,
            "n_samples": o.n_samples,
            "n_transient": o.n_transient,
            "n_average": o.n_average,
            "resampled": o.resampled,
        }
    return {"oracle": res}


def _pick_record(f: ProjectiveEndomorphism, sec: Section):
    period = sec.int("period", 1, minimum=1)
    target = np.array([1.0] + sec.complex_list("point"), dtype=complex)
    if len(target) != f.dim + 1:
        raise ConfigError(sec._name("point"), f"expected {f.dim} affine coordinates")
    pts = find_periodic_points(f, period)
    cands = [r for r in pts.repulsive if r.point[0] != 0]
    if not cands:
        raise ConfigError(sec.path, "no repelling periodic point of that period")
    dist = [np.linalg.norm(r.point[1:] / r.point[0] - target[1:]) for r in cands]
    best = int(np.argmin(dist))
    if dist[best] > 1e-6 * max(1.0, float(np.linalg.norm(target))):
        raise ConfigError(sec._name("point"), f"no repelling periodic point within 1e-6 (nearest at distance {dist[best]:.3e})")
    return cands[best]


def _cmd_verify_nt(cfg: Section, out: Outputs, base: Path) -> Dict[str, Any]:
    f = _build_map(cfg.section("map"))
    rec = _pick_record(f, cfg.section("orbit"))
    rep = verify_nt(
        f,
        rec,
        n_max=cfg.int("n_max", 20, minimum=2),
        eps=cfg.float("epsilon", None, positive=True),
        samples=cfg.int("samples", 64, minimum=4),
        seed=cfg.int("seed", 0, minimum=0),
    )
    rows = rep.rows()
    header = list(rows[0].keys())
    out.csv("verify_nt.csv", header, [[r[h] for h in header] for r in rows])
    return {
        "passed": rep.passed,
        "containment_ok": rep.containment_ok,
        "bilipschitz_ok": rep.bilipschitz_ok,
        "lipschitz_ok": rep.lipschitz_ok,
        "exterior_ok": rep.exterior_ok,
        "chi": list(rep.chi),
        "chi1": rep.chi1,
        "epsilon": rep.eps,
        "sigma": rep.sigma,
        "radius": rep.radius,
        "chart_radius": rep.chart_radius,
        "L_fit": rep.L_fit,
        "logT_fit": rep.logT_fit,
        "bilipschitz_bounds": list(rep.bilipschitz_bounds),
        "period": rec.period,
    }


def _cmd_density(cfg: Section, out: Outputs, base: Path) -> Dict[str, Any]:
    f = _build_map(cfg.section("map"))
    ns = cfg.int_range("n")
    eps = cfg.float("epsilon", positive=True)
    s = _s_values(cfg, f.dim)[-1] if "s" in cfg else 1
    if "sigma_ref" in cfg:
        sigma = cfg.float("sigma_ref")
        source = "config"
    else:
        o = _oracle(f, cfg.section("oracle"), s, _seed(cfg))
        sigma, source = o.value, "oracle"
    rows = []
    for n in ns:
        d = repelling_density_check(f, n, eps, sigma, s=s)
        rows.append((n, d.card_Rn, d.card_Rn_eps, d.fraction, d.normalized, (1 - eps) ** 3, d.lower_bound_ok, d.upper_bound_ok))
    out.csv("density.csv", ["n", "card_Rn", "card_Rn_eps", "fraction", "normalized", "lower_bound", "lower_ok", "upper_ok"], rows)
    fr = [r[3] for r in rows]
    return {
        "sigma_ref": sigma,
        "sigma_source": source,
        "s": s,
        "epsilon": eps,
        "fraction_non_decreasing": all(b >= a for a, b in zip(fr, fr[1:])),
    }


COMMANDS: Dict[str, Callable[[Section, Outputs, Path], Dict[str, Any]]] = {
    "resonance": _cmd_resonance,
    "normalize": _cmd_normalize,
    "renorm": _cmd_renorm,
    "reduce": _cmd_reduce,
    "cycles": _cmd_cycles,
    "birkhoff": _cmd_birkhoff,
    "verify-nt": _cmd_verify_nt,
    "density": _cmd_density,
}


def _load_config(path: Path) -> Dict[str, Any]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(None, f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(None, f"config is not valid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(None, "config must be a mapping at the top level")
    return data


def run(command: str, config: Path, out: Path) -> int:
    """Run one subcommand; returns the process exit status."""
    out.mkdir(parents=True, exist_ok=True)
    o = Outputs(out)
    try:
        data = _load_config(config)
        cfg = Section(data)
        if command not in COMMANDS:
            raise ConfigError(None, f"unknown command {command!r}")
        summary = COMMANDS[command](cfg, o, config.parent)
    except ConfigError as exc:
        o.json("error.json", {"error": str(exc), "field": exc.field, "type": "ConfigError"})
        print(f"error: {exc}" + (f" (field {exc.field})" if exc.field else ""), file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        o.json("error.json", {"error": str(exc), "field": None, "type": type(exc).__name__})
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    o.json("summary.json", summary)
    manifest = {
        "command": command,
        "config": data,
        "version": __version__,
        "seed": data.get("seed"),
        "outputs": sorted(o.files + ["manifest.json"]),
    }
    o.json("manifest.json", manifest)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="resonorm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, type=Path, help="YAML experiment config")
    ap.add_argument("--out", required=True, type=Path, help="output directory")
    args = ap.parse_args(argv)
    return run(args.command, args.config, args.out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
