"""Command-line driver: read an INI run file, dispatch a study, write CSVs.

Run files are flat-sectioned ``key = value`` documents.  Unknown sections
or keys are rejected, and every violation is reported with its
``section.key`` path in one pass.  See :data:`DEFAULTS` for the keys and
their default values.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import logging
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import harness
from .assembly import SourceSpec
from .cross_section import CrossSection, axial_wavenumber, beta_max, check_threshold, neumann_eigenpairs
from .errors import ConfigError, WaveguideError
from .geometry import PRESETS, MetricField, check_alpha
from .pml import PROFILES, PmlSpec, validate_lambda
from .reference import mode_amplitudes, project_modes
from .spectrum import critical_beta, default_xi_max, essential_curves, spectral_distance

logger = logging.getLogger(__name__)

KINDS = ("modes", "spectrum", "solve", "converge", "stability", "pullback", "decay", "lap")

# section -> key -> default (as text).  ``None`` means "derived when absent".
DEFAULTS: Dict[str, Dict[str, Optional[str]]] = {
    "geometry": {"preset": "straight", "a": "1.0", "b_exp": "0.5", "g_exp": "-1.0", "L_y": "1.0", "weight": "flat",
                 "grid_nodes": "2001"},
    "pml": {"r": "6.0", "w": "2.0", "lambda_re": "0.0", "lambda_im": "0.4", "alpha": "0.45", "profile": "cubic"},
    "problem": {"mu0": "20.0", "n_modes": "8"},
    "problem.source": {"mode": "1", "x0": "3.0", "gamma": "4.0", "amplitude_re": "1.0", "amplitude_im": "0.0"},
    "mesh": {"nx_per_unit": "40", "ny": "40"},
    "study": {
        "kind": "solve",
        "R": "14.0",
        "x_phys": "5.0",
        "R_list": "10:16",
        "R_reference": "24.0",
        "r_list": "6, 9",
        "lambda_list": "0.3j, 0.4j, 0.5j",
        "R_offset": "8.0",
        "lambda_real": "0.35",
        "levels": "20, 40, 80",
        "control_mu0_list": "",
        "control_R": "10.0",
        "beta": "0.0",
        "xi_max": None,
        "samples": "4001",
        "stations": "5.5, 6.0",
        "workers": "1",
    },
    "output": {"directory": "out", "emit_fields": "false"},
}


@dataclass
class StudyParams:
    kind: str
    R: float
    x_phys: float
    R_list: List[float]
    R_reference: float
    r_list: List[float]
    lambda_list: List[complex]
    R_offset: float
    lambda_real: float
    levels: List[int]
    control_mu0_list: List[float]
    control_R: float
    beta: float
    xi_max: Optional[float]
    samples: int
    stations: Tuple[float, float]
    workers: int


@dataclass
class RunConfig:
    field: MetricField
    spec: PmlSpec
    source: SourceSpec
    mu0: float
    n_modes: int
    nx_per_unit: int
    ny: int
    study: StudyParams
    output_dir: Path
    emit_fields: bool
    raw: Dict[str, Dict[str, str]] = field(default_factory=dict)

    def study_config(self) -> harness.StudyConfig:
        return harness.StudyConfig(
            field=self.field,
            spec=self.spec,
            sources=[self.source],
            mu0=self.mu0,
            nx_per_unit=self.nx_per_unit,
            ny=self.ny,
            x_phys=self.study.x_phys,
            R=self.study.R,
            n_modes=self.n_modes,
            workers=self.study.workers,
        )


def parse_list(text: str, kind=float) -> list:
    """Comma/space separated values, or an inclusive ``start:stop[:step]`` range."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) not in (2, 3):
            raise ValueError(f"range {text!r} must be start:stop or start:stop:step")
        step = parts[2] if len(parts) == 3 else 1.0
        if not step > 0:
            raise ValueError("range step must be positive")
        n = int(np.floor((parts[1] - parts[0]) / step + 1e-9)) + 1
        return [kind(parts[0] + i * step) for i in range(n)]
    return [kind(tok) for tok in text.replace(",", " ").split()]


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _weight(text: str):
    """``flat`` or polynomial coefficients ``c0, c1, ...`` for ``h(y) = sum c_i y^i``."""
    if text.strip().lower() == "flat":
        return None
    coeffs = parse_list(text)
    if not coeffs:
        raise ValueError("empty weight")
    poly = np.polynomial.Polynomial(coeffs)
    if len(coeffs) == 1 and coeffs[0] == 1.0:
        return None
    return poly


class _Reader:
    """Typed access to the merged document that records every failure."""

    def __init__(self, doc: Dict[str, Dict[str, str]]):
        self.doc = doc
        self.violations: List[str] = []

    def get(self, section, key, conv=float):
        raw = self.doc[section][key]
        if raw is None:
            return None
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            self.violations.append(f"{section}.{key}: {exc}")
            return None

    def check(self, path, func):
        try:
            return func()
        except (ValueError, ArithmeticError, WaveguideError) as exc:
            self.violations.append(f"{path}: {exc}")
            return None


def _merge(path) -> Tuple[Dict[str, Dict[str, str]], List[str]]:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str  # keys are case-sensitive (L_y, R, ...)
    with open(path) as fh:
        parser.read_file(fh)
    violations = []
    doc = {sec: dict(keys) for sec, keys in DEFAULTS.items()}
    for sec in parser.sections():
        name = "problem.source" if sec == "source" else sec
        if name not in DEFAULTS:
            violations.append(f"{sec}: unknown section")
            continue
        for key, val in parser.items(sec):
            if key not in DEFAULTS[name]:
                violations.append(f"{name}.{key}: unknown key")
            else:
                doc[name][key] = val
    return doc, violations


def parse_config(path) -> RunConfig:
    """Load and validate a run file; raises :class:`ConfigError` listing all violations."""
    doc, violations = _merge(path)
    rd = _Reader(doc)
    rd.violations.extend(violations)

    g, p, st = doc["geometry"], doc["pml"], doc["study"]
    preset = g["preset"]
    if preset not in PRESETS:
        rd.violations.append(f"geometry.preset: must be one of {PRESETS}, got {preset!r}")
    before = len(rd.violations)
    weight = rd.get("geometry", "weight", _weight)
    L_y = rd.get("geometry", "L_y")
    grid_nodes = rd.get("geometry", "grid_nodes", int)
    cs = None
    if len(rd.violations) == before:
        cs = rd.check("geometry.weight", lambda: CrossSection(L_y, weight, grid_nodes))
    alpha = rd.get("pml", "alpha")
    if alpha is not None:
        rd.check("pml.alpha", lambda: check_alpha(alpha))
    a, b_exp, g_exp = (rd.get("geometry", k) for k in ("a", "b_exp", "g_exp"))
    mfield = None
    if cs is not None and alpha is not None and None not in (a, b_exp, g_exp) and preset in PRESETS:
        mfield = rd.check("geometry", lambda: MetricField(preset, a, b_exp, g_exp, cs, alpha))

    lam_re, lam_im = rd.get("pml", "lambda_re"), rd.get("pml", "lambda_im")
    lam = None
    if lam_re is not None and lam_im is not None:
        lam = complex(lam_re, lam_im)
        if alpha is not None:
            rd.check("pml.lambda", lambda: validate_lambda(lam, alpha))
    r, w = rd.get("pml", "r"), rd.get("pml", "w")
    if r is not None and not r >= 1.0:
        rd.violations.append(f"pml.r: must be >= 1, got {r}")
    if w is not None and not w > 0:
        rd.violations.append(f"pml.w: must be positive, got {w}")
    if p["profile"] not in PROFILES:
        rd.violations.append(f"pml.profile: must be one of {PROFILES}")
    spec = None
    if not any(v.startswith("pml.") for v in rd.violations) and None not in (r, w, lam, alpha):
        spec = rd.check("pml", lambda: PmlSpec(r, w, lam, alpha, p["profile"]))

    mu0 = rd.get("problem", "mu0")
    n_modes = rd.get("problem", "n_modes", int)
    if n_modes is not None and n_modes < 1:
        rd.violations.append("problem.n_modes: must be >= 1")
    mode = rd.get("problem.source", "mode", int)
    x0, gamma = rd.get("problem.source", "x0"), rd.get("problem.source", "gamma")
    amp_re, amp_im = rd.get("problem.source", "amplitude_re"), rd.get("problem.source", "amplitude_im")
    source = None
    if None not in (mode, x0, gamma, amp_re, amp_im):
        source = rd.check("problem.source", lambda: SourceSpec(mode, x0, gamma, complex(amp_re, amp_im)))
    if source is not None and n_modes is not None and source.mode >= n_modes:
        rd.violations.append(f"problem.source.mode: {source.mode} not below problem.n_modes={n_modes}")
    if cs is not None and mu0 is not None and n_modes:
        basis = rd.check("geometry.weight", lambda: neumann_eigenpairs(cs, n_modes))
        if basis is not None:
            rd.check("problem.mu0", lambda: check_threshold(mu0, basis.eigenvalues))

    nx = rd.get("mesh", "nx_per_unit", int)
    ny = rd.get("mesh", "ny", int)
    if nx is not None and nx < 4:
        rd.violations.append("mesh.nx_per_unit: must be >= 4")
    if ny is not None and ny < 4:
        rd.violations.append("mesh.ny: must be >= 4")

    kind = st["kind"]
    if kind not in KINDS:
        rd.violations.append(f"study.kind: must be one of {KINDS}, got {kind!r}")
    params = StudyParams(
        kind=kind,
        R=rd.get("study", "R"),
        x_phys=rd.get("study", "x_phys"),
        R_list=rd.get("study", "R_list", parse_list) or [],
        R_reference=rd.get("study", "R_reference"),
        r_list=rd.get("study", "r_list", parse_list) or [],
        lambda_list=rd.get("study", "lambda_list", lambda t: parse_list(t, complex)) or [],
        R_offset=rd.get("study", "R_offset"),
        lambda_real=rd.get("study", "lambda_real"),
        levels=rd.get("study", "levels", lambda t: parse_list(t, int)) or [],
        control_mu0_list=rd.get("study", "control_mu0_list", parse_list) or [],
        control_R=rd.get("study", "control_R"),
        beta=rd.get("study", "beta"),
        xi_max=rd.get("study", "xi_max"),
        samples=rd.get("study", "samples", int),
        stations=tuple(rd.get("study", "stations", parse_list) or ()),
        workers=rd.get("study", "workers", int),
    )
    if len(params.stations) != 2:
        rd.violations.append("study.stations: need exactly two positions")
    if params.workers is not None and params.workers < 1:
        rd.violations.append("study.workers: must be >= 1")
    if params.x_phys is not None and r is not None and not 0 < params.x_phys <= r:
        rd.violations.append(f"study.x_phys: must lie in (0, pml.r={r}]")
    if source is not None and params.x_phys is not None and source.support_end > params.x_phys + 1e-12:
        rd.violations.append(
            f"problem.source.x0: source reaches x={source.support_end:.6g}, beyond study.x_phys={params.x_phys}"
        )
    if params.R is not None and r is not None and w is not None and params.R < r + 1 + 0.5 * w:
        rd.violations.append(f"study.R: must be >= pml.r + 1 + pml.w/2 = {r + 1 + 0.5 * w}")
    if kind == "converge" and params.R_list and params.R_reference is not None:
        if params.R_reference < 1.5 * max(params.R_list):
            rd.violations.append("study.R_reference: must be >= 1.5 * max(study.R_list)")
    if kind == "pullback" and params.lambda_real is not None and alpha is not None:
        rd.check("study.lambda_real", lambda: validate_lambda(params.lambda_real, alpha))
    if kind == "lap":
        for lam_i in params.lambda_list:
            if alpha is not None:
                rd.check("study.lambda_list", lambda: validate_lambda(lam_i, alpha))
        if len({np.sign(l.imag) for l in params.lambda_list}) > 1:
            rd.violations.append("study.lambda_list: all entries need the same sign of Im")
        if params.r_list and params.x_phys is not None and params.x_phys > min(params.r_list):
            rd.violations.append("study.r_list: window end study.x_phys exceeds min(r_list)")

    emit = rd.get("output", "emit_fields", _parse_bool)
    if rd.violations:
        raise ConfigError(rd.violations)
    return RunConfig(
        field=mfield, spec=spec, source=source, mu0=mu0, n_modes=n_modes, nx_per_unit=nx, ny=ny,
        study=params, output_dir=Path(doc["output"]["directory"]), emit_fields=emit, raw=doc,
    )


def _write_rows(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([harness._fmt(v) for v in row])


def _dump_field(out: Path, sol: harness.FiniteSolution, name: str = "field.csv") -> None:
    g = sol.grid()
    X, Y = np.meshgrid(sol.mesh.x, sol.mesh.y, indexing="ij")
    rows = zip(X.ravel(), Y.ravel(), g.real.ravel(), g.imag.ravel())
    _write_rows(out / name, ["x", "y", "re_v", "im_v"], rows)


def _study_modes(cfg: RunConfig, out: Path) -> Dict[str, bool]:
    basis = neumann_eigenpairs(cfg.field.cross_section, cfg.n_modes)
    k = axial_wavenumber(cfg.mu0, basis.eigenvalues)
    _write_rows(out / "modes.csv", ["j", "nu_j", "k_j_re", "k_j_im"],
                ((j, nu, kj.real, kj.imag) for j, (nu, kj) in enumerate(zip(basis.eigenvalues, k))))
    gram = basis.gram()
    return {"orthonormal": bool(np.max(np.abs(gram - np.eye(basis.n_modes))) <= 1e-10)}


def _study_spectrum(cfg: RunConfig, out: Path) -> Dict[str, bool]:
    basis = neumann_eigenpairs(cfg.field.cross_section, cfg.n_modes)
    st = cfg.study
    xi_max = st.xi_max or default_xi_max(cfg.mu0, basis.eigenvalues)
    curves = essential_curves(cfg.spec.lam, st.beta, basis, xi_max, st.samples, cfg.spec.alpha)
    curves.to_csv(out / "spectrum.csv")
    dist = spectral_distance(cfg.mu0, curves)
    rows = [("mu0", cfg.mu0), ("beta", st.beta), ("distance", dist)]
    crit = {}
    if cfg.spec.lam.imag != 0:
        bmax = beta_max(cfg.mu0, cfg.spec.lam, basis)
        bcrit = critical_beta(cfg.mu0, cfg.spec.lam, basis, samples=st.samples)
        rows += [("beta_max", bmax), ("critical_beta", bcrit)]
        crit["critical_beta_matches_beta_max"] = abs(bcrit - bmax) <= 1e-3
    _write_rows(out / "distance.csv", ["key", "value"], rows)
    return crit


def _study_solve(cfg: RunConfig, out: Path, sc: harness.StudyConfig) -> Dict[str, bool]:
    sol = harness.solve_finite_pml(sc)
    basis = sc.basis
    rows = []
    prop = [j for j in range(basis.n_modes) if basis.eigenvalues[j] < cfg.mu0]
    x1, x2 = cfg.study.stations
    if prop and x2 < cfg.spec.start and x1 >= cfg.source.support_end:
        i1, i2 = (int(np.argmin(np.abs(sol.mesh.x - s))) for s in (x1, x2))
        g = sol.grid()
        a1 = project_modes(g[i1], sol.mesh.y, basis)[prop]
        a2 = project_modes(g[i2], sol.mesh.y, basis)[prop]
        k = np.array([axial_wavenumber(cfg.mu0, basis.eigenvalues[j]) for j in prop])
        cp, cm = mode_amplitudes(a1, a2, sol.mesh.x[i1], sol.mesh.x[i2], k)
        # modes that the source does not excite carry only round-off
        floor = 1e-8 * max(np.max(np.abs(cp)), np.finfo(float).tiny)
        rows = [(j, kj.real, abs(p), abs(mm), abs(mm) / abs(p))
                for j, kj, p, mm in zip(prop, k, cp, cm) if abs(p) > floor]
    _write_rows(out / "solve.csv", ["mode", "k_re", "c_plus_abs", "c_minus_abs", "ratio"], rows)
    _write_rows(out / "solve_summary.csv", ["key", "value"], [
        ("R", sol.R), ("residual", sol.residual), ("source_l2", sol.source_norm),
        ("window_l2", sol.window_norms[0]), ("window_h1", sol.window_norms[1]),
        ("full_l2", sol.full_norms[0]), ("full_h1", sol.full_norms[1]),
    ])
    return {"residual": sol.residual <= sc.tol}


def _emit_report(report: harness.StudyReport, out: Path, name: str) -> Dict[str, bool]:
    report.to_csv(out / f"{name}.csv")
    report.write_summary(out / f"{name}_summary.csv")
    crit = {f"{name}.{k}": v for k, v in report.criteria.items()}
    if report.inconclusive:
        crit[f"{name}.fit_conclusive"] = False
    return crit


def run(cfg: RunConfig, out_dir: Optional[Path] = None, emit_fields: Optional[bool] = None, quiet: bool = False) -> int:
    """Dispatch the configured study; return the process exit code."""
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    emit = cfg.emit_fields if emit_fields is None else emit_fields
    try:
        out.mkdir(parents=True, exist_ok=True)
        st = cfg.study
        kind = st.kind
        crit: Dict[str, bool] = {}
        sc = cfg.study_config() if kind not in ("modes", "spectrum") else None
        if kind == "modes":
            crit = _study_modes(cfg, out)
        elif kind == "spectrum":
            crit = _study_spectrum(cfg, out)
        elif kind == "solve":
            crit = _study_solve(cfg, out, sc)
        elif kind == "converge":
            crit = _emit_report(harness.run_convergence(sc, st.R_list, st.R_reference), out, "converge")
        elif kind == "stability":
            crit = _emit_report(harness.run_stability(sc, st.R_list), out, "stability")
            if st.control_mu0_list:
                control = sc.with_(spec=cfg.spec.with_lambda(0.0))
                rep = harness.run_mu_sweep(control, st.control_mu0_list, R=st.control_R, spike_factor=5.0)
                crit.update(_emit_report(rep, out, "stability_control"))
        elif kind == "pullback":
            rep = harness.run_pullback_check(sc, st.lambda_real, levels=st.levels)
            crit = _emit_report(rep, out, "pullback")
        elif kind == "decay":
            crit = _emit_report(harness.run_decay_check(sc), out, "decay")
        elif kind == "lap":
            rep = harness.run_lap_consistency(sc, st.r_list, st.lambda_list, R_offset=st.R_offset)
            crit = _emit_report(rep, out, "lap")
        if emit and sc is not None:
            _dump_field(out, harness.solve_finite_pml(sc))
    except (WaveguideError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if not quiet:
        for name, ok in crit.items():
            print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if all(crit.values()) else 2


def _digest(directory: Path) -> str:
    h = hashlib.sha256()
    for path in sorted(directory.glob("*.csv")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="waveguide-pml", description=__doc__.splitlines()[0])
    ap.add_argument("config", help="INI run file")
    ap.add_argument("--out-dir", help="override [output] directory")
    ap.add_argument("--emit-fields", action="store_true", help="also write field.csv (x, y, re_v, im_v)")
    ap.add_argument("--seed-check", action="store_true", help="run twice and compare output digests")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 1
    except (OSError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out_dir) if args.out_dir else cfg.output_dir
    emit = True if args.emit_fields else None
    code = run(cfg, out, emit)
    if args.seed_check and code != 1:
        with tempfile.TemporaryDirectory() as tmp:
            again = run(cfg, Path(tmp), emit, quiet=True)
            first, second = _digest(out), _digest(Path(tmp))
        if again != code or first != second:
            print(f"seed-check: outputs differ ({first[:12]} vs {second[:12]})", file=sys.stderr)
            return 1
        print(f"seed-check: identical digest {first[:12]}")
    return code


if __name__ == "__main__":
    sys.exit(main())
