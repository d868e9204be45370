"""End-to-end studies of the finite-layer problem.

Every study returns a :class:`StudyReport`: the numeric rows, an
optional fitted exponential rate, and named pass/fail criteria with the
thresholds recorded next to the evidence.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, List, Optional, Sequence

import numpy as np

from .assembly import (
    AssembledSystem,
    Mesh,
    SourceSpec,
    assemble_rhs,
    assemble_system,
    build_mesh,
    discrete_norms,
    source_l2_norm,
)
from .cross_section import ModalBasis, axial_wavenumber, beta_max, neumann_eigenpairs
from .errors import FitError, PreconditionError
from .geometry import MetricField
from .pml import PmlSpec, profile_eval
from .reference import mode_amplitudes, project_modes, reference_field
from .sparse import DEFAULT_TOL, solve

logger = logging.getLogger(__name__)

FLOOR_FACTOR = 3.0
FIT_RESIDUAL_LIMIT = 0.1
UNDERFLOW = 1e-12
MIN_FIT_POINTS = 5


@dataclass
class StudyConfig:
    field: MetricField
    spec: PmlSpec
    sources: List[SourceSpec]
    mu0: float = 20.0
    nx_per_unit: int = 40
    ny: int = 40
    x_phys: float = 5.0
    R: float = 14.0
    n_modes: int = 8
    tol: float = DEFAULT_TOL
    quad_order: int = 2
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.sources, SourceSpec):
            self.sources = [self.sources]
        if not 0 < self.x_phys <= self.spec.r:
            raise PreconditionError(f"window end x_phys={self.x_phys} must lie in (0, r={self.spec.r}]")
        for src in self.sources:
            if src.support_end > self.x_phys + 1e-12:
                raise PreconditionError(
                    f"source mode {src.mode} extends to {src.support_end:.3g}, beyond the window end {self.x_phys}"
                )

    @cached_property
    def basis(self) -> ModalBasis:
        return neumann_eigenpairs(self.field.cross_section, self.n_modes)

    @property
    def window(self):
        return (0.0, self.x_phys)

    def with_(self, **changes) -> "StudyConfig":
        return replace(self, **changes)


@dataclass
class StudyReport:
    name: str
    columns: List[str]
    rows: List[dict] = field(default_factory=list)
    fitted_rate: Optional[float] = None
    fit: Dict[str, object] = field(default_factory=dict)
    criteria: Dict[str, bool] = field(default_factory=dict)
    thresholds: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    inconclusive: bool = False

    @property
    def passed(self) -> bool:
        return not self.inconclusive and all(self.criteria.values())

    @property
    def status(self) -> str:
        if self.inconclusive:
            return "inconclusive"
        return "pass" if self.passed else "fail"

    def column(self, name) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_fmt(row.get(c, "")) for c in self.columns])
            if self.fitted_rate is not None:
                w.writerow(["fit", _fmt(self.fitted_rate), _fmt(self.fit.get("residual", ""))])

    def summary_rows(self):
        yield ("status", self.status)
        if self.fitted_rate is not None:
            yield ("fitted_rate", self.fitted_rate)
        for key, val in self.fit.items():
            yield ("fit." + key, val)
        for key, val in self.thresholds.items():
            yield ("threshold." + key, val)
        for key, ok in self.criteria.items():
            yield ("criterion." + key, "pass" if ok else "fail")
        for note in self.notes:
            yield ("note", note)

    def write_summary(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["key", "value"])
            for key, val in self.summary_rows():
                w.writerow([key, _fmt(val)])


def _fmt(val):
    if isinstance(val, (bool, np.bool_)):
        return str(bool(val)).lower()
    if isinstance(val, (int, np.integer)):
        return str(int(val))
    if isinstance(val, (float, np.floating)):
        return f"{float(val):.17g}"
    if isinstance(val, complex):
        return f"{val.real:.17g}{val.imag:+.17g}j"
    if isinstance(val, (list, tuple)):
        return " ".join(_fmt(v) for v in val)
    return str(val)


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class FiniteSolution:
    R: float
    mesh: Mesh
    system: AssembledSystem
    u: np.ndarray  # full nodal vector, zeros on x = R
    residual: float
    source_norm: float
    window_norms: tuple
    full_norms: tuple

    def grid(self) -> np.ndarray:
        return self.mesh.grid(self.u)


def solve_finite_pml(
    config: StudyConfig,
    R: Optional[float] = None,
    spec: Optional[PmlSpec] = None,
    sources: Optional[Sequence[SourceSpec]] = None,
    nx_per_unit: Optional[int] = None,
    ny: Optional[int] = None,
    mu0: Optional[float] = None,
) -> FiniteSolution:
    """Assemble and solve the truncated problem; norms are flat-measure."""
    R = config.R if R is None else R
    spec = config.spec if spec is None else spec
    sources = config.sources if sources is None else sources
    mu0 = config.mu0 if mu0 is None else mu0
    if R < spec.r + 1.0 + 0.5 * spec.w:
        raise PreconditionError(f"R={R} must be >= r + 1 + w/2 = {spec.r + 1 + 0.5 * spec.w}")
    mesh = build_mesh(R, nx_per_unit or config.nx_per_unit, ny or config.ny, config.field.cross_section.length)
    system = assemble_system(mesh, config.field, spec, mu0, quad_order=config.quad_order)
    rhs = assemble_rhs(system, sources, config.basis)
    result = solve(system.A, rhs, tol=config.tol)
    u = system.expand(result.x)
    return FiniteSolution(
        R=R,
        mesh=mesh,
        system=system,
        u=u,
        residual=result.residual,
        source_norm=source_l2_norm(mesh, sources, config.basis, spec),
        window_norms=discrete_norms(mesh, u, (0.0, min(config.x_phys, R))),
        full_norms=discrete_norms(mesh, u, (0.0, R)),
    )


def _window_nodes(mesh: Mesh, b: float) -> int:
    return int(np.searchsorted(mesh.x, b + 1e-9 * max(1.0, mesh.R), side="right"))


def window_difference(a: FiniteSolution, b: FiniteSolution, window) -> tuple:
    """Relative ``(L2, H1)`` difference of two solutions on a common window.

    Both meshes must share their nodes inside the window.
    """
    n = _window_nodes(a.mesh, window[1])
    if _window_nodes(b.mesh, window[1]) != n or a.mesh.ny != b.mesh.ny:
        raise PreconditionError("meshes do not share nodes on the window")
    if not np.allclose(a.mesh.x[:n], b.mesh.x[:n], rtol=0, atol=1e-9):
        raise PreconditionError("window node coordinates differ between meshes")
    ga, gb = a.grid(), b.grid()
    diff = np.zeros_like(ga)
    diff[:n] = ga[:n] - gb[:n]
    ref = np.zeros_like(ga)
    ref[:n] = gb[:n]
    dl2, dh1 = discrete_norms(a.mesh, diff.ravel(), window)
    rl2, rh1 = discrete_norms(a.mesh, ref.ravel(), window)
    return dl2 / rl2, dh1 / rh1


def prefloor_mask(errors: Sequence[float], factor: float = FLOOR_FACTOR) -> np.ndarray:
    """Rows above the discretization floor.

    The floor is the set of rows within ``factor`` of the smallest value;
    it only counts as a plateau (and is excluded) when it has two or more
    rows.
    """
    e = np.asarray(errors, dtype=float)
    floor = e <= factor * np.min(e)
    if np.count_nonzero(floor) >= 2:
        return ~floor
    return np.ones_like(floor)


def fit_exponential(params, values) -> dict:
    """Least-squares fit ``log(values) = c - rate * params``."""
    p = np.asarray(params, dtype=float)
    v = np.log(np.asarray(values, dtype=float))
    A = np.vstack([np.ones_like(p), -p]).T
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    resid = v - A @ coef
    return {
        "rate": float(coef[1]),
        "intercept": float(coef[0]),
        "residual": float(np.sqrt(np.mean(resid**2))),
        "points": int(len(p)),
        "range": (float(p.min()), float(p.max())),
    }


def run_convergence(
    config: StudyConfig, R_list: Sequence[float], R_reference: float, rate_window=(0.8, 1.2)
) -> StudyReport:
    """Window error of ``v_R`` against the largest-``R`` solve on the same mesh family."""
    R_list = sorted(R_list)
    if R_reference < 1.5 * max(R_list):
        raise PreconditionError(f"R_reference={R_reference} must be >= 1.5 * max(R_list) = {1.5 * max(R_list)}")
    ref = solve_finite_pml(config, R_reference)
    sols = _map(lambda R: solve_finite_pml(config, R), R_list, config.workers)
    report = StudyReport("converge", ["R", "l2_err", "h1_err", "residual", "prefloor"])
    l2 = []
    for R, sol in zip(R_list, sols):
        e_l2, e_h1 = window_difference(sol, ref, config.window)
        l2.append(e_l2)
        report.rows.append({"R": R, "l2_err": e_l2, "h1_err": e_h1, "residual": sol.residual})
    mask = prefloor_mask(l2)
    for row, keep in zip(report.rows, mask):
        row["prefloor"] = bool(keep)
    target = beta_max(config.mu0, config.spec.lam, config.basis)
    lo, hi = rate_window[0] * target, rate_window[1] * target
    report.thresholds.update(beta_max=target, rate_lo=lo, rate_hi=hi, min_prefloor_rows=3)
    if np.count_nonzero(mask) < 3:
        raise FitError(f"only {np.count_nonzero(mask)} rows above the discretization floor; need 3")
    fit = fit_exponential(np.array(R_list)[mask], np.array(l2)[mask])
    report.fitted_rate = fit.pop("rate")
    report.fit = fit
    # real lam gives beta_max = 0: no decay is predicted and the window is empty
    report.fit["rate_over_beta_max"] = report.fitted_rate / target if target > 0 else float("nan")
    report.criteria["rate_in_window"] = bool(target > 0 and lo <= report.fitted_rate <= hi)
    report.criteria["enough_prefloor_rows"] = True
    if fit["residual"] > FIT_RESIDUAL_LIMIT:
        report.inconclusive = True
        report.notes.append(f"log-space fit residual {fit['residual']:.3g} above {FIT_RESIDUAL_LIMIT}")
    return report


def run_stability(config: StudyConfig, R_list: Sequence[float], max_variation: float = 2.0) -> StudyReport:
    """``||v_R|| / ||F||`` over the whole truncated domain as ``R`` varies."""
    R_list = sorted(R_list)
    if max(R_list) < 2.0 * min(R_list):
        raise PreconditionError("R_list must span at least a factor of 2")
    sols = _map(lambda R: solve_finite_pml(config, R), R_list, config.workers)
    report = StudyReport("stability", ["R", "l2_ratio", "h1_ratio", "residual"])
    for R, sol in zip(R_list, sols):
        report.rows.append(
            {
                "R": R,
                "l2_ratio": sol.full_norms[0] / sol.source_norm,
                "h1_ratio": sol.full_norms[1] / sol.source_norm,
                "residual": sol.residual,
            }
        )
    ratios = report.column("l2_ratio")[1:]
    variation = float(ratios.max() / ratios.min())
    report.fit["variation"] = variation
    report.thresholds["max_variation"] = max_variation
    report.criteria["bounded"] = variation <= max_variation
    return report


def run_mu_sweep(
    config: StudyConfig, mu0_list: Sequence[float], R: Optional[float] = None, spike_factor: Optional[float] = None,
    max_variation: Optional[float] = None,
) -> StudyReport:
    """Solution-to-source ratio across a sweep of ``mu0`` at fixed ``R``.

    With a real scaling parameter the truncated cavity has real resonances
    and the ratio spikes; ``spike_factor`` asserts that it does,
    ``max_variation`` asserts the opposite.
    """
    R = config.R if R is None else R
    sols = _map(lambda mu: solve_finite_pml(config, R, mu0=mu), mu0_list, config.workers)
    report = StudyReport("mu_sweep", ["mu0", "l2_ratio", "residual"])
    for mu, sol in zip(mu0_list, sols):
        report.rows.append({"mu0": mu, "l2_ratio": sol.full_norms[0] / sol.source_norm, "residual": sol.residual})
    ratios = report.column("l2_ratio")
    variation = float(ratios.max() / ratios.min())
    report.fit["variation"] = variation
    if spike_factor is not None:
        report.thresholds["spike_factor"] = spike_factor
        report.criteria["spike"] = variation > spike_factor
    if max_variation is not None:
        report.thresholds["max_variation"] = max_variation
        report.criteria["bounded"] = variation <= max_variation
    return report


def _interp_axial(x_new, x_old, values):
    """Linear interpolation along axis 0 of ``values`` (complex)."""
    idx = np.clip(np.searchsorted(x_old, x_new, side="right") - 1, 0, len(x_old) - 2)
    t = (x_new - x_old[idx]) / (x_old[idx + 1] - x_old[idx])
    return values[idx] * (1 - t)[:, None] + values[idx + 1] * t[:, None]


def run_pullback_check(
    config: StudyConfig, lambda_real: float, levels: Sequence[int] = (20, 40, 80), min_order: float = 1.7,
    R: Optional[float] = None,
) -> StudyReport:
    """Deformed-metric solve at real ``lam`` against the stretched-domain solve pulled back.

    ``levels`` are axial densities; ``ny`` scales with them so both mesh
    directions are refined together.  A real ``lam`` gives a lossless
    cavity, so close to one of its resonances the discretization error is
    amplified and the asymptotic order shows up only on finer meshes; the
    ``norm_ratio`` column (``||v|| / ||F||``) exposes that situation.
    """
    if not np.isreal(lambda_real):
        raise PreconditionError("pullback check needs a real scaling parameter")
    lam = float(np.real(lambda_real))
    spec = config.spec.with_lambda(lam)
    physical = config.spec.with_lambda(0.0)
    R = config.R if R is None else R
    s_R, _ = profile_eval(spec, R)
    R_stretched = R + lam * s_R
    ny0 = config.ny * levels[0] // config.nx_per_unit if config.nx_per_unit else config.ny
    ny0 = max(4, ny0)
    report = StudyReport("pullback", ["nx_per_unit", "ny", "h", "l2_discrepancy", "norm_ratio", "order"])
    for level in levels:
        ny = ny0 * level // levels[0]
        deformed = solve_finite_pml(config, R, spec=spec, nx_per_unit=level, ny=ny)
        stretched = solve_finite_pml(config, R_stretched, spec=physical, nx_per_unit=level, ny=ny)
        s, _ = profile_eval(spec, deformed.mesh.x)
        pulled = _interp_axial(deformed.mesh.x + lam * s, stretched.mesh.x, stretched.grid())
        diff = deformed.grid() - pulled
        num = discrete_norms(deformed.mesh, diff.ravel(), (0.0, R))[0]
        den = deformed.full_norms[0]
        report.rows.append(
            {"nx_per_unit": level, "ny": ny, "h": 1.0 / level, "l2_discrepancy": num / den,
             "norm_ratio": den / deformed.source_norm, "order": float("nan")}
        )
    d = report.column("l2_discrepancy")
    h = report.column("h")
    orders = []
    for i in range(1, len(d)):
        order = float(np.log(d[i - 1] / d[i]) / np.log(h[i - 1] / h[i])) if d[i] > 0 and d[i - 1] > 0 else np.inf
        report.rows[i]["order"] = order
        orders.append(order)
    report.thresholds["min_order"] = min_order
    if lam == 0:
        report.criteria["exact"] = bool(np.all(d == 0))
    else:
        report.criteria["order"] = bool(orders) and all(o >= min_order for o in orders)
    return report


def fem_axial_wavenumber(mu0: float, mode: int, mesh: Mesh) -> complex:
    """Axial wavenumber of a separated mode of the bilinear discretization.

    Flat straight guide on a uniform grid: the transverse eigenvalue and
    the axial dispersion relation of linear elements with consistent mass.
    """
    c = np.cos(mode * np.pi * mesh.hy / mesh.L_y)
    nu_h = 6.0 / mesh.hy**2 * (1.0 - c) / (2.0 + c)
    k2 = mu0 - nu_h
    hx = mesh.hx
    cos_kh = (1.0 - k2 * hx * hx / 3.0) / (1.0 + k2 * hx * hx / 6.0)
    k = np.arccos(complex(cos_kh)) / hx
    return k if k.imag >= 0 else -k


def run_reflection(
    config: StudyConfig,
    R_list: Sequence[float],
    stations=(5.5, 6.0),
    bound: float = 1e-2,
    discrete_k: bool = True,
) -> StudyReport:
    """``|c-| / |c+|`` per propagating mode from two stations between source and layer."""
    R_list = sorted(R_list)
    modes = sorted({s.mode for s in config.sources if config.basis.eigenvalues[s.mode] < config.mu0})
    if not modes:
        raise PreconditionError("no propagating mode is excited")
    sols = _map(lambda R: solve_finite_pml(config, R), R_list, config.workers)
    report = StudyReport("reflection", ["R", "mode", "k_re", "c_plus_abs", "c_minus_abs", "ratio"])
    per_mode = {j: [] for j in modes}
    for R, sol in zip(R_list, sols):
        mesh = sol.mesh
        i1, i2 = (int(np.argmin(np.abs(mesh.x - s))) for s in stations)
        x1, x2 = mesh.x[i1], mesh.x[i2]
        g = sol.grid()
        a1 = project_modes(g[i1], mesh.y, config.basis)[modes]
        a2 = project_modes(g[i2], mesh.y, config.basis)[modes]
        if discrete_k:
            k = np.array([fem_axial_wavenumber(config.mu0, j, mesh) for j in modes])
        else:
            k = np.array([axial_wavenumber(config.mu0, config.basis.eigenvalues[j]) for j in modes])
        cp, cm = mode_amplitudes(a1, a2, x1, x2, k)
        for j, kj, p, m in zip(modes, k, cp, cm):
            ratio = abs(m) / abs(p)
            per_mode[j].append(ratio)
            report.rows.append(
                {"R": R, "mode": j, "k_re": kj.real, "c_plus_abs": abs(p), "c_minus_abs": abs(m), "ratio": ratio}
            )
    report.thresholds["bound"] = bound
    report.criteria["bounded"] = all(max(v) <= bound for v in per_mode.values())
    report.criteria["decreasing"] = all(_decreasing_to_floor(v) for v in per_mode.values())
    return report


def _decreasing_to_floor(values) -> bool:
    """Strictly decreasing until the sequence reaches its floor plateau."""
    v = np.asarray(values, dtype=float)
    above = prefloor_mask(v)
    return all(v[i + 1] < v[i] for i in range(len(v) - 1) if above[i]) and v[-1] < v[0]


def run_decay_check(
    config: StudyConfig, margin: float = 2.0, slope_factor: float = 0.75, rel_tol: float = 0.25,
    R: Optional[float] = None,
) -> StudyReport:
    """Log-slope of each modal amplitude inside the full-strength part of the layer.

    Every propagating mode (and the first evanescent one) is excited with
    the configuration's first source profile.
    """
    lam = config.spec.lam
    if not lam.imag > 0:
        raise PreconditionError("decay check needs Im(lambda) > 0")
    R = config.R if R is None else R
    nu = config.basis.eigenvalues
    n_prop = int(np.count_nonzero(nu < config.mu0))
    template = config.sources[0]
    modes = list(range(min(n_prop + 1, config.basis.n_modes)))
    sources = [SourceSpec(j, template.x0, template.gamma, 1.0) for j in modes]
    sol = solve_finite_pml(config, R, sources=sources)
    mesh = sol.mesh
    a, b = config.spec.full_strength, R - margin
    if not b > a + 0.5:
        raise PreconditionError(f"fit range [{a}, {b}] too short; increase R")
    sel = (mesh.x >= a - 1e-9) & (mesh.x <= b + 1e-9)
    amps = project_modes(sol.grid()[sel], mesh.y, config.basis)
    report = StudyReport("decay", ["mode", "nu", "expected_rate", "fitted_slope", "start_amplitude", "status"])
    ok_op, ok_acc = [], []
    for j in modes:
        k = axial_wavenumber(config.mu0, nu[j])
        expected = abs(((1.0 + lam) * k).imag)
        mag = np.abs(amps[j])
        row = {"mode": j, "nu": nu[j], "expected_rate": expected, "start_amplitude": mag[0]}
        usable = mag >= UNDERFLOW
        if np.count_nonzero(usable) < MIN_FIT_POINTS:
            row.update(fitted_slope=float("nan"), status="underflow")
            report.notes.append(f"mode {j}: amplitude {mag[0]:.2e} reaches {UNDERFLOW:g} too early to fit")
            ok_op.append(True)
        else:
            fit = fit_exponential(mesh.x[sel][usable], mag[usable])
            slope = -fit["rate"]
            propagating = nu[j] < config.mu0
            row.update(fitted_slope=slope, status="propagating" if propagating else "evanescent")
            ok_op.append(slope <= -slope_factor * expected)
            if propagating:
                ok_acc.append(abs(-slope - expected) <= rel_tol * expected)
        report.rows.append(row)
    report.thresholds.update(slope_factor=slope_factor, rel_tol=rel_tol, fit_start=a, fit_end=b)
    report.criteria["slope_bound"] = all(ok_op)
    report.criteria["propagating_rate_match"] = bool(ok_acc) and all(ok_acc)
    return report


def run_lap_consistency(
    config: StudyConfig,
    r_list: Sequence[float],
    lambda_list: Sequence[complex],
    R_offset: float = 8.0,
    bound: float = 1e-2,
    opposite_factor: float = 10.0,
    refine: bool = False,
) -> StudyReport:
    """Window solutions must not depend on the layer start ``r`` or on ``lam``.

    The opposite-sign pair ``(lam, conj(lam))`` is included as a control:
    it selects the other limiting-absorption solution and must differ by
    at least ``opposite_factor * bound``.
    """
    lambda_list = [complex(l) for l in lambda_list]
    signs = {np.sign(l.imag) for l in lambda_list}
    if len(signs) != 1 or 0 in signs:
        raise PreconditionError("lambda_list must share one nonzero sign of Im(lambda)")
    if config.x_phys > min(r_list):
        raise PreconditionError("window must end before the smallest layer start")

    def combos(level):
        pairs = [(r, lam) for r in sorted(r_list) for lam in lambda_list]
        n, ny = config.nx_per_unit * level, config.ny * level

        def one(pair):
            r, lam = pair
            spec = PmlSpec(r, config.spec.w, lam, config.spec.alpha, config.spec.profile)
            return solve_finite_pml(config, r + R_offset, spec=spec, nx_per_unit=n, ny=ny)

        return pairs, _map(one, pairs, config.workers)

    pairs, sols = combos(1)
    report = StudyReport("lap", ["r_a", "lam_a", "r_b", "lam_b", "l2_diff", "kind"])
    worst = 0.0
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            d = window_difference(sols[j], sols[i], config.window)[0]
            worst = max(worst, d)
            report.rows.append(
                {"r_a": pairs[i][0], "lam_a": pairs[i][1], "r_b": pairs[j][0], "lam_b": pairs[j][1],
                 "l2_diff": d, "kind": "same_sign"}
            )
    r0, lam0 = pairs[0]
    spec_opp = PmlSpec(r0, config.spec.w, np.conj(lam0), config.spec.alpha, config.spec.profile)
    opp = solve_finite_pml(config, r0 + R_offset, spec=spec_opp)
    d_opp = window_difference(opp, sols[0], config.window)[0]
    report.rows.append(
        {"r_a": r0, "lam_a": lam0, "r_b": r0, "lam_b": np.conj(lam0), "l2_diff": d_opp, "kind": "opposite_sign"}
    )
    report.fit["max_same_sign"] = worst
    report.fit["opposite_sign"] = d_opp
    report.thresholds.update(bound=bound, opposite_min=opposite_factor * bound)
    report.criteria["same_sign_agree"] = worst <= bound
    report.criteria["opposite_sign_differs"] = d_opp >= opposite_factor * bound
    if refine:
        _, fine = combos(2)
        worst_fine = max(
            window_difference(fine[j], fine[i], config.window)[0]
            for i in range(len(fine))
            for j in range(i + 1, len(fine))
        )
        report.fit["max_same_sign_refined"] = worst_fine
        report.criteria["decreases_under_refinement"] = worst_fine < worst
    return report


def run_oracle_check(
    config: StudyConfig, R: Optional[float] = None, bound: float = 2e-2, min_reduction: float = 3.0
) -> StudyReport:
    """FEM layer solution against the modal Green's-function reference on the window.

    Straight flat guide only.  The mesh is refined once (both directions
    doubled) to observe the second-order trend.
    """
    if config.field.preset != "straight":
        raise PreconditionError("the modal reference exists for the straight preset only")
    R = config.R if R is None else R
    report = StudyReport("oracle", ["nx_per_unit", "ny", "l2_diff", "h1_diff"])
    for level in (1, 2):
        n, ny = config.nx_per_unit * level, config.ny * level
        sol = solve_finite_pml(config, R, nx_per_unit=n, ny=ny)
        mesh = sol.mesh
        nw = _window_nodes(mesh, config.x_phys)
        ref = reference_field(config.sources, config.basis, config.mu0, mesh.x[:nw]).values(mesh.y)
        g = sol.grid()
        diff = np.zeros_like(g)
        diff[:nw] = g[:nw] - ref
        full_ref = np.zeros_like(g)
        full_ref[:nw] = ref
        dl2, dh1 = discrete_norms(mesh, diff.ravel(), config.window)
        rl2, rh1 = discrete_norms(mesh, full_ref.ravel(), config.window)
        report.rows.append({"nx_per_unit": n, "ny": ny, "l2_diff": dl2 / rl2, "h1_diff": dh1 / rh1})
    d = report.column("l2_diff")
    report.fit["reduction"] = float(d[0] / d[1])
    report.thresholds.update(bound=bound, min_reduction=min_reduction)
    report.criteria["close_to_reference"] = bool(d[0] <= bound)
    report.criteria["second_order_trend"] = bool(d[0] / d[1] >= min_reduction)
    return report
