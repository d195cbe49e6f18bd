"""Command-line experiment runner.

    wavetrans run CONFIG.json [--out DIR] [--seed S] [--figure ID]

Every task writes CSV files whose first line is a comment carrying the tool
version, a hash of the configuration and the seed.  Exit status is 0 on
success, 2 for an invalid configuration and 3 for a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .errors import ConfigInvalid, UnknownFigure, WavetransError
from .inversion import (
    autocorrelation_xi,
    autocorrelation_zeta,
    band_frequencies,
    band_theta,
    estimate_range,
    invert_crossrange,
    invert_range_profile,
    PeakTimeModel,
    theta_from_data,
    wideband_solve,
)
from .modes import FluctuationKind, WaveguideConfig, mode_basis
from .scattering import (
    aperture_coupling,
    block_index,
    build_model,
    gaussian_gamma_c,
    model_from_gamma_c,
)
from .source import (
    Delta,
    GaussianAt,
    GaussianWidth,
    PointAt,
    SeparableSource,
    forward_crosscorr,
    forward_data_vector,
    integrate_traces,
    source_spectrum,
)
from .svg import heatmap, line_plot
from .synthdata import (
    MIN_HT,
    ProcessingWindows,
    ensemble_to_csv,
    ensemble_trace_stats,
    self_averaging_report,
    synthesize_ensemble,
)
from .transport import perturbation_diagnostics, transport_speeds
from .tridiag import structure_sweep

TASKS = (
    "Gamma",
    "Spectrum",
    "Speeds",
    "Forward",
    "Synthesize",
    "SelfAvg",
    "InvertRange",
    "InvertCrossrange",
    "Wideband",
    "Tridiag",
)
FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "lambda_pert")
TOP_KEYS = {
    "task",
    "waveguide",
    "scattering",
    "source",
    "aperture_in_X",
    "range",
    "processing",
    "inversion",
    "wideband",
    "tridiag",
    "seed",
    "output",
}
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# -- configuration -------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    raw: dict
    task: Optional[str]
    c_o: float
    wavelength: float
    X: float
    eps: float
    alpha: float
    kind: FluctuationKind
    ells: list
    amplitudes: dict
    source_block: dict
    aperture: tuple
    Z_in_Leq: float
    processing: dict
    inversion: dict
    wideband: dict
    tridiag: dict
    seed: int
    output: str
    hash: str = field(default="")

    @property
    def omega_o(self) -> float:
        return 2 * math.pi * self.c_o / self.wavelength

    def waveguide(self, ell: Optional[float] = None, kind=None) -> WaveguideConfig:
        kind = FluctuationKind(kind or self.kind)
        amps = dict(self.amplitudes)
        if kind is not self.kind:
            amps = _default_amplitudes(kind)
        return WaveguideConfig(
            c_o=self.c_o,
            omega_o=self.omega_o,
            X=self.X,
            ell=self.ells[0] if ell is None else ell,
            eps=self.eps,
            alpha=self.alpha,
            fluctuation_kind=kind,
            **amps,
        )

    def source(self) -> SeparableSource:
        return _parse_source(self.source_block, self.wavelength, self.X)


def _default_amplitudes(kind: FluctuationKind) -> dict:
    return {
        FluctuationKind.MEDIUM: dict(eps_c=1.0, eps_B=0.0, eps_T=0.0),
        FluctuationKind.BOUNDARY: dict(eps_c=0.0, eps_B=0.0, eps_T=1.0),
        FluctuationKind.BOTH: dict(eps_c=1.0, eps_B=0.0, eps_T=1.0),
    }[kind]


def config_hash(raw: dict) -> str:
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _number(block: dict, key: str, default, errors: list, where: str, positive=True):
    v = block.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append(f"{where}.{key}: expected a number, got {v!r}")
        return default
    if positive and not v > 0:
        errors.append(f"{where}.{key}: must be positive, got {v!r}")
    return float(v)


def _length(block: dict, name: str, lam: float, X: Optional[float], default_m=None):
    """Read a length given in metres, wavelengths (_in_lambda) or waveguide depths (_in_X)."""
    if name in block:
        return float(block[name])
    if f"{name}_in_lambda" in block:
        return float(block[f"{name}_in_lambda"]) * lam
    if X is not None and f"{name}_in_X" in block:
        return float(block[f"{name}_in_X"]) * X
    return default_m


def _parse_source(block: dict, lam: float, X: float) -> SeparableSource:
    xi_b = block.get("xi", {"type": "point"})
    t = xi_b.get("type", "point")
    if t == "point":
        xi = PointAt(_length(xi_b, "x", lam, X, X / math.pi))
    elif t == "gaussian":
        xi = GaussianAt(_length(xi_b, "x_o", lam, X, X / 4), _length(xi_b, "sigma", lam, X, X / 30))
    else:
        raise ConfigInvalid(f"source.xi.type: unknown profile {t!r} (point, gaussian)")
    z_b = block.get("zeta", {"type": "delta"})
    t = z_b.get("type", "delta")
    if t == "delta":
        zeta = Delta()
    elif t == "gaussian":
        s = _length(z_b, "s", lam, None)
        if s is None:
            raise ConfigInvalid("source.zeta: gaussian range profile needs s or s_in_lambda")
        zeta = GaussianWidth(s)
    else:
        raise ConfigInvalid(f"source.zeta.type: unknown profile {t!r} (delta, gaussian)")
    src = SeparableSource(xi, zeta)
    src.validate(X)
    return src


def parse_config(raw: Any, figure: Optional[str] = None, seed: Optional[int] = None, out=None) -> ExperimentConfig:
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigInvalid("configuration must be a JSON object; required fields: task, waveguide")
    for k in sorted(set(raw) - TOP_KEYS):
        errors.append(f"{k}: unknown field")
    task = raw.get("task")
    if figure is None:
        if task is None:
            errors.append(f"task: required (one of {', '.join(TASKS)})")
        elif task not in TASKS:
            errors.append(f"task: unknown task {task!r} (one of {', '.join(TASKS)})")
    if "waveguide" not in raw:
        errors.append("waveguide: required block (use {} for the default water waveguide)")
    wg = raw.get("waveguide", {})
    sc = raw.get("scattering", {})
    if not isinstance(wg, dict) or not isinstance(sc, dict):
        errors.append("waveguide/scattering: must be JSON objects")
        wg, sc = {}, {}
    c_o = _number(wg, "c_o", 1500.0, errors, "waveguide")
    lam = _length(wg, "lambda", 1.0, None, 1.5)
    X = _length(wg, "X", lam, None, 20.3 * lam)
    eps = _number(wg, "eps", 0.05, errors, "waveguide")
    alpha = _number(wg, "alpha", 1.5, errors, "waveguide")
    try:
        kind = FluctuationKind(sc.get("kind", "medium"))
    except ValueError:
        errors.append(f"scattering.kind: unknown kind {sc.get('kind')!r} (medium, boundary, both)")
        kind = FluctuationKind.MEDIUM
    ell_in = sc.get("ell_in_lambda", [1.0])
    ell_in = ell_in if isinstance(ell_in, list) else [ell_in]
    if not ell_in or not all(isinstance(v, (int, float)) and v > 0 for v in ell_in):
        errors.append("scattering.ell_in_lambda: expected positive numbers")
        ell_in = [1.0]
    amps = _default_amplitudes(kind)
    for key in ("eps_c", "eps_B", "eps_T"):
        if key in sc:
            amps[key] = _number(sc, key, amps[key], errors, "scattering", positive=False)
    ap = raw.get("aperture_in_X", [0.0, 1.0])
    if not (isinstance(ap, list) and len(ap) == 2 and all(isinstance(v, (int, float)) for v in ap)):
        errors.append("aperture_in_X: expected [lo, hi] as fractions of X")
        ap = [0.0, 1.0]
    rng = raw.get("range", {})
    Z_in = _number(rng, "Z_in_Leq", 1.0, errors, "range") if isinstance(rng, dict) else 1.0
    blocks = {}
    for name in ("processing", "inversion", "wideband", "tridiag", "source"):
        b = raw.get(name, {})
        if not isinstance(b, dict):
            errors.append(f"{name}: must be a JSON object")
            b = {}
        blocks[name] = b
    s = raw.get("seed", 0) if seed is None else seed
    if isinstance(s, bool) or not isinstance(s, int) or s < 0:
        errors.append(f"seed: expected a non-negative integer, got {s!r}")
        s = 0
    if errors:
        raise ConfigInvalid("invalid configuration:\n  " + "\n  ".join(errors))
    cfg = ExperimentConfig(
        raw=raw,
        task=task,
        c_o=c_o,
        wavelength=lam,
        X=X,
        eps=eps,
        alpha=alpha,
        kind=kind,
        ells=[v * lam for v in ell_in],
        amplitudes=amps,
        source_block=blocks["source"],
        aperture=(ap[0] * X, ap[1] * X),
        Z_in_Leq=Z_in,
        processing=blocks["processing"],
        inversion=blocks["inversion"],
        wideband=blocks["wideband"],
        tridiag=blocks["tridiag"],
        seed=s,
        output=str(out if out is not None else raw.get("output", "out")),
    )
    cfg.hash = config_hash(raw)
    try:
        cfg.waveguide()
        cfg.source()
    except WavetransError as e:
        raise ConfigInvalid(f"{type(e).__name__}: {e}") from e
    except ValueError as e:
        raise ConfigInvalid(str(e)) from e
    return cfg


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigInvalid(f"cannot read {path}: {e.strerror}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigInvalid(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e


# -- output ---------------------------------------------------------------------------


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Outputs:
    def __init__(self, directory, cfg: ExperimentConfig):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.header = f"# wavetrans {__version__} config={cfg.hash} seed={cfg.seed}"
        self.files: list[str] = []

    def csv(self, name: str, columns, rows) -> Path:
        buf = io.StringIO()
        buf.write(self.header + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) for v in r])
        return self.text(name, buf.getvalue())

    def text(self, name: str, text: str) -> Path:
        p = self.dir / name
        p.write_text(text)
        self.files.append(name)
        return p

    def svg(self, name: str, text: str) -> Path:
        return self.text(name, text)


def _suffix(cfg: ExperimentConfig, ell: float) -> str:
    return "" if len(cfg.ells) == 1 else f"_ell{ell / cfg.wavelength:g}"


def _matrix_rows(A):
    return [[j + 1, *A[j]] for j in range(A.shape[0])]


def _u_columns(n):
    return ["j"] + [f"u_{r}" for r in range(1, n + 1)]


def _mfp_rows(model):
    inv = [math.inf if lam == 0 else 1.0 / abs(lam) for lam in model.eigenvalues]
    return [[j + 1, model.mean_free_paths[j], inv[j]] for j in range(model.N)]


# -- tasks ------------------------------------------------------------------------------


def _setup(cfg: ExperimentConfig, ell=None):
    wc = cfg.waveguide(ell)
    basis, model = build_model(wc)
    ap = aperture_coupling(cfg.aperture, basis)
    return wc, basis, model, ap


def _H(cfg: ExperimentConfig, default: float) -> float:
    H = cfg.processing.get("H")
    return float(H) if H is not None else default


def task_gamma(cfg, out, spectrum_only=False):
    lines = []
    for ell in cfg.ells:
        _, basis, model = _setup(cfg, ell)[:3]
        s = _suffix(cfg, ell)
        n = model.N
        if not spectrum_only:
            out.csv(
                f"gamma{s}.csv",
                ["j", "q", "value"],
                [[j + 1, q + 1, model.gamma[j, q]] for j in range(n) for q in range(n)],
            )
        out.csv(f"spectrum{s}.csv", ["r", "lambda_r"], [[r + 1, model.eigenvalues[r]] for r in range(n)])
        out.csv(f"u{s}.csv", _u_columns(n), _matrix_rows(model.U))
        out.csv(f"mfp{s}.csv", ["j", "S_j", "inv_abs_lambda_j"], _mfp_rows(model))
        if spectrum_only:
            out.svg(f"u{s}.svg", heatmap(model.U, f"|U|, ell = {ell / cfg.wavelength:g} lambda"))
        lines.append(
            f"ell={ell / cfg.wavelength:g}lambda N={n} L_eq={model.L_eq:.6g} j*={block_index(model.U)}"
        )
    return "; ".join(lines)


def task_speeds(cfg, out):
    lines = []
    for ell in cfg.ells:
        _, basis, model = _setup(cfg, ell)[:3]
        V = transport_speeds(model, basis)
        ideal = 1.0 / basis.beta_prime
        s = _suffix(cfg, ell)
        out.csv(
            f"speeds{s}.csv",
            ["mode", "V_over_c_o", "V_ideal_over_c_o"],
            [[r + 1, V[r] / cfg.c_o, ideal[r] / cfg.c_o] for r in range(model.N)],
        )
        x = np.arange(1, model.N + 1)
        out.svg(f"speeds{s}.svg", line_plot(x, {"random": V / cfg.c_o, "ideal": ideal / cfg.c_o}, "speeds / c_o"))
        lines.append(f"ell={ell / cfg.wavelength:g}lambda V_1/c_o={V[0] / cfg.c_o:.6f}")
    return "; ".join(lines)


def task_forward(cfg, out):
    wc, basis, model, ap = _setup(cfg)
    sp = source_spectrum(cfg.source(), basis)
    Z = cfg.Z_in_Leq * model.L_eq
    H = _H(cfg, wc.omega_o / 10)
    tau, C = forward_crosscorr(sp, model, ap, Z, H, basis)
    M = forward_data_vector(sp, model, ap, Z, basis)
    Mt = integrate_traces(tau, C)
    n = basis.N
    out.csv("traces.csv", ["tau"] + [f"C_{j}" for j in range(1, n + 1)], [[tau[i], *C[i]] for i in range(tau.size)])
    out.csv("data.csv", ["j", "M_j", "M_j_from_traces"], [[j + 1, M[j], Mt[j]] for j in range(n)])
    show = {f"C_{j}": C[:, j - 1] for j in (1, max(n // 2, 1), n)}
    out.svg("traces.svg", line_plot(tau, show, "expected cross-correlations"))
    return f"Z={Z:.6g} H={H:.6g} max|M - int C|/max M={np.abs(M - Mt).max() / M.max():.3g}"


def _synthesis_windows(cfg, omega_o) -> ProcessingWindows:
    p = cfg.processing
    n_omega = int(p.get("n_omega", 1024))
    probe = ProcessingWindows(omega_o, H=1e12, eps=cfg.eps, alpha=cfg.alpha, n_omega=n_omega)
    return ProcessingWindows(omega_o, H=_H(cfg, 2 * MIN_HT / probe.T), eps=cfg.eps, alpha=cfg.alpha, n_omega=n_omega)


def task_synthesize(cfg, out):
    wc, basis, model, ap = _setup(cfg)
    sp = source_spectrum(cfg.source(), basis)
    Z = cfg.Z_in_Leq * model.L_eq
    w = _synthesis_windows(cfg, wc.omega_o)
    n = int(cfg.processing.get("n_realizations", 50))
    modes = [int(m) for m in cfg.processing.get("modes", [1])]
    ens = synthesize_ensemble(sp, model, ap, Z, w, cfg.seed, n, basis, modes=modes)
    out.text("ensemble.csv", out.header + "\n" + ensemble_to_csv(ens))
    tau = ens.tau_grid
    mean, var = ensemble_trace_stats(ens, tau)
    _, C = forward_crosscorr(sp, model, ap, Z, ens.H_eff, basis, tau=tau)
    cols = ["tau"]
    for m in modes:
        cols += [f"mean_{m}", f"var_{m}", f"expected_{m}"]
    rows = []
    for i in range(tau.size):
        r = [tau[i]]
        for k, m in enumerate(modes):
            r += [mean[k, i], var[k, i], C[i, m - 1]]
        rows.append(r)
    out.csv("synth_stats.csv", cols, rows)
    return f"n={n} modes={modes} H={w.H:.6g} lags={w.lags} H_eff={ens.H_eff:.6g}"


def task_selfavg(cfg, out):
    wc, basis, model, ap = _setup(cfg)
    sp = source_spectrum(cfg.source(), basis)
    Z = cfg.Z_in_Leq * model.L_eq
    w = _synthesis_windows(cfg, wc.omega_o)
    p = cfg.processing
    rep = self_averaging_report(
        sp,
        model,
        ap,
        Z,
        w,
        basis,
        factors=tuple(p.get("factors", (0.25, 0.5, 1.0))),
        n=int(p.get("n_realizations", 400)),
        seed=cfg.seed,
        mode=int(p.get("mode", 1)),
    )
    out.csv("selfavg.csv", ["B_over_omega_o", "scaled_inverse_bandwidth", "n_omega", "var_over_mean_sq"], rep.rows())
    out.csv("selfavg_fit.csv", ["slope_vs_B", "n_realizations"], [[rep.slope_vs_B, rep.n_realizations]])
    return f"slope={rep.slope_vs_B:.4f}"


def task_invert_range(cfg, out):
    wc, basis, model, ap = _setup(cfg)
    src = cfg.source()
    sp = source_spectrum(src, basis)
    Z = cfg.Z_in_Leq * model.L_eq
    spread = Z * (basis.beta_prime.max() - basis.beta_prime.min())
    H = _H(cfg, 1.0 / spread)
    tau, C = forward_crosscorr(sp, model, ap, Z, H, basis)
    lo, hi, n = cfg.inversion.get("Z_search", [0.5, 1.5, 101])
    grid = Z * np.linspace(lo, hi, int(n))
    exact = cfg.inversion.get("peak_model", "perturbative") == "exact"
    est = estimate_range(tau, C, PeakTimeModel(model, basis, ap, H, exact=exact), grid)
    out.csv("misfit.csv", ["Z", "misfit"], zip(est.Z_grid, est.misfit))
    M = forward_data_vector(sp, model, ap, est.Z_hat, basis)
    prof = invert_range_profile(M, sp.xi_hat, model, ap, est.Z_hat, basis)
    out.csv(
        "range_profile.csv",
        ["j", "beta_j", "zeta_sq_true", "zeta_sq_hat", "withheld"],
        [[j + 1, basis.beta[j], sp.zeta_hat[j], prof.zeta_sq[j], prof.withheld[j]] for j in range(basis.N)],
    )
    if basis.N >= 8:
        z = np.linspace(-4 * math.pi / basis.k, 4 * math.pi / basis.k, 201)
        R = autocorrelation_zeta(np.nan_to_num(prof.zeta_sq), basis, z)
        out.csv("rzeta.csv", ["z", "R_zeta"], zip(z, R))
    return f"Z_true={Z:.6g} Z_hat={est.Z_hat:.6g} H={H:.6g}"


def _crossrange(cfg, basis, model, ap, sp, Z, J):
    M = forward_data_vector(sp, model, ap, Z, basis)
    cap = float(cfg.inversion.get("amplification_cap", 10.0))
    return invert_crossrange(M, model, ap, Z, J, basis, amplification_cap=cap)


def task_invert_crossrange(cfg, out):
    wc, basis, model, ap = _setup(cfg)
    sp = source_spectrum(cfg.source(), basis)
    Z = cfg.Z_in_Leq * model.L_eq
    J = int(cfg.inversion.get("J", basis.N))
    est = _crossrange(cfg, basis, model, ap, sp, Z, J)
    out.csv(
        "crossrange.csv",
        ["j", "xi_sq_true", "xi_sq_hat", "error_bound"],
        [[j + 1, sp.xi_hat[j], est.xi_sq_hat[j], est.error_bound[j]] for j in range(basis.N)],
    )
    ac = est.autocorrelation
    true = autocorrelation_xi(sp.xi_hat, basis.N, basis.X, ac.x)
    out.csv("rxi.csv", ["x", "R_hat", "R_true"], zip(ac.x, ac.R, true.R))
    cand = "none" if est.candidates is None else ",".join(f"{c:.6g}" for c in est.candidates)
    return f"J={J} amplification={est.amplification:.4g} quality={est.quality.value} candidates={cand}"


def _wideband_run(cfg, wc, bands, source: SeparableSource):
    step = float(cfg.wideband.get("step", 0.02))
    theta_mode = cfg.wideband.get("theta", "data")
    x = np.linspace(0.0, wc.X, int(cfg.wideband.get("x_points", 512)))
    results = []
    for lo, hi in bands:
        om = band_frequencies(wc, lo, hi, step)
        bases = [mode_basis(w, wc) for w in om]
        if theta_mode == "exact":
            sp = source_spectrum(source, bases[-1])
            theta = band_theta(sp.xi_hat, bases)
        else:
            theta = []
            for w, b in zip(om, bases):
                m = model_from_gamma_c(w, gaussian_gamma_c(wc, b))
                ap = aperture_coupling((0.0, wc.X), b)
                sp = source_spectrum(source, b)
                M = forward_data_vector(sp, m, ap, 100 * m.L_eq, b)
                theta.append(theta_from_data(M, b, ap))
            theta = np.array(theta)
        results.append(((lo, hi), wideband_solve(om, theta, wc, x=x)))
    return results


def _write_wideband(out, cfg, results, prefix=""):
    lam = cfg.wavelength
    out.csv(
        f"{prefix}ranks.csv",
        ["band", "lo_over_omega_o", "hi_over_omega_o", "rows", "cols", "rank"],
        [[i + 1, b[0], b[1], ws.shape[0], ws.shape[1], ws.rank] for i, (b, ws) in enumerate(results)],
    )
    x = results[0][1].x
    out.csv(
        f"{prefix}obj.csv",
        ["x_over_lambda"] + [f"obj_band{i + 1}" for i in range(len(results))],
        [[x[k] / lam, *[ws.objective[k] for _, ws in results]] for k in range(x.size)],
    )
    rows = []
    for i, (_, ws) in enumerate(results):
        for r, (xm, v) in enumerate(zip(ws.minima[:5], ws.minima_values[:5])):
            rows.append([i + 1, r + 1, xm / lam, v, ws.ambiguous])
    out.csv(f"{prefix}minima.csv", ["band", "order", "x_over_lambda", "obj", "ambiguous"], rows)
    out.svg(
        f"{prefix}obj.svg",
        line_plot(x / lam, {f"band {i + 1}": ws.objective for i, (_, ws) in enumerate(results)}, "Obj(x)"),
    )
    return "; ".join(
        f"band{i + 1} {ws.shape[0]}x{ws.shape[1]} rank={ws.rank} min={ws.minima[0] / lam:.4g}lambda"
        f"{' ambiguous' if ws.ambiguous else ''}"
        for i, (_, ws) in enumerate(results)
    )


def task_wideband(cfg, out):
    bands = cfg.wideband.get("bands", [[1.0, 2.0], [1.0, 3.0], [0.5, 3.0]])
    results = _wideband_run(cfg, cfg.waveguide(), bands, cfg.source())
    return _write_wideband(out, cfg, results)


def task_tridiag(cfg, out):
    Ns = [int(n) for n in cfg.tridiag.get("Ns", [10, 20, 40, 80])]
    kls = [float(v) for v in cfg.tridiag.get("kl_factors", [0.5, 1.0])]
    rows, fits = [], []
    for f in kls:
        sw = structure_sweep(Ns, f)
        for r in sw.reports:
            rows.append(
                [f, r.N, r.orthonormal_nonpositive, r.simple_null_space, r.norm, r.top_ratios[-1],
                 r.deltas.size, r.fitted_C, r.interlacing]
            )
        fits.append([f, sw.norm_slope, *sw.top_slopes, sw.orthonormal_ok, sw.null_ok, sw.norm_ok, sw.top_ok, sw.tail_ok])
    out.csv(
        "tridiag.csv",
        ["kl_over_N", "N", "orthonormal_nonpositive", "simple_null_space", "norm", "abs_lambda_N_over_N2",
         "n_large_eigenvalues", "fitted_C", "interlacing"],
        rows,
    )
    out.csv(
        "tridiag_fit.csv",
        ["kl_over_N", "norm_slope", "slope_N_minus_3", "slope_N_minus_2", "slope_N_minus_1", "slope_N",
         "property1", "property2", "property3", "property4", "property5"],
        fits,
    )
    return "; ".join(f"kl={f[0]:g}N norm slope={f[1]:.3f}" for f in fits)


TASK_FUNCS = {
    "Gamma": task_gamma,
    "Spectrum": lambda c, o: task_gamma(c, o, spectrum_only=True),
    "Speeds": task_speeds,
    "Forward": task_forward,
    "Synthesize": task_synthesize,
    "SelfAvg": task_selfavg,
    "InvertRange": task_invert_range,
    "InvertCrossrange": task_invert_crossrange,
    "Wideband": task_wideband,
    "Tridiag": task_tridiag,
}


# -- figures ---------------------------------------------------------------------------

_ELLS = (1, 3, 5)


def _fig_modes(cfg, out, kind, tag):
    blocks = []
    for e in _ELLS:
        wc = cfg.waveguide(e * cfg.wavelength, kind)
        basis, model = build_model(wc)
        out.csv(f"{tag}_u_ell{e}.csv", _u_columns(model.N), _matrix_rows(model.U))
        out.csv(f"{tag}_mfp_ell{e}.csv", ["j", "S_j", "inv_abs_lambda_j"], _mfp_rows(model))
        out.svg(f"{tag}_u_ell{e}.svg", heatmap(model.U, f"|U|, ell = {e} lambda"))
        blocks.append([e, block_index(model.U), model.L_eq])
    out.csv(f"{tag}_blocks.csv", ["ell_over_lambda", "j_star", "L_eq"], blocks)
    return " ".join(f"ell={b[0]} j*={b[1]}" for b in blocks)


def fig4(cfg, out):
    for e in _ELLS:
        res = {}
        for kind in (FluctuationKind.MEDIUM, FluctuationKind.BOUNDARY):
            basis, model = build_model(cfg.waveguide(e * cfg.wavelength, kind))
            res[kind] = transport_speeds(model, basis) / cfg.c_o
        ideal = 1.0 / (basis.beta_prime * cfg.c_o)
        n = basis.N
        out.csv(
            f"fig4_ell{e}.csv",
            ["mode", "V_random_medium/c_o", "V_random_boundary/c_o", "V_ideal/c_o"],
            [[r + 1, res[FluctuationKind.MEDIUM][r], res[FluctuationKind.BOUNDARY][r], ideal[r]] for r in range(n)],
        )
        out.svg(
            f"fig4_ell{e}.svg",
            line_plot(
                np.arange(1, n + 1),
                {"medium": res[FluctuationKind.MEDIUM], "boundary": res[FluctuationKind.BOUNDARY], "ideal": ideal},
                f"transport speeds, ell = {e} lambda",
            ),
        )
    return "fig4_ell1.csv fig4_ell3.csv fig4_ell5.csv"


FIG5_CASES = ((1 / 40, 30), (1 / 10, 7))


def fig5(cfg, out):
    wc = cfg.waveguide(cfg.wavelength, FluctuationKind.MEDIUM)
    basis, model = build_model(wc)
    ap = aperture_coupling((0.0, wc.X), basis)
    sp = source_spectrum(SeparableSource(GaussianAt(wc.X / 4, wc.X / 30)), basis)
    ests = [_crossrange(cfg, basis, model, ap, sp, f * model.L_eq, J) for f, J in FIG5_CASES]
    n = basis.N
    out.csv(
        "fig5_xi.csv",
        ["j", "xi_sq_true", "xi_sq_hat_J30", "xi_sq_hat_J7", "bound_J30", "bound_J7"],
        [[j + 1, sp.xi_hat[j], ests[0].xi_sq_hat[j], ests[1].xi_sq_hat[j], ests[0].error_bound[j],
          ests[1].error_bound[j]] for j in range(n)],
    )
    x = ests[0].autocorrelation.x
    true = autocorrelation_xi(sp.xi_hat, n, wc.X, x)
    out.csv(
        "fig5_rxi.csv",
        ["x_over_X", "R_true", "R_J30", "R_J7"],
        [[x[k] / wc.X, true.R[k], ests[0].autocorrelation.R[k], ests[1].autocorrelation.R[k]] for k in range(x.size)],
    )
    out.svg(
        "fig5_rxi.svg",
        line_plot(x / wc.X, {"true": true.R, "J=30": ests[0].autocorrelation.R, "J=7": ests[1].autocorrelation.R}, "R_xi"),
    )
    out.csv(
        "fig5_summary.csv",
        ["Z_over_Leq", "J", "amplification", "quality", "x_candidate_1", "x_candidate_2", "weighted_bound", "clipped"],
        [[f, e.J, e.amplification, e.quality.value, *(e.candidates or (math.nan, math.nan)), e.weighted_bound, e.clipped]
         for (f, _), e in zip(FIG5_CASES, ests)],
    )
    return " ".join(f"J={e.J}:{e.quality.value}" for e in ests)


def fig6(cfg, out):
    wc = cfg.waveguide(cfg.wavelength, FluctuationKind.MEDIUM)
    src = SeparableSource(PointAt(wc.X / math.pi))
    results = _wideband_run(cfg, wc, [[1.0, 2.0], [1.0, 3.0], [0.5, 3.0]], src)
    return _write_wideband(out, cfg, results, prefix="fig6_")


def lambda_pert(cfg, out):
    cols, data = ["mode"], []
    n = None
    H = _H(cfg, cfg.omega_o / 10)
    for kind in (FluctuationKind.MEDIUM, FluctuationKind.BOUNDARY):
        for e in _ELLS:
            basis, model = build_model(cfg.waveguide(e * cfg.wavelength, kind))
            rep = perturbation_diagnostics(model, basis, H)
            cols.append(f"{kind.value}_ell{e}")
            data.append(rep.max_rel_error)
            n = model.N
    out.csv("lambda_pert.csv", cols, [[j + 1, *[d[j] for d in data]] for j in range(n)])
    out.svg(
        "lambda_pert.svg",
        line_plot(np.arange(1, n + 1), dict(zip(cols[1:], [np.log10(np.maximum(d, 1e-300)) for d in data])),
                  "log10 relative eigenvalue error"),
    )
    return f"H={H:.6g} max error={max(float(d.max()) for d in data):.3g}"


FIGURE_FUNCS = {
    "fig2": lambda c, o: _fig_modes(c, o, FluctuationKind.MEDIUM, "fig2"),
    "fig3": lambda c, o: _fig_modes(c, o, FluctuationKind.BOUNDARY, "fig3"),
    "fig4": fig4,
    "fig5": fig5,
    "fig6": fig6,
    "lambda_pert": lambda_pert,
}


# -- entry point --------------------------------------------------------------------------


def run(config_path, out_dir=None, seed=None, figure=None, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    err = sys.stderr
    try:
        if figure is not None and figure not in FIGURES:
            raise UnknownFigure(f"unknown figure {figure!r} (one of {', '.join(FIGURES)})")
        cfg = parse_config(load_config(config_path), figure=figure, seed=seed, out=out_dir)
    except (ConfigInvalid, UnknownFigure) as e:
        print(f"error: {e.args[0]}", file=err)
        return EXIT_CONFIG
    try:
        out = Outputs(cfg.output, cfg)
        if figure is not None:
            summary = FIGURE_FUNCS[figure](cfg, out)
            print(f"{figure}: {summary}", file=stream)
        else:
            summary = TASK_FUNCS[cfg.task](cfg, out)
            print(f"{cfg.task}: {summary}", file=stream)
    except ConfigInvalid as e:
        print(f"error: {e}", file=err)
        return EXIT_CONFIG
    except (WavetransError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"numeric failure: {type(e).__name__}: {e}", file=err)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wavetrans", description="Random waveguide transport experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the task in a JSON configuration, or reproduce a figure")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (default: config 'output' or ./out)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--figure", default=None, help=f"one of {', '.join(FIGURES)}")
    args = parser.parse_args(argv)
    if args.seed is not None and args.seed < 0:
        parser.error("--seed must be non-negative")
    return run(args.config, args.out, args.seed, args.figure)


if __name__ == "__main__":
    sys.exit(main())
