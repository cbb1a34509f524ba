"""Experiment drivers: a priori convergence, curl failure, adaptivity.

Every driver writes schema-stable CSV files (fixed header and column order,
12 significant digits) and a small gnuplot script next to them. Nothing in the
output depends on timing or random state, so reruns are byte-identical.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .assembly import dump_matrix
from .eigsolve import recover_llstar_eigenfunction
from .estimator import adapt_loop, estimate
from .fespace import _call_field, quadrature_points
from .formulations import ErrorRecord, FormulationSpec, align_sign, compute_error_norms, solve_eigen, square_mode
from .mesh import DomainSpec, build_initial_mesh, dump_mesh, refine_uniform
from .quadrature import triangle_rule
from .reference import load_lshape_reference

__all__ = [
    "ExperimentConfig",
    "ConvergenceTable",
    "CurlFailureResult",
    "AdaptiveResult",
    "fit_rate",
    "run_apriori",
    "run_curl_failure",
    "run_adaptive",
    "format_value",
]

log = logging.getLogger(__name__)

FORMULATION_NAMES = {"f1": "F1", "f1star": "F1star", "llstar": "LLstar", "pep": "PEP", "pemd": "PEMd"}
SIGMA_NAMES = {"rt0": "RT0", "bdm1": "BDM1", "cg1vec": "CG1-vec"}
DOMAIN_NAMES = {"square": "unit-square", "unit-square": "unit-square", "lshape": "l-shape", "l-shape": "l-shape"}
ERROR_COLUMNS = ("err_lambda", "err_u_L2", "err_gradu_L2", "err_sigma_L2", "err_divsigma_L2")
# initial criss-cross resolution: square h = 1/4, L-shape h = 1/2
DEFAULT_START = {"unit-square": 4, "l-shape": 2}


@dataclass
class ExperimentConfig:
    """Settings shared by the experiment drivers.

    ``formulation`` and ``sigma`` accept the CLI spellings (``f1``,
    ``rt0``...) as well as the internal tags.
    """

    experiment: str = "apriori"
    formulation: str = "f1"
    sigma: str = "rt0"
    domain: str = "square"
    levels: int = 5
    k: int = 1
    thetas: tuple = ()
    max_dofs: int = 100_000
    out: Path | None = None
    start: int | None = None
    quad_degree: int = 6
    dump_mesh: bool = False
    dump_matrices: bool = False

    def __post_init__(self):
        if self.experiment not in ("apriori", "curl-failure", "adaptive"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        self.formulation = FORMULATION_NAMES.get(self.formulation.lower(), self.formulation)
        if self.formulation not in FORMULATION_NAMES.values() and self.formulation != "F1curl":
            raise ValueError(f"unknown formulation {self.formulation!r}")
        self.sigma = SIGMA_NAMES.get(self.sigma.lower(), self.sigma)
        if self.sigma not in SIGMA_NAMES.values():
            raise ValueError(f"unknown flux family {self.sigma!r}")
        self.domain = DOMAIN_NAMES.get(self.domain.lower(), "")
        if not self.domain:
            raise ValueError("domain must be square or lshape")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.levels < 1:
            raise ValueError("levels must be at least 1")
        if self.quad_degree < 1:
            raise ValueError("quadrature degree must be positive")
        for th in self.thetas:
            if not 0.0 < th <= 1.0:
                raise ValueError(f"theta must lie in (0, 1], got {th}")
        if self.out is not None:
            self.out = Path(self.out)


def fit_rate(pairs) -> float:
    """Least-squares slope of ``log err`` against ``log x``.

    ``pairs`` is a sequence of ``(x, err)`` with ``x`` a mesh size or a dof
    count; with mesh sizes a positive slope means convergence.
    """
    arr = np.asarray(list(pairs), dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] != 2:
        raise ValueError("need at least two (x, err) pairs")
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("rate fit needs positive finite values")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    if np.ptp(x) == 0:
        raise ValueError("all abscissae coincide")
    return float(np.polyfit(x, y, 1)[0])


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.11e}"


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
    return path


@dataclass
class ConvergenceTable:
    """Per-level results of a uniform refinement study."""

    label: str
    k: int
    rows: list = field(default_factory=list)
    uncovered_by_theory: bool = False

    @property
    def header(self):
        lams = [f"lambda_{j + 1}" for j in range(self.k)]
        return ["level", "h_max", "ndof_sigma", "ndof_u", *lams, *ERROR_COLUMNS, "eta"]

    def add(self, level, h, ndof_sigma, ndof_u, lams, errors: ErrorRecord, eta=float("nan")):
        lams = list(lams) + [float("nan")] * (self.k - len(lams))
        if self.rows and h >= self.rows[-1][1]:
            raise ValueError("h_max must decrease strictly down the table")
        e = errors.as_dict()
        self.rows.append([level, h, ndof_sigma, ndof_u, *lams[:self.k], *(e[c] for c in ERROR_COLUMNS), eta])

    def column(self, name):
        j = self.header.index(name)
        return np.array([r[j] for r in self.rows], dtype=float)

    def rates(self):
        """Log-log rate in ``h`` of every error column and of ``eta``.

        Uses the last ``max(3, levels - 1)`` rows; NaN where the column has
        missing or nonpositive entries there.
        """
        n = max(3, len(self.rows) - 1)
        h = self.column("h_max")[-n:]
        out = {}
        for name in (*ERROR_COLUMNS, "eta"):
            e = self.column(name)[-n:]
            try:
                out[name] = fit_rate(zip(h, e))
            except ValueError:
                out[name] = float("nan")
        return out

    def write(self, path):
        return write_csv(path, self.header, self.rows)

    def write_rates(self, path):
        r = self.rates()
        header = ["method", "uncovered_by_theory", *r.keys()]
        return write_csv(path, header, [[self.label, self.uncovered_by_theory, *r.values()]])


def _initial_mesh(cfg: ExperimentConfig):
    n = cfg.start if cfg.start is not None else DEFAULT_START[cfg.domain]
    return build_initial_mesh(DomainSpec(cfg.domain, n))


def _method_label(tag, sigma):
    if tag == "PEP":
        return "PEP-P1"
    if tag == "PEMd":
        return "PEMd-RT0"
    prefix = {"F1": "FOSLS", "F1star": "FOSLS*", "LLstar": "LLstar", "F1curl": "FOSLS-curl"}[tag]
    return f"{prefix}-{sigma.replace('-vec', '')}"


def _llstar_errors(pencil, pair, exact, degree):
    """Errors of the Laplace eigenfunction recovered from an LL* pair."""
    rec = recover_llstar_eigenfunction(pencil, pair)
    m = pencil.sigma_space.mesh
    bary, _ = triangle_rule(degree)
    pts, w = quadrature_points(m, degree)
    ue = _call_field(exact.u, pts).reshape(m.nt, -1)
    ge = _call_field(exact.grad_u, pts).reshape(m.nt, -1, 2)
    sgn = align_sign(np.repeat(rec.u[:, None], 3, axis=1), exact.u, m, degree)
    e_u = math.sqrt(float(np.sum(w * (ue - sgn * rec.u[:, None]) ** 2)))
    gh = sgn * np.einsum("qv,tvd->tqd", bary, rec.grad_u)
    e_g = math.sqrt(float(np.sum(w[..., None] * (ge - gh) ** 2)))
    return ErrorRecord(abs(exact.lam - pair.lam), e_u, e_g, e_g, float("nan"))


def _dump(cfg, mesh, pencil, stem):
    if cfg.out is None or not (cfg.dump_mesh or cfg.dump_matrices):
        return
    cfg.out.mkdir(parents=True, exist_ok=True)
    if cfg.dump_mesh:
        dump_mesh(mesh, cfg.out / f"{stem}_mesh.txt")
    if cfg.dump_matrices and pencil is not None:
        for name in ("A", "B", "C", "M"):
            dump_matrix(getattr(pencil, name), cfg.out / f"{stem}_{name}.mtx", comment=f"{pencil.formulation} block {name}")


def run_apriori(cfg: ExperimentConfig) -> ConvergenceTable:
    """Uniform refinement study for one (formulation, flux family) pair.

    On the square all error columns are measured against the closed-form
    first mode ``2 sin(pi x) sin(pi y)``; on the L-shape only the eigenvalue
    error against the stored reference is available.
    """
    tag = cfg.formulation
    sigma = "RT0" if tag == "PEMd" else cfg.sigma
    table = ConvergenceTable(_method_label(tag, sigma), cfg.k,
                             uncovered_by_theory=(sigma == "CG1-vec" and tag != "PEP"))
    exact = square_mode(1, 1) if cfg.domain == "unit-square" else None
    ref = None if exact else load_lshape_reference()[0]
    mesh = _initial_mesh(cfg)
    for level in range(cfg.levels):
        if level:
            mesh = refine_uniform(mesh)
        spec = FormulationSpec(tag, sigma, mesh)
        pairs, pencil, spaces = solve_eigen(spec, cfg.k)
        first = pairs[0]
        if exact is None:
            nan = float("nan")
            errors = ErrorRecord(abs(ref - first.lam), nan, nan, nan, nan)
        elif tag == "LLstar":
            errors = _llstar_errors(pencil, first, exact, cfg.quad_degree)
        elif tag == "F1star":
            # the F1* flux block equals sigma / (lam + 1)
            scaled = replace(first, sigma=(first.lam + 1.0) * first.sigma)
            errors = compute_error_norms(scaled, spaces, exact, cfg.quad_degree)
        else:
            errors = compute_error_norms(first, spaces, exact, cfg.quad_degree)
        eta = float("nan")
        if tag == "F1" and sigma in ("RT0", "BDM1"):
            eta = estimate(first, spaces).eta
        S, U = spaces
        ndof_sigma = S.nfree if (S is not None and tag != "PEP") else 0
        table.add(level, mesh.h_max(), ndof_sigma, U.nfree, [p.lam for p in pairs], errors, eta)
        log.info("%s level %d: h=%.4g lambda=%.10f err=%.3e", table.label, level, mesh.h_max(),
                 first.lam, errors.err_lambda)
        _dump(cfg, mesh, pencil, f"apriori_{tag.lower()}_{sigma.lower().replace('-', '')}_level{level}")
    if cfg.out is not None:
        stem = f"apriori_{tag.lower()}_{sigma.lower().replace('-', '')}_{'square' if exact else 'lshape'}"
        table.write(cfg.out / f"{stem}.csv")
        table.write_rates(cfg.out / f"{stem}_rates.csv")
        _write_gnuplot(cfg.out / f"{stem}.gp", f"{stem}.csv", "h_max", "error",
                       [(c, 2 + 2 + cfg.k + 1 + i) for i, c in enumerate(ERROR_COLUMNS)],
                       xreverse=True)
    return table


@dataclass
class CurlFailureResult:
    reference: np.ndarray
    curl_rows: list
    control_rows: list
    header: list
    wrong_limit: bool
    control_error: float

    def mode_errors(self, rows, j=0):
        return np.array([r[4 + len(self.reference) + j] for r in rows])


def _first_modes_rows(spec_fn, mesh0, levels, ref, k):
    rows = []
    mesh = mesh0
    prev = None
    for level in range(levels):
        if level:
            mesh = refine_uniform(mesh)
        spec = spec_fn(mesh)
        pairs, _, (S, U) = solve_eigen(spec, k)
        lams = np.array([p.lam for p in pairs])
        errs = np.abs(lams - ref[:k])
        diff = abs(lams[0] - prev) if prev is not None else float("nan")
        prev = lams[0]
        rows.append([level, mesh.h_max(), S.nfree, U.nfree, *lams, *errs, diff])
    return rows


def run_curl_failure(cfg: ExperimentConfig) -> CurlFailureResult:
    """First five L-shape eigenvalues of F1curl (CG1-vec/CG1) and of the F1/RT0 control.

    The flux carries a vanishing tangential trace, so the discrete flux space
    is a subspace of H(div) and H_0(curl); on the re-entrant corner this space
    misses the singular part of the first eigenfunction and the first
    eigenvalue converges to a wrong limit.
    """
    k = 5
    ref = load_lshape_reference()[:k]
    mesh0 = build_initial_mesh(DomainSpec("l-shape", cfg.start if cfg.start is not None else 2))
    curl = _first_modes_rows(lambda m: FormulationSpec("F1curl", "CG1-vec", m, sigma_bc="tangential"),
                             mesh0, cfg.levels, ref, k)
    control = _first_modes_rows(lambda m: FormulationSpec("F1", "RT0", m), mesh0, cfg.levels, ref, k)
    header = ["level", "h_max", "ndof_sigma", "ndof_u",
              *[f"lambda_{j + 1}" for j in range(k)], *[f"err_{j + 1}" for j in range(k)], "diff_1"]
    err1 = np.array([r[4 + k] for r in curl])
    diffs = np.array([r[-1] for r in curl])[1:]
    shrinking = bool(len(diffs) >= 2 and np.all(diffs[1:] <= 0.7 * diffs[:-1]))
    wrong = bool(np.all(err1 > 0.1) and shrinking)
    res = CurlFailureResult(ref, curl, control, header, wrong, float(control[-1][4 + k]))
    if cfg.out is not None:
        write_csv(cfg.out / "curl_failure_f1curl.csv", header, curl)
        write_csv(cfg.out / "curl_failure_control_f1_rt0.csv", header, control)
        write_csv(cfg.out / "curl_failure_summary.csv",
                  ["lambda_ref_1", "final_err_1_f1curl", "final_err_1_control", "wrong_limit_detected"],
                  [[ref[0], err1[-1], res.control_error, wrong]])
        _write_gnuplot(cfg.out / "curl_failure.gp", "curl_failure_f1curl.csv", "h_max", "|lambda_j - lambda_ref,j|",
                       [(f"mode {j + 1}", 5 + k + j) for j in range(k)], xreverse=True)
    return res


@dataclass
class AdaptiveResult:
    logs: dict
    slopes: dict

    def summary_rows(self):
        rows = []
        for th in sorted(self.logs):
            recs = self.logs[th]
            rows.append([th, len(recs), recs[-1].ndof, recs[-1].err_lambda, recs[-1].eta, self.slopes[th]])
        return rows


ADAPTIVE_HEADER = ["iter", "ndof", "lambda1", "eta", "err_lambda"]


def adaptive_slope(records, window=0.1) -> float:
    """Slope of ``err_lambda`` against ``ndof`` over the last decade of dofs.

    Only records with ``ndof >= window * max ndof`` enter the fit, so the
    coarse pre-asymptotic iterations do not bias the rate.
    """
    nd = np.array([r.ndof for r in records], dtype=float)
    err = np.array([r.err_lambda for r in records], dtype=float)
    sel = nd >= window * nd.max()
    if sel.sum() < 3:
        sel = np.zeros_like(sel)
        sel[-3:] = True
    return fit_rate(zip(nd[sel], err[sel]))


def run_adaptive(cfg: ExperimentConfig) -> AdaptiveResult:
    """Adaptive F1/RT0 runs on the L-shape for each theta plus the uniform run."""
    thetas = sorted(set(float(t) for t in cfg.thetas) | {1.0})
    ref = load_lshape_reference()[0]
    n = cfg.start if cfg.start is not None else 1
    sigma = cfg.sigma if cfg.sigma in ("RT0", "BDM1") else "RT0"
    logs, slopes = {}, {}
    for th in thetas:
        mesh0 = build_initial_mesh(DomainSpec("l-shape", n))
        recs = adapt_loop(FormulationSpec("F1", sigma, mesh0), th, cfg.max_dofs, ref)
        logs[th] = recs
        try:
            slopes[th] = adaptive_slope(recs)
        except ValueError:
            slopes[th] = float("nan")
        if cfg.out is not None:
            write_csv(cfg.out / f"adaptive_theta_{th:.2f}.csv", ADAPTIVE_HEADER, [r.row() for r in recs])
            if cfg.dump_mesh:
                dump_mesh(recs[-1].mesh, cfg.out / f"adaptive_theta_{th:.2f}_final_mesh.txt")
    res = AdaptiveResult(logs, slopes)
    if cfg.out is not None:
        write_csv(cfg.out / "adaptive_summary.csv",
                  ["theta", "iterations", "final_ndof", "final_err_lambda", "final_eta", "slope"],
                  res.summary_rows())
        lines = [(f"theta={th:.2f}", f"adaptive_theta_{th:.2f}.csv") for th in thetas]
        _write_gnuplot_files(cfg.out / "adaptive.gp", lines, 2, 5, "ndof", "|lambda_ref - lambda_h|")
    return res


def _write_gnuplot(path, data, xlabel, ylabel, columns, xreverse=False):
    """Log-log gnuplot script plotting several columns of one CSV against column 2."""
    plots = ", ".join(f"'{data}' using 2:{col} with linespoints title '{name}'" for name, col in columns)
    text = "\n".join([
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set logscale xy",
        *(["set xrange [*:*] reverse"] if xreverse else []),
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        f"plot {plots}",
        "",
    ])
    Path(path).write_text(text)


def _write_gnuplot_files(path, files, xcol, ycol, xlabel, ylabel):
    plots = ", ".join(f"'{f}' using {xcol}:{ycol} with linespoints title '{name}'" for name, f in files)
    text = "\n".join([
        "set datafile separator ','",
        "set logscale xy",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        f"plot {plots}",
        "",
    ])
    Path(path).write_text(text)
