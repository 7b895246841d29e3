"""Dual-engine scenario harness: presets, comparisons, convergence, file I/O.

Everything downstream of the two engines lives here: running a test case on
one or both engines at a mesh scale, the comparison metrics between them
(relative norms use the reference engine's max magnitude per field as the
denominator), observed-order convergence studies on rescaled meshes, and the
on-disk formats (snapshot CSV, plain-text report, config files re-exported
from :mod:`tubeflow.config`).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import fd, lbm
from .analytic import cgw_lambda, steady_regime
from .config import ScenarioConfig, preset, rescale
from .lbm import SolverAbort

COMPARE_FIELDS = ("alpha_g", "u_g", "u_l", "p_k")
CSV_HEADER = ("step,x,alpha_g,alpha_l,u_g,u_l,p_k,"
              "S_g,S_l,sigma_g,sigma_l,G_g,G_l,phi")
CSV_COLUMNS = CSV_HEADER.split(",")


@dataclass
class TestPreset:
    """A published test case: its numeric id and fully populated config."""
    test_id: int
    config: ScenarioConfig


def test_preset(test_id):
    return TestPreset(test_id=int(test_id), config=preset(test_id))


def node_coordinates(n_x):
    """Physical node positions x_i = (i - 1/2)/N_x (walls at 0 and 1).

    The half-way boundary placement puts the inlet wall half a spacing
    before the first node and the outlet wall half a spacing after the last.
    """
    return (np.arange(1, n_x + 1) - 0.5) / n_x


def resolve_config(case, scale=1):
    """Accept a test id (1..4) or a ScenarioConfig; apply the mesh scale."""
    cfg = preset(case) if isinstance(case, (int, str)) and str(case).isdigit() \
        else case
    if not isinstance(cfg, ScenarioConfig):
        raise TypeError(f"expected test id or ScenarioConfig, got {case!r}")
    return rescale(cfg, scale)


def run_engine(cfg, engine, snapshot_steps=None, use_kernel=True):
    """Run one engine; abort messages are prefixed with the engine name."""
    module = {"lbm": lbm, "fd": fd}.get(engine)
    if module is None:
        raise ValueError(f"unknown engine {engine!r}; expected 'lbm' or 'fd'")
    try:
        return module.run(cfg, snapshot_steps=snapshot_steps,
                          use_kernel=use_kernel)
    except SolverAbort as exc:
        raise SolverAbort(f"[{engine}] {exc}") from exc


def run_case(case, engine="both", scale=1, snapshot_steps=None,
             use_kernel=True):
    """Run a test case (or explicit config) on one or both engines.

    Returns ``{"config": cfg, "lbm": LbmRun, "fd": FdRun,
    "report": ComparisonReport}`` with only the requested pieces present;
    the report is included when both engines ran.  Snapshot steps are shared
    so both engines emit identical time stamps.
    """
    cfg = resolve_config(case, scale)
    if engine not in ("lbm", "fd", "both"):
        raise ValueError(f"unknown engine {engine!r}")
    if snapshot_steps is None:
        snapshot_steps = lbm.default_snapshot_steps(cfg)
    out = {"config": cfg}
    if engine in ("lbm", "both"):
        out["lbm"] = run_engine(cfg, "lbm", snapshot_steps, use_kernel)
    if engine in ("fd", "both"):
        out["fd"] = run_engine(cfg, "fd", snapshot_steps, use_kernel)
    if engine == "both":
        out["report"] = compare(out["lbm"], out["fd"])
    return out


# --- comparison metrics ------------------------------------------------------

@dataclass
class FieldComparison:
    linf_rel: float
    l2_rel: float
    lbm_outlet: float
    fd_outlet: float


@dataclass
class ComparisonReport:
    """Final-time agreement metrics between the two engines."""
    fields: dict                       # name -> FieldComparison
    mixture_flux_dev_lbm: float        # max |flux - mean| / |mean| over x
    mixture_flux_dev_fd: float
    analytic_residual_lbm: float       # closed-form u_l check at the outlet
    analytic_residual_fd: float
    runtime_lbm: float
    runtime_fd: float
    step: int = 0

    def as_items(self):
        """Flatten to (key, value) pairs for the report file."""
        items = [("step", self.step)]
        for name, c in self.fields.items():
            items += [(f"{name}_linf_rel", c.linf_rel),
                      (f"{name}_l2_rel", c.l2_rel),
                      (f"{name}_outlet_lbm", c.lbm_outlet),
                      (f"{name}_outlet_fd", c.fd_outlet)]
        items += [("mixture_flux_dev_lbm", self.mixture_flux_dev_lbm),
                  ("mixture_flux_dev_fd", self.mixture_flux_dev_fd),
                  ("analytic_residual_lbm", self.analytic_residual_lbm),
                  ("analytic_residual_fd", self.analytic_residual_fd),
                  ("runtime_lbm_seconds", self.runtime_lbm),
                  ("runtime_fd_seconds", self.runtime_fd)]
        return items


def mixture_flux(snapshot):
    """Volume-averaged mixture flux alpha_g u_g + alpha_l u_l per node."""
    return (snapshot["alpha_g"] * snapshot["u_g"]
            + snapshot["alpha_l"] * snapshot["u_l"])


def flux_deviation(snapshot):
    """Max relative deviation of the mixture flux from its spatial mean."""
    flux = mixture_flux(snapshot)
    mean = flux.mean()
    if mean == 0.0:
        return float(np.abs(flux).max())
    return float(np.abs(flux - mean).max() / abs(mean))


def analytic_outlet_residual(cfg, snapshot):
    """Relative mismatch of the closed-form liquid velocity at the outlet.

    Uses the effective (volume-fraction weighted, for the CGW model) friction
    coefficients at the simulated outlet state.  Returns inf when the outlet
    lies outside the circulation regime the closed form assumes (gas velocity
    below the zero-circulation balance), which a large-drag/large-R case can
    legitimately do.
    """
    alpha_out = float(snapshot["alpha_g"][-1])
    u_g_out = float(snapshot["u_g"][-1])
    u_l_out = float(snapshot["u_l"][-1])
    if cfg.drag_model == "cgw":
        lam = cgw_lambda(alpha_out, cfg.density_ratio)
        k_i, k_w = cfg.kappa_i_hat * lam, cfg.kappa_w_hat * lam
    else:
        k_i, k_w = cfg.k_i_hat, cfg.k_w_hat
    try:
        regime = steady_regime(u_g_out, alpha_out, cfg.density_ratio,
                               cfg.g_hat, k_i, k_w)
    except ValueError:
        return math.inf
    if u_l_out == 0.0:
        return abs(regime.u_l_bar)
    return abs(regime.u_l_bar - u_l_out) / abs(u_l_out)


def compare(lbm_run, fd_run):
    """Final-snapshot ComparisonReport between the two engines.

    Engines must share the node count; relative norms divide by the FD
    engine's max magnitude per field.
    """
    cfg_l, cfg_f = lbm_run.config, fd_run.config
    if cfg_l.n_x != cfg_f.n_x:
        raise ValueError(f"node counts differ: lbm {cfg_l.n_x} vs "
                         f"fd {cfg_f.n_x}")
    snap_l, snap_f = lbm_run.snapshots[-1], fd_run.snapshots[-1]
    fields = {}
    for name in COMPARE_FIELDS:
        a, b = snap_l[name], snap_f[name]
        den = np.abs(b).max()
        den = den if den > 0.0 else 1.0
        diff = a - b
        fields[name] = FieldComparison(
            linf_rel=float(np.abs(diff).max() / den),
            l2_rel=float(np.sqrt(np.mean(diff * diff)) / den),
            lbm_outlet=float(a[-1]),
            fd_outlet=float(b[-1]))
    return ComparisonReport(
        fields=fields,
        mixture_flux_dev_lbm=flux_deviation(snap_l),
        mixture_flux_dev_fd=flux_deviation(snap_f),
        analytic_residual_lbm=analytic_outlet_residual(cfg_l, snap_l),
        analytic_residual_fd=analytic_outlet_residual(cfg_f, snap_f),
        runtime_lbm=lbm_run.runtime_seconds,
        runtime_fd=fd_run.runtime_seconds,
        step=int(snap_l["step"]))


# --- convergence study -------------------------------------------------------

@dataclass
class OrderEstimate:
    """Observed order of one field across a mesh-scale triple (or more)."""
    field: str
    order: float               # median of the pointwise estimates; nan if undefined
    order_low: float           # 10% quantile of the pointwise estimates
    order_high: float          # 90% quantile
    errors: list = field(default_factory=list)   # consecutive-pair L2 diffs
    monotone: bool = True


def physical_profiles(run, fields):
    """Steady profile in physical units on physical coordinates.

    Velocities rescale by 1/eps = N_x (the diffusive-scaling velocity unit);
    volume fractions and the p_k diagnostic are already physical.
    """
    cfg = run.config
    snap = run.snapshots[-1]
    x = node_coordinates(cfg.n_x)
    out = {}
    for name in fields:
        values = snap[name]
        if name in ("u_g", "u_l"):
            values = values * cfg.n_x
        out[name] = values
    return x, out


@dataclass
class ConvergenceStudy:
    scales: list
    n_x: list
    estimates: dict            # field -> OrderEstimate
    probe_points: np.ndarray


def convergence_study(case, scales, fields=("alpha_g", "u_g", "u_l"),
                      engine="lbm", n_probe=33, use_kernel=True):
    """Observed-order study across mesh scales on steady profiles.

    Each scale is run to steady state, converted to physical units and
    sampled with a cubic spline at shared interior probe points; consecutive
    profile differences then give pointwise order estimates
    p = log(|d_coarse|/|d_fine|)/log(h_coarse/h_mid), reported as the median
    with a 10-90% quantile band.  Zero differences make the order undefined
    (reported as nan); non-monotone error sequences are flagged, not hidden.

    ``engine`` is ``"lbm"``, ``"fd"``, or a callable ``cfg -> run`` returning
    any object with ``.config`` and ``.snapshots`` (handy for verifying the
    order estimator itself against profiles of known convergence order).
    """
    if len(scales) < 3:
        raise ValueError("need at least 3 scales for an order estimate")
    if callable(engine):
        runner = engine                             # cfg -> run-like object
    else:
        def runner(cfg):
            return run_engine(cfg, engine, use_kernel=use_kernel)
    runs = []
    for s in scales:
        runs.append(runner(resolve_config(case, s)))
    runs.sort(key=lambda r: r.config.n_x)          # fine last
    n_x = [r.config.n_x for r in runs]
    if len(set(n_x)) != len(n_x):
        raise ValueError(f"scales collapse to duplicate meshes: {n_x}")
    # probe strictly inside every grid's first/last node midpoints
    lo = max(node_coordinates(n)[0] for n in n_x)
    hi = min(node_coordinates(n)[-1] for n in n_x)
    probes = np.linspace(lo + 0.02 * (hi - lo), hi - 0.02 * (hi - lo), n_probe)

    sampled = {name: [] for name in fields}
    for run in runs:
        x, profiles = physical_profiles(run, fields)
        for name in fields:
            sampled[name].append(CubicSpline(x, profiles[name])(probes))

    hs = [1.0 / n for n in n_x]                    # coarse first (h descending)
    estimates = {}
    for name in fields:
        levels = sampled[name]                     # coarse first, like hs
        diffs = [levels[i] - levels[i + 1] for i in range(len(levels) - 1)]
        errs = [float(np.sqrt(np.mean(d * d))) for d in diffs]
        pointwise = []
        for i in range(len(diffs) - 1):
            ratio_h = hs[i] / hs[i + 1]
            num, den = np.abs(diffs[i]), np.abs(diffs[i + 1])
            ok = (num > 0) & (den > 0)
            pointwise.append(np.where(
                ok, np.log(np.maximum(num, 1e-300) / np.maximum(den, 1e-300))
                / math.log(ratio_h), np.nan))
        pointwise = np.concatenate(pointwise) if pointwise else np.array([])
        finite = pointwise[np.isfinite(pointwise)]
        if finite.size == 0:
            order = low = high = float("nan")
        else:
            order = float(np.median(finite))
            low = float(np.quantile(finite, 0.10))
            high = float(np.quantile(finite, 0.90))
        estimates[name] = OrderEstimate(
            field=name, order=order, order_low=low, order_high=high,
            errors=errs,
            monotone=all(errs[i] > errs[i + 1] for i in range(len(errs) - 1)))
    return ConvergenceStudy(scales=list(scales), n_x=n_x,
                            estimates=estimates, probe_points=probes)


# --- file formats -------------------------------------------------------------

def write_snapshots_csv(path, run):
    """All snapshots of a run, one row per node per snapshot, 17 sig digits."""
    x = node_coordinates(run.config.n_x)
    with open(path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for snap in run.snapshots:
            step = int(snap["step"])
            for i in range(run.config.n_x):
                row = [str(step), f"{x[i]:.17g}"]
                row += [f"{snap[name][i]:.17g}" for name in CSV_COLUMNS[2:]]
                fh.write(",".join(row) + "\n")


def read_snapshots_csv(path):
    """Parse a snapshot CSV back into a list of snapshot dicts."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header!r}")
        rows = [line.split(",") for line in fh.read().splitlines() if line]
    by_step = {}
    order = []
    for r in rows:
        s = int(r[0])
        if s not in by_step:
            by_step[s] = []
            order.append(s)
        by_step[s].append([float(v) for v in r[1:]])
    snapshots = []
    for s in order:
        block = np.asarray(by_step[s])
        snap = {"step": s, "x": block[:, 0]}
        for j, name in enumerate(CSV_COLUMNS[2:], start=1):
            snap[name] = block[:, j]
        snapshots.append(snap)
    return snapshots


def write_report(path, report_items, header=None):
    """Plain-text `key = value` metrics file (17 sig digits for floats)."""
    lines = [] if header is None else [f"# {header}"]
    for key, value in report_items:
        if isinstance(value, float):
            lines.append(f"{key} = {value:.17g}")
        else:
            lines.append(f"{key} = {value}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_report(path):
    """Parse a `key = value` report file back into a dict of floats/ints."""
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            value = value.strip()
            try:
                parsed = int(value)
            except ValueError:
                parsed = float(value)
            out[key.strip()] = parsed
    return out
