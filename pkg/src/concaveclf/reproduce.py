"""Protocol presets and measured-vs-reference comparisons for the case studies.

Reference values are the published performance tables; tolerances follow
the acceptance criteria. The pendulum linear-row crossing time at the
middle window is internally inconsistent with its own nominal rate
(1.998 s vs ln(1000)/3.000 = 2.303 s) and is reported but excluded from
pass/fail as a suspected typo.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import actuation, comparison, sim, tuning, windowed
from .plant import get_plant

# pendulum evaluation protocol
PENDULUM = {
    "theta": 10.0, "q": 1e5, "sigma": 3.0, "k_min": 0.1, "k_max": 2.3,
    "r_values": (1.0, 0.9, 0.8, 0.7, 0.6), "dt": 1e-3, "horizon": 4.5,
    "xi": (1e-2, 1e-3, 1e-4),
}

# quadrotor attitude evaluation protocol
QUADROTOR = {
    "theta": 11.0, "q": 300.0, "sigma": 2.0, "k_min": 0.8, "k_max": 2.5,
    "r_values": (0.95, 0.85), "dt": 1e-3, "horizon": 6.0,
    "xi": (1e-2, 1e-3),
    "sigma_bounds": (0.29, 10.0), "kappa": (0.9, 0.9),
}

# published Table I rows: per window (T, sigma_nom, energy), then peak input
TABLE1 = {
    "linear": {"rows": {1e-2: (1.535, 3.000, 7.833), 1e-3: (1.998, 3.000, 7.864),
                        1e-4: (3.076, 3.000, 7.875)}, "peak": 9.938},
    "r=1.0": {"rows": {1e-2: (0.860, 5.361, 7.501), 1e-3: (1.196, 5.779, 7.502),
                       1e-4: (1.535, 6.004, 7.502)}, "peak": 9.938},
    "r=0.9": {"rows": {1e-2: (0.899, 5.127, 7.337), 1e-3: (1.235, 5.594, 7.338),
                       1e-4: (1.574, 5.853, 7.338)}, "peak": 9.317},
    "r=0.8": {"rows": {1e-2: (0.948, 4.858, 7.265), 1e-3: (1.286, 5.377, 7.266),
                       1e-4: (1.624, 5.673, 7.266)}, "peak": 8.697},
    "r=0.7": {"rows": {1e-2: (1.013, 4.547, 7.313), 1e-3: (1.351, 5.115, 7.314),
                       1e-4: (1.690, 5.452, 7.314)}, "peak": 8.078},
    "r=0.6": {"rows": {1e-2: (1.102, 4.181, 7.530), 1e-3: (1.441, 4.797, 7.531),
                       1e-4: (1.780, 5.178, 7.531)}, "peak": 7.455},
}

# published Table II rows: per window (sigma_nom, energy), then peak torque
TABLE2 = {
    "flexible": {"rows": {1e-2: (2.835, 0.921), 1e-3: (2.827, 0.922)}, "peak": 10.899},
    "r=0.95": {"rows": {1e-2: (4.523, 1.049), 1e-3: (3.358, 1.050)}, "peak": 7.899},
    "r=0.85": {"rows": {1e-2: (4.344, 0.785), 1e-3: (3.250, 0.787)}, "peak": 7.068},
}


@dataclass
class Check:
    name: str
    measured: float
    expected: float
    tol: float            # relative unless kind == "abs" or "bool"
    kind: str = "rel"
    ok: bool = False
    note: str = ""

    def evaluate(self):
        if self.kind == "rel":
            self.ok = abs(self.measured - self.expected) <= self.tol * abs(self.expected)
        elif self.kind == "abs":
            self.ok = abs(self.measured - self.expected) <= self.tol
        else:
            self.ok = bool(self.measured)
        return self

    def line(self):
        flag = "PASS" if self.ok else "FAIL"
        note = f"  ({self.note})" if self.note else ""
        return (f"[{flag}] {self.name}: measured {self.measured:.6g} vs "
                f"{self.expected:.6g} (tol {self.tol:g} {self.kind}){note}")


@dataclass
class ReproReport:
    target: str
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.ok for c in self.checks)

    def add(self, name, measured, expected, tol, kind="rel", note=""):
        c = Check(name, float(measured), float(expected), tol, kind, note=note).evaluate()
        self.checks.append(c)
        return c


def concave_comparison_for(sigma, k_min, k_max, r, c):
    """Rational comparison in level units normalized by c (case-study form)."""
    ell_normalized = (r - k_min) / (k_max - r)
    params = comparison.RationalFactorParams(k_min, k_max, ell_normalized * c)
    return comparison.RationalConcave(sigma, params)


def pendulum_run(label, seed=0, dt=None, controller="soft_qp"):
    """Simulate one Table I row; label is 'linear' or 'r=<value>'."""
    proto = PENDULUM
    plant = get_plant("pendulum")
    c = plant.c_max
    if label == "linear":
        fn = comparison.Linear(proto["sigma"])
    else:
        r = float(label.split("=")[1])
        fn = concave_comparison_for(proto["sigma"], proto["k_min"], proto["k_max"], r, c)
    cfg = sim.SimConfig(controller=controller, horizon=proto["horizon"],
                        dt=dt or proto["dt"], comparison=fn, theta=proto["theta"],
                        q=proto["q"], seed=seed)
    rec = sim.simulate(plant, cfg, plant.x0_protocol)
    rep = sim.metrics(rec, c, [xi * c for xi in proto["xi"]])
    return rec, rep


def quad_run(label, seed=0):
    """Simulate one Table II row; label is 'flexible' or 'r=<value>'."""
    proto = QUADROTOR
    plant = get_plant("quadrotor")
    c = plant.c_max
    J = plant.kernel_args["J"]
    if label == "flexible":
        cfg = sim.SimConfig(controller="flex_qp", horizon=proto["horizon"],
                            dt=proto["dt"], theta=proto["theta"],
                            sigma_min=proto["sigma_bounds"][0],
                            sigma_max=proto["sigma_bounds"][1],
                            kappa=proto["kappa"], seed=seed)
    else:
        r = float(label.split("=")[1])
        fn = concave_comparison_for(proto["sigma"], proto["k_min"], proto["k_max"], r, c)
        cfg = sim.SimConfig(controller="soft_qp", horizon=proto["horizon"],
                            dt=proto["dt"], comparison=fn, theta=proto["theta"],
                            q=proto["q"], H=np.linalg.inv(J), seed=seed)
    rec = sim.simulate(plant, cfg, plant.x0_protocol)
    rep = sim.metrics(rec, c, [xi * c for xi in proto["xi"]])
    return rec, rep


def _run_rows(labels, runner, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(runner, labels))
    else:
        results = [runner(lb) for lb in labels]
    return dict(zip(labels, results))


def reproduce_table1(tol_scale=1.0, threads=1):
    """Pendulum Table I: six soft-QP rows across three windows."""
    report = ReproReport("table1")
    labels = list(TABLE1)
    results = _run_rows(labels, pendulum_run, threads)
    xi_list = PENDULUM["xi"]

    rows_out = []
    for label in labels:
        rec, rep = results[label]
        ref = TABLE1[label]
        for j, xi in enumerate(xi_list):
            rows_out.append([label, xi, rep.crossing_times[j], rep.nominal_rates[j],
                             rep.energies[j], ref["rows"][xi][0], ref["rows"][xi][1],
                             ref["rows"][xi][2]])
        rows_out.append([label, "peak", rep.peak_input, "", "", ref["peak"], "", ""])
    report.tables["table1"] = (
        ["row", "xi_or_peak", "T_measured_s", "sigma_nom_measured",
         "energy_measured", "T_paper_s", "sigma_nom_paper", "energy_paper"],
        rows_out)

    _, lin = results["linear"]
    report.add("linear T(1e-2 c)", lin.crossing_times[0], 1.535, 0.02 * tol_scale)
    report.add("linear sigma_nom(1e-2 c)", lin.nominal_rates[0], 3.000, 0.02 * tol_scale)
    report.add("linear peak input", lin.peak_input, 9.938, 0.02 * tol_scale)
    report.add("linear energy(1e-2 c)", lin.energies[0], 7.833, 0.05 * tol_scale)
    report.notes.append(
        "linear T at eps2=1e-3c: measured "
        f"{lin.crossing_times[1]:.3f}s vs printed 1.998s, excluded: the printed "
        "entry contradicts its own sigma_nom=3.000 (ln(1000)/3 = 2.303s)")

    _, r10 = results["r=1.0"]
    report.add("r=1.0 sigma_nom(1e-4 c)", r10.nominal_rates[2], 6.004, 0.05 * tol_scale)
    report.add("r=1.0 T(1e-2 c)", r10.crossing_times[0], 0.860, 0.05 * tol_scale)

    peaks = [results[lb][1].peak_input for lb in labels[1:]]
    refs = [TABLE1[lb]["peak"] for lb in labels[1:]]
    for lb, got, want in zip(labels[1:], peaks, refs):
        report.add(f"{lb} peak input", got, want, 0.03 * tol_scale)
    report.add("peaks strictly decreasing across r", float(
        all(a > b for a, b in zip(peaks, peaks[1:]))), 1.0, 0.0, kind="bool")
    return report


def reproduce_table2(tol_scale=1.0, threads=1):
    """Quadrotor Table II: ordering plus banded agreement (different stacks)."""
    report = ReproReport("table2")
    labels = list(TABLE2)
    results = _run_rows(labels, quad_run, threads)
    xi_list = QUADROTOR["xi"]

    rows_out = []
    for label in labels:
        rec, rep = results[label]
        ref = TABLE2[label]
        for j, xi in enumerate(xi_list):
            rows_out.append([label, xi, rep.crossing_times[j], rep.nominal_rates[j],
                             rep.energies[j], ref["rows"][xi][0], ref["rows"][xi][1]])
        rows_out.append([label, "peak", rep.peak_input, "", "", ref["peak"], ""])
    report.tables["table2"] = (
        ["row", "xi_or_peak", "T_measured_s", "sigma_nom_measured",
         "energy_measured", "sigma_nom_paper", "energy_paper"], rows_out)

    s95 = results["r=0.95"][1].nominal_rates[0]
    s85 = results["r=0.85"][1].nominal_rates[0]
    sfx = results["flexible"][1].nominal_rates[0]
    report.add("sigma_nom ordering r=0.95 > r=0.85 > flexible",
               float(s95 > s85 > sfx), 1.0, 0.0, kind="bool")
    report.add("r=0.95 sigma_nom(1e-2 c)", s95, 4.523, 0.15 * tol_scale)
    report.add("r=0.85 sigma_nom(1e-2 c)", s85, 4.344, 0.15 * tol_scale)
    report.add("flexible sigma_nom(1e-2 c)", sfx, 2.835, 0.15 * tol_scale)

    p95 = results["r=0.95"][1].peak_input
    p85 = results["r=0.85"][1].peak_input
    pfx = results["flexible"][1].peak_input
    report.add("peak ordering r=0.85 < r=0.95 < flexible",
               float(p85 < p95 < pfx), 1.0, 0.0, kind="bool")
    report.add("r=0.85 peak torque", p85, 7.068, 0.15 * tol_scale)
    report.add("r=0.95 peak torque", p95, 7.899, 0.15 * tol_scale)
    report.add("flexible peak torque", pfx, 10.899, 0.15 * tol_scale)

    e85 = results["r=0.85"][1].energies[0]
    efx = results["flexible"][1].energies[0]
    report.add("r=0.85 energy below flexible + 15%",
               float(e85 <= efx * (1.0 + 0.15 * tol_scale)), 1.0, 0.0, kind="bool")
    return report


def reproduce_integrator(tol_scale=1.0, threads=1):
    """Saturated single integrator: exact analytic comparisons."""
    report = ReproReport("integrator")
    theta = 1.0
    plant = get_plant("integrator", theta=theta)
    c, eps = 100.0, 1e-4
    w = windowed.Window(eps, c)
    cap = comparison.SqrtComparison(2.0 * theta)

    sig = windowed.nominal_rate(cap, w)
    report.add("sigma_bar(1e-4, 100) / theta", sig / theta, 1.382, 0.001 * tol_scale)
    report.add("relaxation ratio r_bar", windowed.relaxation_ratio(cap, w),
               0.145, 0.005 * tol_scale)
    sigma = 3.0
    thmin = actuation.required_actuation(plant, comparison.Linear(sigma), c,
                                         samples=4000, seed=0)
    report.add("theta_min(linear sigma=3; c=100)", thmin,
               sigma * math.sqrt(c) / 2.0, 1e-10 * tol_scale, kind="abs")

    cfg = sim.SimConfig(controller="bang_bang", horizon=10.5, dt=1e-3, theta=theta)
    rec = sim.simulate(plant, cfg, np.array([math.sqrt(c)]))
    # closed form: V(t) = (sqrt(c) - theta t)^2 until the origin
    tt = rec.t[rec.t <= (math.sqrt(c) - math.sqrt(eps)) / theta]
    vref = (math.sqrt(c) - theta * tt) ** 2
    err = float(np.max(np.abs(rec.V[:len(tt)] - vref)) / c)
    report.add("bang-bang V(t) vs closed form (max rel err)", err, 0.0,
               1e-6 * tol_scale, kind="abs")
    T = sim.crossing_time_empirical(rec, eps)
    report.add("bang-bang T(1e-4, 100)", T, (math.sqrt(c) - math.sqrt(eps)) / theta,
               1e-6 * tol_scale)
    report.tables["integrator"] = (
        ["quantity", "measured", "reference"],
        [["sigma_bar", sig, 1.382], ["r_bar", windowed.relaxation_ratio(cap, w), 0.145],
         ["theta_min", thmin, 15.0], ["T_bangbang_s", T, 9.99]])
    return report


def reproduce_caps(tol_scale=1.0, threads=1):
    """Decay-cap curves along the pendulum trajectory plus a level sweep."""
    report = ReproReport("caps")
    plant = get_plant("pendulum")
    c = plant.c_max
    theta = PENDULUM["theta"]
    rec, rep = pendulum_run("linear")
    lin = comparison.Linear(PENDULUM["sigma"])
    cave = concave_comparison_for(PENDULUM["sigma"], PENDULUM["k_min"],
                                  PENDULUM["k_max"], 1.0, c)
    rows = []
    for k in range(0, len(rec.t) - 1, 5):
        x = rec.x[k]
        v = rec.V[k]
        rows.append([rec.t[k], v, actuation.pointwise_decay_cap(plant, x, theta),
                     lin.alpha(v), cave.alpha(v)])
    report.tables["dmax_along_trajectory"] = (
        ["t_s", "V_level", "D_max", "alpha_linear", "alpha_concave_r1"], rows)

    consts = actuation.regularity_from_plant(plant)
    levels = np.geomspace(1e-3 * c, c, 12)
    sweep = actuation.cap_sweep_rows(plant, lin, theta, consts, levels,
                                     samples=2000, seed=0)
    report.tables["cap_sweep"] = (
        ["V_level", "level_cap", "theta_min", "theta_min_lower_bound"], sweep)
    # the sampled cap must dominate every trajectory D_max at or below its level
    dmax_traj = max(r[2] for r in rows)
    cap_c = actuation.level_cap(plant, theta, c, samples=4000, seed=0)
    report.add("level cap dominates trajectory D_max", float(cap_c >= dmax_traj),
               1.0, 0.0, kind="bool")
    for (v, cap, tmin, tlb) in sweep:
        if tmin < tlb - 1e-9:
            report.add(f"theta_min >= lower bound at v={v:.3g}", 0.0, 1.0, 0.0,
                       kind="bool")
    return report


TARGETS = {
    "table1": reproduce_table1,
    "table2": reproduce_table2,
    "integrator": reproduce_integrator,
    "caps": reproduce_caps,
}


def run_target(target, tol_scale=1.0, threads=1) -> ReproReport:
    if target not in TARGETS:
        raise KeyError(f"unknown reproduction target {target!r}")
    return TARGETS[target](tol_scale=tol_scale, threads=threads)
