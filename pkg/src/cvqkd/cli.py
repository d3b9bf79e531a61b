"""Batch front-end: resolve a scenario file, evaluate single points, sweeps,
or simulator experiments, and emit CSV/JSON rows with full provenance.

Exit codes: 0 all points evaluated, 2 some points failed (NaN rows carry the
reason), 1 configuration or usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import __version__
from .channel import (
    BeamConfig,
    FadingModel,
    diffraction_transmissivity,
    microwave_transmissivity,
)
from .config import ConfigError, Scenario, resolve_scenario
from .finite_size import (
    composable_rate,
    composable_rate_general,
    general_attack_extension,
    microwave_estimators,
    mobile_worst_case,
    setup_and_background_bounds,
    total_epsilon,
    worst_case_estimators,
)
from .noise import setup_noise_from_thetas
from .rates import (
    ChannelPoint,
    SecurityType,
    TrustLevel,
    asymptotic_rate,
    holevo_los_from_coefficients,
    microwave_los_cm,
    mutual_information,
    plob_thermal_bound,
)
from .simulate import (
    defade_block,
    estimator_coverage_experiment,
    simulate_block,
    simulate_fading_block,
)

RESULT_SCHEMA = "cvqkd-results/1"

RATE_COLUMNS = ("eta_ch", "tau", "mi", "chi", "r_pe", "rate_asym_raw",
                "rate_asym", "rate_raw", "rate", "plob", "epsilon", "tau_lo",
                "tau_hi", "n_hi", "p_delta", "warnings", "reason")
SIM_COLUMNS = ("pulses", "m_p", "tau_model", "nbar_model", "tau_hat",
               "sigma_z2_hat", "n_hat", "tau_lo", "tau_hi", "n_hi",
               "warnings", "reason")
SIM_MOBILE_COLUMNS = ("pulses", "kept_pairs", "p_delta_model", "p_delta_emp",
                      "tau_min", "n_star_model", "defade_var_model", "tau_hat",
                      "n_hat", "defade_var", "warnings", "reason")
COVERAGE_COLUMNS = ("rounds", "pulses", "eps_pe", "w", "tau_low_failures",
                    "tau_high_failures", "n_failures", "tau_low_rate",
                    "tau_high_rate", "n_rate", "warnings", "reason")
PROVENANCE_COLUMNS = ("scenario_hash", "seed", "version")

NAN = float("nan")


def _abscissa_name(scenario: Scenario) -> str:
    from .config import SWEEP_VARIABLE

    variable = SWEEP_VARIABLE[scenario.channel]
    return {"loss_db": "loss_db", "distance": "distance_m",
            "z_max": "z_max_m"}[variable]


def scenario_echo(scenario: Scenario) -> dict:
    echo = {"channel": scenario.channel, "nu_det": scenario.nu_det,
            "lo": scenario.lo_kind, "trust": scenario.trust,
            "security": scenario.security, "attack": scenario.attack,
            "improved_aep": scenario.improved_aep,
            "physics": dict(sorted(scenario.physics.items())),
            "protocol": asdict(scenario.params),
            "derived": dict(sorted(scenario.derived.items()))}
    if scenario.channel == "optical-mobile":
        echo["f_th"] = scenario.f_th
        echo["bins"] = scenario.bins
    return echo


def scenario_hash(scenario: Scenario) -> str:
    blob = json.dumps(scenario_echo(scenario), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _trust_enum(scenario: Scenario) -> TrustLevel:
    return TrustLevel(scenario.trust)


def _security_enum(scenario: Scenario) -> SecurityType:
    return SecurityType(scenario.security)


def _model_eta_ch(scenario: Scenario, x: float) -> tuple:
    """Channel transmissivity at abscissa x, with any clamp warning."""
    p = scenario.physics
    warnings = []
    if scenario.channel == "fixed-loss":
        tau_total = 10.0 ** (-x / 10.0)
        eta_ch = tau_total / p["eta_eff"]
        if eta_ch > 1.0:
            eta_ch = 1.0
            warnings.append("eta_ch_clamped")
    elif scenario.channel == "optical-fixed":
        beam = BeamConfig(wavelength=p["lambda"], waist=p["w0"])
        eta_ch = diffraction_transmissivity(beam, x, p["a_r"],
                                            p.get("eta_atm", 1.0))
    elif scenario.channel == "microwave":
        eta_ch = microwave_transmissivity(p["g"], p["a_r"], x)
    else:
        raise ValueError("optical-mobile points are evaluated via the fading "
                         "pipeline")
    return eta_ch, warnings


def _finite_rate(scenario: Scenario, r_pe: float, p_delta: float) -> tuple:
    """Composable rate and the epsilon column for the configured attack."""
    prm = scenario.params
    if scenario.attack == "general":
        terms = general_attack_extension(prm, (prm.mu - 1.0) / 2.0,
                                         total_epsilon(prm), p_delta=p_delta)
        rate = composable_rate_general(r_pe, prm, terms, p_delta=p_delta,
                                       improved_prefactor=scenario.improved_aep)
        return rate, terms.eps_prime
    rate = composable_rate(r_pe, prm, p_delta=p_delta,
                           improved_prefactor=scenario.improved_aep)
    return rate, total_epsilon(prm)


def _evaluate_fixed(scenario: Scenario, x: float) -> dict:
    """Rate row for the non-fading channels."""
    p = scenario.physics
    prm = scenario.params
    trust, security = _trust_enum(scenario), _security_enum(scenario)
    eta_ch, warnings = _model_eta_ch(scenario, x)
    eta_eff = p["eta_eff"]
    tau = eta_ch * eta_eff
    plob = NAN

    if scenario.channel == "microwave":
        n_th = scenario.derived["n_th"]
        sx2 = scenario.sigma_x2
        model = ChannelPoint.from_estimates(tau, eta_eff, n_th, 0.0,
                                            scenario.nu_det, prm.mu)
        tau_lo, n_hi, n_lo = microwave_estimators(tau, n_th, sx2, prm.m,
                                                  scenario.nu_det, prm.w)
        wc = ChannelPoint.from_estimates(tau_lo, eta_eff, n_hi, 0.0,
                                         scenario.nu_det, prm.mu)
        if security is SecurityType.LOS:
            mi_model = mutual_information(model)
            chi_model = holevo_los_from_coefficients(
                *microwave_los_cm(tau, sx2, n_th), scenario.nu_det)
            asym = prm.beta * mi_model - chi_model
            mi = mutual_information(wc)
            chi = holevo_los_from_coefficients(
                *microwave_los_cm(tau_lo, sx2, n_lo), scenario.nu_det)
        else:
            rep_model = asymptotic_rate(model, trust, security, prm.beta)
            asym = rep_model.rate
            rep = asymptotic_rate(wc, trust, security, prm.beta)
            mi, chi = rep.mutual_information, rep.holevo
        r_pe = prm.beta * mi - chi
        est_cols = {"tau_lo": tau_lo, "tau_hi": NAN, "n_hi": n_hi}
        plob = plob_thermal_bound(tau, n_th)
    else:
        tel = scenario.derived["theta_el"]
        tph = scenario.derived["theta_ph"]
        n_ex = setup_noise_from_thetas(tel, tph, scenario.lo_kind, tau,
                                       n_other=p.get("n_other", 0.0))
        model = ChannelPoint(eta_ch=eta_ch, eta_eff=eta_eff, n_b=p["n_b"],
                             n_ex=n_ex, nu_det=scenario.nu_det, mu=prm.mu)
        asym = asymptotic_rate(model, trust, security, prm.beta).rate
        est = worst_case_estimators(tau, model.nbar, scenario.sigma_x2,
                                    2.0 * model.nbar + scenario.nu_det,
                                    scenario.nu_det * prm.m, prm.w)
        warnings.extend(est.warnings)
        if scenario.trust == 3:
            n_b_wc = 0.0
        else:
            bounds = setup_and_background_bounds(est, tel, tph,
                                                 scenario.lo_kind, eta_eff)
            warnings.extend(w for w in bounds.warnings if w not in warnings)
            n_b_wc = bounds.n_b_hi
        wc = ChannelPoint.from_estimates(est.tau_lo, eta_eff, est.n_hi, n_b_wc,
                                         scenario.nu_det, prm.mu)
        rep = asymptotic_rate(wc, trust, security, prm.beta)
        mi, chi = rep.mutual_information, rep.holevo
        r_pe = rep.rate
        est_cols = {"tau_lo": est.tau_lo, "tau_hi": est.tau_hi,
                    "n_hi": est.n_hi}

    rate_raw, epsilon = _finite_rate(scenario, r_pe, 1.0)
    return {"eta_ch": eta_ch, "tau": tau, "mi": mi, "chi": chi, "r_pe": r_pe,
            "rate_asym_raw": asym, "rate_raw": rate_raw, "plob": plob,
            "epsilon": epsilon, "p_delta": 1.0,
            "warnings": ";".join(warnings), "reason": "", **est_cols}


def _evaluate_mobile(scenario: Scenario, z_max: float) -> dict:
    p = scenario.physics
    prm = scenario.params
    trust, security = _trust_enum(scenario), _security_enum(scenario)
    beam = BeamConfig(wavelength=p["lambda"], waist=p["w0"])
    fading = FadingModel.from_geometry(beam, z_max, p["a_r"], p["sigma_p"],
                                       p["eta_eff"], p.get("eta_atm", 1.0))
    fs = mobile_worst_case(prm, fading, scenario.derived["theta_el"],
                           scenario.derived["theta_ph"], scenario.lo_kind,
                           p["eta_eff"], p["n_b"], scenario.sigma_x2,
                           scenario.nu_det, f_th=scenario.f_th,
                           bins=scenario.bins)
    n_b_wc = 0.0 if scenario.trust == 3 else fs.n_b_ub
    wc = ChannelPoint.from_estimates(fs.tau_lb, p["eta_eff"], fs.n_ub, n_b_wc,
                                     scenario.nu_det, prm.mu)
    rep = asymptotic_rate(wc, trust, security, prm.beta)
    rate_raw, epsilon = _finite_rate(scenario, rep.rate, fs.p_delta)
    return {"eta_ch": fading.eta / p["eta_eff"], "tau": fading.eta,
            "mi": rep.mutual_information, "chi": rep.holevo, "r_pe": rep.rate,
            "rate_asym_raw": NAN, "rate_raw": rate_raw, "plob": NAN,
            "epsilon": epsilon, "tau_lo": fs.tau_lb, "tau_hi": NAN,
            "n_hi": fs.n_ub, "p_delta": fs.p_delta,
            "warnings": ";".join(fs.warnings), "reason": ""}


def evaluate_rate_point(scenario: Scenario, x: float, clamp: bool) -> dict:
    """One complete rate row at abscissa x; failures become NaN rows."""
    name = _abscissa_name(scenario)
    try:
        if scenario.channel == "optical-mobile":
            row = _evaluate_mobile(scenario, x)
        else:
            row = _evaluate_fixed(scenario, x)
    except Exception as exc:  # per-point failures must not kill the sweep
        row = {col: NAN for col in RATE_COLUMNS}
        row["warnings"] = ""
        row["reason"] = f"{type(exc).__name__}: {exc}"
    row["rate_asym"] = _clamp(row.get("rate_asym_raw", NAN)) if clamp \
        else row.get("rate_asym_raw", NAN)
    row["rate"] = _clamp(row.get("rate_raw", NAN)) if clamp \
        else row.get("rate_raw", NAN)
    row[name] = x
    return row


def _clamp(value: float) -> float:
    if isinstance(value, float) and math.isnan(value):
        return value
    return max(0.0, value)


def _mobile_noise_map(scenario: Scenario):
    tel = scenario.derived["theta_el"]
    tph = scenario.derived["theta_ph"]
    eta_eff = scenario.physics["eta_eff"]
    n_b = scenario.physics["n_b"]
    n_other = scenario.physics.get("n_other", 0.0)
    if scenario.lo_kind == "tlo":
        return lambda tau: eta_eff * n_b + tel / tau + n_other
    return lambda tau: eta_eff * n_b + tel + tph * tau + n_other


def _dump_block(block, bins, path: str, tau_const: float = None) -> None:
    """Write one simulated block as CSV, one row per disclosed pair."""
    tau = block.tau_samples if block.tau_samples is not None \
        else np.full(block.pairs, tau_const)
    pilot = block.pilot_mask if block.pilot_mask is not None \
        else np.zeros(block.pairs, dtype=bool)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("index", "pilot_flag", "x", "y", "tau_sample", "bin"))
        for i in range(block.pairs):
            writer.writerow((i, int(pilot[i]), "%.17g" % block.x[i],
                             "%.17g" % block.y[i], "%.17g" % tau[i],
                             int(bins[i])))


def evaluate_simulation(scenario: Scenario, x: float, seed: int,
                        dump: str = None) -> dict:
    name = _abscissa_name(scenario)
    pulses = scenario.simulate["pulses"]
    prm = scenario.params
    try:
        if scenario.channel == "optical-mobile":
            p = scenario.physics
            beam = BeamConfig(wavelength=p["lambda"], waist=p["w0"])
            fading = FadingModel.from_geometry(beam, x, p["a_r"], p["sigma_p"],
                                               p["eta_eff"],
                                               p.get("eta_atm", 1.0))
            fs = mobile_worst_case(prm, fading, scenario.derived["theta_el"],
                                   scenario.derived["theta_ph"],
                                   scenario.lo_kind, p["eta_eff"], p["n_b"],
                                   scenario.sigma_x2, scenario.nu_det,
                                   f_th=scenario.f_th, bins=scenario.bins)
            block = simulate_fading_block(
                fading, _mobile_noise_map(scenario), scenario.nu_det,
                scenario.sigma_x2, pulses, seed,
                pilot_rate=scenario.simulate.get("pilot_rate", 0.0))
            if dump:
                _dump_block(block, fs.lattice.assign(block.tau_samples), dump)
            faded = defade_block(block, fs.lattice, seed + 1)
            snap = faded.estimators()
            keep = slice(None) if faded.pilot_mask is None \
                else ~faded.pilot_mask
            defade_var = float(np.mean(faded.y[keep] ** 2))
            row = {"pulses": pulses, "kept_pairs": faded.pairs,
                   "p_delta_model": fs.p_delta,
                   "p_delta_emp": faded.pairs / block.pairs,
                   "tau_min": fs.lattice.tau_min, "n_star_model": fs.n_star,
                   "defade_var_model": fs.lattice.tau_min * scenario.sigma_x2
                   + 2.0 * fs.n_star + scenario.nu_det,
                   "tau_hat": snap.tau_hat, "n_hat": snap.n_hat,
                   "defade_var": defade_var,
                   "warnings": ";".join(fs.warnings), "reason": ""}
        else:
            eta_ch, warnings = _model_eta_ch(scenario, x)
            tau = eta_ch * scenario.physics["eta_eff"]
            if scenario.channel == "microwave":
                nbar = scenario.derived["n_th"]
            else:
                n_ex = setup_noise_from_thetas(
                    scenario.derived["theta_el"], scenario.derived["theta_ph"],
                    scenario.lo_kind, tau,
                    n_other=scenario.physics.get("n_other", 0.0))
                nbar = scenario.physics["eta_eff"] * scenario.physics["n_b"] + n_ex
            block = simulate_block(tau, nbar, scenario.nu_det,
                                   scenario.sigma_x2, pulses, seed)
            if dump:
                _dump_block(block, np.full(block.pairs, -1), dump,
                            tau_const=tau)
            snap = block.estimators()
            est = worst_case_estimators(snap.tau_hat, max(snap.n_hat, 0.0),
                                        scenario.sigma_x2, snap.sigma_z2_hat,
                                        snap.m_p, prm.w)
            warnings.extend(est.warnings)
            row = {"pulses": pulses, "m_p": snap.m_p, "tau_model": tau,
                   "nbar_model": nbar, "tau_hat": snap.tau_hat,
                   "sigma_z2_hat": snap.sigma_z2_hat, "n_hat": snap.n_hat,
                   "tau_lo": est.tau_lo, "tau_hi": est.tau_hi,
                   "n_hi": est.n_hi, "warnings": ";".join(warnings),
                   "reason": ""}
    except Exception as exc:
        cols = SIM_MOBILE_COLUMNS if scenario.channel == "optical-mobile" \
            else SIM_COLUMNS
        row = {col: NAN for col in cols}
        row["warnings"] = ""
        row["reason"] = f"{type(exc).__name__}: {exc}"
    row[name] = x
    return row


def evaluate_coverage(scenario: Scenario, x: float, seed: int) -> dict:
    name = _abscissa_name(scenario)
    cov = scenario.coverage
    try:
        if scenario.channel == "optical-mobile":
            raise ConfigError("coverage applies to the constant-transmissivity "
                              "channels")
        eta_ch, warnings = _model_eta_ch(scenario, x)
        tau = eta_ch * scenario.physics["eta_eff"]
        if scenario.channel == "microwave":
            nbar = scenario.derived["n_th"]
        else:
            n_ex = setup_noise_from_thetas(
                scenario.derived["theta_el"], scenario.derived["theta_ph"],
                scenario.lo_kind, tau,
                n_other=scenario.physics.get("n_other", 0.0))
            nbar = scenario.physics["eta_eff"] * scenario.physics["n_b"] + n_ex
        report = estimator_coverage_experiment(
            tau, nbar, scenario.nu_det, scenario.sigma_x2, cov["pulses"],
            cov["rounds"], cov["eps_pe"], seed)
        row = {"rounds": report.rounds, "pulses": cov["pulses"],
               "eps_pe": report.eps_pe, "w": report.w,
               "tau_low_failures": report.tau_low_failures,
               "tau_high_failures": report.tau_high_failures,
               "n_failures": report.n_failures,
               "tau_low_rate": report.tau_low_rate,
               "tau_high_rate": report.tau_high_rate,
               "n_rate": report.n_rate,
               "warnings": ";".join(warnings), "reason": ""}
    except Exception as exc:
        row = {col: NAN for col in COVERAGE_COLUMNS}
        row["warnings"] = ""
        row["reason"] = f"{type(exc).__name__}: {exc}"
    row[name] = x
    return row


def _sweep_worker(args) -> dict:
    scenario, x, clamp = args
    return evaluate_rate_point(scenario, x, clamp)


def run_sweep(scenario: Scenario, clamp: bool, jobs: int = 1) -> list:
    if scenario.sweep is None:
        raise ConfigError("the sweep command needs a [sweep] section")
    _, start, stop, points = scenario.sweep
    xs = np.linspace(start, stop, points)
    work = [(scenario, float(x), clamp) for x in xs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_worker, work))
    else:
        rows = [_sweep_worker(item) for item in work]
    name = _abscissa_name(scenario)
    rows.sort(key=lambda row: row[name])
    return rows


def _format_cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return "%.17g" % float(value)


def emit_csv(rows: list, columns: tuple, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row[col]) for col in columns])


def _json_cell(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    value = float(value)
    return None if math.isnan(value) else value


def emit_json(rows: list, columns: tuple, scenario: Scenario, seed: int,
              command: str, out) -> None:
    payload = {
        "schema": RESULT_SCHEMA,
        "version": __version__,
        "command": command,
        "seed": seed,
        "scenario_hash": scenario_hash(scenario),
        "scenario": scenario_echo(scenario),
        "columns": list(columns),
        "rows": [[_json_cell(row[col]) for col in columns] for row in rows],
    }
    json.dump(payload, out, sort_keys=True, indent=1, allow_nan=False)
    out.write("\n")


def _emit(rows, base_columns, scenario, args, command) -> None:
    sc_hash = scenario_hash(scenario)
    for row in rows:
        row["scenario_hash"] = sc_hash
        row["seed"] = args.seed
        row["version"] = __version__
    columns = (_abscissa_name(scenario),) + tuple(base_columns) \
        + PROVENANCE_COLUMNS
    sink = open(args.out, "w", encoding="utf-8", newline="") if args.out \
        else io.StringIO()
    try:
        if args.format == "csv":
            emit_csv(rows, columns, sink)
        else:
            emit_json(rows, columns, scenario, args.seed, command, sink)
        if not args.out:
            sys.stdout.write(sink.getvalue())
    finally:
        if args.out:
            sink.close()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cvqkd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("rate", "evaluate the configured [point]"),
                       ("sweep", "evaluate the configured [sweep]"),
                       ("simulate", "Monte Carlo block at the [point]"),
                       ("coverage", "estimator-bound coverage at the [point]")):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True)
        cmd.add_argument("--out", default=None)
        cmd.add_argument("--format", choices=("csv", "json"), default="csv")
        cmd.add_argument("--seed", type=int, default=0)
        cmd.add_argument("--jobs", type=int, default=1)
        cmd.add_argument("--clamp", choices=("on", "off"), default="on")
    sub.choices["simulate"].add_argument(
        "--dump", default=None, metavar="PATH",
        help="write the raw simulated pairs (index, pilot_flag, x, y, "
             "tau_sample, bin) as CSV")
    return parser


def _need_point(scenario: Scenario) -> float:
    if scenario.point is None:
        raise ConfigError("this command needs a [point] section")
    return scenario.point[1]


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        with open(args.config, encoding="utf-8") as handle:
            scenario = resolve_scenario(handle.read())
        clamp = args.clamp == "on"
        if args.command == "rate":
            rows = [evaluate_rate_point(scenario, _need_point(scenario), clamp)]
            base = RATE_COLUMNS
        elif args.command == "sweep":
            rows = run_sweep(scenario, clamp, max(1, args.jobs))
            base = RATE_COLUMNS
        elif args.command == "simulate":
            if scenario.simulate is None:
                raise ConfigError("the simulate command needs a [simulate] "
                                  "section")
            rows = [evaluate_simulation(scenario, _need_point(scenario),
                                        args.seed, dump=args.dump)]
            base = SIM_MOBILE_COLUMNS if scenario.channel == "optical-mobile" \
                else SIM_COLUMNS
        else:
            if scenario.coverage is None:
                raise ConfigError("the coverage command needs a [coverage] "
                                  "section")
            rows = [evaluate_coverage(scenario, _need_point(scenario),
                                      args.seed)]
            base = COVERAGE_COLUMNS
        _emit(rows, base, scenario, args, args.command)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2 if any(row.get("reason") for row in rows) else 0


if __name__ == "__main__":
    sys.exit(main())
