"""``hrlab <subcommand> --config <path> [--seed N] [--out DIR]``.

Exit codes: 0 success, 2 validation error, 3 numerical blow-up, 4 a hard
assertion (dichotomy, Gronwall ceiling, Phi nonincrease, determining modes)
failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
import time
import zlib
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import io as hio
from .analysis import (
    absorption_probe,
    basis_for_selection,
    chaotic_pairs,
    determining_modes_experiment,
    dimension_bound,
    DimensionBoundInputs,
    embedding_constants,
    lipschitz_probe,
    make_pairs,
    mode_vector,
    perturbed_pairs,
    phi_monitor,
    random_states,
    random_states_with_norm,
    reentry_check,
    select_m,
    squeeze_test,
    theta_scan,
    time_lipschitz_probe,
)
from .analysis.sampling import ensemble_lp_bounds
from .config import ExperimentConfig, load_config
from .errors import BlowUpError, ValidationError
from .integrator import StepperConfig, evolve, ode_rk4
from .model import K, lipschitz_E_to_H
from .spectral import DomainSpec, State, build_basis

EXIT_OK, EXIT_VALIDATION, EXIT_BLOWUP, EXIT_ASSERT = 0, 2, 3, 4
COMMANDS = ("simulate", "ode", "absorb", "squeeze", "lipschitz", "determine", "dimension")


def rng_for(seed: int, stream: str) -> np.random.Generator:
    """Independent generator per named stream, fixed by (seed, stream)."""
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, zlib.crc32(stream.encode())]))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _report(kind: str, cfg: ExperimentConfig, records, verdict: str, **extra) -> dict:
    out = {"kind": kind, "seed": cfg.seed, "parameters": cfg.params.to_dict(), "config": cfg.to_dict(),
           "records": records, "verdict": verdict}
    out.update(extra)
    return out


def _basis(cfg: ExperimentConfig):
    return build_basis(cfg.domain_spec(), cfg.m_max)


# ----------------------------------------------------------------------------
# simulate / ode


def initial_state(basis, init, rng) -> State:
    if init.kind == "zero":
        return State.zeros(basis)
    if init.kind == "constant":
        return State.constant(basis, init.values)
    c = np.zeros((3, basis.m_max))
    if init.kind == "random":
        c = random_states_with_norm(basis, [init.e_norm], rng, init.n_active)[0]
    else:
        for comp, k, val in init.modes:
            if not 0 <= int(k) < basis.m_max:
                raise ValidationError(f"simulate.initial.modes: mode {k} outside basis of size {basis.m_max}")
            c[int(comp), int(k)] = float(val)
    return State(basis, c)


def cmd_simulate(cfg: ExperimentConfig, out: Path):
    basis = _basis(cfg)
    state = initial_state(basis, cfg.simulate.initial, rng_for(cfg.seed, "simulate.initial"))
    traj = evolve(state, cfg.params, cfg.simulate.T, cfg.stepper)
    files = [hio.write_trajectory_csv(out / "trajectory.csv", traj.times, traj.norms)]
    if cfg.simulate.binary_dump:
        files.append(hio.write_hrtraj(out / "trajectory.hrtraj", traj.times, traj.states))
    summary = {"n_samples": len(traj.times), "final_time": float(traj.times[-1]),
               "max_norm_E": float(traj.norm_E.max()), "final_norm_E": float(traj.norm_E[-1])}
    return files, summary, EXIT_OK


def burst_table(times, u, threshold: float, gap: float):
    """Spikes are local maxima of u above ``threshold``; a silence longer than ``gap`` ends a burst."""
    u = np.asarray(u)
    inner = (u[1:-1] > u[:-2]) & (u[1:-1] >= u[2:]) & (u[1:-1] > threshold)
    spikes = times[1:-1][inner]
    bursts = []
    if spikes.size:
        start = 0
        for i in range(1, spikes.size + 1):
            if i == spikes.size or spikes[i] - spikes[i - 1] > gap:
                bursts.append({"start": float(spikes[start]), "end": float(spikes[i - 1]), "n_spikes": i - start})
                start = i
    return spikes, bursts


def cmd_ode(cfg: ExperimentConfig, out: Path):
    oc = cfg.ode
    t, y = ode_rk4(oc.initial, cfg.params, oc.T, oc.dt, oc.record_every)
    if not np.all(np.isfinite(y)):
        raise BlowUpError("ODE solution became non-finite; reduce ode.dt")
    path = hio.write_series_csv(out / "ode_series.csv", ["t", "u", "v", "w"], np.column_stack([t, y]))
    spikes, bursts = burst_table(t, y[:, 0], oc.spike_threshold, oc.burst_gap)
    report = _report(
        "ode", cfg, bursts, "pass",
        summary={"n_spikes": int(spikes.size), "n_bursts": len(bursts), "series_sha256": _sha256(path),
                 "final_state": y[-1], "u_range": [float(y[:, 0].min()), float(y[:, 0].max())]},
    )
    return [path, hio.write_json(out / "ode_report.json", report)], report["summary"], EXIT_OK


# ----------------------------------------------------------------------------
# absorption and its artifact


def run_absorb(cfg: ExperimentConfig, out: Path):
    ac = cfg.absorb
    basis = _basis(cfg)
    rng = rng_for(cfg.seed, "absorb.initial")
    init = random_states_with_norm(basis, np.linspace(ac.norm_min, ac.norm_max, ac.ensemble), rng, ac.n_active)
    rep = absorption_probe(basis, init, cfg.params, ac.horizon, cfg.stepper, ac.tail_fraction, ac.margin,
                           ac.warmup_time, ac.warmup_dt, sample_every=ac.sample_every)
    reentry = reentry_check(basis, rep, cfg.params, cfg.stepper, rng=rng_for(cfg.seed, "absorb.restart")) \
        if ac.restart_check and rep.all_entered else None
    post = rep.post_entry_states()
    member = np.concatenate([np.full(int(np.sum(rep.sample_times >= te)), b)
                             for b, te in enumerate(rep.entry_times) if te is not None])
    times = np.concatenate([rep.sample_times[rep.sample_times >= te] for te in rep.entry_times if te is not None])
    files = [hio.write_hrtraj(out / "absorb_samples.hrtraj", times, post)]
    header = ["t"] + [f"member_{b}" for b in range(rep.ensemble_size)]
    files.append(hio.write_series_csv(out / "absorb_norms.csv", header, np.column_stack([rep.times, rep.norms])))
    records = [{"member": b, "initial_norm_E": rep.initial_norms[b], "entry_time": te, "tail_max": rep.tail_max[b]}
               for b, te in enumerate(rep.entry_times)]
    ok = rep.all_entered and (reentry is None or reentry.ok)
    report = _report("absorb", cfg, records, "pass" if ok else "warn", absorption=rep.to_dict(),
                     reentry=None if reentry is None else reentry.to_dict(),
                     samples_file="absorb_samples.hrtraj", sample_members=member.tolist(),
                     n_samples=int(post.shape[0]))
    files.append(hio.write_json(out / "absorb_report.json", report))
    return basis, post, report, files


def cmd_absorb(cfg: ExperimentConfig, out: Path):
    _, _, report, files = run_absorb(cfg, out)
    return files, {"q_estimate": report["absorption"]["q_estimate"], "verdict": report["verdict"]}, EXIT_OK


def load_absorb_artifact(path, cfg: ExperimentConfig):
    """(basis, samples, report) from an absorb_report.json written by ``hrlab absorb``."""
    path = Path(path)
    if path.is_dir():
        path = path / "absorb_report.json"
    if not path.exists():
        raise ValidationError(f"missing prerequisite artifact {path}: run `hrlab absorb` first or "
                              "drop absorb_artifact to absorb inline")
    report = json.loads(path.read_text())
    if report.get("kind") != "absorb":
        raise ValidationError(f"{path} is not an absorb report")
    samples_path = path.parent / report["samples_file"]
    if not samples_path.exists():
        raise ValidationError(f"missing prerequisite artifact {samples_path} referenced by {path}")
    _, samples = hio.read_hrtraj(samples_path)
    dom = report["config"]["domain"]
    lengths = tuple(dom["lengths"])
    if not np.allclose(lengths, cfg.domain.lengths, rtol=1e-12, atol=0):
        raise ValidationError(f"absorb artifact domain {lengths} differs from configured {cfg.domain.lengths}")
    basis = build_basis(DomainSpec(lengths, tuple(dom["grid_points"])), report["config"]["m_max"])
    if samples.shape[2] != basis.m_max:
        raise ValidationError(f"{samples_path}: {samples.shape[2]} modes but report says {basis.m_max}")
    return basis, samples, report


def absorbed_samples(cfg: ExperimentConfig, artifact, out: Path):
    if artifact is not None:
        basis, samples, report = load_absorb_artifact(artifact, cfg)
        return basis, samples, {"source": "artifact", "path": str(artifact), "q_estimate":
                                report["absorption"]["q_estimate"], "n_samples": int(samples.shape[0])}, []
    basis, samples, report, files = run_absorb(cfg, out)
    return basis, samples, {"source": "inline", "q_estimate": report["absorption"]["q_estimate"],
                            "n_samples": int(samples.shape[0])}, files


def measured_c_E(params, basis, samples_basis, samples, n_emb, rng):
    n1, n2 = ensemble_lp_bounds(samples_basis, samples)
    emb = embedding_constants(basis, n_emb, rng)
    return lipschitz_E_to_H(params, n1, n2, emb.delta1, emb.delta2), {
        "n1": n1, "n2": n2, "delta1": emb.delta1, "delta2": emb.delta2, "embedding_samples": emb.samples,
        "embedding_basis_m_max": basis.m_max, "ensemble_size": int(samples.shape[0])}


# ----------------------------------------------------------------------------
# squeeze


def cmd_squeeze(cfg: ExperimentConfig, out: Path):
    sc = cfg.squeeze
    small, samples, provenance, files = absorbed_samples(cfg, sc.absorb_artifact, out)
    params = cfg.params
    lengths = small.domain.lengths
    # delta1, delta2 depend on the basis and the basis on C_E, so estimate twice
    c0, _ = measured_c_E(params, small, small, samples, sc.embedding_samples, rng_for(cfg.seed, "squeeze.emb0"))
    if sc.m is None:
        big, _ = basis_for_selection(lengths, c0, params, extra=sc.extra_modes)
    else:
        size = max(sc.m + sc.extra_modes, small.m_max)
        big = build_basis(DomainSpec.for_modes(lengths, size), size)
    c_E, c_info = measured_c_E(params, big, small, samples, sc.embedding_samples, rng_for(cfg.seed, "squeeze.emb"))
    if sc.m is None:
        try:
            m = select_m(c_E, big, params)
        except ValidationError:
            big, m = basis_for_selection(lengths, c_E, params, extra=sc.extra_modes)
    else:
        m = sc.m
    if big.m_max < small.m_max:
        raise ValidationError("squeeze basis smaller than the absorption basis")
    emb = small.embed(samples, big)
    rng = rng_for(cfg.seed, "squeeze.pairs")
    g0, h0, labels = make_pairs(big, emb, sc.n_pairs, m, rng, sc.perturbation)
    if sc.inject_cone_violation:
        # test hook: a pure mode-(m+1) difference stays outside the cone for small m
        g0 = np.concatenate([g0, emb[:1]])
        h0 = np.concatenate([h0, emb[:1] + sc.perturbation * mode_vector(big, m, 0)[None]])
        labels = labels + ["injected"]
    stepper = replace(cfg.stepper, record_every=sc.record_every)
    rep = squeeze_test(big, g0, h0, m, sc.t_star, params, stepper, c_E, sc.delta_threshold, sc.delta_cap, labels)
    phi_results = []
    if sc.phi_pairs and m < big.m_max:
        pr = rng_for(cfg.seed, "squeeze.phi")
        pg, ph, _ = make_pairs(big, emb, sc.phi_pairs, m, pr, sc.perturbation, kinds=("high",))
        phi_results = phi_monitor(big, pg, ph, m, (0.0, sc.phi_T), params,
                                  StepperConfig(dt=sc.phi_dt, scheme=cfg.stepper.scheme), c_E)
    phi_ok = all(r.nonincreasing for r in phi_results)
    verdict = "pass" if rep.verdict == "pass" and phi_ok else "fail"
    body = rep.to_dict()
    report = _report(
        "squeeze", cfg, body.pop("pairs"), verdict, squeeze=body, lipschitz_constant=c_E, c_E_inputs=c_info,
        ensemble=provenance, basis={"m_max": big.m_max, "grid_points": list(big.domain.grid_points)},
        phi_monitor={"pairs": [r.to_dict() for r in phi_results], "nonincreasing": phi_ok,
                     "dt": sc.phi_dt, "window": [0.0, sc.phi_T]},
    )
    files.append(hio.write_json(out / "squeeze_report.json", report))
    summary = {"m": m, "c_E": c_E, "verdict": verdict, "dichotomy_ok": rep.dichotomy_ok,
               "gronwall_ok": rep.gronwall_ok, "phi_ok": rep.phi_ok and phi_ok}
    return files, summary, EXIT_OK if verdict == "pass" else EXIT_ASSERT


# ----------------------------------------------------------------------------
# lipschitz


def cmd_lipschitz(cfg: ExperimentConfig, out: Path):
    lc = cfg.lipschitz
    basis = _basis(cfg)
    rng = rng_for(cfg.seed, "lipschitz.states")
    files = []
    if lc.absorb_artifact is not None:
        small, samples, _ = load_absorb_artifact(lc.absorb_artifact, cfg)
        if small.m_max > basis.m_max:
            raise ValidationError("absorb artifact has more modes than the configured m_max")
        states = small.embed(samples, basis)
        source = {"source": "artifact", "path": lc.absorb_artifact}
    else:
        states = random_states(basis, max(lc.n_pairs, lc.time_states) * 2, rng, lc.u_sup)
        source = {"source": "random", "u_sup": lc.u_sup}
    idx = rng.choice(states.shape[0], size=lc.n_pairs, replace=states.shape[0] < lc.n_pairs)
    g0 = states[idx]
    h0 = g0.copy()
    half = lc.n_pairs // 2
    h0[:half] = g0[:half] + lc.perturbation * random_states(basis, half, rng, 1.0)
    other = rng.choice(states.shape[0], size=lc.n_pairs - half)
    h0[half:] = states[other]
    same = np.all(h0 == g0, axis=(-2, -1))
    h0[same] += lc.perturbation * mode_vector(basis, 0)
    step = cfg.stepper
    t_grid = np.linspace(0.0, lc.t_max, lc.t_points)
    rec = lc.t_max / (lc.t_points - 1) / step.dt
    stepper = replace(step, record_every=max(1, int(round(rec))))
    lp = lipschitz_probe(basis, g0, h0, cfg.params, t_grid, stepper)
    c_E, c_info = measured_c_E(cfg.params, basis, basis, states, lc.embedding_samples,
                               rng_for(cfg.seed, "lipschitz.emb"))
    tstates = states[rng.choice(states.shape[0], size=lc.time_states, replace=states.shape[0] < lc.time_states)]
    tl = time_lipschitz_probe(basis, tstates, cfg.params, lc.time_t_star, c_E,
                              replace(step, record_every=lc.time_record_every))
    ok = lp.ok and tl.ok
    body = lp.to_dict()
    report = _report("lipschitz", cfg, body.pop("rows"), "pass" if ok else "fail", pair_probe=body,
                     time_lipschitz=tl.to_dict(), c_E_inputs=c_info, ensemble=source,
                     k_at_1=float(K(1.0, cfg.params)))
    files.append(hio.write_json(out / "lipschitz_report.json", report))
    return files, {"verdict": report["verdict"], "max_ratio_t_max": float(lp.max_ratio[-1])}, \
        EXIT_OK if ok else EXIT_ASSERT


# ----------------------------------------------------------------------------
# determine


def cmd_determine(cfg: ExperimentConfig, out: Path):
    dc = cfg.determine
    basis, samples, provenance, files = absorbed_samples(cfg, dc.absorb_artifact, out)
    if dc.m > basis.m_max:
        raise ValidationError(f"determine.m={dc.m} exceeds the absorption basis size {basis.m_max}")
    rng = rng_for(cfg.seed, "determine.pairs")
    g0, h0 = perturbed_pairs(basis, samples, dc.n_pairs, dc.m, rng, dc.perturbation)
    labels = ["perturbed"] * dc.n_pairs
    if dc.n_contrapositive and samples.shape[0] > 1:
        cg, ch = chaotic_pairs(samples, dc.n_contrapositive, rng)
        g0, h0 = np.concatenate([g0, cg]), np.concatenate([h0, ch])
        labels += ["distinct"] * dc.n_contrapositive
    rep = determining_modes_experiment(basis, g0, h0, dc.m, dc.horizon, cfg.params, cfg.stepper, dc.tol_P,
                                       dc.tol_full, dc.final_fraction, labels)
    contra_ok = all(p["contrapositive_ok"] for p in rep.pairs)
    ok = rep.verdict == "pass" and contra_ok
    body = rep.to_dict()
    report = _report("determine", cfg, body.pop("pairs"), "pass" if ok else "fail", determining=body,
                     contrapositive_ok=contra_ok, ensemble=provenance)
    files.append(hio.write_json(out / "determine_report.json", report))
    return files, {"verdict": report["verdict"], "n_premise": rep.n_premise,
                   "counterexamples": rep.counterexamples}, EXIT_OK if ok else EXIT_ASSERT


# ----------------------------------------------------------------------------
# dimension


def cmd_dimension(cfg: ExperimentConfig, out: Path):
    dc = cfg.dimension
    if dc.n_rank is not None:
        n_rank = dc.n_rank
    elif dc.m is not None:
        n_rank = 3 * dc.m
    else:
        raise ValidationError("dimension: give n_rank or m (rank = 3 m)")
    lip = dc.lipschitz if dc.lipschitz is not None else float(K(dc.t_star, cfg.params))
    if not math.isfinite(lip):
        raise ValidationError("dimension: Lipschitz constant overflows; supply dimension.lipschitz")
    scan = theta_scan(n_rank, lip, np.linspace(0.01, 0.99, dc.theta_points))
    at = dimension_bound(DimensionBoundInputs(n_rank, lip, dc.theta)) if dc.theta is not None else None
    rng = rng_for(cfg.seed, "dimension.random")
    below = 0
    for _ in range(dc.random_checks):
        n = int(rng.integers(1, 1000))
        L = float(10 ** rng.uniform(-6, 6))
        th = float(rng.uniform(1e-6, 1 - 1e-6))
        if dimension_bound(DimensionBoundInputs(n, L, th)) < n:
            below += 1
    records = [{"theta": t, "bound": b} for t, b in zip(scan["thetas"], scan["bounds"])]
    ok = below == 0
    report = _report("dimension", cfg, records, "pass" if ok else "fail", n_rank=n_rank, lipschitz=lip,
                     theta=dc.theta, bound=at, theta_min=scan["theta_min"], bound_min=scan["bound_min"],
                     random_checks=dc.random_checks, random_below_N=below)
    files = [hio.write_json(out / "dimension_report.json", report)]
    return files, {"bound": at, "bound_min": scan["bound_min"], "verdict": report["verdict"]}, \
        EXIT_OK if ok else EXIT_ASSERT


HANDLERS = {"simulate": cmd_simulate, "ode": cmd_ode, "absorb": cmd_absorb, "squeeze": cmd_squeeze,
            "lipschitz": cmd_lipschitz, "determine": cmd_determine, "dimension": cmd_dimension}


HELP = {
    "simulate": "integrate one PDE trajectory; writes CSV norms and an HRTRAJ01 dump",
    "ode": "integrate the diffusion-free ODE; writes the series and a burst table",
    "absorb": "probe the absorbing ball with an ensemble; writes samples for later runs",
    "squeeze": "test the squeezing dichotomy and the Phi monitor on post-absorption pairs",
    "lipschitz": "check the Gronwall/K(t) ceilings and the time-Lipschitz bound",
    "determine": "determining-modes experiment on post-absorption pairs",
    "dimension": "evaluate the fractal-dimension bound with a theta scan",
}


def versions() -> dict:
    return {"hrlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run(command: str, cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    files, summary, code = HANDLERS[command](cfg, out)
    manifest = {"command": command, "config": cfg.to_dict(), "config_source": cfg.source, "seed": cfg.seed,
                "versions": versions(), "wall_time_s": time.perf_counter() - start, "exit_code": code,
                "summary": summary, "outputs": {Path(f).name: _sha256(Path(f)) for f in files}}
    hio.write_json(out / f"{command}_manifest.json", manifest)
    print(hio.dumps({"command": command, "exit_code": code, **summary}), end="")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hrlab", description="Diffusive Hindmarsh-Rose spectral experiments")
    parser.add_argument("--version", action="version", version=f"hrlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="experiment JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, output_dir=args.out)
        return run(args.command, cfg)
    except BlowUpError as err:
        print(f"hrlab: numerical blow-up: {err} (last valid time {err.last_time})", file=sys.stderr)
        return EXIT_BLOWUP
    except ValidationError as err:
        print(f"hrlab: validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
