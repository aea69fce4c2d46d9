"""Command-line driver for cr3lab.

    cr3lab structure --model sphere
    cr3lab verify --suite commutation --model left_invariant --a 1.1
    cr3lab spectrum --model perturbed --n 6
    cr3lab pipeline --model perturbed --f re_zw
    cr3lab goldens --out goldens

Every command writes report.json (deterministic) and report.csv into --out;
wall times go to timings.csv so that the JSON is byte-stable.  Exit codes:
0 all gating checks pass, 1 some check fails, 2 configuration or model error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import analysis as A
from . import fields as F
from . import hodge as H
from . import operators as O
from . import spectral as S
from . import structures as St
from .errors import CapExceeded, CR3Error, NotSasakian
from .operators import WeightedTensorCoefficient as W

logger = logging.getLogger("cr3lab")

REPORT_SCHEMA = "cr3lab.report/1"
MAX_N = 12
MAX_EPS = 0.25
DEFAULT_SEED = 20240611
SUITES = ("identities", "commutation", "transforms", "bochner", "convexity")

DEFAULT_TOLS = {
    "structure": 1e-9,
    "identity": 1e-9,
    "commutation": 1e-8,
    "transform": 1e-5,
    "bochner": 1e-4,
    "bochner_step": 1e-5,
    "convexity": 1e-6,
    "paneitz": 1e-8,
    "kernel": 1e-9,
    "angle": 1e-6,
    "spectrum": 1e-6,
    "pipeline": 1e-5,
    "w1_tilde": 1e-4,
    "sasakian": 1e-8,
    "drift": 0.05,
}


class ConfigError(CR3Error):
    """Invalid command-line or JSON configuration."""


@dataclass
class RunConfig:
    model: St.ModelSpec
    n: int = 8
    j: int = F.SERIES_ORDER
    f: str = "zero"
    out: str = "cr3lab-out"
    seed: int = DEFAULT_SEED
    tolerances: dict = dc_field(default_factory=lambda: dict(DEFAULT_TOLS))

    def __post_init__(self):
        if not 1 <= self.n <= MAX_N:
            raise ConfigError(f"N must be in 1..{MAX_N}, got {self.n}")
        if self.model.kind == "perturbed" and abs(self.model.eps) > MAX_EPS:
            raise ConfigError(f"|eps| must be <= {MAX_EPS} (series budget), got {self.model.eps}")
        if self.j < 4:
            raise ConfigError("series order J must be >= 4")

    def tol(self, key):
        return self.tolerances[key]

    def to_dict(self):
        return {"model": self.model.to_dict(), "n": self.n, "j": self.j, "f": self.f, "seed": self.seed,
                "tolerances": dict(sorted(self.tolerances.items()))}


@dataclass
class Check:
    name: str
    anchor: str
    residual: float
    tolerance: float
    gate: bool = True
    wall: float = 0.0

    @property
    def passed(self):
        return bool(np.isfinite(self.residual) and self.residual <= self.tolerance)

    def to_dict(self):
        return {"name": self.name, "anchor": self.anchor, "residual": float(self.residual),
                "tolerance": self.tolerance, "passed": self.passed, "gate": self.gate}


@dataclass
class Report:
    command: str
    config: RunConfig
    rows: list = dc_field(default_factory=list)
    data: dict = dc_field(default_factory=dict)

    def add(self, name, anchor, residual, tolerance, gate=True, wall=0.0):
        self.rows.append(Check(name, anchor, float(residual), float(tolerance), gate, wall))

    @property
    def ok(self):
        return all(r.passed for r in self.rows if r.gate)

    def to_dict(self):
        return {"schema": REPORT_SCHEMA, "command": self.command, "config": self.config.to_dict(),
                "rows": [r.to_dict() for r in self.rows], "data": self.data, "ok": self.ok}


def validate_report(d):
    """Schema check; an unanchored row is an error."""
    if d.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unexpected schema {d.get('schema')!r}")
    for row in d["rows"]:
        for key in ("name", "anchor", "residual", "tolerance", "passed", "gate"):
            if key not in row:
                raise ValueError(f"row {row.get('name')!r} lacks {key!r}")
        if not isinstance(row["anchor"], str) or not row["anchor"].strip():
            raise ValueError(f"row {row['name']!r} has no anchor")
    return True


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def write_report(report, out):
    os.makedirs(out, exist_ok=True)
    d = _jsonable(report.to_dict())
    validate_report(d)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, "report.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "anchor", "residual", "tolerance", "passed", "gate"])
        for r in report.rows:
            w.writerow([r.name, r.anchor, f"{r.residual:.6e}", f"{r.tolerance:.1e}", r.passed, r.gate])
    with open(os.path.join(out, "timings.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "wall_s"])
        for r in report.rows:
            w.writerow([r.name, f"{r.wall:.4f}"])
    return d


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.wall = time.perf_counter() - self.t0


# --------------------------------------------------------------------------
# commands


def _structure(config):
    return St.solve_structure(St.build_model(config.model))


def cmd_structure(config):
    rep = Report("structure", config)
    with _Timer() as t:
        sd = _structure(config)
    tol = config.tol("structure")
    for key, val in sorted(sd.residuals.items()):
        anchor = "structure:admissibility" if key == "admissibility" else f"structure:{key}"
        limit = St.ADMISSIBLE_TOL if key == "admissibility" else tol
        rep.add(key, anchor, val, limit, wall=t.wall)
    if config.model.kind != "perturbed":
        r_mean = F.integrate(sd.R * sd.density).real / sd.volume()
        rep.add("R_constant", "structure:R-constant", F.sup_norm(sd.R - r_mean), 1e-10)
    rep.add("R_bracket_formula", "structure:R-via-brackets", F.sup_norm(St.dR_independent(sd) - sd.R), tol)
    rep.add("omega_plus_iR_theta_derivative", "identity:d(omega+iR theta)", St.check_omega_derivative(sd), tol)
    rep.data = {"structure": sd.to_dict(), "A11_sup": F.sup_norm(sd.A11), "R_sup": F.sup_norm(sd.R),
                "volume": sd.volume().real if isinstance(sd.volume(), complex) else sd.volume()}
    os.makedirs(config.out, exist_ok=True)
    with open(os.path.join(config.out, "structure.json"), "w") as fh:
        fh.write(St.structure_json(sd) + "\n")
    return rep


def suite_identities(config, rep):
    sd = _structure(config)
    tol = config.tol("identity")
    rep.add("R_bracket_formula", "structure:R-via-brackets", F.sup_norm(St.dR_independent(sd) - sd.R), tol)
    rep.add("omega_plus_iR_theta_derivative", "identity:d(omega+iR theta)", St.check_omega_derivative(sd), tol)
    _, _, diff = St.q_curvature(sd, return_both=True)
    rep.add("Q_two_formulas", "identity:Q-curvature-forms", diff, tol)
    f = St.named_field("re_zwbar")
    pf = O.p1(f, sd).value
    rep.add("P0_from_P1", "identity:P0=(P1f)_1bar+conj", F.sup_norm(O.p0(f, sd) - O.p0_from_p1(W(pf, 1), sd)), tol)
    sym = abs(sd.integrate(O.p0(f, sd) * St.named_field("re_z")) - sd.integrate(O.p0(St.named_field("re_z"), sd) * f))
    rep.add("P0_self_adjoint_pair", "paneitz:self-adjoint", sym, tol)
    form = O.paneitz_form(f, f, sd) - sd.integrate(O.p0(f, sd) * f)
    rep.add("P0_by_parts_form", "paneitz:by-parts-form", abs(form), tol)
    for name in ("re_z", "re_zw", "im_zw", "re_z2"):
        rep.add(f"P1_kills_{name}", "paneitz:kernel-contains-CR-pluriharmonic",
                F.sup_norm(O.p1(St.named_field(name), sd).value), tol)


def suite_commutation(config, rep):
    sd = _structure(config)
    tol = config.tol("commutation")
    rng = np.random.default_rng(config.seed)
    labels = ("T-Z1", "T-Z1bar", "Z1-Z1bar")
    worst = [0.0, 0.0, 0.0]
    for _ in range(20):
        x = F.random_real_field(rng, 3)
        for i, r in enumerate(O.check_commutation(W(x, 0), sd)):
            worst[i] = max(worst[i], r)
    for i in range(3):
        rep.add(f"scalar_{labels[i]}", f"commutation:{labels[i]}", worst[i], tol)
    for name, t in (("A11", W(sd.A11, 2)), ("W1", St.w1(sd))):
        res = O.check_commutation(t, sd)
        for i in range(3):
            rep.add(f"{name}_{labels[i]}", f"commutation:{labels[i]}", res[i], tol)
        # conjugate-consistent sign of the weight term, reported without gating
        alt = O.check_commutation(t, sd, second_sign=+1)[1]
        rep.add(f"{name}_{labels[1]}_conjugate_sign", "commutation:T-Z1bar(conjugate-sign)", alt, tol, gate=False)


def _transform_pair(config):
    m = config.model
    base_spec = m.base if m.kind == "perturbed" else m
    base = St.solve_structure(St.build_model(base_spec))
    g = m.g if m.kind == "perturbed" else St.named_field("re_zwbar")
    eps = m.eps
    lam = (g * eps).real
    tilde = St.solve_structure(St.conformal_rescale(base.coframe, log=lam))
    return base, tilde, lam


def suite_transforms(config, rep):
    F.set_workspace(F.Workspace(F.workspace().cap, series_order=config.j))
    base, tilde, lam = _transform_pair(config)
    f = St.named_field("re_zw") + St.named_field("re_z") * 0.3 + St.named_field("zzbar")
    rows = O.check_transformations(base, tilde, lam, f, F.random_points(50, config.seed))
    anchors = {
        "w1": "transform:W1", "p1": "transform:P1", "p0": "transform:P0",
        "q": "transform:Q(3/4)", "w1_expanded": "transform:W1-expanded", "q_coef3": "transform:Q(coefficient-3)",
    }
    tol = config.tol("transform")
    for key, val in rows.items():
        rep.add(key, anchors[key], val, tol, gate=key != "q_coef3")


def _decomposition(sd, n=8):
    sigma = H.construct_sigma(sd)
    return H.kohn_decompose(H.sigma_eta(sigma), sd, n=n)


def suite_bochner(config, rep):
    sd = _structure(config)
    dec = _decomposition(sd)
    f, _ = H.solve_pe_equation(sd, dec, n=4)
    tol, step = config.tol("bochner"), config.tol("bochner_step")
    res_pe = res = A.check_bochner_pe(sd, f, dec)
    for key in ("pe_equation", "p1_pointwise", "torsion_balance", "p0_by_parts", "p1_to_torsion"):
        rep.add(key, f"bochner-pe:{key}", res[key], step)
    rep.add("bochner", "bochner-pe:identity", res["bochner"], tol)
    spec = S.eigensolve(S.assemble(sd, min(config.n, 6), cross_check=False))
    _, u_perp = S.decompose_perp(dec.u, spec, sd)
    res = A.check_bochner_q(sd, dec, u_perp)
    for key in ("bochner_torsion", "w1_pointwise", "t_by_parts", "Qu+P0u", "P0u_vs_P0uperp"):
        rep.add(key, f"bochner-q:{key}", res[key], step)
    rep.add("t_step_signed", "bochner-q:T-integration-step", res["t_step_signed"], step, gate=False)
    rep.add("bochner_q", "bochner-q:identity", res["bochner_q"], tol)
    rep.data["terms_pe"] = res_pe["terms"]
    rep.data["terms_q"] = res["terms"]


def suite_convexity(config, rep):
    pts = A.random_points(100, config.seed)
    rows = A.convexity_table(pts)
    tol = config.tol("convexity")
    rep.add("closed_vs_sampled_max", "convexity:closed-form-max", max(r["abs_diff"] for r in rows), tol)
    disagree = sum(r["convex"] != r["form_verdict"] for r in rows)
    rep.add("pinching_vs_form_verdict", "convexity:pinching-equivalence", float(disagree), 0.0)
    rep.data["convex_count"] = sum(r["convex"] for r in rows)
    rep.data["degenerate_count"] = sum(abs(2 * p.C0 * p.A11.real + p.C1 * p.A11_1bar.real) == 0 for p in pts)
    sd = _structure(config)
    convex, margin = A.structure_is_convex(sd, F.sample_points(), 0.5, 0.5)
    rep.data["model_half_half_convex"] = bool(convex)
    rep.data["model_pinching_margin"] = margin
    os.makedirs(config.out, exist_ok=True)
    A.write_csv(rows, os.path.join(config.out, "convexity.csv"))


_SUITE_FUNCS = {"identities": suite_identities, "commutation": suite_commutation, "transforms": suite_transforms,
                "bochner": suite_bochner, "convexity": suite_convexity}


def cmd_verify(config, suite):
    rep = Report(f"verify:{suite}", config)
    with _Timer() as t:
        _SUITE_FUNCS[suite](config, rep)
    for r in rep.rows:
        r.wall = t.wall
    return rep


def cmd_spectrum(config, table=False):
    rep = Report("spectrum", config)
    sd = _structure(config)
    n = config.n
    with _Timer() as t:
        m = S.assemble(sd, n)
        spec = S.eigensolve(m)
    rep.add("symmetry", "paneitz:self-adjoint", m.asymmetry, config.tol("paneitz"), wall=t.wall)
    rep.add("by_parts_form", "paneitz:by-parts-form", m.form_residual, config.tol("paneitz"))
    crph = S.crph_coordinates(m)
    scale = max(1.0, float(np.abs(m.K).max()))
    rep.add("P0_kills_CR_pluriharmonic", "paneitz:kernel-contains-CR-pluriharmonic",
            float(np.abs(m.K @ crph).max()) / scale, config.tol("kernel"))
    rep.add("nonnegative_spectrum", "spectrum:essential-positivity",
            max(0.0, -float(spec.eigenvalues[0])), config.tol("spectrum"))
    rep.add("kernel_dimension", "spectrum:kernel=CR-pluriharmonic",
            abs(spec.kernel_dim - S.crph_dimension(n)), 0.0)
    ang = S.principal_angles(spec) if spec.kernel_dim == crph.shape[1] else np.array([np.pi / 2])
    rep.add("principal_angles", "spectrum:kernel=CR-pluriharmonic", float(ang.max()), config.tol("angle"))
    dec = _decomposition(sd)
    Q = St.q_curvature(sd)
    bound = S.check_perp_bound(sd, dec.u, Q, spec)
    spec.crph_dim = S.crph_dimension(n)
    spec.verdicts = bound
    if bound["hypothesis"]:
        rep.add("perp_bound_margin", "spectrum:Lambda^2|u_perp|^2<=|Q_perp|^2", max(0.0, -bound["margin"]), 0.0)
    rep.data = {"spectrum": spec.to_dict()}
    if table:
        rows = S.lambda_table(sd, (4, 6, 8))
        rep.data["lambda_table"] = rows
        lam6 = next(r["Lambda"] for r in rows if r["n"] == 6)
        lam8 = next(r["Lambda"] for r in rows if r["n"] == 8)
        rep.add("Lambda_drift_6_8", "spectrum:Lambda-convergence", abs(lam8 - lam6) / abs(lam8), config.tol("drift"))
    os.makedirs(config.out, exist_ok=True)
    with open(os.path.join(config.out, "spectrum.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue", "in_kernel"])
        for i, mu in enumerate(spec.eigenvalues):
            w.writerow([i, f"{mu:.12e}", bool(abs(mu) <= spec.threshold)])
    return rep


def cmd_pipeline(config):
    rep = Report("pipeline", config)
    sd = _structure(config)
    f = St.named_field(config.f)
    tol = config.tol("pipeline")
    stage = "sigma"
    try:
        with _Timer() as t:
            out, sigma, dec, tilde = H.run_pipeline(sd, f, n=8)
        stage = "report"
    except CR3Error as exc:
        raise type(exc)(f"pipeline stage {stage}: {exc}") from exc
    for key, val in out["sigma"].items():
        rep.add(f"sigma_{key}", f"pipeline:sigma:{key}", val, tol, wall=t.wall)
    rep.add("kohn_residual", "pipeline:kohn-decomposition", out["kohn_residual"], tol)
    rep.add("harmonic_residual", "pipeline:gamma-harmonic", out["harmonic_residual"], tol)
    rep.add("w1_identity", "pipeline:W1=2P1u+torsion", out["w1_identity"], tol)
    rep.add("pe_equation", "pipeline:P1f=torsion-term", out["pe_equation"], tol)
    rep.add("w1_tilde", "pipeline:pseudo-Einstein-candidate", out["w1_tilde"], config.tol("w1_tilde"))
    try:
        tf = H.check_torsion_free_gamma(sd, dec)
        rep.add("gamma_1_0", "pipeline:sasakian-gamma_1,0=0", tf["gamma_1_0"], config.tol("sasakian"))
    except NotSasakian:
        pass
    rep.data = {"gamma_norm": out["gamma_norm"], "orthogonality": out["orthogonality"], "f": config.f}
    return rep


# --------------------------------------------------------------------------
# goldens


def golden_rows():
    """(model, N, quantity, value, provenance) rows of the golden manifest."""
    rows = []
    sph = St.solve_structure(St.reference_coframe())
    rows.append(("sphere", 8, "R", F.sup_norm(sph.R), "derived: structure solve"))
    rows.append(("sphere", 8, "volume", float(np.real(sph.volume())), "derived: monomial integrals"))
    for n in (2, 4):
        rep = S.eigensolve(S.assemble(sph, n, cross_check=False))
        rows.append(("sphere", n, "kernel_dim", rep.kernel_dim, "derived: CR-pluriharmonic count"))
        rows.append(("sphere", n, "Lambda", rep.Lambda, "derived: Galerkin spectrum"))
    li = St.solve_structure(St.left_invariant_coframe(1.1))
    rows.append(("left_invariant(1.1)", 8, "R", float(np.real(li.R.coefficient(0))), "derived: a^2 + a^-2"))
    rows.append(("left_invariant(1.1)", 8, "|A11|", F.sup_norm(li.A11), "derived: a^2 - a^-2"))
    pt = St.solve_structure(St.build_model(St.ModelSpec("perturbed")))
    rows.append(("perturbed(0.1,re_zwbar)", 8, "sup|W1|", F.sup_norm(St.w1(pt).value), "derived: structure solve"))
    rows.append(("perturbed(0.1,re_zwbar)", 8, "sup|Q|", F.sup_norm(St.q_curvature(pt)), "derived: structure solve"))
    rep = S.eigensolve(S.assemble(pt, 6, cross_check=False))
    rows.append(("perturbed(0.1,re_zwbar)", 6, "Lambda", rep.Lambda, "derived: Galerkin spectrum"))
    return rows


def write_goldens(out, version="v1"):
    path = os.path.join(out, version)
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "MANIFEST.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "N", "quantity", "value", "provenance"])
        for model, n, q, v, prov in golden_rows():
            w.writerow([model, n, q, f"{float(v):.12e}", prov])
    return os.path.join(path, "MANIFEST.csv")


def read_goldens(path):
    with open(path, newline="") as fh:
        return [{**r, "N": int(r["N"]), "value": float(r["value"])} for r in csv.DictReader(fh)]


# --------------------------------------------------------------------------
# argument handling


def _model_from_args(args, cfg):
    if "model" in cfg and isinstance(cfg["model"], dict):
        return St.ModelSpec.from_dict(cfg["model"])
    kind = args.model or cfg.get("model", "sphere")
    if kind == "perturbed":
        return St.ModelSpec("perturbed", eps=args.eps if args.eps is not None else cfg.get("eps", 0.1),
                            g_name=args.g or cfg.get("g", "re_zwbar"))
    a = args.a if args.a is not None else cfg.get("a", 1.0)
    return St.ModelSpec(kind, a=float(a))


def config_from_args(args, default_n=8):
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    try:
        model = _model_from_args(args, cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    tols = dict(DEFAULT_TOLS)
    tols.update(cfg.get("tolerances", {}))
    n = args.n if args.n is not None else cfg.get("n", default_n)
    fname = args.f or cfg.get("f", "zero")
    try:
        St.named_field(fname)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(model=model, n=int(n), j=int(args.j or cfg.get("j", F.SERIES_ORDER)), f=fname,
                     out=args.out or cfg.get("out", "cr3lab-out"),
                     seed=int(args.seed if args.seed is not None else cfg.get("seed", DEFAULT_SEED)),
                     tolerances=tols)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=("sphere", "left_invariant", "perturbed"))
    common.add_argument("--a", type=float, help="left-invariant deformation parameter")
    common.add_argument("--eps", type=float, help="perturbation amplitude")
    common.add_argument("--g", help="named perturbation exponent, e.g. re_zwbar")
    common.add_argument("--f", help="named CR-pluriharmonic freedom for the pipeline")
    common.add_argument("--n", type=int, help="truncation degree N")
    common.add_argument("--j", type=int, help="exponential series order J")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cr3lab", description="Pseudohermitian CR 3-manifold lab on S^3")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("structure", parents=[common], help="solve the structure equations")
    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("--suite", choices=SUITES, required=True)
    s = sub.add_parser("spectrum", parents=[common], help="Galerkin spectrum of P0")
    s.add_argument("--table", action="store_true", help="also tabulate Lambda at N = 4, 6, 8")
    sub.add_parser("pipeline", parents=[common], help="run the pseudo-Einstein construction")
    sub.add_parser("goldens", parents=[common], help="regenerate the golden MANIFEST")
    return p


def _dispatch(args, config):
    if args.command == "structure":
        return cmd_structure(config)
    if args.command == "verify":
        return cmd_verify(config, args.suite)
    if args.command == "spectrum":
        return cmd_spectrum(config, table=args.table)
    return cmd_pipeline(config)


def run(args):
    """Run one command with CapExceeded retries at N + 2 up to N = 12; returns (report, exit code)."""
    config = config_from_args(args, default_n=6 if args.command == "spectrum" else 8)
    while True:
        try:
            rep = _dispatch(args, config)
            break
        except CapExceeded as exc:
            if config.n + 2 > MAX_N:
                raise
            logger.warning("%s; retrying at N = %d", exc, config.n + 2)
            config = RunConfig(config.model, config.n + 2, config.j, config.f, config.out, config.seed,
                               config.tolerances)
    write_report(rep, config.out)
    return rep, 0 if rep.ok else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    saved = F.workspace()
    try:
        if args.command == "goldens":
            path = write_goldens(args.out or "goldens")
            print(path)
            return 0
        rep, code = run(args)
    except (ConfigError, CR3Error, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        F.set_workspace(saved)
    for r in rep.rows:
        mark = "PASS" if r.passed else ("FAIL" if r.gate else "info")
        print(f"{mark:4s}  {r.name:40s} {r.residual:.3e} <= {r.tolerance:.1e}  [{r.anchor}]")
    print(f"{rep.command}: {'ok' if rep.ok else 'FAILED'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
