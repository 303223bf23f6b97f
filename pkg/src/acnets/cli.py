"""Batch driver: scenario configs in TOML, pipeline orchestration, manifests.

Subcommands:
  run <config.toml>        full pipeline or geometry scenario per the config
  compare <report.csv...>  cross-epsilon table for runs of one scenario family
  sigma <config.toml>      surface-tension matrix only
  optimize <config.toml>   network geometry only (no PDE)

The output root is the config's out_dir, overridden by --out or the
ACNETS_OUT environment variable.  Runs are deterministic given the seeds.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import interface as interface_mod
from . import network as network_mod
from . import optimizer as optimizer_mod
from . import scenario_nets as sn
from . import testmap as testmap_mod
from . import verify as verify_mod
from .connections import assemble_sigma, profile_to_csv
from .errors import AcnetsError, AssertionFailure, ConfigParse, IncompatibleReports
from .field_solver import (MinimizeOptions, build_boundary_datum,
                           build_disk_grid, minimize, minimize_cascade,
                           profile_init, save_energy_log, save_field_binary)
from .network import DiskDomain, Network, energy_F, save_json, validate
from .optimizer import OptimizerOptions, Topology, local_minimize, run_scenario
from .potential import Potential, make_product_potential


# -- config --------------------------------------------------------------------


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigParse(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParse(f"invalid TOML in {path}: {exc}") from exc
    validate_config(cfg)
    return cfg


DEFAULTS = {
    "domain.radius": 1.0,
    "domain.hgrid_over_eps": 0.5,
    "run.alpha": 1.0 / 6.0,
    "run.transition_rule": "eps^1/3",
    "run.tol_factor": 2e-4,
    "run.flow_cap": 1500,
    "run.newton_max": 200,
    "run.cascade_levels": 0,
    "run.seed": 0,
    "run.sigma_source": "computed",
    "run.kappa0": None,
}


def _get(cfg: dict, dotted: str, default=None):
    cur = cfg
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return DEFAULTS.get(dotted, default)
        cur = cur[part]
    return cur


def validate_config(cfg: dict) -> None:
    if "scenario" not in cfg or "name" not in cfg["scenario"]:
        raise ConfigParse("config needs [scenario] with a name")
    name = cfg["scenario"]["name"]
    alpha = _get(cfg, "run.alpha")
    if not 0.0 < float(alpha) < 0.5:
        raise ConfigParse(f"run.alpha = {alpha} outside (0, 1/2)")
    if name == "pipeline":
        if "potential" not in cfg:
            raise ConfigParse("pipeline config needs a [potential] section")
        wells = cfg["potential"].get("wells")
        if not wells or len(wells) < 2:
            raise ConfigParse("potential.wells needs at least two wells")
        labels = _get(cfg, "boundary.labels", [])
        angles = _get(cfg, "boundary.vertex_angles_deg", [])
        if len(labels) != len(angles) or len(labels) < 2:
            raise ConfigParse("boundary needs matching vertex_angles_deg and labels")
        if any(not 0 <= int(l) < len(wells) for l in labels):
            raise ConfigParse("boundary labels must index the wells")
        eps_list = _get(cfg, "run.eps_list", [])
        if not eps_list or any(e <= 0 for e in eps_list):
            raise ConfigParse("run.eps_list must hold positive values")
    elif name not in ("polygon_equal_sigma", "n4_interior_phase", "n7_z3"):
        raise ConfigParse(f"unknown scenario name {name!r}")


def _transition_width(rule, eps: float) -> float:
    if isinstance(rule, (int, float)):
        return float(rule)
    text = str(rule).replace(" ", "")
    if text.startswith("eps^"):
        num, _, den = text[4:].partition("/")
        expo = float(num) / float(den) if den else float(num)
        return eps ** expo
    raise ConfigParse(f"cannot parse transition rule {rule!r}")


def build_potential(cfg: dict) -> Potential:
    spec = cfg["potential"]
    kind = spec.get("type", "product")
    if kind != "product":
        raise ConfigParse(f"unknown potential type {kind!r}")
    return make_product_potential(spec["wells"], scale=float(spec.get("scale", 1.0)))


# -- manifest ------------------------------------------------------------------


@dataclass
class Manifest:
    scenario: str
    config: dict
    defaults: dict = field(default_factory=dict)
    files: List[str] = field(default_factory=list)
    checks: List[dict] = field(default_factory=list)

    def add_file(self, path: Path) -> Path:
        self.files.append(str(path.name))
        return path

    def add_check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append({"name": name, "passed": bool(passed),
                            "detail": detail})

    @property
    def ok(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def write(self, out_dir: Path) -> None:
        self.files.append("manifest.json")
        payload = {"scenario": self.scenario, "config": self.config,
                   "defaults": self.defaults,
                   "files": sorted(set(self.files)), "checks": self.checks}
        with open(out_dir / "manifest.json", "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)


# -- pipeline ------------------------------------------------------------------


@dataclass
class EpsilonRun:
    eps: float
    hgrid: float
    J: float
    J_test: float
    excess: float
    interface_measure: float
    interface_components: int
    phases_connected: bool
    decay_k_eps: Dict[int, float]
    sandwich_ok: bool


def run_pipeline(cfg: dict, out_dir: Path, manifest: Manifest):
    p = build_potential(cfg)
    R = float(_get(cfg, "domain.radius"))
    dom = DiskDomain(R)
    angles = np.deg2rad(np.asarray(_get(cfg, "boundary.vertex_angles_deg"),
                                   dtype=float))
    labels = [int(v) for v in _get(cfg, "boundary.labels")]
    eps_list = sorted((float(e) for e in _get(cfg, "run.eps_list")), reverse=True)
    alpha = float(_get(cfg, "run.alpha"))
    ratio = float(_get(cfg, "domain.hgrid_over_eps"))
    tol_factor = float(_get(cfg, "run.tol_factor"))
    rule = _get(cfg, "run.transition_rule")

    if _get(cfg, "run.sigma_source") == "manual":
        raise ConfigParse("a manual sigma table has no connection profiles; "
                          "the PDE pipeline needs sigma_source = computed")
    sigma = assemble_sigma(p)
    sigma.to_csv(manifest.add_file(out_dir / "sigma.csv"))
    for (i, j), prof in sorted(sigma.profiles.items()):
        if i < j:
            profile_to_csv(prof, manifest.add_file(
                out_dir / f"profile_{i}{j}.csv"))

    # free optimal network for the boundary vertices
    N = len(angles)
    net0, _ = sn.steiner_tree_net(N, R)
    for k, ang in enumerate(sorted(angles)):
        net0.nodes[k].position = dom.boundary_point(ang)
    topo = Topology.from_network(net0, dom)
    res = local_minimize(topo, sigma, dom,
                         np.array([nd.position for nd in net0.nodes]),
                         OptimizerOptions())
    net = res.net
    F_free = res.F_value
    diag = validate(net, dom)
    manifest.add_check("free network valid", diag.ok, "; ".join(diag.failures))
    save_json(net, manifest.add_file(out_dir / "network.json"))
    network_mod.render_svg(net, dom, manifest.add_file(out_dir / "network.svg"),
                           sigma=sigma)

    runs: List[EpsilonRun] = []
    fields = []
    C1 = None
    for eps in eps_list:
        grid = build_disk_grid(R, ratio * eps)
        width = _transition_width(rule, eps)
        datum = build_boundary_datum(grid, angles, labels, width,
                                     sigma.profiles, p.wells, eps)
        init = profile_init(grid, net, dom, sigma.profiles, p, eps)
        opts = MinimizeOptions(tol=tol_factor / eps,
                               flow_cap=int(_get(cfg, "run.flow_cap")),
                               newton_max=int(_get(cfg, "run.newton_max")),
                               log_energy=True)
        levels = int(_get(cfg, "run.cascade_levels"))
        if levels > 0:
            fld = minimize_cascade(grid, datum, p, eps, opts, init=init,
                                   levels=levels)
        else:
            fld = minimize(grid, datum, p, eps, opts, init=init)
        tag = f"{eps:g}".replace(".", "p")
        save_field_binary(manifest.add_file(out_dir / f"field_eps{tag}.bin"),
                          fld, grid)
        save_energy_log(manifest.add_file(out_dir / f"energy_eps{tag}.csv"), fld)

        iset = interface_mod.extract(fld, grid, p.wells, eps ** alpha)
        interface_mod.render_svg(
            manifest.add_file(out_dir / f"interface_eps{tag}.svg"), iset, grid)
        conn = interface_mod.connectivity_report(iset, fld, grid, p.wells, datum)

        tm_fld, tm_region, tm_params = testmap_mod.build_test_map(
            net, sigma, grid, p, dom, eps, datum=datum)
        J_test = tm_fld.energy

        dec = verify_mod.decay_fit(fld, grid, net, p.wells, eps)
        verify_mod.decay_scatter_csv(
            manifest.add_file(out_dir / f"decay_eps{tag}.csv"),
            fld, grid, net, p.wells)
        fib = verify_mod.fiber_lower_bound(fld, grid, net, sigma, p, eps,
                                           J_field=fld.energy)
        verify_mod.fibers_to_csv(
            manifest.add_file(out_dir / f"fibers_eps{tag}.csv"), fib)

        if C1 is None:
            C1 = max(2.0 * abs(F_free - fld.energy) / eps ** (1.0 / 3.0),
                     0.05 * F_free)
        try:
            sw = verify_mod.sandwich_report(
                fld.energy, F_free, F_free, eps, C1=C1,
                solver_tol=tol_factor / eps * eps,  # energy-scale allowance
                test_energy=J_test)
            sandwich_ok = sw.ok
        except AcnetsError:
            sandwich_ok = False
        manifest.add_check(f"sandwich eps={eps:g}", sandwich_ok,
                           f"J={fld.energy:.6f} J_test={J_test:.6f} F={F_free:.6f}")
        manifest.add_check(f"interface connected eps={eps:g}",
                           conn.interface_components == 1 and conn.all_connected,
                           f"components={conn.interface_components}")

        runs.append(EpsilonRun(
            eps=eps, hgrid=grid.hgrid, J=fld.energy, J_test=J_test,
            excess=J_test - F_free, interface_measure=iset.measure,
            interface_components=conn.interface_components,
            phases_connected=all(conn.phases_connected.values()),
            decay_k_eps={w: ph.k_eps for w, ph in dec.phases.items()},
            sandwich_ok=sandwich_ok))
        fields.append((eps, fld, grid))

    if len(fields) >= 3:
        fit = interface_mod.measure_scaling(fields, p.wells, alpha)
        manifest.add_check("interface scaling exponent",
                           0.3 <= fit.exponent <= 1.2,
                           f"exponent={fit.exponent:.3f}")

    rep_path = out_dir / "report.csv"
    with open(rep_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scenario", "eps", "hgrid", "J", "J_test", "F_free",
                     "excess", "interface_measure", "interface_components",
                     "phases_connected", "sandwich_ok", "decay_k_eps"])
        for r in runs:
            wr.writerow(["pipeline", repr(r.eps), repr(r.hgrid), repr(r.J),
                         repr(r.J_test), repr(F_free), repr(r.excess),
                         repr(r.interface_measure), r.interface_components,
                         int(r.phases_connected), int(r.sandwich_ok),
                         ";".join(f"{w}:{v:.6f}" for w, v in
                                  sorted(r.decay_k_eps.items()))])
    manifest.add_file(rep_path)
    return runs


def run_geometry_scenario(cfg: dict, out_dir: Path, manifest: Manifest):
    name = cfg["scenario"]["name"]
    params = dict(cfg["scenario"].get("params", {}))
    report = run_scenario(name, params, check=False)
    for claim, passed, detail in report.checks:
        manifest.add_check(claim, passed, detail)
    dom = DiskDomain(float(params.get("R", 1.0)))
    for label, net in report.networks.items():
        safe = label.replace(" ", "_").replace("^", "")
        save_json(net, manifest.add_file(out_dir / f"net_{safe}.json"))
        network_mod.render_svg(net, dom,
                               manifest.add_file(out_dir / f"net_{safe}.svg"))
    rep_path = out_dir / "report.csv"
    with open(rep_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scenario", "candidate", "F", "c0", "flats"])
        for row in report.rows:
            wr.writerow([name, row["candidate"], repr(row["F"]),
                         "" if row.get("c0") is None else repr(row["c0"]),
                         "" if row.get("flats") is None else row["flats"]])
    manifest.add_file(rep_path)
    if not report.ok:
        raise AssertionFailure("; ".join(
            f"{c}: {d}" for c, ok, d in report.checks if not ok))
    return report


# -- commands --------------------------------------------------------------------


def _out_dir(cfg: dict, override: Optional[str]) -> Path:
    root = override or os.environ.get("ACNETS_OUT") \
        or _get(cfg, "run.out_dir", "out")
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigParse as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = _out_dir(cfg, args.out)
    name = cfg["scenario"]["name"]
    manifest = Manifest(scenario=name, config=cfg,
                        defaults={k: v for k, v in DEFAULTS.items()})
    status = 0
    try:
        if name == "pipeline":
            run_pipeline(cfg, out_dir, manifest)
        else:
            run_geometry_scenario(cfg, out_dir, manifest)
    except AcnetsError as exc:
        manifest.add_check("run completed", False, str(exc))
        status = 1
    manifest.write(out_dir)
    if not manifest.ok:
        status = max(status, 1)
    for c in manifest.checks:
        print(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['name']}"
              + (f" ({c['detail']})" if c["detail"] else ""))
    print(f"artifacts in {out_dir}")
    return status


def cmd_compare(args) -> int:
    rows_by_file = []
    scenarios = set()
    for path in args.reports:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise IncompatibleReports(f"{path} is empty")
        scenarios.update(r["scenario"] for r in rows)
        rows_by_file.append((path, rows))
    if len(args.reports) < 2:
        raise IncompatibleReports("need at least two reports to compare")
    if len(scenarios) != 1:
        raise IncompatibleReports(f"mixed scenario families: {sorted(scenarios)}")
    all_rows = [r for _, rows in rows_by_file for r in rows]
    if "eps" in all_rows[0]:
        all_rows.sort(key=lambda r: -float(r["eps"]))
        cols = ["eps", "J", "J_test", "excess", "interface_measure",
                "interface_components", "sandwich_ok"]
    else:
        cols = [c for c in all_rows[0].keys() if c != "scenario"]
    print("  ".join(f"{c:>20}" for c in cols))
    for r in all_rows:
        print("  ".join(f"{str(r.get(c, '')):>20}" for c in cols))
    if args.out_csv:
        with open(args.out_csv, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            for r in all_rows:
                wr.writerow([r.get(c, "") for c in cols])
    return 0


def cmd_sigma(args) -> int:
    try:
        with open(args.config, "rb") as fh:
            cfg = tomllib.load(fh)
    except FileNotFoundError:
        print(f"config error: {args.config} not found", file=sys.stderr)
        return 2
    except tomllib.TOMLDecodeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if "potential" not in cfg:
        print("config error: needs a [potential] section", file=sys.stderr)
        return 2
    p = build_potential(cfg)
    sigma = assemble_sigma(p)
    out = Path(args.out or os.environ.get("ACNETS_OUT") or ".")
    out.mkdir(parents=True, exist_ok=True)
    sigma.to_csv(out / "sigma.csv")
    print(np.array2string(sigma.sigma, precision=8))
    print(f"wrote {out / 'sigma.csv'}")
    return 0


def cmd_optimize(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigParse as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    name = cfg["scenario"]["name"]
    if name == "pipeline":
        print("config error: optimize expects a geometry scenario", file=sys.stderr)
        return 2
    out_dir = _out_dir(cfg, args.out)
    manifest = Manifest(scenario=name, config=cfg)
    status = 0
    try:
        run_geometry_scenario(cfg, out_dir, manifest)
    except AcnetsError as exc:
        manifest.add_check("run completed", False, str(exc))
        status = 1
    manifest.write(out_dir)
    for c in manifest.checks:
        print(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['name']}")
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="acnets",
        description="Allen-Cahn energy minimization and separating-network lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="compare reports of one family")
    p_cmp.add_argument("reports", nargs="+")
    p_cmp.add_argument("--out-csv", default=None)
    p_cmp.set_defaults(func=cmd_compare)

    p_sig = sub.add_parser("sigma", help="surface-tension matrix only")
    p_sig.add_argument("config")
    p_sig.add_argument("--out", default=None)
    p_sig.set_defaults(func=cmd_sigma)

    p_opt = sub.add_parser("optimize", help="network geometry only")
    p_opt.add_argument("config")
    p_opt.add_argument("--out", default=None)
    p_opt.set_defaults(func=cmd_optimize)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IncompatibleReports as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AcnetsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
