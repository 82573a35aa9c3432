"""Run orchestration: parameters, mesh, seed, solver, post-processing, outputs."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .adapt import adapt_mesh
from .config import RunConfig
from .energy import EnergyModel
from .errors import ConfigError
from .field import ComplexField, l2_norm, normalize, read_field, write_field
from .kktmin import kkt_minimize
from .mesh import make_ellipse_mesh, make_radial_mesh, read_mesh, transfer_field, write_mesh
from .params import ModelParams
from .post import SolverTrace, detect_vortices, write_echo, write_trace, write_vtk
from .seeding import VortexArraySpec, healing_length, imprint_array, radial_field, radial_ground_state
from .sobolev import DescentOptions, DescentState, Ladder, descend
from .tfinit import domain_radii, profile_for, tf_field

log = logging.getLogger(__name__)

ECHO_SCHEMA = "gpvortex-echo/1"
RADIAL_ELEMENTS = 1000


@dataclass
class RunResult:
    u: ComplexField
    energy: float
    converged: bool
    trace: SolverTrace
    vortices: object
    output_dir: Path | None
    files: dict = field(default_factory=dict)
    wall_time: float = 0.0
    initial_mesh: object = None
    adaptations: int = 0


def case_prefix(cfg: RunConfig, p: ModelParams) -> str:
    """``<scase>_Om<ratio>_Cg<C_g>``."""
    return f"{cfg['scase']}_Om{p.rotation_ratio:g}_Cg{p.c_g:g}"


def output_dir(cfg: RunConfig, root=".") -> Path:
    """``<root>/Output/<dircase>_<potential>_<method>``."""
    return Path(root) / "Output" / f"{cfg['dircase']}_{cfg.potential_name}_{cfg.method}"


def core_radius(p: ModelParams, profile, mesh) -> float:
    """Healing length at the peak Thomas-Fermi density on ``mesh``."""
    peak = float(profile.density(mesh.points[:, 0], mesh.points[:, 1]).max())
    return healing_length(p, peak)


def initial_mesh(cfg: RunConfig, p: ModelParams):
    prof = profile_for(p)
    r_x, r_y = domain_radii(prof, cfg["aRdom"])
    return prof, make_ellipse_mesh(r_x, r_y, cfg["nbseg"])


def ground_state_seed(cfg: RunConfig, p: ModelParams, prof, mesh) -> ComplexField:
    """Field selected by ``@init`` before any vortex is imprinted."""
    if cfg.init == "TF":
        return tf_field(prof, p, mesh)
    if cfg.init == "Ipoptaxi":
        r_out = float(np.hypot(*mesh.points.T).max())
        rad = radial_ground_state(p, make_radial_mesh(r_out, RADIAL_ELEMENTS), winding=cfg["mod"])
        return radial_field(rad, mesh)
    # Ipoptnorot: ground state of the non-rotating problem on the same mesh
    p0 = p.with_rotation(0.0)
    res = kkt_minimize(tf_field(prof, p, mesh), p0, inner_max=cfg["IpoptMaxIter"], tol=cfg["EPS0"], adapt=False)
    return res.u


def load_restart(mesh_path, sol_path, keepmesh: bool, target_mesh=None):
    """Read a saved mesh and solution.

    With ``keepmesh`` the solve continues on the loaded mesh; otherwise the
    field is interpolated onto ``target_mesh``, zeroed on its boundary and
    renormalized.
    """
    mesh = read_mesh(mesh_path)
    u = read_field(sol_path, mesh)
    if keepmesh:
        return mesh, u
    if target_mesh is None:
        raise ConfigError("restart without @keepmesh needs a target mesh")
    v = transfer_field(mesh, u, target_mesh)
    v.values[target_mesh.boundary] = 0.0
    return target_mesh, normalize(v)


def build_seed(cfg: RunConfig, p: ModelParams, base=None):
    """Mesh, seed field, Thomas-Fermi profile and vortex core radius."""
    prof, mesh = initial_mesh(cfg, p)
    eps_v = core_radius(p, prof, mesh)
    if cfg["ifILrst"]:
        base = Path(base or ".") / cfg["dirload"]
        mesh, u = load_restart(base / cfg["dmesh"], base / cfg["dsol"], cfg["keepmesh"], target_mesh=mesh)
        return mesh, u, prof, eps_v
    u = ground_state_seed(cfg, p, prof, mesh)
    if cfg["narray"] > 0:
        spec = VortexArraySpec(cfg["narray"], cfg["Nv"], cfg["Rarr"], cfg["dRarr"], cfg["Tharr"], cfg["dTharr"])
        u = imprint_array(u, spec, eps_v)
    if cfg["ifIadapt"]:
        mesh, u = adapt_mesh(u.mesh, u, cfg["erradaptI"], h_min=cfg["hminad"], h_max=cfg["hmaxad"])
    return u.mesh, u, prof, eps_v


def _trace_row(trace, model, u, e_prev, event):
    e = model.total(u)
    de = 0.0 if e_prev is None or event == "adapt" else (e - e_prev) / e if e != 0 else e - e_prev
    trace.add(iter=trace.next_iter, energy=e, dE=de, Lz=model.angular_momentum(u), norm=l2_norm(u),
              nv=u.mesh.n_vertices, event=event)
    return e


class _Snapshots:
    """Periodic VTK and restart writes during a solve."""

    def __init__(self, cfg, out, prefix):
        self.cfg, self.out, self.prefix = cfg, out, prefix
        self.files = []

    def __call__(self, u, k):
        if self.out is None:
            return
        if self.cfg["withplot"] and k % self.cfg["ITERPLOT"] == 0:
            path = self.out / f"{self.prefix}_it{k:06d}.vtk"
            write_vtk(u, path)
            self.files.append(path.name)
        if self.cfg["savesol"] and k % self.cfg["ITERSAVE"] == 0:
            write_mesh(self.out / f"{self.prefix}.mesh", u.mesh)
            write_field(self.out / f"{self.prefix}.rst", u)


def solve_sobolev(cfg: RunConfig, p: ModelParams, u: ComplexField, snap=None):
    ladder = Ladder(eps1=cfg["EPSAD1"], eps_c=cfg["EPSADMIN"], n_ad=cfg["IPASSAL"], step=cfg["EPSADSTEP"])
    opts = DescentOptions(
        eps_c=cfg["EPS0"], max_iter=cfg["GradSMaxIter"], iter_norm=cfg["ITERNORM"], adapt=cfg["ifRadapt"],
        err_adapt=cfg.erradapt, h_min=cfg["hminad"], h_max=cfg["hmaxad"], ladder=ladder,
        iter_adapt=cfg["ITERADAPT"],
    )
    cb = None if snap is None else (lambda s: snap(s.u, s.iteration))
    st = descend(DescentState(u), p, opts, on_iter=cb)
    return st.u, st.energies[-1], st.converged, st.trace, st.adaptations


def solve_kkt(cfg: RunConfig, p: ModelParams, u: ComplexField, snap=None):
    trace = SolverTrace()
    last = {"e": None, "k": 0}

    def on_iter(state, problem):
        v = problem.to_field(state.x)
        last["e"] = _trace_row(trace, problem.model, v, last["e"], "step")
        last["k"] += 1
        if snap is not None:
            snap(v, last["k"])

    def on_adapt(v, eps):
        last["e"] = _trace_row(trace, EnergyModel(v.mesh, p), v, None, "adapt")

    last["e"] = _trace_row(trace, EnergyModel(u.mesh, p), normalize(u), None, "step")
    res = kkt_minimize(
        u, p, inner_max=cfg["IpoptMaxIter"], n_adapt=cfg["nbadapt"], eps0=cfg["maerr1"], eps_last=cfg.erradapt,
        tol=cfg["EPS0"], repeat=cfg["niadapt"], adapt=cfg["ifRadapt"], h_min=cfg["hminad"], h_max=cfg["hmaxad"],
        on_iter=on_iter, on_adapt=on_adapt,
    )
    energy = EnergyModel(res.u.mesh, p).total(res.u)
    return res.u, energy, res.converged, trace, len(res.meshes) - 1


def run(cfg: RunConfig, root=".", write: bool = True) -> RunResult:
    """Execute one configured run and write its artifacts under ``root``."""
    t0 = time.perf_counter()
    for note in cfg.notices:
        log.warning(note)
    p = cfg.model_params()
    mesh, u, prof, eps_v = build_seed(cfg, p, base=root)
    start_mesh = mesh
    out = None
    prefix = case_prefix(cfg, p)
    if write:
        out = output_dir(cfg, root)
        out.mkdir(parents=True, exist_ok=True)
    snap = _Snapshots(cfg, out, prefix)
    solver = solve_sobolev if cfg.method == "GradS" else solve_kkt
    u, energy, converged, trace, n_adapt = solver(cfg, p, u, snap)
    # report the state exactly as written, so a restart reproduces its energy
    u = normalize(u)
    energy = EnergyModel(u.mesh, p).total(u)
    report = detect_vortices(u) if cfg["countvortices"] else None
    wall = time.perf_counter() - t0
    res = RunResult(u, energy, converged, trace, report, out, wall_time=wall, initial_mesh=start_mesh,
                    adaptations=n_adapt)
    if write:
        res.files = _write_outputs(cfg, p, prof, res, out, prefix, snap.files, eps_v)
    return res


def _write_outputs(cfg, p, prof, res, out, prefix, snapshots, eps_v) -> dict:
    files = {}
    u = res.u
    final_vtk = out / f"{prefix}.vtk"
    write_vtk(u, final_vtk)
    files["vtk"] = final_vtk.name
    if cfg["savesol"]:
        write_mesh(out / f"{prefix}.mesh", u.mesh)
        write_field(out / f"{prefix}.rst", u)
        files["mesh"], files["solution"] = f"{prefix}.mesh", f"{prefix}.rst"
    if cfg["savenergy"]:
        write_trace(res.trace, out / f"{prefix}_energy.csv", plot_script=cfg["plotenergy"])
        files["trace"] = f"{prefix}_energy.csv"
        if cfg["plotenergy"]:
            files["plot"] = "plot.gp"
    if res.vortices is not None:
        res.vortices.write_json(out / f"{prefix}_vortices.json")
        files["vortices"] = f"{prefix}_vortices.json"
    files["snapshots"] = snapshots
    breakdown = EnergyModel(u.mesh, p).energy(u)
    summary = {
        "schema": ECHO_SCHEMA,
        "version": __version__,
        "config": cfg.summary(),
        "notices": cfg.notices,
        "model": {
            "scaling": p.scaling.value, "epsilon": p.epsilon, "C_g": p.c_g, "C_Omega": p.c_omega,
            "Omega_over_omega_perp": p.rotation_ratio, "a_x": p.a_x, "a_y": p.a_y, "a_4": p.a_4,
        },
        "thomas_fermi": prof.summary(),
        "core_radius": eps_v,
        "result": {
            "method": cfg.method, "converged": res.converged, "energy": res.energy,
            "breakdown": breakdown.as_dict(), "iterations": len(res.trace) - 1,
            "adaptations": res.adaptations, "vertices": u.mesh.n_vertices,
            "vortex_count": None if res.vortices is None else res.vortices.count,
        },
        "files": files,
        "wall_time_s": res.wall_time,
    }
    write_echo(out / f"{prefix}.echo", summary)
    files["echo"] = f"{prefix}.echo"
    return files
