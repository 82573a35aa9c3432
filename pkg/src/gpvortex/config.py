"""Parser for the ``@keyword value`` parameter files.

Two files describe a run: a physics file (scaling, interaction, rotation,
trap) and a run file (method, tolerances, mesh, seeding, adaptation,
output, restart).  ``//`` starts a comment; each ``@name value`` token pair
sets one key and several pairs may share a line.  Keys absent from a file
take the defaults listed in :data:`PHYSICS_KEYS` and :data:`RUN_KEYS`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .params import ModelParams, PhysicalParams, Scaling, from_coefficients, from_physical

log = logging.getLogger(__name__)

REQUIRED = object()  # marker: a value must be given
UNSET = None

# name -> (type, default)
PHYSICS_KEYS = {
    "scaling": (str, REQUIRED),
    "kind": (int, REQUIRED),
    # kind 0: dimensionless coefficients
    "beta": (float, UNSET),
    "Omop": (float, UNSET),
    "ax": (float, UNSET),
    "ay": (float, UNSET),
    "az": (float, 1.0),
    "a4": (float, UNSET),
    # kind 1: physical parameters (SI)
    "N": (float, UNSET),
    "m": (float, UNSET),
    "as": (float, UNSET),
    "Omega": (float, UNSET),
    "omegax": (float, UNSET),
    "omegay": (float, UNSET),
    "omegaz": (float, 0.0),
    "omega2": (float, 1.0),
    "omega4": (float, 1.0),
    "U2": (float, 0.0),
    "U4": (float, 0.0),
}

KIND0_REQUIRED = ("beta", "Omop", "ax", "ay", "a4")
KIND1_REQUIRED = ("N", "m", "as", "Omega", "omegax", "omegay", "beta")

RUN_KEYS = {
    "method": (str, REQUIRED),
    "EPS0": (float, REQUIRED),
    "init": (str, REQUIRED),
    "GradSMaxIter": (int, 8000),
    "IpoptMaxIter": (int, 50),
    # output
    "dircase": (str, "BEC_2D"),
    "scase": (str, "BEC_2D"),
    "withplot": (bool, True),
    "savesol": (bool, True),
    "IWAIT": (bool, False),
    "meditplot": (bool, False),
    "output": (str, "vtk"),
    "ITERSAVE": (int, 100),
    "ITERNORM": (int, 100),
    "ITERPLOT": (int, 100),
    "savenergy": (bool, True),
    "plotenergy": (bool, True),
    "countvortices": (bool, True),
    # mesh
    "aRdom": (float, 1.25),
    "nbseg": (int, 200),
    "meshkind": (str, "ellipsoid"),
    "hminsurf": (float, 0.6),
    "hminvol": (float, 0.3),
    # restart
    "ifILrst": (bool, False),
    "keepmesh": (bool, UNSET),
    "dirload": (str, UNSET),
    "dmesh": (str, UNSET),
    "dsol": (str, UNSET),
    # seeding
    "mod": (int, 0),
    "narray": (int, 0),
    "Nv": (int, UNSET),
    "Rarr": (float, UNSET),
    "dRarr": (float, 0.0),
    "Tharr": (float, 0.0),
    "dTharr": (float, 0.0),
    "shape": (str, "I"),
    "curvature": (float, 10.0),
    "length": (float, 2.0),
    # adaptation
    "ifIadapt": (bool, True),
    "erradaptI": (float, 0.1),
    "ifRadapt": (bool, True),
    "hminad": (float, 0.001),
    "hmaxad": (float, 1.0),
    "erradapt": (float, UNSET),  # method dependent, see RunConfig.erradapt
    "anisoadapt": (float, 10.0),
    "EPSAD1": (float, 1e-2),
    "EPSADMIN": (float, 1e-9),
    "IPASSAL": (int, 2),
    "EPSADSTEP": (float, 2.0),
    "ITERADAPT": (int, 0),
    "niadapt": (int, 1),
    "nbadapt": (int, 4),
    "maerr1": (float, 0.1),
}

THREE_D_KEYS = {"shape", "meshkind", "hminsurf", "hminvol", "curvature", "length"}
IGNORED_KEYS = {"IWAIT", "anisoadapt", "meditplot"}  # accepted for compatibility only

METHODS = {"grads": "GradS", "ipopt": "Ipopt", "kkt": "Ipopt"}
INITS = {"tf": "TF", "ipoptaxi": "Ipoptaxi", "ipoptnorot": "Ipoptnorot"}
OUTPUTS = {"vtk"}


@dataclass(frozen=True)
class Location:
    path: str
    line: int

    def __str__(self):
        return f"{self.path}:{self.line}"


def _convert(name, kind, text, loc):
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            val = float(text)
            if val != int(val):
                raise ValueError(text)
            return int(val)
        if kind is float:
            return float(text)
        return text.strip("\"'")
    except ValueError:
        raise ConfigError(f"{loc}: malformed value {text!r} for @{name} (expected {kind.__name__})") from None


def parse_keyfile(path, catalogue: dict) -> tuple[dict, dict]:
    """Raw ``{name: value}`` and ``{name: Location}`` of one parameter file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read parameter file {path}: {exc.strerror or exc}") from None
    values, where = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0]
        tokens = line.split()
        loc = Location(str(path), lineno)
        i = 0
        while i < len(tokens):
            tok = tokens[i]
            if not tok.startswith("@") or len(tok) == 1:
                raise ConfigError(f"{loc}: expected '@name value', found {tok!r}")
            name = tok[1:]
            if name not in catalogue:
                raise ConfigError(f"{loc}: unknown key @{name}")
            if i + 1 >= len(tokens) or tokens[i + 1].startswith("@"):
                raise ConfigError(f"{loc}: key @{name} has no value")
            if name in values:
                log.warning("%s: @%s set again (previous value at %s)", loc, name, where[name])
            values[name] = _convert(name, catalogue[name][0], tokens[i + 1], loc)
            where[name] = loc
            i += 2
    return values, where


@dataclass
class RunConfig:
    """Merged physics and run parameters with defaults applied.

    Keys are looked up by their file names, e.g. ``cfg["beta"]`` or
    ``cfg["GradSMaxIter"]``.  ``sources`` maps explicitly set keys to their
    file locations.
    """

    physics: dict
    run: dict
    sources: dict = field(default_factory=dict)
    notices: list = field(default_factory=list)

    def __getitem__(self, name):
        if name in self.physics:
            return self.physics[name]
        return self.run[name]

    def is_set(self, name) -> bool:
        return name in self.sources

    @property
    def method(self) -> str:
        return self.run["method"]

    @property
    def init(self) -> str:
        return self.run["init"]

    @property
    def erradapt(self) -> float:
        val = self.run.get("erradapt")
        if val is not None:
            return val
        return 0.1 if self.method == "GradS" else 0.005

    @property
    def potential_name(self) -> str:
        return "Quartic" if self.model_params().a_4 > 0 else "Harm"

    def model_params(self) -> ModelParams:
        ph = self.physics
        if ph["kind"] == 0:
            return from_coefficients(ph["scaling"], ph["beta"], ph["Omop"], ph["ax"], ph["ay"],
                                     a_4=ph["a4"], a_z=ph["az"])
        phys = PhysicalParams(
            atom_count=ph["N"], atomic_mass=ph["m"], scattering_length=ph["as"], rotation_rate=ph["Omega"],
            omega_x=ph["omegax"], omega_y=ph["omegay"], omega_z=ph["omegaz"],
            u2=ph["U2"], u4=ph["U4"], w2=ph["omega2"], w4=ph["omega4"], beta_2d=ph["beta"],
        )
        return from_physical(phys, ph["scaling"])

    def summary(self) -> dict:
        return {"physics": dict(self.physics), "run": dict(self.run), "erradapt_effective": self.erradapt}


def _apply_defaults(values, catalogue):
    out = {}
    for name, (_, default) in catalogue.items():
        if name in values:
            out[name] = values[name]
        elif default is REQUIRED:
            raise ConfigError(f"required key @{name} is missing (a value must be given)")
        else:
            out[name] = default
    return out


def _require(values, names, reason, sources, path):
    missing = [n for n in names if values.get(n) is None]
    if missing:
        keys = ", ".join("@" + n for n in missing)
        raise ConfigError(f"{path}: {reason} requires {keys}")


def _validate_physics(ph, path, sources):
    try:
        ph["scaling"] = Scaling.parse(ph["scaling"]).value
    except ValueError as exc:
        raise ConfigError(f"{sources.get('scaling', path)}: {exc}") from None
    if ph["kind"] not in (0, 1):
        raise ConfigError(f"{sources['kind']}: @kind must be 0 (coefficients) or 1 (physical parameters)")
    if ph["kind"] == 0:
        _require(ph, KIND0_REQUIRED, "@kind 0", sources, path)
    else:
        _require(ph, KIND1_REQUIRED, "@kind 1 in 2D", sources, path)


def _choice(value, table, name, loc):
    key = str(value).lower()
    if key not in table:
        allowed = ", ".join(sorted(set(table.values())))
        raise ConfigError(f"{loc}: unsupported value {value!r} for @{name} (expected one of {allowed})")
    return table[key]


def _validate_run(rn, sources, notices):
    loc = lambda n: sources.get(n, f"@{n}")  # noqa: E731
    rn["method"] = _choice(rn["method"], METHODS, "method", loc("method"))
    rn["init"] = _choice(rn["init"], INITS, "init", loc("init"))
    if rn["method"] == "Ipopt":
        notices.append("@method Ipopt runs the built-in Newton-KKT minimizer (equality-constrained Newton "
                       "with inertia correction); no external Ipopt library is used")
    if rn["output"].lower() not in OUTPUTS:
        raise ConfigError(f"{loc('output')}: unsupported value {rn['output']!r} for @output (only vtk is available)")
    rn["output"] = rn["output"].lower()
    if not rn["EPS0"] > 0:
        raise ConfigError(f"{loc('EPS0')}: @EPS0 must be positive")
    for name in ("GradSMaxIter", "IpoptMaxIter", "ITERSAVE", "ITERNORM", "ITERPLOT", "nbseg", "IPASSAL", "niadapt"):
        if rn[name] < 1:
            raise ConfigError(f"{loc(name)}: @{name} must be >= 1")
    for name in ("nbadapt", "ITERADAPT", "mod", "narray"):
        if rn[name] < 0:
            raise ConfigError(f"{loc(name)}: @{name} must be >= 0")
    if not rn["aRdom"] > 0:
        raise ConfigError(f"{loc('aRdom')}: @aRdom must be positive")
    if not rn["hminad"] < rn["hmaxad"]:
        raise ConfigError(f"{loc('hminad')}: @hminad must be smaller than @hmaxad")
    if not rn["EPSAD1"] > rn["EPSADMIN"] > 0 or not rn["EPSADSTEP"] > 1:
        raise ConfigError("adaptation ladder needs @EPSAD1 > @EPSADMIN > 0 and @EPSADSTEP > 1")
    if rn["narray"] > 0:
        _require(rn, ("Nv", "Rarr"), "@narray > 0", sources, "run file")
    if rn["ifILrst"]:
        _require(rn, ("keepmesh", "dirload", "dmesh", "dsol"), "@ifILrst 1", sources, "run file")
    for name in sorted(THREE_D_KEYS & set(sources)):
        if name in ("shape", "curvature", "length"):
            notices.append(f"{sources[name]}: @{name} only affects 3D vortex centerlines and is not used by 2D runs")
        else:
            notices.append(f"{sources[name]}: 3D mesh key @{name} is ignored")
    for name in sorted(IGNORED_KEYS & set(sources)):
        notices.append(f"{sources[name]}: @{name} is accepted for compatibility and has no effect")


def parse_config(physics_path, run_path) -> RunConfig:
    """Read a physics file and a run file into a validated :class:`RunConfig`."""
    ph_vals, ph_where = parse_keyfile(physics_path, PHYSICS_KEYS)
    rn_vals, rn_where = parse_keyfile(run_path, RUN_KEYS)
    sources = {**ph_where, **rn_where}
    try:
        physics = _apply_defaults(ph_vals, PHYSICS_KEYS)
    except ConfigError as exc:
        raise ConfigError(f"{physics_path}: {exc}") from None
    try:
        run = _apply_defaults(rn_vals, RUN_KEYS)
    except ConfigError as exc:
        raise ConfigError(f"{run_path}: {exc}") from None
    _validate_physics(physics, physics_path, sources)
    notices: list = []
    _validate_run(run, sources, notices)
    cfg = RunConfig(physics, run, sources, notices)
    cfg.model_params()  # surface parameter errors at parse time
    return cfg
