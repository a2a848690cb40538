"""Level scheme, drive fields, run parameters, and configuration I/O.

Unit conventions
----------------
Configuration documents quote frequencies and rates in GHz (ordinary
frequency) and times in ns.  Internally every frequency-valued quantity is
angular, in rad/ns, i.e. ``internal = 2*pi * value_GHz``, and hbar = 1 so
energies are angular frequencies as well.

Group-A (low) states carry their energy relative to the reference frequency
(``delta_omega``).  Group-B (high) states enter only through their probe
detuning quoted at the reference probe frequency omega_p0 (``detuning_p``),
so the absolute reference frequency never needs to be materialised.

The probe Rabi matrix couples group B to group A only; the coupling-field
Rabi matrix couples group B to itself only.  Entries are stored for both
orderings: whichever of (i, j) / (j, i) the document omits is filled with
the conjugate of the other, which corresponds to a real field amplitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import SchemaError, TopologyError, UnitError

TWO_PI = 2.0 * math.pi
HBAR_SI = 1.054571817e-34  # J s, used only by rabi_from_dipoles

GROUP_A = "A"
GROUP_B = "B"

DEFAULT_N_MIN = -30
DEFAULT_N_MAX = 30
DEFAULT_T_END = 200.0
DEFAULT_ODE_TOL = 1e-10
DEFAULT_STEADY_TOL = 1e-8


@dataclass(frozen=True)
class StateSpec:
    """One basis state.  Frequencies in rad/ns.

    Group A states carry ``delta_omega`` (energy minus reference); group B
    states carry ``detuning_p`` (probe detuning at omega_p0) and their total
    decay rate ``gamma_total``.
    """

    index: int
    group: str
    delta_omega: float | None = None
    detuning_p: float | None = None
    gamma_total: float = 0.0


@dataclass(frozen=True)
class CollapseChannel:
    """Relaxation channel ``from_state -> to_state`` at ``rate`` rad/ns."""

    from_state: int
    to_state: int
    rate: float


@dataclass(frozen=True)
class DriveConfig:
    """Field parameters.  Rabi matrices are full NxN with both orderings.

    ``dipole_scale`` maps a probe-coupled pair (i in B, j in A) to the
    dimensionless product (number density * <j|Dz|i>) / (eps0 * Ep) used in
    the susceptibility sum.
    """

    omega_c: float
    omega_p0: float
    rabi_p: np.ndarray
    rabi_c: np.ndarray
    dipole_scale: dict[tuple[int, int], float] = field(default_factory=dict)


@dataclass(frozen=True)
class DephasingSpec:
    """Extra pure-dephasing rates gamma_ij (rad/ns) for (i in B, j in A)."""

    gamma_extra: dict[tuple[int, int], float] = field(default_factory=dict)

    def rate(self, i: int, j: int) -> float:
        return self.gamma_extra.get((i, j), 0.0)


@dataclass(frozen=True)
class RunConfig:
    """Harmonic truncation, integration horizon and tolerances."""

    n_min: int = DEFAULT_N_MIN
    n_max: int = DEFAULT_N_MAX
    t_end: float = DEFAULT_T_END
    ode_tol: float = DEFAULT_ODE_TOL
    steady_tol: float = DEFAULT_STEADY_TOL
    initial_populations: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SystemModel:
    """Immutable description of the medium and the applied fields."""

    states: tuple[StateSpec, ...]
    channels: tuple[CollapseChannel, ...]
    drive: DriveConfig
    dephasing: DephasingSpec
    run: RunConfig

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def group_a(self) -> tuple[int, ...]:
        return tuple(s.index for s in self.states if s.group == GROUP_A)

    @property
    def group_b(self) -> tuple[int, ...]:
        return tuple(s.index for s in self.states if s.group == GROUP_B)

    def state(self, index: int) -> StateSpec:
        return self.states[index]

    def gamma(self, index: int) -> float:
        return self.states[index].gamma_total

    def delta_omega(self, j: int) -> float:
        """Referenced energy of group-A state j (rad/ns)."""
        s = self.states[j]
        if s.group != GROUP_A:
            raise TopologyError(f"state {j} is not in group A")
        return s.delta_omega or 0.0

    def detuning_p0(self, i: int) -> float:
        """Probe detuning of group-B state i at omega_p0 (rad/ns)."""
        return self.states[i].detuning_p or 0.0

    def initial_density(self) -> np.ndarray:
        """Diagonal initial density matrix from the configured populations."""
        rho = np.zeros((self.n_states, self.n_states), dtype=complex)
        for j, p in self.run.initial_populations.items():
            rho[j, j] = p
        return rho


# --------------------------------------------------------------------------
# construction helpers
# --------------------------------------------------------------------------

def rabi_from_dipoles(dipoles: np.ndarray, field_amplitude: complex) -> np.ndarray:
    """Rabi matrix (rad/ns) from dipole matrix elements and a field amplitude.

    Parameters
    ----------
    dipoles : ndarray
        Matrix elements <i|Dz|j> in C m; must be Hermitian.
    field_amplitude : complex
        Field amplitude in V/m.

    Returns
    -------
    ndarray
        Omega[i, j] = field * dipoles[i, j] / hbar, converted to rad/ns.
    """
    d = np.asarray(dipoles, dtype=complex)
    return field_amplitude * d / HBAR_SI * 1e-9


def scale_probe(model: SystemModel, alpha: float) -> SystemModel:
    """Model with the probe field amplitude divided by ``alpha``.

    Scales rabi_p by 1/alpha and dipole_scale by alpha, both of which are
    proportional to 1/Ep and Ep respectively, so the weak-probe
    susceptibility is unchanged.
    """
    drive = replace(
        model.drive,
        rabi_p=_frozen(model.drive.rabi_p / alpha),
        dipole_scale={k: v * alpha for k, v in model.drive.dipole_scale.items()},
    )
    return replace(model, drive=drive)


def with_coupling_off(model: SystemModel) -> SystemModel:
    """Model with the coupling Rabi matrix zeroed."""
    drive = replace(
        model.drive,
        rabi_c=_frozen(np.zeros_like(model.drive.rabi_c)),
    )
    return replace(model, drive=drive)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------
# configuration parsing
# --------------------------------------------------------------------------

_STATE_KEYS = {"index", "group", "delta_omega", "detuning_p", "gamma_total"}
_CHANNEL_KEYS = {"from", "to", "rate"}
_DRIVE_KEYS = {"omega_c", "omega_p0", "rabi_p", "rabi_c", "dipole_scale",
               "fields", "dipoles"}
_RUN_KEYS = {"n_min", "n_max", "t_end", "ode_tol", "steady_tol",
             "initial_populations"}
_TOP_KEYS = {"states", "channels", "drive", "dephasing", "run"}


def load_config(text: str) -> tuple[SystemModel, RunConfig]:
    """Parse a TOML configuration document into a resolved model.

    All frequencies are converted from GHz (ordinary) to rad/ns; omitted
    optional sections get their documented defaults.

    Raises
    ------
    SchemaError
        Missing or mistyped keys, malformed document.
    UnitError
        Negative rates or non-positive coupling frequency.
    TopologyError
        Rabi entries outside the allowed group blocks.
    """
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"config is not valid TOML: {exc}") from None
    return build_model(tree)


def load_config_file(path) -> tuple[SystemModel, RunConfig]:
    with open(path, "rb") as fh:
        data = fh.read()
    return load_config(data.decode("utf-8"))


def build_model(tree: dict) -> tuple[SystemModel, RunConfig]:
    """Build (SystemModel, RunConfig) from a parsed configuration tree."""
    if not isinstance(tree, dict):
        raise SchemaError("config root must be a table")
    unknown = set(tree) - _TOP_KEYS
    if unknown:
        raise SchemaError(f"unknown top-level section(s): {sorted(unknown)}")

    states = _parse_states(_require(tree, "states", list))
    n = len(states)
    index_set = {s.index for s in states}
    if index_set != set(range(n)):
        raise SchemaError("state indices must be exactly 0..N-1")
    states = tuple(sorted(states, key=lambda s: s.index))
    group_a = tuple(s.index for s in states if s.group == GROUP_A)
    group_b = tuple(s.index for s in states if s.group == GROUP_B)
    if not group_a:
        raise SchemaError("at least one group-A state is required")

    channels = _parse_channels(tree.get("channels", []), n)
    drive = _parse_drive(_require(tree, "drive", dict), states, group_a, group_b)
    dephasing = _parse_dephasing(tree.get("dephasing", []), group_a, group_b)
    run = _parse_run(tree.get("run", {}), group_a)

    model = SystemModel(states=states, channels=channels, drive=drive,
                        dephasing=dephasing, run=run)
    return model, run


def _require(tree: dict, key: str, typ) -> object:
    if key not in tree:
        raise SchemaError(f"missing required section [{key}]")
    value = tree[key]
    if not isinstance(value, typ):
        raise SchemaError(f"section [{key}] has the wrong type")
    return value


def _number(table: dict, key: str, where: str, *, required=True, default=None):
    if key not in table:
        if required:
            raise SchemaError(f"{where}: missing key '{key}'")
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{where}: key '{key}' must be a number")
    return float(v)


def _integer(table: dict, key: str, where: str, *, required=True, default=None):
    if key not in table:
        if required:
            raise SchemaError(f"{where}: missing key '{key}'")
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{where}: key '{key}' must be an integer")
    return v


def _complex_value(v, where: str) -> complex:
    """A scalar Rabi/field value: real number or [re, im] pair (GHz or SI)."""
    if isinstance(v, bool):
        raise SchemaError(f"{where}: value must be a number or [re, im]")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(v[0], v[1])
    raise SchemaError(f"{where}: value must be a number or [re, im]")


def _parse_states(items: list) -> list[StateSpec]:
    states = []
    for k, item in enumerate(items):
        where = f"states[{k}]"
        if not isinstance(item, dict):
            raise SchemaError(f"{where}: must be a table")
        unknown = set(item) - _STATE_KEYS
        if unknown:
            raise SchemaError(f"{where}: unknown key(s) {sorted(unknown)}")
        index = _integer(item, "index", where)
        group = item.get("group")
        if group not in (GROUP_A, GROUP_B):
            raise SchemaError(f"{where}: group must be 'A' or 'B'")
        gamma = _number(item, "gamma_total", where, required=False, default=0.0)
        if gamma < 0:
            raise UnitError(f"{where}: gamma_total must be >= 0")
        if group == GROUP_A:
            if "detuning_p" in item:
                raise SchemaError(f"{where}: group-A state may not set detuning_p")
            if gamma != 0.0:
                raise UnitError(f"{where}: group-A state must have gamma_total 0")
            delta = _number(item, "delta_omega", where, required=False, default=0.0)
            states.append(StateSpec(index=index, group=GROUP_A,
                                    delta_omega=TWO_PI * delta,
                                    gamma_total=0.0))
        else:
            if "delta_omega" in item:
                raise SchemaError(f"{where}: group-B state may not set delta_omega")
            det = _number(item, "detuning_p", where)
            states.append(StateSpec(index=index, group=GROUP_B,
                                    detuning_p=TWO_PI * det,
                                    gamma_total=TWO_PI * gamma))
    return states


def _parse_channels(items, n: int) -> tuple[CollapseChannel, ...]:
    if not isinstance(items, list):
        raise SchemaError("section [channels] must be an array of tables")
    channels = []
    for k, item in enumerate(items):
        where = f"channels[{k}]"
        if not isinstance(item, dict):
            raise SchemaError(f"{where}: must be a table")
        unknown = set(item) - _CHANNEL_KEYS
        if unknown:
            raise SchemaError(f"{where}: unknown key(s) {sorted(unknown)}")
        src = _integer(item, "from", where)
        dst = _integer(item, "to", where)
        rate = _number(item, "rate", where)
        if not (0 <= src < n and 0 <= dst < n):
            raise SchemaError(f"{where}: state index out of range")
        if src == dst:
            raise SchemaError(f"{where}: channel source equals target")
        if rate < 0:
            raise UnitError(f"{where}: rate must be >= 0")
        channels.append(CollapseChannel(from_state=src, to_state=dst,
                                        rate=TWO_PI * rate))
    return tuple(channels)


def _fill_rabi(entries, n, allowed, where, scale) -> np.ndarray:
    """Dense Rabi matrix from (i, j, value) entries.

    ``allowed(i, j)`` gates the orderings a document may specify.  The
    transpose-conjugate position is filled automatically unless given
    explicitly (complex field phases may make the matrix non-Hermitian).
    """
    mat = np.zeros((n, n), dtype=complex)
    given = set()
    if not isinstance(entries, list):
        raise SchemaError(f"{where}: must be an array of tables")
    for k, item in enumerate(entries):
        tag = f"{where}[{k}]"
        if not isinstance(item, dict) or set(item) - {"i", "j", "value"}:
            raise SchemaError(f"{tag}: expected keys i, j, value")
        i = _integer(item, "i", tag)
        j = _integer(item, "j", tag)
        if not (0 <= i < n and 0 <= j < n):
            raise SchemaError(f"{tag}: state index out of range")
        if not allowed(i, j):
            raise TopologyError(f"{tag}: coupling ({i}, {j}) outside the allowed block")
        if (i, j) in given:
            raise SchemaError(f"{tag}: duplicate entry for ({i}, {j})")
        value = scale * _complex_value(item["value"], tag)
        mat[i, j] = value
        given.add((i, j))
    for (i, j) in list(given):
        if (j, i) not in given:
            mat[j, i] = np.conj(mat[i, j])
    return mat


def _parse_drive(table, states, group_a, group_b) -> DriveConfig:
    unknown = set(table) - _DRIVE_KEYS
    if unknown:
        raise SchemaError(f"drive: unknown key(s) {sorted(unknown)}")
    omega_c = TWO_PI * _number(table, "omega_c", "drive")
    if omega_c <= 0:
        raise UnitError("drive: omega_c must be > 0")
    omega_p0 = TWO_PI * _number(table, "omega_p0", "drive")

    n = len(states)
    a_set, b_set = set(group_a), set(group_b)

    def probe_ok(i, j):
        return (i in b_set and j in a_set) or (i in a_set and j in b_set)

    def coupling_ok(i, j):
        return i in b_set and j in b_set

    rabi_p = rabi_c = None
    if "rabi_p" in table:
        rabi_p = _fill_rabi(table["rabi_p"], n, probe_ok, "drive.rabi_p", TWO_PI)
    if "rabi_c" in table:
        rabi_c = _fill_rabi(table["rabi_c"], n, coupling_ok, "drive.rabi_c", TWO_PI)

    # dipole + field route; direct Rabi input takes precedence
    if (rabi_p is None or rabi_c is None) and "dipoles" in table:
        dip = _fill_rabi(table["dipoles"], n, lambda i, j: True, "drive.dipoles", 1.0)
        if not np.allclose(dip, dip.conj().T, rtol=0, atol=1e-30):
            raise SchemaError("drive.dipoles: dipole matrix must be Hermitian")
        fields = table.get("fields", {})
        if not isinstance(fields, dict) or set(fields) - {"probe", "coupling"}:
            raise SchemaError("drive.fields: expected keys 'probe' and/or 'coupling'")
        if rabi_p is None and "probe" in fields:
            ep = _complex_value(fields["probe"], "drive.fields.probe")
            full = rabi_from_dipoles(dip, ep)
            rabi_p = np.where(_mask(n, probe_ok), full, 0.0)
        if rabi_c is None and "coupling" in fields:
            ec = _complex_value(fields["coupling"], "drive.fields.coupling")
            full = rabi_from_dipoles(dip, ec)
            rabi_c = np.where(_mask(n, coupling_ok), full, 0.0)

    if rabi_p is None:
        rabi_p = np.zeros((n, n), dtype=complex)
    if rabi_c is None:
        rabi_c = np.zeros((n, n), dtype=complex)

    dipole_scale = {}
    for k, item in enumerate(table.get("dipole_scale", [])):
        tag = f"drive.dipole_scale[{k}]"
        if not isinstance(item, dict) or set(item) - {"i", "j", "value"}:
            raise SchemaError(f"{tag}: expected keys i, j, value")
        i = _integer(item, "i", tag)
        j = _integer(item, "j", tag)
        if not (i in b_set and j in a_set):
            raise TopologyError(f"{tag}: dipole_scale pairs must be (i in B, j in A)")
        dipole_scale[(i, j)] = _number(item, "value", tag)

    return DriveConfig(omega_c=omega_c, omega_p0=omega_p0,
                       rabi_p=_frozen(rabi_p), rabi_c=_frozen(rabi_c),
                       dipole_scale=dipole_scale)


def _mask(n, allowed) -> np.ndarray:
    m = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            m[i, j] = allowed(i, j)
    return m


def _parse_dephasing(items, group_a, group_b) -> DephasingSpec:
    if not isinstance(items, list):
        raise SchemaError("section [dephasing] must be an array of tables")
    rates = {}
    a_set, b_set = set(group_a), set(group_b)
    for k, item in enumerate(items):
        where = f"dephasing[{k}]"
        if not isinstance(item, dict) or set(item) - {"i", "j", "rate"}:
            raise SchemaError(f"{where}: expected keys i, j, rate")
        i = _integer(item, "i", where)
        j = _integer(item, "j", where)
        rate = _number(item, "rate", where)
        if not (i in b_set and j in a_set):
            raise TopologyError(f"{where}: dephasing pairs must be (i in B, j in A)")
        if rate < 0:
            raise UnitError(f"{where}: rate must be >= 0")
        rates[(i, j)] = TWO_PI * rate
    return DephasingSpec(gamma_extra=rates)


def _parse_run(table, group_a) -> RunConfig:
    if not isinstance(table, dict):
        raise SchemaError("section [run] must be a table")
    unknown = set(table) - _RUN_KEYS
    if unknown:
        raise SchemaError(f"run: unknown key(s) {sorted(unknown)}")
    n_min = _integer(table, "n_min", "run", required=False, default=DEFAULT_N_MIN)
    n_max = _integer(table, "n_max", "run", required=False, default=DEFAULT_N_MAX)
    if not (n_min <= 0 <= n_max):
        raise SchemaError("run: need n_min <= 0 <= n_max")
    t_end = _number(table, "t_end", "run", required=False, default=DEFAULT_T_END)
    ode_tol = _number(table, "ode_tol", "run", required=False, default=DEFAULT_ODE_TOL)
    steady_tol = _number(table, "steady_tol", "run",
                         required=False, default=DEFAULT_STEADY_TOL)
    if t_end <= 0 or ode_tol <= 0 or steady_tol <= 0:
        raise UnitError("run: t_end, ode_tol and steady_tol must be > 0")

    pops_in = table.get("initial_populations")
    if pops_in is None:
        pops = {min(group_a): 1.0}
    else:
        if not isinstance(pops_in, dict):
            raise SchemaError("run.initial_populations must be a table")
        pops = {}
        for key, value in pops_in.items():
            try:
                j = int(key)
            except (TypeError, ValueError):
                raise SchemaError("run.initial_populations: keys must be state indices") from None
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SchemaError("run.initial_populations: values must be numbers")
            if j not in group_a:
                raise SchemaError(
                    f"run.initial_populations: state {j} is not in group A "
                    "(group-B populations are implicitly zero)")
            if value < 0 or value > 1:
                raise UnitError("run.initial_populations: values must lie in [0, 1]")
            pops[j] = float(value)
    return RunConfig(n_min=n_min, n_max=n_max, t_end=t_end, ode_tol=ode_tol,
                     steady_tol=steady_tol, initial_populations=pops)


# --------------------------------------------------------------------------
# overrides
# --------------------------------------------------------------------------

def apply_overrides(tree: dict, assignments: list[str]) -> dict:
    """Apply dotted-path ``key=value`` overrides onto a parsed config tree.

    Paths address the tree the way the document reads, e.g.
    ``run.n_max=40``, ``states.1.gamma_total=3.6``,
    ``drive.rabi_c.1.3=9.0``, ``channels.1.0=3.6`` (from.to),
    ``dephasing.1.0=0.05``.  Assigning ``drive.rabi_c=0`` (or rabi_p)
    clears every entry of that matrix.  Unknown paths are rejected.
    """
    import copy

    out = copy.deepcopy(tree)
    for assignment in assignments:
        if "=" not in assignment:
            raise SchemaError(f"override '{assignment}' is not of the form key=value")
        path, raw = assignment.split("=", 1)
        keys = path.strip().split(".")
        value = _parse_override_value(raw.strip())
        _apply_one_override(out, keys, value, assignment)
    return out


def _parse_override_value(raw: str):
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    if "," in raw:  # re,im pair
        parts = raw.split(",")
        if len(parts) == 2:
            try:
                return [float(parts[0]), float(parts[1])]
            except ValueError:
                pass
    return raw


def _apply_one_override(tree, keys, value, assignment):
    top = keys[0]
    if top == "run":
        if len(keys) == 2 and keys[1] in _RUN_KEYS - {"initial_populations"}:
            tree.setdefault("run", {})[keys[1]] = value
            return
        if len(keys) == 3 and keys[1] == "initial_populations":
            tree.setdefault("run", {}).setdefault("initial_populations", {})[keys[2]] = value
            return
    elif top == "drive":
        if len(keys) == 2 and keys[1] in ("omega_c", "omega_p0"):
            tree.setdefault("drive", {})[keys[1]] = value
            return
        if len(keys) == 2 and keys[1] in ("rabi_p", "rabi_c") and value == 0:
            tree.setdefault("drive", {})[keys[1]] = []
            return
        if len(keys) == 4 and keys[1] in ("rabi_p", "rabi_c", "dipole_scale"):
            entries = tree.setdefault("drive", {}).setdefault(keys[1], [])
            _upsert_entry(entries, int(keys[2]), int(keys[3]), "value", value)
            return
    elif top == "states":
        if len(keys) == 3 and keys[2] in _STATE_KEYS - {"index"}:
            for item in tree.get("states", []):
                if item.get("index") == int(keys[1]):
                    item[keys[2]] = value
                    return
            raise SchemaError(f"override '{assignment}': no state with index {keys[1]}")
    elif top == "channels":
        if len(keys) == 3:
            entries = tree.setdefault("channels", [])
            for item in entries:
                if item.get("from") == int(keys[1]) and item.get("to") == int(keys[2]):
                    item["rate"] = value
                    return
            entries.append({"from": int(keys[1]), "to": int(keys[2]), "rate": value})
            return
    elif top == "dephasing":
        if len(keys) == 3:
            entries = tree.setdefault("dephasing", [])
            _upsert_entry(entries, int(keys[1]), int(keys[2]), "rate", value)
            return
    raise SchemaError(f"override '{assignment}': unknown key path")


def _upsert_entry(entries, i, j, value_key, value):
    for item in entries:
        if item.get("i") == i and item.get("j") == j:
            item[value_key] = value
            return
    entries.append({"i": i, "j": j, value_key: value})


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def serialize_model(model: SystemModel) -> dict:
    """Configuration tree (GHz / ns units) reproducing the model."""
    states = []
    for s in model.states:
        if s.group == GROUP_A:
            states.append({"index": s.index, "group": s.group,
                           "delta_omega": (s.delta_omega or 0.0) / TWO_PI})
        else:
            states.append({"index": s.index, "group": s.group,
                           "detuning_p": (s.detuning_p or 0.0) / TWO_PI,
                           "gamma_total": s.gamma_total / TWO_PI})
    channels = [{"from": c.from_state, "to": c.to_state, "rate": c.rate / TWO_PI}
                for c in model.channels]
    drive = {
        "omega_c": model.drive.omega_c / TWO_PI,
        "omega_p0": model.drive.omega_p0 / TWO_PI,
        "rabi_p": _rabi_entries(model.drive.rabi_p),
        "rabi_c": _rabi_entries(model.drive.rabi_c),
        "dipole_scale": [{"i": i, "j": j, "value": v}
                         for (i, j), v in sorted(model.drive.dipole_scale.items())],
    }
    dephasing = [{"i": i, "j": j, "rate": r / TWO_PI}
                 for (i, j), r in sorted(model.dephasing.gamma_extra.items())]
    run = {
        "n_min": model.run.n_min,
        "n_max": model.run.n_max,
        "t_end": model.run.t_end,
        "ode_tol": model.run.ode_tol,
        "steady_tol": model.run.steady_tol,
        "initial_populations": {str(k): v
                                for k, v in sorted(model.run.initial_populations.items())},
    }
    return {"states": states, "channels": channels, "drive": drive,
            "dephasing": dephasing, "run": run}


def _rabi_entries(mat: np.ndarray) -> list[dict]:
    entries = []
    for i in range(mat.shape[0]):
        for j in range(mat.shape[1]):
            v = mat[i, j]
            if v != 0:
                value = v.real / TWO_PI if v.imag == 0 else [v.real / TWO_PI,
                                                             v.imag / TWO_PI]
                entries.append({"i": i, "j": j, "value": value})
    return entries


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    where: str
    message: str

    def as_dict(self) -> dict:
        return {"kind": self.kind, "where": self.where, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues

    def __iter__(self):
        return iter(self.issues)

    def __len__(self):
        return len(self.issues)


def validate_model(model: SystemModel, *, rate_rtol: float = 1e-12) -> ValidationReport:
    """Check every model invariant; the report lists each violation.

    An empty report means the model is admissible for all downstream
    operations (superoperator construction, weak-probe solves, sweeps).
    """
    issues: list[ValidationIssue] = []

    def add(kind, where, message):
        issues.append(ValidationIssue(kind=kind, where=where, message=message))

    n = model.n_states
    a_set, b_set = set(model.group_a), set(model.group_b)

    for s in model.states:
        where = f"state {s.index}"
        if s.group == GROUP_A:
            if s.detuning_p is not None:
                add("SchemaError", where, "group-A state has detuning_p set")
            if s.gamma_total != 0.0:
                add("UnitError", where, "group-A state has nonzero gamma_total")
        elif s.group == GROUP_B:
            if s.delta_omega is not None:
                add("SchemaError", where, "group-B state has delta_omega set")
            if s.detuning_p is None:
                add("SchemaError", where, "group-B state is missing detuning_p")
            if s.gamma_total < 0:
                add("UnitError", where, "gamma_total must be >= 0")
        else:
            add("SchemaError", where, f"unknown group {s.group!r}")

    totals = {s.index: 0.0 for s in model.states}
    for k, c in enumerate(model.channels):
        where = f"channel {k} ({c.from_state}->{c.to_state})"
        if c.rate < 0:
            add("UnitError", where, "rate must be >= 0")
        if c.from_state in a_set:
            add("TopologyError", where, "relaxation channels out of group A are not allowed")
        totals[c.from_state] = totals.get(c.from_state, 0.0) + c.rate
    for s in model.states:
        if s.group != GROUP_B:
            continue
        total = totals.get(s.index, 0.0)
        gamma = s.gamma_total
        scale = max(abs(gamma), abs(total))
        if scale > 0 and abs(total - gamma) > rate_rtol * scale:
            add("RateConsistency", f"state {s.index}",
                f"sum of channel rates {total:.6g} != gamma_total {gamma:.6g}")
        elif scale == 0 and total != gamma:
            add("RateConsistency", f"state {s.index}",
                "channel rates present for a state with gamma_total 0")

    rp, rc = model.drive.rabi_p, model.drive.rabi_c
    if rp.shape != (n, n) or rc.shape != (n, n):
        add("DimensionMismatch", "drive", "Rabi matrices must be N x N")
    else:
        for i in range(n):
            for j in range(n):
                if rp[i, j] != 0 and not (
                        (i in b_set and j in a_set) or (i in a_set and j in b_set)):
                    add("TopologyError", f"rabi_p[{i},{j}]",
                        "probe coupling outside the (B, A) block")
                if rc[i, j] != 0 and not (i in b_set and j in b_set):
                    add("TopologyError", f"rabi_c[{i},{j}]",
                        "coupling-field entry outside the (B, B) block")
    if model.drive.omega_c <= 0:
        add("UnitError", "drive", "omega_c must be > 0")

    for (i, j), v in model.drive.dipole_scale.items():
        if not (i in b_set and j in a_set):
            add("TopologyError", f"dipole_scale[{i},{j}]",
                "dipole_scale pairs must be (i in B, j in A)")

    for (i, j), r in model.dephasing.gamma_extra.items():
        where = f"dephasing[{i},{j}]"
        if not (i in b_set and j in a_set):
            add("TopologyError", where, "dephasing pairs must be (i in B, j in A)")
        if r < 0:
            add("UnitError", where, "rate must be >= 0")

    run = model.run
    if not (run.n_min <= 0 <= run.n_max):
        add("SchemaError", "run", "need n_min <= 0 <= n_max")
    pop_sum = 0.0
    for j, p in run.initial_populations.items():
        if j not in a_set:
            add("SchemaError", f"run.initial_populations[{j}]",
                "initial population on a non-group-A state")
        if p < 0 or p > 1:
            add("UnitError", f"run.initial_populations[{j}]",
                "population must lie in [0, 1]")
        pop_sum += p
    if abs(pop_sum - 1.0) > 1e-9:
        add("UnitError", "run.initial_populations",
            f"populations sum to {pop_sum!r}, expected 1")

    return ValidationReport(issues=tuple(issues))
