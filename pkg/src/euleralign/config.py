"""Run configuration: INI-style parsing with exhaustive validation.

The config grammar is UTF-8 ``key = value`` lines under bracketed section
headers.  Recognized sections are [run], [initial], [particles], [sweep]
and [output]; unknown sections or keys are rejected, and validation
collects every error instead of stopping at the first.  The same
validator backs the CLI flags, which mirror the config keys.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace

from .kernels import BumpKernel, ConstantKernel, CosineKernel, KernelSpec, _validate_spec

__all__ = ["RunConfig", "ConfigError", "parse_config", "validate_sections",
           "serialize_config", "parse_kernel_descriptor", "kernel_descriptor_text"]

MODES = ("fluid", "pressureless", "particles", "kinetic", "sweep")
FORMULATIONS = ("log", "conservative")
SCENARIOS = ("small_perturbation", "two_bump_density", "shear_velocity_2d",
             "counterflow_particles", "expression")
SWEEP_KEYS = ("n", "t_end", "amplitude", "seed")

DEFAULT_SIGMAS = (0.05, 0.01, 0.02, 0.1, 0.2)


class ConfigError(ValueError):
    """Carries the full list of validation errors."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    mode: str
    dim: int = 1
    n: int = 128
    t_end: float = 10.0
    cfl: float = 0.4
    dt: float = None
    formulation: str = "log"
    scenario: str = "small_perturbation"
    amplitude: float = 0.05
    kernel: KernelSpec = None
    sigmas: tuple = DEFAULT_SIGMAS
    sobolev_s: float = 3.0
    seed: int = 0
    record_stride: int = 10
    state_stride: int = 100
    fit_window: tuple = None  # defaults to (2.0, t_end) downstream
    expressions: dict = None
    n_agents: int = 0
    eps_list: tuple = ()
    seeds: tuple = None  # defaults to (seed,)
    moments_n: int = 64
    sweep_key: str = None
    sweep_values: tuple = ()
    output_dir: str = "out"
    figures: bool = True

    def effective_fit_window(self):
        if self.fit_window is not None:
            return self.fit_window
        return (min(2.0, 0.5 * self.t_end), self.t_end)

    def effective_seeds(self):
        return self.seeds if self.seeds else (self.seed,)


def parse_kernel_descriptor(text: str) -> KernelSpec:
    """Parse ``constant a`` / ``cosine a b`` / ``bump base amplitude width``."""
    parts = text.split()
    if not parts:
        raise ValueError("empty kernel descriptor")
    kind, args = parts[0], parts[1:]
    try:
        vals = [float(v) for v in args]
    except ValueError as err:
        raise ValueError(f"kernel parameters must be numbers: {err}") from err
    table = {"constant": (ConstantKernel, 1), "cosine": (CosineKernel, 2),
             "bump": (BumpKernel, 3)}
    if kind not in table:
        raise ValueError(f"unknown kernel kind {kind!r} (constant|cosine|bump)")
    cls, arity = table[kind]
    if len(vals) != arity:
        raise ValueError(f"kernel {kind} takes {arity} parameter(s), got {len(vals)}")
    spec = cls(*vals)
    _validate_spec(spec)
    return spec


def kernel_descriptor_text(spec: KernelSpec) -> str:
    if isinstance(spec, ConstantKernel):
        return f"constant {spec.value:g}"
    if isinstance(spec, CosineKernel):
        return f"cosine {spec.a:g} {spec.b:g}"
    return f"bump {spec.base:g} {spec.amplitude:g} {spec.width:g}"


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


class _Validator:
    """Parses one section dict, collecting errors instead of raising."""

    def __init__(self, sections):
        self.sections = {name: dict(kv) for name, kv in sections.items()}
        self.errors = []

    def error(self, msg):
        self.errors.append(msg)

    def take(self, section, key, parse, default=None, required=False):
        sec = self.sections.get(section, {})
        if key not in sec:
            if required:
                self.error(f"[{section}] missing required key '{key}'")
            return default
        raw = sec.pop(key)
        try:
            return parse(raw)
        except (ValueError, TypeError) as err:
            self.error(f"[{section}] {key} = {raw!r}: {err}")
            return default

    def reject_leftovers(self):
        known = {"run", "initial", "particles", "sweep", "output"}
        for name, sec in self.sections.items():
            if name not in known:
                self.error(f"unknown section [{name}]")
                continue
            for key in sec:
                self.error(f"unknown key '{key}' in [{name}]")


def _parse_choice(options):
    def parse(raw):
        if raw not in options:
            raise ValueError(f"must be one of {options}")
        return raw
    return parse


def _parse_int(lo=None, hi=None):
    def parse(raw):
        val = int(raw)
        if lo is not None and val < lo:
            raise ValueError(f"must be >= {lo}")
        if hi is not None and val > hi:
            raise ValueError(f"must be <= {hi}")
        return val
    return parse


def _parse_float(lo=None, lo_strict=None, hi=None):
    def parse(raw):
        val = float(raw)
        if lo is not None and val < lo:
            raise ValueError(f"must be >= {lo}")
        if lo_strict is not None and val <= lo_strict:
            raise ValueError(f"must be > {lo_strict}")
        if hi is not None and val > hi:
            raise ValueError(f"must be <= {hi}")
        return val
    return parse


def _parse_float_list(lo=None):
    item = _parse_float(lo=lo)
    def parse(raw):
        vals = tuple(item(v) for v in str(raw).split())
        if not vals:
            raise ValueError("empty list")
        return vals
    return parse


def _parse_int_list(raw):
    vals = tuple(int(v) for v in str(raw).split())
    if not vals:
        raise ValueError("empty list")
    return vals


def _parse_power_of_two(raw):
    val = int(raw)
    if val < 8 or not _is_power_of_two(val):
        raise ValueError("n must be a power of two >= 8")
    return val


def _parse_bool(raw):
    lowered = str(raw).strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError("must be true or false")


def _parse_window(raw):
    parts = str(raw).split()
    if len(parts) != 2:
        raise ValueError("fit_window takes two numbers: t0 t1")
    t0, t1 = float(parts[0]), float(parts[1])
    if not t1 > t0:
        raise ValueError("fit_window needs t1 > t0")
    return (t0, t1)


def validate_sections(sections) -> RunConfig:
    """Build a RunConfig from a {section: {key: raw}} mapping.

    Raises ConfigError listing every problem found.
    """
    v = _Validator(sections)
    mode = v.take("run", "mode", _parse_choice(MODES), required=True)
    needs_grid = mode in ("fluid", "pressureless", "kinetic", "sweep", None)
    needs_scenario = mode in ("fluid", "pressureless", "kinetic", "sweep", None)

    dim = v.take("run", "dim", _parse_int(1, 2), default=1, required=needs_grid)
    n = v.take("run", "n", _parse_power_of_two, default=128, required=needs_grid)
    t_end = v.take("run", "t_end", _parse_float(lo=0.0), default=10.0, required=True)
    cfl = v.take("run", "cfl", _parse_float(lo_strict=0.0, hi=1.0), default=0.4)
    dt = v.take("run", "dt", _parse_float(lo_strict=0.0))
    formulation = v.take("run", "formulation", _parse_choice(FORMULATIONS), default="log")
    default_scn = "counterflow_particles" if mode == "particles" else "small_perturbation"
    scenario = v.take("run", "scenario", _parse_choice(SCENARIOS), default=default_scn,
                      required=needs_scenario)
    amplitude = v.take("run", "amplitude", _parse_float(), default=0.05)
    kernel = v.take("run", "kernel", parse_kernel_descriptor, required=True)
    sigmas = v.take("run", "sigma", _parse_float_list(lo=0.0), default=DEFAULT_SIGMAS)
    sobolev_s = v.take("run", "sobolev_s", _parse_float(lo=0.0), default=3.0)
    seed = v.take("run", "seed", _parse_int(), default=0)
    record_stride = v.take("run", "record_stride", _parse_int(lo=1), default=10)
    state_stride = v.take("run", "state_stride", _parse_int(lo=1), default=100)
    fit_window = v.take("run", "fit_window", _parse_window)

    expressions = None
    if "initial" in v.sections:
        allowed = {"rho0", "u0x", "u0y"}
        expressions = {}
        for key in list(v.sections["initial"]):
            if key in allowed:
                expressions[key] = v.sections["initial"].pop(key)
    if scenario == "expression" and not expressions:
        v.error("[initial] section with rho0 is required for scenario = expression")
    if scenario == "shear_velocity_2d" and dim == 1:
        v.error("scenario shear_velocity_2d requires dim = 2")

    particle_mode = mode in ("particles", "kinetic")
    n_agents = v.take("particles", "n_agents", _parse_int(lo=2), default=0,
                      required=particle_mode)
    eps_list = v.take("particles", "eps", _parse_float_list(lo=1e-12), default=(),
                      required=(mode == "kinetic"))
    seeds = v.take("particles", "seeds", _parse_int_list)
    moments_n = v.take("particles", "moments_n", _parse_power_of_two, default=64)

    sweep_key = v.take("sweep", "key", _parse_choice(SWEEP_KEYS),
                       required=(mode == "sweep"))
    sweep_values = v.take("sweep", "values", _parse_float_list(), default=(),
                          required=(mode == "sweep"))

    output_dir = v.take("output", "dir", str, default="out")
    figures = v.take("output", "figures", _parse_bool, default=True)

    v.reject_leftovers()
    if v.errors:
        raise ConfigError(v.errors)
    return RunConfig(
        mode=mode, dim=dim, n=n, t_end=t_end, cfl=cfl, dt=dt,
        formulation=formulation, scenario=scenario, amplitude=amplitude,
        kernel=kernel, sigmas=tuple(sigmas), sobolev_s=sobolev_s, seed=seed,
        record_stride=record_stride, state_stride=state_stride,
        fit_window=fit_window, expressions=expressions, n_agents=n_agents,
        eps_list=tuple(eps_list), seeds=tuple(seeds) if seeds else None,
        moments_n=moments_n, sweep_key=sweep_key,
        sweep_values=tuple(sweep_values), output_dir=output_dir, figures=figures,
    )


def read_sections(text: str) -> dict:
    """Raw {section: {key: value}} mapping from INI-style text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError([f"syntax: {err}"]) from err
    return {name: dict(parser.items(name)) for name in parser.sections()}


def parse_config(text: str) -> RunConfig:
    """Parse config text; raises ConfigError listing all problems."""
    return validate_sections(read_sections(text))


def serialize_config(config: RunConfig) -> str:
    """Emit config text such that parse(serialize(c)) == c."""
    run = {
        "mode": config.mode,
        "dim": str(config.dim),
        "n": str(config.n),
        "t_end": repr(config.t_end),
        "cfl": repr(config.cfl),
        "formulation": config.formulation,
        "scenario": config.scenario,
        "amplitude": repr(config.amplitude),
        "kernel": kernel_descriptor_text(config.kernel),
        "sigma": " ".join(repr(s) for s in config.sigmas),
        "sobolev_s": repr(config.sobolev_s),
        "seed": str(config.seed),
        "record_stride": str(config.record_stride),
        "state_stride": str(config.state_stride),
    }
    if config.dt is not None:
        run["dt"] = repr(config.dt)
    if config.fit_window is not None:
        run["fit_window"] = f"{config.fit_window[0]!r} {config.fit_window[1]!r}"
    sections = {"run": run}
    if config.expressions:
        sections["initial"] = dict(config.expressions)
    particles = {}
    if config.n_agents:
        particles["n_agents"] = str(config.n_agents)
    if config.eps_list:
        particles["eps"] = " ".join(repr(e) for e in config.eps_list)
    if config.seeds:
        particles["seeds"] = " ".join(str(s) for s in config.seeds)
    particles["moments_n"] = str(config.moments_n)
    sections["particles"] = particles
    if config.sweep_key:
        sections["sweep"] = {"key": config.sweep_key,
                             "values": " ".join(repr(x) for x in config.sweep_values)}
    sections["output"] = {"dir": config.output_dir,
                          "figures": "true" if config.figures else "false"}
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for name, kv in sections.items():
        parser[name] = kv
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
