"""Run configuration files.

INI syntax with two sections. ``[problem]`` picks a built-in problem by name
and may override its numeric parameters; ``[output]`` controls artifact
paths. Unknown sections, unknown keys, and unparseable values are all
collected and reported together in one error. A relative output directory
resolves against IGTOP_OUTPUT_ROOT when that variable is set, else against
the config file's own directory.

Example::

    [problem]
    name = cantilever
    budget = 200
    move_limit = 0.01

    [output]
    directory = out/cantilever
    snapshot_every = 25
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from pathlib import Path

from .driver import ProblemSpec, get_problem
from .errors import ConfigError

_PROBLEM_KEYS = {
    "name": str,
    "nx": int,
    "ny": int,
    "rbf_nx": int,
    "rbf_ny": int,
    "budget": int,
    "move_limit": float,
    "volume_fraction": float,
}

_OUTPUT_KEYS = {
    "directory": str,
    "history": str,
    "snapshot_every": int,
    "vtk": bool,
    "contour": bool,
    "gradient_check": bool,
}

_BOOL_STATES = {"1": True, "yes": True, "true": True, "on": True,
                "0": False, "no": False, "false": False, "off": False}


@dataclass
class OutputConfig:
    directory: Path = Path("igtop-out")
    history: str = "history.csv"
    snapshot_every: int = 10
    vtk: bool = True
    contour: bool = True
    gradient_check: bool = False


@dataclass
class RunConfig:
    problem: ProblemSpec
    output: OutputConfig


def _parse_section(cp, section, schema, problems):
    out = {}
    if not cp.has_section(section):
        return out
    for key, raw in cp.items(section):
        if key not in schema:
            known = ", ".join(sorted(schema))
            problems.append(f"[{section}] has unknown key {key!r} "
                            f"(known: {known})")
            continue
        typ = schema[key]
        try:
            if typ is bool:
                try:
                    out[key] = _BOOL_STATES[raw.strip().lower()]
                except KeyError:
                    raise ValueError(f"not a boolean: {raw!r}")
            else:
                out[key] = typ(raw)
        except ValueError as err:
            problems.append(f"[{section}] {key}: {err}")
    return out


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"config syntax: {err}") from None

    problems = []
    for section in cp.sections():
        if section not in ("problem", "output"):
            problems.append(f"unknown section [{section}]")
    prob_kw = _parse_section(cp, "problem", _PROBLEM_KEYS, problems)
    out_kw = _parse_section(cp, "output", _OUTPUT_KEYS, problems)

    name = prob_kw.pop("name", None)
    if name is None:
        problems.append("[problem] section must set 'name'")
    if problems:
        raise ConfigError(problems)

    problem = get_problem(name, **prob_kw)

    root = os.environ.get("IGTOP_OUTPUT_ROOT")
    directory = Path(out_kw.pop("directory", OutputConfig.directory))
    if not directory.is_absolute():
        if root:
            directory = Path(root) / directory
        elif base_dir is not None:
            directory = base_dir / directory
    output = OutputConfig(directory=directory, **out_kw)
    if output.snapshot_every < 0:
        raise ConfigError("[output] snapshot_every must be >= 0")
    return RunConfig(problem=problem, output=output)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return parse_config(text, base_dir=path.parent)
