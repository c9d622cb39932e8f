"""Configuration management for regcert."""

import configparser
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from .errors import ConfigError

# Load environment variables from .env file
env_path = Path(__file__).parent.parent / '.env'
load_dotenv(dotenv_path=env_path)


class Config:
    """Toolkit-wide defaults."""

    # Certificates
    ETA = 0.05                      # slack in κ(1+η)
    SAFETY_FACTOR = 1.1             # validate() tolerance on certified constants
    KAPPA_FLOOR = 1.0               # empirical constants are floored before certification
    ISOLATED_RANGE_RADIUS = 10.0    # range window for isolated-calmness sweeps
    DEFAULT_NORM = 'sup'

    # Estimators
    DEFAULT_STEP = 1e-3             # domain grid spacing when a document gives none
    GRAPH_TOL = 1e-9                # ȳ ∈ F(x̄) check
    PAIR_STEPS = 21                 # nodes per axis for pairwise sweeps
    MAX_BLOCK = 2_000_000           # entries per distance block in nearest-point searches
    RADIUS_LADDER = (4, 8, 16)      # r = a/4, a/8, a/16 for strong_around verification

    # Uniformization
    BISECTION_HALVINGS = 20
    COVER_RADIUS_FLOOR = 1e-6

    # Local solver
    SOLVER_POINTS_PER_SIDE = 21
    SOLVER_MAX_DEPTH = 12
    SOLVER_REFINE_FACTOR = 10
    DEFAULT_TRUST_RADIUS = 0.5
    DEFAULT_TOL = 1e-8

    # Paths
    BASE_DIR = Path(__file__).parent.parent
    OUTPUT_DIR = Path(os.getenv('REGCERT_OUT_DIR', '') or 'out')
    LOG_FILE = 'regcert.log'

    @classmethod
    def validate(cls) -> List[str]:
        """Check the defaults for consistency."""
        errors = []

        if not cls.ETA > 0:
            errors.append(f"ETA must be positive (got {cls.ETA})")

        if not cls.SAFETY_FACTOR >= 1:
            errors.append(f"SAFETY_FACTOR must be at least 1 (got {cls.SAFETY_FACTOR})")

        if not cls.KAPPA_FLOOR > 0:
            errors.append(f"KAPPA_FLOOR must be positive (got {cls.KAPPA_FLOOR})")

        if cls.DEFAULT_NORM not in NORMS:
            errors.append(f"DEFAULT_NORM must be one of {', '.join(NORMS)} (got {cls.DEFAULT_NORM!r})")

        if cls.SOLVER_REFINE_FACTOR <= 1:
            errors.append(f"SOLVER_REFINE_FACTOR must exceed 1 (got {cls.SOLVER_REFINE_FACTOR})")

        if list(cls.RADIUS_LADDER) != sorted(cls.RADIUS_LADDER) or min(cls.RADIUS_LADDER) < 2:
            errors.append(f"RADIUS_LADDER must be increasing divisors >= 2 (got {cls.RADIUS_LADDER})")

        return errors

    @classmethod
    def create_directories(cls, output_dir: Optional[Path] = None) -> Path:
        """Create the output directory if it doesn't exist."""
        out = Path(output_dir) if output_dir is not None else cls.OUTPUT_DIR
        out.mkdir(exist_ok=True, parents=True)
        return out


# ---------------------------------------------------------------------------
# Experiment documents
# ---------------------------------------------------------------------------

NORMS = ('sup', 'euclidean', 'one')
OPERATIONS = ('estimate', 'certify', 'uniformize', 'follow', 'counterexample')
ESTIMATE_KINDS = ('subreg_at', 'strong_at', 'strong_around', 'calmness', 'lipschitz',
                  'setvalued_calmness', 'isolated_calmness', 'equi_continuity', 'divergence')
CERTIFY_RULES = ('calm', 'setvalued', 'around')

_GRID_KEYS = {'step': 'float', 'range_step': 'float', 'pair_steps': 'int'}

# section -> key -> kind; a tuple kind is a set of allowed strings
SCHEMA: Dict[str, Dict[str, Any]] = {
    'experiment': {
        'operation': OPERATIONS,
        'norm': NORMS,
        'eta': 'float',
        'tol': 'float',
        'safety_factor': 'float',
        'parallel': 'int',
    },
    'estimate': {
        'kind': ESTIMATE_KINDS,
        'map': 'json',
        'function': 'json',
        'family': 'json',
        'x_bar': 'floats',
        'y_bar': 'floats',
        't': 'floats',
        'radius': 'float',
        'range_radius': 'float',
        'a': 'float',
        'b': 'float',
        'r0': 'float',
        'alpha': 'float',
        'radii': 'floats',
        'mode': ('strong', 'subreg'),
        'inverse_step': 'float',
        'step_ratio': 'float',
        **_GRID_KEYS,
    },
    'certify': {
        'rule': CERTIFY_RULES,
        'map': 'json',
        'perturbation': 'json',
        'x_bar': 'floats',
        'y_bar': 'floats',
        'alpha': 'float',
        'a': 'float',
        'b': 'float',
        'r0': 'float',
        'kappa': 'float',
        'mu': 'float',
        'radius': 'float',
        'beta': 'float',
        'range_radius': 'float',
        **_GRID_KEYS,
    },
    'uniformize': {
        'family': 'json',
        'map': 'json',
        'mode': ('around', 'at'),
        't_values': 'floats',
        'x_values': 'floats',
        'guess': 'floats',
        'trust_radius': 'float',
        'a': 'float',
        'b': 'float',
        'floor': 'float',
        **_GRID_KEYS,
    },
    'follow': {
        'family': 'json',
        'map': 'json',
        'path': 'json',
        'horizon': 'float',
        't_steps': 'int',
        'x0': 'floats',
        'trust_radius': 'float',
        'a': 'float',
        'b': 'float',
        'points_per_side': 'int',
        'max_depth': 'int',
        **_GRID_KEYS,
    },
    'counterexample': {
        'radii': 'floats',
        'step_ratio': 'float',
    },
}


def _parse_value(section: str, key: str, raw: str) -> Any:
    kind = SCHEMA[section][key]
    text = raw.strip()
    try:
        if isinstance(kind, tuple):
            if text not in kind:
                raise ValueError(f"expected one of {', '.join(kind)}")
            return text
        if kind == 'float':
            return float(text)
        if kind == 'int':
            return int(text)
        if kind == 'floats':
            return tuple(float(v) for v in text.split(',') if v.strip())
        if kind == 'json':
            return json.dumps(json.loads(text), sort_keys=True, separators=(',', ':'))
        return text
    except ValueError as e:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {e}")


def _format_value(value: Any) -> str:
    if isinstance(value, tuple):
        return ', '.join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentConfig:
    """
    One experiment document: INI sections from a closed schema.

    Values are parsed on load (floats, ints, comma-separated float lists,
    canonical JSON strings for map/function/family/path specs) so two
    documents compare equal iff their canonical forms are equal.
    """

    values: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    @classmethod
    def from_ini(cls, text: str) -> 'ExperimentConfig':
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"Malformed experiment document: {e}")

        values: Dict[str, Dict[str, Any]] = {}
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"Unknown section [{section}]; expected one of {', '.join(SCHEMA)}")
            values[section] = {}
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"Unknown key {key!r} in [{section}]")
                values[section][key] = _parse_value(section, key, raw)
        return cls(values)

    @classmethod
    def load(cls, path: Path) -> 'ExperimentConfig':
        path = Path(path)
        try:
            text = path.read_text(encoding='utf-8')
        except OSError as e:
            raise ConfigError(f"Cannot read {path}: {e}")
        return cls.from_ini(text)

    def to_ini(self) -> str:
        """Canonical text: sections and keys sorted, reals in repr form."""
        lines = []
        for section in sorted(self.values):
            lines.append(f"[{section}]")
            for key in sorted(self.values[section]):
                lines.append(f"{key} = {_format_value(self.values[section][key])}")
            lines.append('')
        return '\n'.join(lines)

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.values.get(section, {}).get(key, default)

    def require(self, section: str, key: str) -> Any:
        value = self.get(section, key)
        if value is None:
            raise ConfigError(f"[{section}] needs {key!r}")
        return value

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.values.get(name, {}))

    def set(self, section: str, key: str, value: Any):
        """Set one value, parsing it the way from_ini would."""
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"Unknown setting [{section}] {key}")
        if isinstance(value, str):
            raw = value
        elif SCHEMA[section][key] == 'json':
            raw = json.dumps(value)
        elif isinstance(value, (list, tuple)):
            raw = _format_value(tuple(float(v) for v in value))
        else:
            raw = _format_value(value)
        self.values.setdefault(section, {})[key] = _parse_value(section, key, raw)

    @property
    def operation(self) -> Optional[str]:
        return self.get('experiment', 'operation')
