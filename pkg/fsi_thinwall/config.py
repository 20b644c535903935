"""Run configuration for studies and the benchmark."""

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Type, TypeVar

import yaml

from fsi_thinwall.bench import BenchConfig
from fsi_thinwall.forms import DEFAULT_EDGE_POINTS, DEFAULT_LOAD_DEGREE, ELEMENT_PAIRS
from fsi_thinwall.linalg import PIVOT_TOL
from fsi_thinwall.mms import BOUNDARY_CONDITIONS
from fsi_thinwall.scheme import STRUCTURE_ENDS, PhysicalParams
from fsi_thinwall.scheme.partitioned import PRESSURE_GAUGES

logger = logging.getLogger(__name__)

S = TypeVar("S")

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class ConfigError(ValueError):
    """Raised for unreadable or malformed configuration files."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def parse_tau_rule(rule: str, element: Optional[str] = None) -> Callable[[float], float]:
    """Step size as a function of the mesh size.

    Args:
        rule: "h3", "h2", "fixed:<value>", a plain number, or "auto" (h3 for th, h2 for mini)
        element: Element pair, needed for "auto"

    Returns:
        Function h -> tau

    Raises:
        ValueError: If the rule cannot be parsed
    """
    text = str(rule).strip().lower()
    if text == "auto":
        if element not in ELEMENT_PAIRS:
            raise ValueError(
                f"Tau rule 'auto' needs an element in {sorted(ELEMENT_PAIRS)}, got {element}"
            )
        text = "h3" if element == "th" else "h2"
    if text in ("h3", "h2", "h1"):
        power = int(text[1])
        return lambda h: h**power
    value_text = text[len("fixed:"):] if text.startswith("fixed:") else text
    try:
        value = float(value_text)
    except ValueError:
        raise ValueError(
            f"Invalid tau rule '{rule}', expected h3, h2, fixed:<value> or a number"
        ) from None
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"Fixed tau must be positive, got {value}")
    return lambda h: value


@dataclass
class PhysicsSection:
    """Physical parameters of the manufactured problem (all 1 by default)."""

    rho_f: float = 1.0
    mu: float = 1.0
    rho_s: float = 1.0
    eps_s: float = 1.0
    C0: float = 1.0
    C1: float = 1.0

    def params(self, beta: float) -> PhysicalParams:
        return PhysicalParams(beta=beta, **asdict(self))


@dataclass
class DiscretizationSection:
    """Discretization choices of the convergence, stability and projection studies.

    Attributes:
        element: "th" or "mini"
        bc: "periodic" or "dirichlet"
        levels: Number of mesh levels
        base_level: Cells across the unit height on the coarsest level
        beta: Traction stabilization parameter
        tau_rule: Step size rule, see parse_tau_rule
        T: Final time
        structure_ends: "natural", "pinned" or "periodic"
    """

    element: str = "th"
    bc: str = "periodic"
    levels: int = 3
    base_level: int = 8
    beta: float = 0.5
    tau_rule: str = "auto"
    T: float = 0.1
    structure_ends: str = "natural"

    def __post_init__(self):
        if self.element not in ELEMENT_PAIRS:
            raise ValueError(
                f"Unknown element '{self.element}', expected one of {sorted(ELEMENT_PAIRS)}"
            )
        if self.bc not in BOUNDARY_CONDITIONS:
            raise ValueError(
                f"Unknown boundary condition '{self.bc}', expected one of {BOUNDARY_CONDITIONS}"
            )
        if self.structure_ends not in STRUCTURE_ENDS:
            raise ValueError(
                f"Unknown structure ends '{self.structure_ends}', expected one of {STRUCTURE_ENDS}"
            )
        if int(self.levels) != self.levels or self.levels < 1:
            raise ValueError(f"levels must be a positive integer, got {self.levels}")
        if int(self.base_level) != self.base_level or self.base_level < 1:
            raise ValueError(f"base_level must be a positive integer, got {self.base_level}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        parse_tau_rule(self.tau_rule, self.element)

    def tau_for(self, h: float) -> float:
        return parse_tau_rule(self.tau_rule, self.element)(h)


@dataclass
class QuadratureSection:
    """Quadrature settings.

    Attributes:
        volume_degree: Triangle rule degree for matrices; None integrates exactly
        load_degree: Triangle rule degree for analytic loads and error norms
        edge_points: Gauss points per Sigma edge
    """

    volume_degree: Optional[int] = None
    load_degree: int = DEFAULT_LOAD_DEGREE
    edge_points: int = DEFAULT_EDGE_POINTS


@dataclass
class ToleranceSection:
    stability_rtol: float = 1e-10
    singular_pivot: float = PIVOT_TOL
    ntd_symmetry: float = 1e-12


_SECTIONS: Dict[str, type] = {
    "physics": PhysicsSection,
    "discretization": DiscretizationSection,
    "quadrature": QuadratureSection,
    "tolerances": ToleranceSection,
    "bench": BenchConfig,
}


def _build(cls: Type[S], data: Any, path: str) -> S:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"Section '{path}' must be a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown key '{path}.{unknown[0]}'")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid section '{path}': {e}") from e


@dataclass
class SimConfig:
    """Configuration of a CLI run.

    Attributes:
        physics: Physical parameters of the manufactured problem
        discretization: Element, boundary conditions, levels, beta and time stepping
        quadrature: Quadrature degrees
        tolerances: Stability, pivot and symmetry tolerances
        bench: Benchmark parameters
        output_dir: Directory for CSV, VTK and manifest files
        seed: Seed of randomized checks
        jobs: Worker processes for independent levels
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR)
        record_max_errors: Also record max-over-time errors in convergence studies
        pressure_gauge: "none" or "mean_zero" pressure normalization of the fluid step
    """

    physics: PhysicsSection = field(default_factory=PhysicsSection)
    discretization: DiscretizationSection = field(default_factory=DiscretizationSection)
    quadrature: QuadratureSection = field(default_factory=QuadratureSection)
    tolerances: ToleranceSection = field(default_factory=ToleranceSection)
    bench: BenchConfig = field(default_factory=BenchConfig)
    output_dir: str = "results"
    seed: int = 0
    jobs: int = 1
    log_level: str = "INFO"
    record_max_errors: bool = False
    pressure_gauge: str = "none"

    def __post_init__(self):
        if str(self.log_level).upper() not in LOG_LEVELS:
            raise ValueError(f"Unknown log level '{self.log_level}', expected one of {LOG_LEVELS}")
        if self.pressure_gauge not in PRESSURE_GAUGES:
            raise ValueError(
                f"Unknown pressure gauge '{self.pressure_gauge}', expected one of {PRESSURE_GAUGES}"
            )
        if int(self.jobs) != self.jobs or self.jobs < 1:
            raise ValueError(f"jobs must be a positive integer, got {self.jobs}")

    @classmethod
    def from_dict(cls, config_dict: Optional[Dict[str, Any]]) -> "SimConfig":
        """Build a configuration from a nested dictionary.

        Raises:
            ConfigError: On unknown keys or invalid values
        """
        config_dict = dict(config_dict or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(config_dict) - known)
        if unknown:
            raise ConfigError(f"Unknown key '{unknown[0]}'")

        kwargs: Dict[str, Any] = {
            name: _build(section, config_dict.pop(name, None), name)
            for name, section in _SECTIONS.items()
        }
        kwargs.update(config_dict)
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def from_yaml(cls, yaml_path: str) -> "SimConfig":
        """Load configuration from YAML file.

        Args:
            yaml_path: Path to YAML configuration file

        Returns:
            SimConfig instance

        Raises:
            FileNotFoundError: If the file does not exist
            ConfigError: If the file is not valid YAML or holds invalid settings
        """
        path = Path(yaml_path)
        if not path.is_file():
            raise FileNotFoundError(f"Config file not found: {yaml_path}")
        text = path.read_text()
        try:
            config_dict = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ConfigError(
                f"Cannot parse {yaml_path}: {getattr(e, 'problem', e)}",
                mark.line + 1 if mark is not None else None,
            ) from e
        if config_dict is not None and not isinstance(config_dict, dict):
            raise ConfigError(f"Top level of {yaml_path} must be a mapping", 1)
        try:
            config = cls.from_dict(config_dict)
        except ConfigError as e:
            raise ConfigError(f"{yaml_path}: {e}", _line_of_error(text, str(e))) from e
        logger.info(f"Loaded configuration from {yaml_path}")
        return config

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary.

        Returns:
            Configuration as dictionary
        """
        return asdict(self)

    def save(self, yaml_path: str) -> None:
        """Save configuration to YAML file.

        Args:
            yaml_path: Path to save YAML configuration
        """
        with open(yaml_path, "w") as f:
            yaml.safe_dump(self.to_dict(), f, default_flow_style=False, sort_keys=True)

    def physical_params(self) -> PhysicalParams:
        return self.physics.params(self.discretization.beta)

    def apply_overrides(self, overrides: Dict[str, Any]) -> "SimConfig":
        """New config with dotted-key overrides, e.g. {"discretization.beta": 0.0}."""
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            target = data
            *parents, leaf = key.split(".")
            for parent in parents:
                target = target[parent]
            if leaf not in target:
                raise ConfigError(f"Unknown key '{key}'")
            target[leaf] = value
        return SimConfig.from_dict(data)


def _line_of_error(text: str, message: str) -> Optional[int]:
    """1-based line of the key an error message quotes, if it can be found."""
    start = message.find("'")
    end = message.find("'", start + 1)
    if start < 0 or end < 0:
        return None
    keys: Sequence[str] = message[start + 1 : end].split(".")
    node = yaml.compose(text)
    line: Optional[int] = None
    for key in keys:
        if not isinstance(node, yaml.MappingNode):
            break
        for key_node, value_node in node.value:
            if key_node.value == key:
                line = key_node.start_mark.line + 1
                node = value_node
                break
        else:
            break
    return line


def config_summary(config: SimConfig) -> List[str]:
    """Human-readable lines of the settings that shape a study."""
    d = config.discretization
    q = config.quadrature
    return [
        f"element={d.element} bc={d.bc} levels={d.levels} base_level={d.base_level}",
        f"beta={d.beta} tau_rule={d.tau_rule} T={d.T} ends={d.structure_ends}",
        f"load_degree={q.load_degree} edge_points={q.edge_points} volume_degree={q.volume_degree}",
    ]
