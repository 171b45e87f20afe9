from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from omegaconf import DictConfig, OmegaConf
from omegaconf.errors import ConfigAttributeError, ConfigKeyError, ValidationError
from thefuzz import process

from medzim.effects import ExposureContrast
from medzim.estimate import OptimizerSpec
from medzim.model import ModelConfig, QuadratureSpec
from medzim.utils.enums import Mechanism, QuadratureMethod, Scenario

__all__ = [
    "ConfigError",
    "RunConfig",
    "ModelSection",
    "OptimizerSection",
    "ContrastSection",
    "AnalyzeSection",
    "Simulate1Section",
    "Simulate2Section",
    "load",
]


class ConfigError(ValueError):
    """The run configuration is inconsistent or has unknown keys."""


@dataclass
class ModelSection:
    """Configuration of the joint model.

    Attributes
    ----------
    mechanism : Mechanism
        How present taxa are observed as zero. Defaults to Mechanism.LOD.
    eta : float | None
        Rate of the exponential mechanism. Required by, and only by, Mechanism.EXPONENTIAL.
    beta4 : bool
        Keep the exposure × presence interaction. Defaults to True.
    beta5 : bool
        Keep the exposure × abundance interaction. Defaults to True.
    quadrature : QuadratureMethod
        Integration of the false-zero term. Defaults to QuadratureMethod.GAUSS.
    quadrature_order : int
        Nodes of the fixed-order rule. Defaults to 48.
    """

    mechanism: Mechanism = Mechanism.LOD
    eta: float | None = None
    beta4: bool = True
    beta5: bool = True
    quadrature: QuadratureMethod = QuadratureMethod.GAUSS
    quadrature_order: int = 48

    def build(self, beta5: bool | None = None) -> ModelConfig:
        return ModelConfig(
            include_interaction_indicator=self.beta4,
            include_interaction_linear=self.beta5 if beta5 is None else beta5,
            mechanism=self.mechanism.build(self.eta),
            quadrature=QuadratureSpec(method=self.quadrature, order=self.quadrature_order),
        )


@dataclass
class OptimizerSection:
    """Configuration of the maximum-likelihood fits.

    Attributes
    ----------
    method : str
        ``BFGS`` or ``L-BFGS-B``.
    max_iters : int
    grad_tol : float
        Sup-norm tolerance on the gradient of the per-subject mean negative log-likelihood.
    n_restarts : int
        Starts per fit, the first one deterministic. Defaults to 1.
    jitter : float
        Relative jitter of the additional starts.
    """

    method: str = "BFGS"
    max_iters: int = 500
    grad_tol: float = 1e-5
    n_restarts: int = 1
    jitter: float = 0.1

    def build(self, seed: int) -> OptimizerSpec:
        return OptimizerSpec(
            method=self.method,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            n_restarts=self.n_restarts,
            seed=seed,
            jitter=self.jitter,
        )


@dataclass
class ContrastSection:
    """The exposure change ``x1 → x2``, and the mediator value of the CDE if wanted."""

    x1: float = 0.0
    x2: float = 1.0
    cde_m: float | None = None

    def build(self) -> ExposureContrast:
        return ExposureContrast(x1=self.x1, x2=self.x2, m_controlled=self.cde_m)


@dataclass
class AnalyzeSection:
    """Inputs of ``medzim analyze``.

    Attributes
    ----------
    ra : Path | None
        Samples × taxa relative abundance table, first column the sample id.
    meta : Path | None
        Sample metadata with the columns sample_id, library_size, x and y.
    """

    ra: Path | None = None
    meta: Path | None = None


@dataclass
class Simulate1Section:
    """Settings of the single-taxon simulation study.

    Attributes
    ----------
    scenario : Scenario
        Generating parameters. Defaults to Scenario.LOW_RA.
    n : int
        Sample size of each replicate.
    n_reps : int
        Number of replicates.
    fit_beta5 : bool
        Estimate β5 although the data are generated with β5 = 0. Defaults to False.
    library_pool : Path | None
        One-column file of library sizes. Defaults to the bundled pool.
    """

    scenario: Scenario = Scenario.LOW_RA
    n: int = 100
    n_reps: int = 20
    fit_beta5: bool = False
    library_pool: Path | None = None


@dataclass
class Simulate2Section:
    """Settings of the multi-taxon screening simulation study.

    Attributes
    ----------
    n : int
        Sample size of each replicate.
    k_plus_1 : int
        Number of taxa.
    n_reps : int
        Number of replicates.
    library_pool : Path | None
        One-column file of library sizes. Defaults to the bundled pool.
    export : Path | None
        Directory where the first replicate is written in the ``analyze`` input format.
    """

    n: int = 300
    k_plus_1: int = 10
    n_reps: int = 20
    library_pool: Path | None = None
    export: Path | None = None


@dataclass
class RunConfig:
    """The structured type of a medzim run configuration.

    Attributes
    ----------
    out : Path
        Output directory.
    seed : int
        Seed of every random stream of the run.
    threads : int | None
        Worker threads. Defaults to the available parallelism. Never changes a result.
    fdr : float
        Target false discovery rate of the screens.
    min_positive : int
        Taxa observed in fewer samples are skipped.
    model : ModelSection
    optimizer : OptimizerSection
    contrast : ContrastSection
    analyze : AnalyzeSection
    simulate1 : Simulate1Section
    simulate2 : Simulate2Section
    """

    out: Path = Path("medzim_out")
    seed: int = 0
    threads: int | None = None
    fdr: float = 0.2
    min_positive: int = 5
    model: ModelSection = field(default_factory=ModelSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    contrast: ContrastSection = field(default_factory=ContrastSection)
    analyze: AnalyzeSection = field(default_factory=AnalyzeSection)
    simulate1: Simulate1Section = field(default_factory=Simulate1Section)
    simulate2: Simulate2Section = field(default_factory=Simulate2Section)

    def validate(self) -> None:
        """Check the invariants that span several keys.

        Raises
        ------
        ConfigError
            On the first violated invariant.
        """
        match self.model.mechanism:
            case Mechanism.EXPONENTIAL:
                if self.model.eta is None:
                    raise ConfigError("The exponential mechanism needs model.eta (--eta).")
                if not self.model.eta > 0:
                    raise ConfigError(f"model.eta must be positive, got {self.model.eta}.")
            case Mechanism.LOD:
                if self.model.eta is not None:
                    raise ConfigError("model.eta is only used by the exponential mechanism.")
        if not 0 < self.fdr < 1:
            raise ConfigError(f"fdr must lie in (0, 1), got {self.fdr}.")
        if self.contrast.x1 == self.contrast.x2:
            raise ConfigError("contrast.x1 and contrast.x2 must differ.")
        if self.contrast.cde_m is not None and not 0 <= self.contrast.cde_m <= 1:
            raise ConfigError(f"contrast.cde_m must lie in [0, 1], got {self.contrast.cde_m}.")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}.")
        if self.min_positive < 1:
            raise ConfigError("min_positive must be positive.")
        if self.simulate1.n_reps < 1 or self.simulate2.n_reps < 1:
            raise ConfigError("Simulations need at least one replicate.")
        if self.simulate1.n < 2 or self.simulate2.n < 2:
            raise ConfigError("Simulations need at least two samples.")
        if self.simulate2.k_plus_1 < 2:
            raise ConfigError("simulate2.k_plus_1 must be at least 2.")

    def manifest(self) -> dict[str, Any]:
        """The configuration as plain containers, without the keys that cannot change results."""
        container = OmegaConf.to_container(OmegaConf.structured(self), enum_to_str=True)
        assert isinstance(container, dict)
        for key in ("out", "threads"):
            container.pop(key)
        return _stringify_paths(container)


def _stringify_paths(node: Any) -> Any:
    match node:
        case dict():
            return {k: _stringify_paths(v) for k, v in node.items()}
        case Path():
            return str(node)
        case _:
            return node


def _dotted_keys(config: DictConfig, prefix: str = "") -> Iterator[str]:
    for key in config:
        dotted = f"{prefix}{key}"
        yield dotted
        value = config[key]
        if isinstance(value, DictConfig):
            yield from _dotted_keys(value, f"{dotted}.")


def load(path: Path | None = None, overrides: Sequence[str] = ()) -> RunConfig:
    """Load a run configuration.

    Three layers are merged in order: the structured defaults, the YAML file (or every YAML
    file of a directory) at `path`, and the dotlist `overrides` built from the CLI flags.

    Parameters
    ----------
    path : Path | None
        Optional YAML file or directory.
    overrides : Sequence[str]
        ``key=value`` items, e.g. ``model.eta=0.5``.

    Returns
    -------
    RunConfig
        The validated configuration.
    """
    from_structured = OmegaConf.structured(RunConfig)
    layers = [from_structured]
    if path is not None:
        if path.is_dir():
            files = [file for file in sorted(path.iterdir()) if file.suffix == ".yaml"]
            layers.append(OmegaConf.merge(*[OmegaConf.load(file) for file in files]))
        else:
            layers.append(OmegaConf.load(path))
    layers.append(OmegaConf.from_dotlist(list(overrides)))
    try:
        merged = OmegaConf.merge(*layers)
    except (ConfigKeyError, ConfigAttributeError) as e:
        key = str(e.full_key or e.key)
        best_match, _ = process.extractOne(key, list(_dotted_keys(from_structured)))
        raise ConfigError(f"Unknown configuration key {key}. Did you mean {best_match} ?") from e
    except ValidationError as e:
        raise ConfigError(f"Invalid value for {e.full_key}: {e.msg}") from e
    config = OmegaConf.to_object(merged)
    assert isinstance(config, RunConfig)
    config.validate()
    return config
