"""Experiment configuration files (YAML, unknown keys rejected).

Example::

    name: e1_annulus
    seed: 0                      # training seed; --seed overrides it
    dataset:
      kind: Annulus2D            # Annulus2D | Torus3D | BallShell | LinkedTori
      points_per_class: 2000
      seed: 0
    network:
      dims: [2, 5, 5, 2, 2, 2, 2]        # ReLU hidden layers, softmax last
      # activations: [relu, relu, relu, relu, relu, softmax]
      # layers: [{in_dim: 2, out_dim: 5, activation: relu}, ...]
    train:
      epochs: 2000
      lr: 0.005
    analyses:
      moves: true
      separation: true
      separability: true
      witness_injection: false
      components: {rule: diameter, factor: 0.05}
      isomap: {k: 10, target_dim: 3, max_points: 1000}
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .data import ShapeSpec
from .network import Activation, Hyperparams, LayerSpec, NetworkSpec


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LayerConfig(_Strict):
    in_dim: int = Field(ge=1)
    out_dim: int = Field(ge=1)
    activation: Activation = Activation.RELU


class NetworkConfig(_Strict):
    dims: Optional[list[int]] = None
    activations: Optional[list[Activation]] = None
    layers: Optional[list[LayerConfig]] = None

    @model_validator(mode="after")
    def _check(self):
        if (self.dims is None) == (self.layers is None):
            raise ValueError("give exactly one of network.dims or network.layers")
        if self.dims is not None:
            if len(self.dims) < 2 or min(self.dims) < 1:
                raise ValueError("network.dims needs at least two positive entries")
            if self.activations is not None and len(self.activations) != len(self.dims) - 1:
                raise ValueError(
                    f"network.activations has {len(self.activations)} entries, "
                    f"network.dims implies {len(self.dims) - 1} layers"
                )
        elif self.activations is not None:
            raise ValueError("network.activations only goes with network.dims")
        else:
            for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
                if a.out_dim != b.in_dim:
                    raise ValueError(
                        f"network.layers.{i + 1}.in_dim is {b.in_dim} but "
                        f"network.layers.{i}.out_dim is {a.out_dim}"
                    )
        specs = self.layer_specs()
        for i, ls in enumerate(specs[:-1]):
            if ls.activation is Activation.SOFTMAX:
                raise ValueError(f"network layer {i}: softmax is only allowed last")
        if specs[-1].activation is not Activation.SOFTMAX:
            raise ValueError("network: the last layer must be softmax for classification")
        return self

    def layer_specs(self) -> list[LayerSpec]:
        if self.layers is not None:
            return [LayerSpec(l.in_dim, l.out_dim, l.activation) for l in self.layers]
        acts = self.activations or (
            [Activation.RELU] * (len(self.dims) - 2) + [Activation.SOFTMAX]
        )
        return [LayerSpec(a, b, act) for a, b, act in zip(self.dims, self.dims[1:], acts)]

    def spec(self) -> NetworkSpec:
        return NetworkSpec(tuple(self.layer_specs()))


class TrainConfig(_Strict):
    epochs: int = Field(2000, ge=1)
    lr: float = Field(1e-3, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    batch_size: Optional[int] = Field(None, ge=1)


class ComponentsConfig(_Strict):
    eps: Optional[float] = Field(None, gt=0)
    rule: Literal["diameter", "median_nn"] = "diameter"
    factor: Optional[float] = Field(None, gt=0)


class IsomapConfig(_Strict):
    k: int = Field(10, ge=1)
    target_dim: int = Field(3, ge=1)
    max_points: int = Field(1000, ge=2)


class AnalysesConfig(_Strict):
    moves: bool = True
    separation: bool = True
    separability: bool = True
    witness_injection: bool = False
    components: Optional[ComponentsConfig] = Field(default_factory=ComponentsConfig)
    isomap: Optional[IsomapConfig] = None


class ExperimentConfig(_Strict):
    name: str = "experiment"
    seed: int = Field(0, ge=0, lt=2**64)
    dataset: ShapeSpec
    network: NetworkConfig
    train: TrainConfig = Field(default_factory=TrainConfig)
    analyses: AnalysesConfig = Field(default_factory=AnalysesConfig)
    output: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        layers = self.network.layer_specs()
        if layers[0].in_dim != self.dataset.ambient_dim:
            raise ValueError(
                f"network input dimension {layers[0].in_dim} does not match "
                f"dataset dimension {self.dataset.ambient_dim} (network / dataset.kind)"
            )
        if layers[-1].out_dim != self.dataset.num_classes:
            raise ValueError(
                f"network output dimension {layers[-1].out_dim} does not match "
                f"the {self.dataset.num_classes} classes of the dataset"
            )
        if self.analyses.witness_injection and not layers[0].out_dim < layers[0].in_dim:
            raise ValueError(
                "analyses.witness_injection needs a first layer that reduces dimension "
                f"(got {layers[0].in_dim} -> {layers[0].out_dim})"
            )
        return self

    def hyperparams(self) -> Hyperparams:
        t = self.train
        return Hyperparams(self.seed, t.epochs, t.lr, t.beta1, t.beta2, t.adam_eps, t.batch_size)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=True)


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<config>"
        lines.append(f"{loc}: {err['msg']}")
    return "\n".join(lines)


def parse_config(obj, seed: int | None = None) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a mapping at the top level")
    if seed is not None:
        obj = {**obj, "seed": seed}
    try:
        return ExperimentConfig.model_validate(obj)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        obj = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return parse_config(obj, seed)


def packaged_config(name: str, seed: int | None = None) -> ExperimentConfig:
    """One of the bundled experiment configs (``e1_annulus``, ``e2_torus``, ...)."""
    from importlib import resources

    res = resources.files("toponet") / "configs" / f"{name}.yaml"
    if not res.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return parse_config(yaml.safe_load(res.read_text()), seed)
