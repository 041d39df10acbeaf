"""INI-style configuration files shared by every CLI subcommand.

One file holds [synth], [model], [train], and [augment] sections; any
key can be overridden on the command line with ``--set section.key=value``
(flags win).  Output directories receive a verbatim echo of the file so
every artifact records how it was produced.
"""

from __future__ import annotations

import configparser
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

from .augment import AugmentConfig
from .layout import KeypointLayout, layout_from_preset
from .model import ModelConfig
from .synthgen import SynthConfig
from .train import TrainConfig


class ConfigError(ValueError):
    """Raised for unreadable or inconsistent configuration files."""


def load_config(path: Union[str, Path], overrides: Iterable[str] = ()) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    apply_overrides(cp, overrides)
    return cp


def empty_config() -> configparser.ConfigParser:
    return configparser.ConfigParser()


def apply_overrides(cp: configparser.ConfigParser, overrides: Iterable[str]) -> None:
    """Apply ``section.key=value`` strings on top of the parsed file."""
    for item in overrides:
        target, _, value = item.partition("=")
        section, _, key = target.partition(".")
        if not (section and key and _):
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key.strip(), value.strip())


def _get(cp, section, key, convert, default):
    if not cp.has_section(section) or not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return convert(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def layout_from_config(cp, section: str = "synth") -> KeypointLayout:
    preset = _get(cp, section, "layout", str, "full").strip()
    return layout_from_preset(preset)


def synth_config_from(cp) -> SynthConfig:
    return SynthConfig(
        layout=layout_from_config(cp, "synth"),
        n_classes=_get(cp, "synth", "n_classes", int, 20),
        samples_per_class=_get(cp, "synth", "samples_per_class", int, 50),
        n_signers=_get(cp, "synth", "n_signers", int, 5),
        window_len=_get(cp, "synth", "window_len", int, 16),
        noise_sigma=_get(cp, "synth", "noise_sigma", float, 1.0),
        signer_offset_sigma=_get(cp, "synth", "signer_offset_sigma", float, 5.0),
        seed=_get(cp, "synth", "seed", int, 0),
        width=_get(cp, "synth", "width", int, 444),
        height=_get(cp, "synth", "height", int, 444),
        fps=_get(cp, "synth", "fps", float, 25.0),
    )


def model_config_from(
    cp,
    k: Optional[int] = None,
    vocab_size: Optional[int] = None,
) -> ModelConfig:
    """Build the model configuration; ``k``/``vocab_size`` from the caller
    (usually the dataset) take precedence over the file."""
    if k is None:
        preset = _get(cp, "model", "layout", str, None)
        k = _get(cp, "model", "k", int, None)
        if k is None:
            if preset is None:
                raise ConfigError("[model] needs either k, layout, or a dataset to infer K from")
            k = layout_from_preset(preset.strip()).total()
    if vocab_size is None:
        vocab_size = _get(cp, "model", "vocab_size", int, None)
        if vocab_size is None:
            raise ConfigError("[model] vocab_size is required when no vocabulary file is given")
    return ModelConfig(
        vocab_size=vocab_size,
        k=k,
        d_model=_get(cp, "model", "d_model", int, 512),
        n_layers=_get(cp, "model", "n_layers", int, 6),
        n_heads=_get(cp, "model", "n_heads", int, 8),
        ffn_dim=_get(cp, "model", "ffn_dim", int, 2048),
        attention_mode=_get(cp, "model", "attention_mode", str, "frame_wise").strip(),
        window_len=_get(cp, "model", "window_len", int, 16),
        dropout_rate=_get(cp, "model", "dropout_rate", float, 0.1),
        init_seed=_get(cp, "model", "init_seed", int, 0),
    )


def augment_config_from(cp) -> AugmentConfig:
    enabled_raw = _get(cp, "augment", "enabled", str, "shift")
    names = [n.strip() for n in enabled_raw.split(",") if n.strip() and n.strip() != "none"]
    return AugmentConfig(
        shift_range=_get(cp, "augment", "shift_range", float, 2.0),
        scale_range=(
            _get(cp, "augment", "scale_min", float, 0.90),
            _get(cp, "augment", "scale_max", float, 1.10),
        ),
        rotation_range=_get(cp, "augment", "rotation_range", float, 10.0),
        flip_prob=_get(cp, "augment", "flip_prob", float, 0.5),
        enabled=frozenset(names),
        seed=_get(cp, "augment", "seed", int, 0),
    )


def train_config_from(cp) -> TrainConfig:
    return TrainConfig(
        learning_rate=_get(cp, "train", "learning_rate", float, 1e-4),
        batch_size=_get(cp, "train", "batch_size", int, 128),
        patience=_get(cp, "train", "patience", int, 3),
        beta1=_get(cp, "train", "beta1", float, 0.9),
        beta2=_get(cp, "train", "beta2", float, 0.999),
        epsilon=_get(cp, "train", "epsilon", float, 1e-8),
        max_epochs=_get(cp, "train", "max_epochs", int, 50),
        seed=_get(cp, "train", "seed", int, 0),
        augmentation=augment_config_from(cp),
        augment_enabled=_get(cp, "train", "augment", _bool, True),
    )


def echo_config(cp: configparser.ConfigParser, out_path: Union[str, Path]) -> None:
    """Write the effective (post-override) configuration."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        cp.write(fh)


def write_dataset_info(
    dataset_dir: Union[str, Path],
    layout_preset: str,
    window_len: int,
    echo: Optional[configparser.ConfigParser] = None,
) -> None:
    """Write dataset.ini: a [dataset] section naming the layout preset and
    window length, followed by an echo of the generating configuration."""
    cp = configparser.ConfigParser()
    cp.add_section("dataset")
    cp.set("dataset", "layout", layout_preset)
    cp.set("dataset", "window_len", str(window_len))
    if echo is not None:
        for section in echo.sections():
            if section == "dataset":
                continue
            cp.add_section(section)
            for key, value in echo.items(section):
                cp.set(section, key, value)
    echo_config(cp, Path(dataset_dir) / "dataset.ini")


def dataset_info(dataset_dir: Union[str, Path]) -> Tuple[KeypointLayout, int]:
    """A dataset's keypoint layout and window length, from dataset.ini."""
    path = Path(dataset_dir) / "dataset.ini"
    if not path.is_file():
        raise ConfigError(
            f"{path} not found; datasets need a dataset.ini with a [dataset] section "
            "naming layout and window_len"
        )
    cp = load_config(path)
    preset = _get(cp, "dataset", "layout", str, None)
    window_len = _get(cp, "dataset", "window_len", int, None)
    if preset is None or window_len is None:
        raise ConfigError(f"{path} must define [dataset] layout and window_len")
    return layout_from_preset(preset.strip()), window_len
