"""
boltzmann/presets.py
────────────────────
Named training setups for `manage.py train --preset`.

  toy-bas            sDBM [9, 6, 6] on the 14 bars-and-stripes 3x3 patterns
  mnist-{2,3,4}hl    sDBM 784-500-…-500 on stochastically binarized MNIST
  silhouettes-{…}hl  sDBM 784-500-…-500 on the SILB silhouettes container

Appending '-smoke' to a name gives 100 updates without AIS monitoring.
Benchmark files are looked up under BM_DATA_DIR.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

from boltzmann.conf import setting
from boltzmann.datasets import BinaryDataset, load_mnist, load_silhouettes, toy_dataset
from boltzmann.exceptions import ValidationError
from boltzmann.network import NetworkSpec
from boltzmann.training import (
    MNIST_RANGES, SILHOUETTES_RANGES, Centering, HyperparameterRanges, Regularization, TrainConfig,
)

MNIST_TRAIN       = 'train-images-idx3-ubyte.gz'
MNIST_TEST        = 't10k-images-idx3-ubyte.gz'
SILHOUETTES_FILE  = 'caltech101_silhouettes_28.silb'
HIDDEN_UNITS      = 500
SMOKE_UPDATES     = 100


@dataclass(frozen=True)
class Preset:
    name:        str
    hidden:      tuple[int, ...]
    config:      TrainConfig
    load:        Callable[[Path, int], BinaryDataset]
    ranges:      HyperparameterRanges | None = None

    def spec(self, n_vis: int) -> NetworkSpec:
        return NetworkSpec.sdbm((n_vis,) + self.hidden)

    def dataset(self, data_dir: str | Path | None = None, seed: int = 0) -> BinaryDataset:
        return self.load(Path(data_dir or setting('BM_DATA_DIR', 'data')), seed)

    def smoke(self) -> 'Preset':
        config = replace(self.config, total_updates=SMOKE_UPDATES, log_every=SMOKE_UPDATES // 2,
                         monitor_ais_runs=None, monitor_ais_betas=None)
        return replace(self, name=f'{self.name}-smoke', config=config)


def _toy_bas(data_dir: Path, seed: int) -> BinaryDataset:
    return toy_dataset('bars-and-stripes', {'width': 3, 'height': 3}, seed)


def _mnist(data_dir: Path, seed: int) -> BinaryDataset:
    return load_mnist(data_dir / MNIST_TRAIN, data_dir / MNIST_TEST, seed)


def _silhouettes(data_dir: Path, seed: int) -> BinaryDataset:
    return load_silhouettes(data_dir / SILHOUETTES_FILE)


TOY_BAS = Preset(
    name='toy-bas',
    hidden=(6, 6),
    config=TrainConfig(
        initial_lr=0.05, total_updates=20_000, batch_size=20, pos_chain_steps=5, neg_chain_steps=5,
        reg=Regularization(eta=1.0, base_strength=1e-4), centering=Centering(offset_update_rate=0.01),
        log_every=2_000,
    ),
    load=_toy_bas,
)


def _benchmark(name: str, layers: int, pos_steps: int, lr: float, load, ranges) -> Preset:
    return Preset(
        name=name,
        hidden=(HIDDEN_UNITS,) * layers,
        config=TrainConfig(
            initial_lr=lr, total_updates=1_000_000, batch_size=100, pos_chain_steps=pos_steps,
            neg_chain_steps=5, reg=Regularization(eta=2.0, base_strength=1e-5),
            centering=Centering(offset_update_rate=1e-6), log_every=50_000,
            monitor_ais_runs=100, monitor_ais_betas=30_000,
        ),
        load=load,
        ranges=ranges,
    )


PRESETS: dict[str, Preset] = {TOY_BAS.name: TOY_BAS}
for _layers in (2, 3, 4):
    for _p in (_benchmark(f'mnist-{_layers}hl', _layers, 5, 1e-3, _mnist, MNIST_RANGES),
               _benchmark(f'silhouettes-{_layers}hl', _layers, 1, 10 ** -3.5, _silhouettes, SILHOUETTES_RANGES)):
        PRESETS[_p.name] = _p


def get_preset(name: str) -> Preset:
    smoke = name.endswith('-smoke')
    base  = PRESETS.get(name[:-len('-smoke')] if smoke else name)
    if base is None:
        names = sorted(PRESETS) + sorted(f'{n}-smoke' for n in PRESETS)
        raise ValidationError(f'unknown preset {name!r}; choose from {", ".join(names)}')
    return base.smoke() if smoke else base
