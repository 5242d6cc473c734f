"""
Command-line interface: train, enhance, eval and bench.

Machine-readable results go to stdout, one JSON object per line behind the
prefix :data:`PREFIX`; log messages go to stderr. Exit codes: 0 on success, 2
for usage, configuration, shape and audio-format errors, 3 for numeric
failures, 4 for I/O and checkpoint errors.

"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import asdict
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
from attrs import Attribute, field, frozen, validators
from joblib import Parallel, delayed  # type: ignore

from . import (
    _PKG_NAME,
    VERSION,
    ArrayDouble,
    AudioFormatError,
    CheckpointError,
    ConfigError,
    DimensionError,
    NumericError,
)
from .core.pseudorandom_numbers import prng
from .eval import metrics
from .io.audio import AudioClip, read_wav, write_wav
from .io.checkpoint import load_checkpoint, save_checkpoint
from .model import ModelConfig, SpikeStats
from .model.network import DpsnnModel, forward, init
from .model.stream import StreamState, flush, latency, measure_rtf, push_samples
from .train import LossConfig, SynthSpec, TrainConfig
from .train.training import fit_length, train

__version__ = VERSION

logger = logging.getLogger(__name__)

PREFIX = f"@{_PKG_NAME} "

BUNDLED_PREFIX = "bundled:"

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

_INT_KEYS = frozenset({
    "N",
    "B",
    "H",
    "L",
    "stride",
    "K_ctx",
    "sample_rate",
    "epochs",
    "batches_per_epoch",
    "batch_size",
    "val_clips",
    "plateau_patience",
    "seed",
})
_FLOAT_KEYS = frozenset({"w_mse", "lambda2", "lambda3", "lr", "clip_seconds", "grad_clip"})
_BOOL_KEYS = frozenset({"use_scnn", "use_srnn"})
_LIST_KEYS = frozenset({"snr_db", "noise_kinds"})
_PATH_KEYS = frozenset({"history_path"})
RUN_CONFIG_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _LIST_KEYS | _PATH_KEYS

_MODEL_KEYS = ("N", "B", "H", "L", "stride", "K_ctx", "use_scnn", "use_srnn", "sample_rate")


def _parse_bool(_s: str, /) -> bool:
    match _s.lower():
        case "true" | "yes" | "1":
            return True
        case "false" | "no" | "0":
            return False
    raise ValueError(f"not a boolean: {_s!r}")


def _convert(_key: str, _raw: str, /) -> Any:
    try:
        if _key in _INT_KEYS:
            return int(_raw)
        if _key in _FLOAT_KEYS:
            return float(_raw)
        if _key in _BOOL_KEYS:
            return _parse_bool(_raw)
        if _key in _LIST_KEYS:
            _items = [_s.strip() for _s in _raw.split(",") if _s.strip()]
            return tuple(float(_s) for _s in _items) if _key == "snr_db" else tuple(_items)
        return Path(_raw)
    except ValueError as _err:
        raise ConfigError(f"Invalid value for configuration key {_key!r}: {_err}") from _err


def _check_history_path(_i: RunConfig, _a: Attribute[Path | None], _v: Path | None) -> None:
    if _v is not None and not _v.parent.is_dir():
        raise ConfigError(f"history_path: directory {_v.parent} does not exist.")


@frozen
class RunConfig:
    """Everything a command-line run needs, parsed from a configuration file."""

    model: ModelConfig = field(factory=ModelConfig, validator=validators.instance_of(ModelConfig))
    loss: LossConfig = field(factory=LossConfig)
    synth: SynthSpec = field(factory=SynthSpec)
    train: TrainConfig = field(factory=TrainConfig)
    seed: int = field(default=0)

    @seed.validator
    def _check_seed(_i: RunConfig, _a: Attribute[int], _v: int) -> None:
        if _v < 0:
            raise ConfigError(f"seed must be non-negative, got {_v}.")

    history_path: Path | None = field(default=None, validator=_check_history_path)


def parse_run_config(_text: str, /, *, base_dir: Path | None = None) -> RunConfig:
    """Parse :code:`key = value` lines; :code:`#` starts a comment

    Relative paths are taken relative to :code:`base_dir`.

    Raises
    ------
    ConfigError
        On a malformed line, an unknown or repeated key, or an invalid value;
        the message names the key.

    """
    _vals: dict[str, Any] = {}
    for _n, _line in enumerate(_text.splitlines(), start=1):
        _line = _line.split("#", 1)[0].strip()
        if not _line:
            continue
        _key, _sep, _raw = _line.partition("=")
        _key, _raw = _key.strip(), _raw.strip()
        if not _sep or not _key:
            raise ConfigError(f"Line {_n}: expected 'key = value', got {_line!r}.")
        if _key not in RUN_CONFIG_KEYS:
            raise ConfigError(f"Line {_n}: unknown configuration key {_key!r}.")
        if _key in _vals:
            raise ConfigError(f"Line {_n}: configuration key {_key!r} is repeated.")
        _vals[_key] = _convert(_key, _raw)

    if (_hp := _vals.get("history_path")) is not None and base_dir and not _hp.is_absolute():
        _vals["history_path"] = base_dir / _hp

    def _pick(*_keys: str) -> dict[str, Any]:
        return {_k: _vals[_k] for _k in _keys if _k in _vals}

    try:
        _synth = _pick("clip_seconds", "snr_db", "noise_kinds", "sample_rate")
        return RunConfig(
            ModelConfig.from_flat(_pick(*_MODEL_KEYS)),
            LossConfig(**_pick("w_mse", "lambda2", "lambda3")),
            SynthSpec(**_synth),
            TrainConfig(
                **_pick(
                    "epochs",
                    "batches_per_epoch",
                    "batch_size",
                    "val_clips",
                    "lr",
                    "grad_clip",
                    "plateau_patience",
                )
            ),
            **_pick("seed", "history_path"),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as _err:
        raise ConfigError(f"Invalid run configuration: {_err}") from _err


def load_run_config(_source: str | Path, /) -> RunConfig:
    """Read a run configuration file, or a bundled one named :code:`bundled:<name>`."""
    if str(_source).startswith(BUNDLED_PREFIX):
        _name = f"{str(_source)[len(BUNDLED_PREFIX) :]}.cfg"
        _res = resources.files(f"{_PKG_NAME}.data").joinpath(_name)
        if not _res.is_file():
            raise ConfigError(f"No bundled run configuration named {_name!r}.")
        return parse_run_config(_res.read_text(encoding="utf-8"), base_dir=Path.cwd())
    _path = Path(_source)
    return parse_run_config(_path.read_text(encoding="utf-8"), base_dir=_path.parent)


def emit(_record: Mapping[str, Any], /) -> None:
    print(PREFIX + json.dumps(dict(_record)), flush=True)


def enhance_offline(
    _model: DpsnnModel, _samples: ArrayDouble, /
) -> tuple[ArrayDouble, SpikeStats]:
    """Enhanced samples, at the input length, and the spike tallies."""
    _res = forward(_model, np.asarray(_samples).reshape(1, 1, -1))
    return fit_length(_res.enhanced.value[0, 0], _samples.size).astype(np.float64), _res.stats


def enhance_streaming(
    _model: DpsnnModel, _samples: ArrayDouble, _chunk: int, /
) -> tuple[ArrayDouble, float]:
    """Enhanced samples, at the input length, and the real-time factor.

    Raises
    ------
    DimensionError
        If the input is shorter than one frame, as offline enhancement does.

    """
    if _samples.size < (_l := _model.config.encoder.filter_length):
        raise DimensionError(
            f"Waveform of {_samples.size} samples is shorter than one frame, {_l}."
        )
    _state = StreamState.for_model(_model)
    _out = []
    _t0 = time.perf_counter()
    for _i in range(0, _samples.size, _chunk):
        _out.append(push_samples(_state, _model, _samples[_i : _i + _chunk]))
    _out.append(flush(_state))
    _rtf = (time.perf_counter() - _t0) / (_samples.size / _model.config.sample_rate)
    return fit_length(np.concatenate(_out), _samples.size).astype(np.float64), _rtf


def cmd_train(_args: argparse.Namespace, /) -> int:
    _cfg = load_run_config(_args.config)
    _history = _args.history or _cfg.history_path
    _model = init(_cfg.model, _cfg.seed)
    _result = train(
        _model,
        _cfg.synth,
        _cfg.loss,
        _cfg.train,
        seed=_cfg.seed,
        history_path=_history,
        n_jobs=_args.jobs,
    )
    for _rec in _result.history:
        emit({"event": "epoch", **asdict(_rec)})
    save_checkpoint(_result.model, _args.checkpoint)
    _best = None if _result.best_epoch is None else _result.history[_result.best_epoch]
    emit({
        "event": "train",
        "checkpoint": str(_args.checkpoint),
        "epochs": len(_result.history),
        "best_epoch": _result.best_epoch,
        "val_si_snr": None if _best is None else _best.val_si_snr,
        "val_si_snri": None if _best is None else _best.val_si_snri,
    })
    return EXIT_OK


def cmd_enhance(_args: argparse.Namespace, /) -> int:
    _model = load_checkpoint(_args.checkpoint)
    _clip = read_wav(_args.input)
    _lat = latency(_model.config.encoder, _model.config.sample_rate)
    _rtf = None
    if _args.streaming:
        _chunk = max(1, round(_args.chunk_ms * _clip.sample_rate / 1000))
        _enh, _rtf = enhance_streaming(_model, _clip.samples, _chunk)
    else:
        _enh, _ = enhance_offline(_model, _clip.samples)
    write_wav(_args.output, AudioClip(_enh, _clip.sample_rate))
    emit({
        "event": "enhance",
        "mode": "streaming" if _args.streaming else "offline",
        "output": str(_args.output),
        "samples": int(_enh.size),
        "buffering_ms": _lat.buffering_ms,
        "lookahead_ms": _lat.lookahead_ms,
        "algorithmic_ms": _lat.algorithmic_ms,
        "rtf": _rtf,
    })
    return EXIT_OK


def _eval_file(
    _model: DpsnnModel, _noisy_path: Path, _clean_path: Path, /
) -> dict[str, Any] | str:
    """Report row for one pair, or the reason it was skipped."""
    if not _clean_path.is_file():
        return "no clean reference"
    try:
        _noisy, _clean = read_wav(_noisy_path), read_wav(_clean_path)
        if _noisy.samples.size != _clean.samples.size:
            raise DimensionError(
                f"lengths differ, {_noisy.samples.size} vs {_clean.samples.size}"
            )
        _enh, _stats = enhance_offline(_model, _noisy.samples)
        _si = metrics.si_snr(_enh, _clean.samples).value_db
        _sii = _si - metrics.si_snr(_noisy.samples, _clean.samples).value_db
        _stoi = metrics.stoi(_enh, _clean.samples, _clean.sample_rate)
        _power = metrics.power_proxy(_stats, _model, _noisy.seconds)
    except (AudioFormatError, DimensionError, NumericError) as _err:
        return str(_err)
    _lat = latency(_model.config.encoder, _model.config.sample_rate).algorithmic_ms
    return metrics.report_row(_noisy_path.name, _si, _sii, _stoi, _power, _lat)


def cmd_eval(_args: argparse.Namespace, /) -> int:
    _model = load_checkpoint(_args.checkpoint)
    _noisy_dir, _clean_dir = Path(_args.noisy_dir), Path(_args.clean_dir)
    for _d in (_noisy_dir, _clean_dir):
        if not _d.is_dir():
            raise FileNotFoundError(f"No such directory: {_d}")
    _files = sorted(_noisy_dir.glob("*.wav"))
    _outcomes = Parallel(n_jobs=_args.jobs, prefer="threads")(
        delayed(_eval_file)(_model, _f, _clean_dir / _f.name) for _f in _files
    )

    _rows = []
    for _f, _out in zip(_files, _outcomes, strict=True):
        if isinstance(_out, str):
            logger.warning("Skipping %s: %s", _f.name, _out)
            emit({"event": "skipped", "file": _f.name, "reason": _out})
        else:
            _rows.append(_out)
    if not _rows:
        logger.error("No evaluable file pairs in %s and %s", _noisy_dir, _clean_dir)
        return EXIT_IO

    _aggregate = metrics.aggregate_rows(_rows)
    _report = Path(_args.report)
    _tmp = _report.with_name(f".{_report.name}.tmp")
    _tmp.write_text(
        "".join(json.dumps(_r) + "\n" for _r in (*_rows, _aggregate)), encoding="utf-8"
    )
    _tmp.replace(_report)
    emit({"event": "eval", **_aggregate, "rows": len(_rows), "skipped": len(_files) - len(_rows)})
    return EXIT_OK


def cmd_bench(_args: argparse.Namespace, /) -> int:
    _model = load_checkpoint(_args.checkpoint)
    _sr = _model.config.sample_rate
    _samples = 0.1 * prng(_args.seed).standard_normal(round(_args.seconds * _sr))
    _, _stats = enhance_offline(_model, _samples)
    for _exclude in (True, False):
        _rep = metrics.power_proxy(_stats, _model, _samples.size / _sr, exclude_codec=_exclude)
        emit({"event": "power", **asdict(_rep)})
    emit({
        "event": "bench",
        "seconds": _samples.size / _sr,
        "algorithmic_ms": latency(_model.config.encoder, _sr).algorithmic_ms,
        "rtf": measure_rtf(_model, _samples),
        "spike_density": _stats.spike_density,
    })
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    _p = argparse.ArgumentParser(
        prog=_PKG_NAME, description="Spiking speech enhancement: train, enhance, eval, bench."
    )
    _p.add_argument("--version", action="version", version=VERSION)
    _p.add_argument(
        "--log-level",
        default="INFO",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="logging threshold for messages on stderr",
    )
    _sub = _p.add_subparsers(dest="command", required=True)

    _t = _sub.add_parser("train", help="train a model on synthetic mixtures")
    _t.add_argument("config", help=f"run configuration file, or {BUNDLED_PREFIX}<name>")
    _t.add_argument("checkpoint", type=Path, help="output checkpoint")
    _t.add_argument("--history", type=Path, default=None, help="epoch history (JSON lines)")
    _t.add_argument("--jobs", type=int, default=1, help="threads for data synthesis")
    _t.set_defaults(func=cmd_train)

    _e = _sub.add_parser("enhance", help="enhance a WAV file")
    _e.add_argument("checkpoint", type=Path)
    _e.add_argument("input", type=Path)
    _e.add_argument("output", type=Path)
    _mode = _e.add_mutually_exclusive_group()
    _mode.add_argument("--streaming", action="store_true", help="frame-by-frame processing")
    _mode.add_argument("--offline", dest="streaming", action="store_false")
    _e.add_argument("--chunk-ms", type=float, default=10.0, help="streaming chunk length")
    _e.set_defaults(func=cmd_enhance)

    _v = _sub.add_parser("eval", help="score enhanced output against clean references")
    _v.add_argument("checkpoint", type=Path)
    _v.add_argument("noisy_dir", type=Path)
    _v.add_argument("clean_dir", type=Path)
    _v.add_argument("report", type=Path, help="report file (JSON lines)")
    _v.add_argument("--jobs", type=int, default=1)
    _v.set_defaults(func=cmd_eval)

    _b = _sub.add_parser("bench", help="power proxy and real-time factor on synthetic input")
    _b.add_argument("checkpoint", type=Path)
    _b.add_argument("--seconds", type=float, default=1.0)
    _b.add_argument("--seed", type=int, default=0)
    _b.set_defaults(func=cmd_bench)
    return _p


_EXIT_CODES: tuple[tuple[type[BaseException] | tuple[type[BaseException], ...], int], ...] = (
    ((ConfigError, DimensionError, AudioFormatError), EXIT_USAGE),
    (NumericError, EXIT_NUMERIC),
    ((OSError, CheckpointError), EXIT_IO),
)


def main(_argv: Sequence[str] | None = None, /) -> int:
    _args = build_parser().parse_args(_argv)
    logging.basicConfig(
        level=_args.log_level,
        stream=sys.stderr,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    _func: Callable[[argparse.Namespace], int] = _args.func
    try:
        return _func(_args)
    except Exception as _err:
        for _kinds, _code in _EXIT_CODES:
            if isinstance(_err, _kinds):
                logger.error("%s: %s", type(_err).__name__, _err)
                return _code
        raise
