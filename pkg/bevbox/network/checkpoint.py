"""Checkpoint persistence

Two formats, chosen by file extension: ``.h5``/``.hdf5`` files are written
with h5py, anything else uses the versioned text format

.. code-block:: text

    boxnet-ckpt 1
    config angle_mode=sincos2 center_mode=mean concat_enabled=on ...
    step 1200
    param shared0.W 2 64
    <row 0 values>
    <row 1 values>
    ...
    end

Values are written with 17 significant digits, which round-trips every
64-bit float.

"""

import os
from typing import Dict, List, Tuple

import h5py
import numpy as np

from bevbox import utils
from bevbox.network.config import NetworkConfig, param_shapes
from bevbox.network.model import NetworkParams


MAGIC = "boxnet-ckpt"
VERSION = 1


class CheckpointError(ValueError):
    """Unreadable, truncated or mismatching checkpoint"""


def _is_hdf5(path: str) -> bool:
    return os.path.splitext(path)[1].lower() in (".h5", ".hdf5")


#
# Text format
# ~~~~~~~~~~~
#


def dumps(params: NetworkParams, cfg: NetworkConfig) -> str:
    lines = [
        f"{MAGIC} {VERSION}",
        "config " + " ".join(f"{k}={v}" for (k, v) in utils.flatten_config(cfg)),
        f"step {params.step}",
    ]
    for (name, tensor) in params.tensors.items():
        (d0, d1) = tensor.shape
        lines.append(f"param {name} {d0} {d1}")
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in tensor)
    lines.append("end")
    return "\n".join(lines) + "\n"


def _parse_config(tokens: List[str]) -> NetworkConfig:
    try:
        pairs = dict(t.split("=", 1) for t in tokens)
        return NetworkConfig.from_pairs(pairs)
    except (ValueError, TypeError) as err:
        raise CheckpointError(f"Invalid network configuration: {err}")


def loads(text: str) -> Tuple[NetworkParams, NetworkConfig]:
    """Parse the text format

    Nothing is returned unless the whole file, including the closing
    ``end`` line, parses and matches the layout of its configuration.

    """
    lines = iter(text.splitlines())

    def take(keyword: str) -> List[str]:
        line = next(lines, None)
        if line is None:
            raise CheckpointError(f"Truncated checkpoint, expected {keyword!r}")
        tokens = line.split()
        if not tokens or tokens[0] != keyword:
            raise CheckpointError(f"Expected {keyword!r}, got {line[:40]!r}")
        return tokens[1:]

    header = take(MAGIC)
    if header != [str(VERSION)]:
        raise CheckpointError(f"Unsupported checkpoint version {' '.join(header)!r}")
    cfg = _parse_config(take("config"))
    try:
        step = int(take("step")[0])
    except (IndexError, ValueError):
        raise CheckpointError("Invalid step line")

    expected = param_shapes(cfg)
    tensors = {}
    for _ in range(len(expected)):
        fields = take("param")
        try:
            (name, d0, d1) = (fields[0], int(fields[1]), int(fields[2]))
        except (IndexError, ValueError):
            raise CheckpointError(f"Invalid param line {fields}")
        if expected.get(name) != (d0, d1) or name in tensors:
            raise CheckpointError(f"Unexpected parameter {name} of shape ({d0}, {d1})")
        rows = []
        for i in range(d0):
            line = next(lines, None)
            if line is None:
                raise CheckpointError(f"Truncated checkpoint inside {name}")
            try:
                row = [float(v) for v in line.split()]
            except ValueError as err:
                raise CheckpointError(f"{name} row {i}: {err}")
            if len(row) != d1:
                raise CheckpointError(f"{name} row {i} has {len(row)} values, expected {d1}")
            rows.append(row)
        tensors[name] = np.array(rows, dtype=float).reshape(d0, d1)
    take("end")
    return (_validated({name: tensors[name] for name in expected}, step), cfg)


#
# HDF5 format
# ~~~~~~~~~~~
#


def _save_hdf5(path: str, params: NetworkParams, cfg: NetworkConfig) -> None:
    with h5py.File(path, "w") as h5f:
        h5f.attrs["format"] = MAGIC
        h5f.attrs["version"] = VERSION
        h5f.attrs["step"] = params.step
        config_group = h5f.create_group("config")
        for (key, value) in utils.flatten_config(cfg):
            config_group.attrs[key] = value
        param_group = h5f.create_group("params")
        for (name, tensor) in params.tensors.items():
            utils.write_to_hdf5(param_group, tensor, name)
    return


def _load_hdf5(path: str) -> Tuple[NetworkParams, NetworkConfig]:
    try:
        with h5py.File(path, "r") as h5f:
            if h5f.attrs.get("format") != MAGIC:
                raise CheckpointError(f"{path} is not a BoxNet checkpoint")
            if int(h5f.attrs.get("version", -1)) != VERSION:
                raise CheckpointError(
                    f"Unsupported checkpoint version {h5f.attrs.get('version')}"
                )
            cfg = NetworkConfig.from_pairs({
                key: str(value) for (key, value) in h5f["config"].attrs.items()
            })
            step = int(h5f.attrs["step"])
            tensors = {name: h5f["params"][name][...] for name in h5f["params"]}
    except (OSError, KeyError) as err:
        raise CheckpointError(f"Cannot read {path}: {err}")
    except ValueError as err:
        if isinstance(err, CheckpointError):
            raise
        raise CheckpointError(f"Invalid network configuration: {err}")
    expected = param_shapes(cfg)
    if set(tensors) != set(expected):
        raise CheckpointError(f"Parameter names of {path} do not match the configuration")
    for (name, shape) in expected.items():
        if tensors[name].shape != shape:
            raise CheckpointError(f"{name} has shape {tensors[name].shape}, expected {shape}")
    return (_validated({name: tensors[name] for name in expected}, step), cfg)


def _validated(tensors: Dict[str, np.ndarray], step: int) -> NetworkParams:
    params = NetworkParams(tensors=tensors, step=step)
    if not params.is_finite():
        raise CheckpointError("Checkpoint contains non-finite values")
    for (name, t) in tensors.items():
        if name.endswith(".running_var") and np.any(t <= 0):
            raise CheckpointError(f"{name} is not positive")
    return params


#
# Public interface
# ~~~~~~~~~~~~~~~~
#


def save_checkpoint(params: NetworkParams, cfg: NetworkConfig, path: str) -> None:
    """Save parameters and configuration

    Parameters
    ----------
    params : NetworkParams
        Parameters including running statistics and the step counter
    cfg : NetworkConfig
        Configuration the parameters belong to
    path : str
        Target file; ``.h5``/``.hdf5`` selects HDF5, anything else text

    """
    shapes = {name: t.shape for (name, t) in params.tensors.items()}
    if shapes != param_shapes(cfg):
        raise CheckpointError("Parameters do not match the network configuration")
    if _is_hdf5(path):
        _save_hdf5(path, params, cfg)
    else:
        utils.atomic_write_text(path, dumps(params, cfg))
    return


def load_checkpoint(path: str, angle_mode: str = None) -> Tuple[NetworkParams, NetworkConfig]:
    """Load parameters and configuration

    Parameters
    ----------
    path : str
        Checkpoint file
    angle_mode : str
        When given, the angle mode the caller decodes with; a checkpoint
        trained with another encoding is refused

    """
    if _is_hdf5(path):
        (params, cfg) = _load_hdf5(path)
    else:
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except (OSError, UnicodeDecodeError) as err:
            raise CheckpointError(f"Cannot read {path}: {err}")
        (params, cfg) = loads(text)
    if angle_mode is not None and angle_mode != cfg.angle_mode:
        raise CheckpointError(
            f"Checkpoint was trained with angle mode {cfg.angle_mode}, "
            f"cannot decode it as {angle_mode}"
        )
    return (params, cfg)
