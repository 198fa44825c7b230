"""Miscellaneous utilities

"""

import functools
import hashlib
import os
import tempfile
from typing import Callable, Dict, Iterable, List, Tuple

import attr
import numpy as np


#
# Functional
# ~~~~~~~~~~
#


def curryish(f: Callable) -> Callable:
    """Lifted partial application

    """

    def g(*args, **kwargs):
        return functools.partial(f, *args, **kwargs)

    return g


def compose2(f: Callable, g: Callable) -> Callable:
    """Compose two functions

    """

    def h(*args, **kwargs):
        return f(g(*args, **kwargs))

    return h


def compose(*funcs: Callable) -> Callable:
    """Function composition

    """
    return functools.partial(functools.reduce, compose2)(funcs)


listfilter = curryish(compose(list, filter))
listfilter.__doc__ = """Filter for lists with partial evaluation

"""


#
# Randomness
# ~~~~~~~~~~
#


def child_seed(seed: int, *keys: int) -> int:
    """Derive an independent integer seed from a run seed and integer keys

    The same ``(seed, keys)`` always gives the same child seed, so work
    items seeded this way can be processed in any order.

    Examples
    --------

    .. code-block:: python

        child_seed(7, 0) == child_seed(7, 0)
        # True
        child_seed(7, 0) == child_seed(7, 1)
        # False

    """
    return int(
        np.random.SeedSequence([seed, *keys]).generate_state(1, np.uint64)[0]
        % np.uint64(2 ** 63)
    )


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Random generator for a run seed and integer keys

    """
    return np.random.default_rng([seed, *keys])


#
# Configuration
# ~~~~~~~~~~~~~
#


def format_value(value) -> str:
    """Text form of a configuration value

    Floats use the shortest round-tripping representation, booleans are
    ``on``/``off`` and sequences are comma separated.

    """
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, dict):
        return ",".join(
            "{0}:{1}".format(k, format_value(v)) for (k, v) in value.items()
        )
    return str(value)


def flatten_config(config, prefix: str = "") -> List[Tuple[str, str]]:
    """Flat ``key=value`` pairs of an attrs configuration object

    """
    return [
        (prefix + name, format_value(value))
        for (name, value) in attr.asdict(config, recurse=False).items()
    ]


def config_hash(*configs) -> str:
    """Short SHA-256 digest over the flattened configurations

    """
    pairs = sorted(sum([flatten_config(c) for c in configs], []))
    text = "\n".join("{0}={1}".format(k, v) for (k, v) in pairs)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


#
# Files and I/O
# ~~~~~~~~~~~~~
#


def sha256_file(path: str) -> str:
    """SHA-256 hex digest of a file

    """
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def sha256_arrays(arrays: Iterable[np.ndarray]) -> str:
    """SHA-256 hex digest over the bytes of some arrays

    """
    digest = hashlib.sha256()
    for a in arrays:
        digest.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return digest.hexdigest()


def atomic_write_text(path: str, text: str) -> None:
    """Write a text file so that readers never see a partial file

    The content is written to a temporary file in the same directory and then
    moved in place.

    """
    directory = os.path.dirname(os.path.abspath(path))
    (fd, tmp) = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return


def write_key_values(path: str, pairs: Iterable[Tuple[str, str]]) -> None:
    """Atomically write ``key=value`` lines

    """
    atomic_write_text(
        path,
        "".join("{0}={1}\n".format(k, v) for (k, v) in pairs)
    )
    return


def read_key_values(path: str) -> Dict[str, str]:
    """Read a ``key=value`` file

    """
    with open(path, "r", encoding="utf-8") as f:
        return dict(
            line.rstrip("\n").split("=", 1) for line in f if "=" in line
        )


def write_to_hdf5(group, data, name):
    """Add data to HDF5 handler

    """
    try:
        group.create_dataset(name, data=data, compression="gzip")
    except TypeError:
        group.create_dataset(name, data=data)
    except ValueError:
        raise ValueError(f"Could not write {data}")
