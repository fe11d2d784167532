"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0

csmat-v1 files: UTF-8 JSON with "format", "n", "repr" and the representation payload
"""
import json
import logging
import os

import numpy as np

from forms.quartic import LowRankForm, QuarticForm, make_form
from utils.configloader import UNIT_TOL
from utils.generic import DimensionMismatch, MalformedFile, UnsupportedVersion

logger = logging.getLogger(__name__)

FORMAT_VERSION = "csmat-v1"
REPRESENTATIONS = ("lowrank", "dense", "sumkernel", "atoms")


def _load(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as file:
            content = json.load(file)
    except json.JSONDecodeError as error:
        raise MalformedFile(f"{path} is not valid JSON: {error}") from error
    except UnicodeDecodeError as error:
        raise MalformedFile(f"{path} is not UTF-8 text: {error}") from error
    if not isinstance(content, dict):
        raise MalformedFile(f"{path} does not hold a JSON object")
    if content.get("format") != FORMAT_VERSION:
        raise UnsupportedVersion(
            f'{path} has format "{content.get("format")}", expected "{FORMAT_VERSION}"'
        )
    for key in ("n", "repr"):
        if key not in content:
            raise MalformedFile(f'{path} misses the "{key}" entry')
    if content["repr"] not in REPRESENTATIONS:
        raise MalformedFile(f'{path} has unknown representation "{content["repr"]}"')
    if not isinstance(content["n"], int) or content["n"] < 2:
        raise MalformedFile(f'{path} has invalid dimension "{content["n"]}"')
    return content


def _array(content: dict, key: str, path: str) -> np.ndarray:
    if key not in content:
        raise MalformedFile(f'{path} misses the "{key}" entry')
    try:
        return np.asarray(content[key], dtype=float)
    except (TypeError, ValueError) as error:
        raise MalformedFile(f'{path} has non-numeric "{key}" entries') from error


def _atom_arrays(content: dict, path: str):
    n = content["n"]
    weights = _array(content, "weights", path).reshape(-1)
    if not isinstance(content.get("vectors"), list):
        raise MalformedFile(f'{path} misses the "vectors" list')
    if len(content["vectors"]) != weights.size:
        raise DimensionMismatch(f"{path} lists {weights.size} weights but a different number of vectors")
    if any(not isinstance(vector, list) or len(vector) != n for vector in content["vectors"]):
        raise DimensionMismatch(f"{path} has atom vectors whose length is not {n}")
    vectors = _array(content, "vectors", path).reshape(weights.size, n)
    norms = np.linalg.norm(vectors, axis=1)
    rescaled = int(np.count_nonzero(np.abs(norms - 1.0) > UNIT_TOL))
    if rescaled:
        logger.warning("%s: normalized %d non-unit atom vector(s), weights rescaled", path, rescaled)
    return weights, vectors


def io_read(path: str):
    """
    Reads a csmat-v1 file
    :return: QuarticForm for lowrank/dense/sumkernel files, AtomList for atoms files
    """
    content = _load(path)
    n, kind = content["n"], content["repr"]
    if kind in ("lowrank", "atoms"):
        weights, vectors = _atom_arrays(content, path)
        if kind == "atoms":
            if np.any(weights < 0):
                raise MalformedFile(f"{path} has negative atom weights")
            from solvers.fw_projection import AtomList

            return AtomList.from_arrays(n, weights, vectors, mode=content.get("mode", "cone"))
        return LowRankForm(n, weights, vectors)
    if kind == "dense":
        entries = _array(content, "entries", path).reshape(-1)
        if entries.size != n ** 4:
            raise MalformedFile(f"{path} holds {entries.size} dense entries, N = {n} needs {n ** 4}")
        return make_form(dict(n=n, repr="dense", entries=entries))
    phi = _array(content, "phi", path).reshape(-1)
    if phi.size != 4 * n - 3:
        raise MalformedFile(f"{path} holds {phi.size} kernel values, N = {n} needs {4 * n - 3}")
    return make_form(dict(n=n, repr="sumkernel", phi=phi))


def io_write(path: str, obj) -> str:
    """
    Writes a form or an atom list as csmat-v1
    Floats are written with repr precision, so reading returns the same payload
    """
    payload = obj.payload()
    if not isinstance(obj, QuarticForm):
        payload["repr"] = "atoms"
    content = dict(format=FORMAT_VERSION, **payload)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as file:
        json.dump(content, file)
    logger.debug("Wrote %s form with N = %d to %s", content["repr"], content["n"], path)
    return path


def to_json(obj) -> str:
    payload = obj.payload()
    if not isinstance(obj, QuarticForm):
        payload["repr"] = "atoms"
    return json.dumps(dict(format=FORMAT_VERSION, **payload))
