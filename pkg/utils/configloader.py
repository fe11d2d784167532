"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0
"""

import logging
import os
import configparser as cfg
from dataclasses import dataclass, asdict
from typing import Optional

logger = logging.getLogger(__name__)

# loading SymSep configuration
symsep_config = cfg.ConfigParser()
adv_symsep_config = cfg.ConfigParser()


cfg_path = os.path.join(os.path.dirname(__file__), "..", "settings.ini")
with open(cfg_path) as cfg_file:
    symsep_config.read_file(cfg_file)

adv_cfg_path = os.path.join(os.path.dirname(__file__), "advanced_settings.ini")
with open(adv_cfg_path) as adv_cfg_file:
    adv_symsep_config.read_file(adv_cfg_file)


def get_config_settings(name: str, parameter_dict: dict, config: cfg.ConfigParser) -> dict:
    """
    Reading typed parameters of one section
    :param name: section name
    :param parameter_dict: parameter name -> "int", "float", "boolean", "str" or "list"
    :param config: parsed config
    :return: dictionary with parsed values, None where the entry is missing or invalid
    """
    getters = {
        "int": lambda section, key: section.getint(key),
        "float": lambda section, key: section.getfloat(key),
        "boolean": lambda section, key: section.getboolean(key),
        "str": lambda section, key: section.get(key),
        "list": lambda section, key: [
            str(entry).strip() for entry in section.get(key).split(",")
        ],
    }
    config_dict = {}
    for parameter, kind in parameter_dict.items():
        try:
            config_dict[parameter] = getters[kind](config[name], parameter)
        except (KeyError, ValueError, AttributeError):
            config_dict[parameter] = None
        if config_dict[parameter] is None:
            logger.warning(
                "Did not find valid %s entry for %s. Setting to None.", parameter, name
            )
    return config_dict


def _or_default(value, default):
    return default if value is None else value


"""run settings"""
_projection = get_config_settings(
    "Projection",
    dict(
        TOL_OUTER="float",
        MAX_OUTER="int",
        GAP_TOL="float",
        MODE="str",
        REFINE="boolean",
        SLIDE="boolean",
        STARTS="int",
        MAX_SECONDS="float",
    ),
    symsep_config,
)
TOL_OUTER = _or_default(_projection["TOL_OUTER"], 1e-12)
MAX_OUTER = _or_default(_projection["MAX_OUTER"], 1000)
GAP_TOL = _or_default(_projection["GAP_TOL"], 1e-10)
MODE = _or_default(_projection["MODE"], "cone").lower()
REFINE = _or_default(_projection["REFINE"], True)
SLIDE = _or_default(_projection["SLIDE"], True)
STARTS = _or_default(_projection["STARTS"], 5)
MAX_SECONDS = _or_default(_projection["MAX_SECONDS"], 0.0)

_inner = get_config_settings(
    "Inner Solver",
    dict(TOL_INNER="float", MAX_INNER="int", INIT="str", THREADS="int"),
    symsep_config,
)
TOL_INNER = _or_default(_inner["TOL_INNER"], 1e-12)
MAX_INNER = _or_default(_inner["MAX_INNER"], 500)
INIT = _or_default(_inner["INIT"], "sphere").lower()
THREADS = _or_default(_inner["THREADS"], 1)

_output = get_config_settings("Output", dict(SEED="int", LOG_LEVEL="str"), symsep_config)
SEED = _or_default(_output["SEED"], 0)
LOG_LEVEL = _or_default(_output["LOG_LEVEL"], "WARNING").upper()


"""advanced settings"""
_numerics = get_config_settings(
    "Numerics",
    dict(
        SYMMETRY_TOL="float",
        RANK_THRESHOLD="float",
        PSD_TOL="float",
        DENSE_CAP="int",
        UNIT_TOL="float",
        SHIFT_MARGIN="float",
        KKT_COND_LIMIT="float",
        KKT_STOP="float",
        PARALLEL_TOL="float",
        ROOT_IMAG_TOL="float",
        MERGE_TOL="float",
        PRUNE_TOL="float",
        SLIDE_ITER="int",
        REDUCIBILITY_TOL="float",
    ),
    adv_symsep_config,
)
SYMMETRY_TOL = _or_default(_numerics["SYMMETRY_TOL"], 1e-10)
RANK_THRESHOLD = _or_default(_numerics["RANK_THRESHOLD"], 1e-8)
PSD_TOL = _or_default(_numerics["PSD_TOL"], 1e-10)
DENSE_CAP = _or_default(_numerics["DENSE_CAP"], 64)
UNIT_TOL = _or_default(_numerics["UNIT_TOL"], 1e-12)
SHIFT_MARGIN = _or_default(_numerics["SHIFT_MARGIN"], 1e-8)
KKT_COND_LIMIT = _or_default(_numerics["KKT_COND_LIMIT"], 1e12)
KKT_STOP = _or_default(_numerics["KKT_STOP"], 1e-10)
PARALLEL_TOL = _or_default(_numerics["PARALLEL_TOL"], 1e-12)
ROOT_IMAG_TOL = _or_default(_numerics["ROOT_IMAG_TOL"], 1e-8)
MERGE_TOL = _or_default(_numerics["MERGE_TOL"], 1e-10)
PRUNE_TOL = _or_default(_numerics["PRUNE_TOL"], 1e-12)
SLIDE_ITER = _or_default(_numerics["SLIDE_ITER"], 100)
REDUCIBILITY_TOL = _or_default(_numerics["REDUCIBILITY_TOL"], 1e-10)

_verdict = get_config_settings(
    "Verdict",
    dict(SEPARABLE_TOL="float", CERTIFICATE_FLOOR="float", CERTIFICATE_SLACK="float"),
    adv_symsep_config,
)
SEPARABLE_TOL = _or_default(_verdict["SEPARABLE_TOL"], 1e-6)
CERTIFICATE_FLOOR = _or_default(_verdict["CERTIFICATE_FLOOR"], 1e-8)
CERTIFICATE_SLACK = _or_default(_verdict["CERTIFICATE_SLACK"], 1e-10)

_oracle = get_config_settings(
    "Oracle",
    dict(
        GRID_RESOLUTION_2D="float",
        GRID_RESOLUTION_3D="float",
        OPTIMALITY_SAMPLES="int",
        HESS_STEP="float",
    ),
    adv_symsep_config,
)
GRID_RESOLUTION_2D = _or_default(_oracle["GRID_RESOLUTION_2D"], 1e-4)
GRID_RESOLUTION_3D = _or_default(_oracle["GRID_RESOLUTION_3D"], 5e-3)
OPTIMALITY_SAMPLES = _or_default(_oracle["OPTIMALITY_SAMPLES"], 1000)
HESS_STEP = _or_default(_oracle["HESS_STEP"], 1e-4)


@dataclass
class RunConfig:
    """
    Effective parameters of one CLI run; defaults mirror settings.ini
    """

    command: str = ""
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    n: Optional[int] = None
    example: Optional[int] = None
    seed: int = SEED
    tol_outer: float = TOL_OUTER
    tol_inner: float = TOL_INNER
    gap_tol: float = GAP_TOL
    max_outer: int = MAX_OUTER
    max_inner: int = MAX_INNER
    starts: int = STARTS
    mode: str = MODE
    refine: bool = REFINE
    slide: bool = SLIDE
    init: str = INIT
    threads: int = THREADS
    max_seconds: float = MAX_SECONDS
    trace_path: Optional[str] = None
    atoms_out: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)
