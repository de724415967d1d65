import json
import os
import tomllib
from pathlib import Path

from dotenv import load_dotenv
from flask import Config as LayeredConfig

from ehpolicy.errors import ConfigError

load_dotenv()


class Config:
    DATABASE_URL = os.getenv('EHPOLICY_DATABASE_URL', 'sqlite:///ehpolicy_runs.db')
    LOG_LEVEL = os.getenv('EHPOLICY_LOG_LEVEL', 'WARNING')
    SEED = int(os.getenv('EHPOLICY_SEED', '0'))
    RECORD_RUNS = os.getenv('EHPOLICY_RECORD_RUNS', '0').lower() in {'1', 'true', 'yes'}


class ExperimentDefaults:
    """Defaults for every experiment flag; keys mirror the long option names"""
    UTILITY = 'log_awgn'
    ARRIVALS = 'bernoulli:p=0.5'
    BATTERY = 1.0
    POLICY = 'ffp'
    HORIZON = 100_000
    TRIALS = 100
    WARMUP = 0
    INITIAL_BATTERY = None
    SEED = Config.SEED
    DETERMINISTIC = False
    EMIT_CSV = None
    GRID = 401
    ACTIONS = 201
    P = 0.5
    Q = 0.5
    MU = '1e1:1e6:log'
    THETAS = '0.05:1:lin:20'
    EVALUATOR = 'renewal'


def load_experiment_config(path: str | None = None, overrides: dict | None = None) -> LayeredConfig:
    """Layer defaults, an optional JSON/TOML file, EHPOLICY_* env and explicit flags"""
    cfg = LayeredConfig(root_path=os.getcwd())
    cfg.from_object(ExperimentDefaults)

    if path:
        suffix = Path(path).suffix.lower()
        if suffix == '.toml':
            loader, mode = tomllib.load, 'rb'
        elif suffix == '.json':
            loader, mode = json.load, 'r'
        else:
            raise ConfigError(f"Unsupported config file type: {path}")
        try:
            with open(path, mode) as fh:
                data = loader(fh)
        except (OSError, ValueError) as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        for key, value in data.items():
            name = key.replace('-', '_').upper()
            if not hasattr(ExperimentDefaults, name):
                raise ConfigError(f"Unknown config key: {key}")
            cfg[name] = value

    cfg.from_prefixed_env('EHPOLICY')

    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key.upper()] = value
    return cfg
