"""
Run configuration: pydantic model, key = value config files, flag overrides.
"""
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .params import CoverageMode, ModelShape
from .tensor import PRECISIONS, set_precision

DATA_FOLDER = os.environ.get('COVNMT_DATA_FOLDER', 'var/data')
CONFIG_FILE = 'config.txt'


class RunConfig(BaseModel):
    """Every setting of a train / translate / eval / gen run"""
    model_config = ConfigDict(extra='forbid', use_enum_values=False)

    # model
    mode: CoverageMode = CoverageMode.BASE
    d_emb: int = Field(64, ge=1)
    d_h: int = Field(64, ge=1)
    d_att: int = Field(64, ge=1)
    d_out: int = Field(64, ge=1)
    d_c: int = Field(100, ge=1)
    src_vocab_size: int = Field(30000, ge=5)
    tgt_vocab_size: int = Field(30000, ge=5)
    precision: Literal['standard', 'wide'] = 'standard'

    # training
    objective: Literal['mix', 'aligned'] = 'mix'
    lambda_gru: float = Field(1e-4, ge=0)
    lambda_sub: float = Field(1e-2, ge=0)
    batch: int = Field(80, ge=1)
    epochs: int = Field(10, ge=0)
    seed: int = 1234
    registry: Optional[str] = None

    # decoding
    beam: int = Field(5, ge=1)
    max_len: int = Field(80, ge=1)
    length_norm: bool = False
    replace_unk: bool = False
    workers: int = Field(1, ge=1)
    plot_dir: Optional[Path] = None

    # synthetic corpora
    task: Literal['copy', 'reverse', 'fertility'] = 'copy'
    size: int = Field(2000, ge=1)
    synthetic_vocab: int = Field(20, ge=1)
    min_len: int = Field(5, ge=1)
    max_src_len: int = Field(12, ge=1)

    # files
    train_src: Optional[Path] = None
    train_tgt: Optional[Path] = None
    train_align: Optional[Path] = None
    dev_src: Optional[Path] = None
    dev_tgt: Optional[Path] = None
    dev_align: Optional[Path] = None
    output_dir: Optional[Path] = None
    checkpoint: Optional[Path] = None
    input: Optional[Path] = None
    output: Optional[Path] = None
    attention_dump: Optional[Path] = None
    coverage_dump: Optional[Path] = None

    @model_validator(mode='after')
    def check_combinations(self):
        if self.objective == 'aligned' and self.train_align is None:
            raise ValueError("objective 'aligned' requires train_align")
        if self.min_len > self.max_src_len:
            raise ValueError("min_len must not exceed max_src_len")
        return self

    def lambdas(self) -> Dict[str, float]:
        """Penalty weight per active coverage rule; empty for base"""
        weights = {'gru': self.lambda_gru, 'sub': self.lambda_sub}
        return {rule: weights[rule] for rule in CoverageMode(self.mode).rules}

    def shape(self, src_vocab: int, tgt_vocab: int) -> ModelShape:
        return ModelShape(src_vocab, tgt_vocab, self.d_emb, self.d_h, self.d_att, self.d_out, self.d_c,
                          CoverageMode(self.mode))

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir) if self.output_dir is not None else Path(DATA_FOLDER)


FIELDS = list(RunConfig.model_fields)
BOOL_FIELDS = [name for name, info in RunConfig.model_fields.items() if info.annotation is bool]


def build_config(values: Dict[str, Any]) -> RunConfig:
    """RunConfig from raw values; validation failures become ConfigError naming the field"""
    unknown = sorted(set(values) - set(FIELDS))
    if unknown:
        raise ConfigError(f"unknown setting(s) {unknown}", field=unknown[0])
    try:
        return RunConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        field = '.'.join(str(part) for part in error.get('loc', ())) or None
        raise ConfigError(error['msg'], field=field) from None


def parse_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """Read key = value lines; # starts a comment, blank values mean unset"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found", field='config')
    values = {}
    with open(path, 'r', encoding='utf-8') as f:
        for n, raw in enumerate(f, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f"{path}:{n}: expected 'key = value', got '{line}'")
            key, value = (part.strip() for part in line.split('=', 1))
            key = key.replace('-', '_')
            if key not in FIELDS:
                raise ConfigError(f"{path}:{n}: unknown setting '{key}'", field=key)
            if value:
                values[key] = value
    return values


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """File values first, then overrides (command-line flags) on top"""
    values = parse_config_file(path) if path is not None else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values)


def write_config(config: RunConfig, path: Union[str, Path]) -> Path:
    """Effective configuration as sorted key = value lines (unset values left blank)"""
    settings = config.model_dump(mode='json')
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as f:
        for key in sorted(settings):
            value = settings[key]
            if value is None:
                value = ''
            elif isinstance(value, bool):
                value = 'true' if value else 'false'
            f.write(f"{key} = {value}\n")
    return path


def apply_precision(config: RunConfig):
    if config.precision not in PRECISIONS:
        raise ConfigError(f"unknown precision '{config.precision}'", field='precision')
    set_precision(config.precision)
