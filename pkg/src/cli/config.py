""" Run configuration. """

import hashlib
from pathlib import Path
from typing import List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..core.errors import ConfigError, TkgIoError
from ..core.facts import TkgFormat
from ..core.retriever import IndexBackend
from ..llm.gateway import DEFAULT_MODEL, LlmMode
from ..reasoning.aggregator import AggregationMode


class RunConfig(BaseModel):
    """
    Settings for one pipeline run.

    Defaults: temperature 0, 50 retrieved facts
    per prompt, question trees at most 4 levels deep.
    """

    model_config = ConfigDict(extra="forbid")

    # Inputs
    tkg_path: Optional[Path] = Field(None, description="Temporal knowledge graph file")
    tkg_format: TkgFormat = TkgFormat.TSV_QUADRUPLE
    lenient: bool = Field(False, description="Skip malformed TKG lines instead of failing")
    surface_forms_path: Optional[Path] = None
    dataset_path: Optional[Path] = None
    work_dir: Path = Path("runs/default")
    cache_dir: Path = Path(".cache/tkgqa")

    # LLM
    llm_mode: LlmMode = LlmMode.SCRIPTED
    fixture_path: Optional[Path] = None
    record_fixture_path: Optional[Path] = None
    decompose_model: str = DEFAULT_MODEL
    reason_model: str = DEFAULT_MODEL
    aggregate_model: str = DEFAULT_MODEL
    temperature: float = Field(0.0, ge=0.0, le=2.0)
    base_url: Optional[str] = None
    api_key_env: str = "OPENAI_API_KEY"
    request_timeout: float = Field(60.0, gt=0.0)
    max_retries: int = Field(3, ge=0)

    # Retrieval
    embedder: Literal["hashed", "remote"] = "hashed"
    embed_model: str = "text-embedding-3-small"
    embed_dim: int = Field(512, ge=8)
    index_backend: IndexBackend = IndexBackend.EXACT
    top_k: int = Field(50, ge=1)

    # Reasoning
    max_depth: int = Field(4, ge=1)
    aggregation_mode: AggregationMode = AggregationMode.RULES
    use_decomposition: bool = True
    use_multi_answer: bool = True
    use_retrieval: bool = True
    verify_constraints: bool = False
    strict_decomposition: bool = False

    # Batch
    parallelism: int = Field(4, ge=1)
    limit: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = None
    recall_ns: List[int] = Field(default_factory=lambda: [10, 20, 30, 40, 50, 60])

    @field_validator("recall_ns")
    @classmethod
    def _check_recall_ns(cls, value):
        if not value or any(n < 1 for n in value):
            raise ValueError("recall_ns must be a non-empty list of positive integers")
        return sorted(set(value))

    def config_hash(self):
        """SHA-256 of the canonical JSON dump."""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


def load_config(path=None, overrides=None):
    """
    Builds a :class:`RunConfig` from an optional YAML file and overrides.

    :param path: YAML file with :class:`RunConfig` fields.
    :type path: str or :class:`pathlib.Path`, optional
    :param overrides: Field values that replace file values; ``None`` entries are ignored.
    :type overrides: dict, optional
    :rtype: :class:`RunConfig`
    :raises ConfigError: unknown keys or invalid values.
    """
    data = {}
    if path is not None:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise TkgIoError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config {path} is not valid UTF-8: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
