"""
Pydantic models for run configurations
"""
from core.models.run_config import RunConfig, load_config, parse_config

__all__ = ["RunConfig", "load_config", "parse_config"]
