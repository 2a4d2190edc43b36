from .assemble import Assembly, Diagnostic, assemble
from .config import DEFAULTS, SCHEMA_VERSION, effective_config, load
from .main import main, mc, run, validate
from .report import build_report

__all__ = ["Assembly", "DEFAULTS", "Diagnostic", "SCHEMA_VERSION", "assemble", "build_report",
           "effective_config", "load", "main", "mc", "run", "validate"]
