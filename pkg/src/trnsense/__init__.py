""" Sensing people with the training fields of mm-wave packets """
from .config import FileError, PipelineConfig, SchemaError
from .util import start_logging

name = "trnsense"
__version__ = "0.1.0"
