"""
Loading and saving of the YAML documents used by trnsense

Every mapping read from a document remembers the line it started on and the
line of each of its keys, so that validation errors can point at the
offending line.
"""

import logging
import os.path
import re

import yaml

from .structures import (
    ApRegistration,
    CodebookConfig,
    Collection,
    DetectConfig,
    FusionConfig,
    MdConfig,
    NetworkSpec,
    RadioConfig,
    StftConfig,
    TrackerConfig,
    TrainConfig,
)


class FileError(Exception):
    """ Raised when an input file can not be used """


class SchemaError(FileError):
    """ A document does not follow its schema """


class Section(dict):
    """ dict that knows where in its document it was defined """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        #:int: line of the mapping itself (1 based)
        self.line = 0
        #:dict: line of each key
        self.lines = {}

    def line_of(self, key):
        return self.lines.get(key, self.line)


class _LineLoader(yaml.SafeLoader):
    pass


# PyYAML only reads floats with a dot, 1.76e9 should be a float too
_LineLoader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def _construct_section(loader, node):
    data = Section()
    data.line = node.start_mark.line + 1
    yield data
    data.update(loader.construct_mapping(node))
    data.lines = {
        key.value: key.start_mark.line + 1
        for key, _ in node.value
        if isinstance(key, yaml.ScalarNode)
    }


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_section)


def load_yaml(filename):
    """
    Read a YAML document, keeping line information of all mappings

    Parameters
    ----------
    filename : str
        document to read

    Returns
    -------
    data : Section
        top level mapping of the document

    Raises
    ------
    FileError
        if the file does not exist
    SchemaError
        if the file is not valid YAML or its top level is not a mapping
    """
    if not os.path.exists(filename):
        raise FileError(f"File not found: {filename}")
    logging.info("Loading %s", filename)
    with open(filename, "r") as f:
        text = f.read()
    try:
        data = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as ex:
        mark = getattr(ex, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 0
        raise SchemaError(f"{filename}:{line}: {ex}")
    if data is None:
        data = Section()
    if not isinstance(data, Section):
        raise SchemaError(f"{filename}:1: expected a mapping at the top level")
    return data


def schema_error(filename, section, key, problem):
    """ SchemaError pointing at the line of key in section """
    line = section.line_of(key) if isinstance(section, Section) else 0
    return SchemaError(f"{filename}:{line}: {problem}")


def require(filename, section, key, kind=None):
    """ Get a mandatory entry of a section, optionally checking its type """
    if not isinstance(section, dict):
        raise SchemaError(f"{filename}:0: expected a mapping containing '{key}'")
    if key not in section:
        raise schema_error(filename, section, key, f"missing required key '{key}'")
    value = section[key]
    if kind is not None and not _is_kind(value, kind):
        raise schema_error(
            filename, section, key, f"'{key}' must be of type {kind.__name__}, got {value!r}"
        )
    return value


def check_keys(filename, section, allowed):
    """ Raise a SchemaError for the first key of section not in allowed """
    if not isinstance(section, dict):
        raise SchemaError(f"{filename}:0: expected a mapping, got {section!r}")
    for key in section:
        if key not in allowed:
            raise schema_error(
                filename, section, key, f"unknown key '{key}', expected one of {sorted(allowed)}"
            )


def _is_kind(value, kind):
    if kind is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind is list:
        return isinstance(value, (list, tuple))
    return isinstance(value, kind)


def config_from_section(cls, filename, section):
    """
    Create a Config of class cls from a document section

    Keys are checked against the defaults of cls, values against the type of
    the default value. Missing keys keep their defaults.
    """
    if section is None:
        return cls()
    check_keys(filename, section, cls._defaults.keys())
    for key, value in section.items():
        default = cls._defaults[key]
        kind = type(default) if not isinstance(default, tuple) else list
        if not _is_kind(value, kind):
            raise schema_error(
                filename,
                section,
                key,
                f"'{key}' must be of type {kind.__name__}, got {value!r}",
            )
    try:
        return cls(**section)
    except ValueError as ex:
        raise SchemaError(f"{filename}:{getattr(section, 'line', 0)}: {ex}")


class PipelineConfig(Collection):
    """ All module configurations plus the AP registrations of one deployment """

    #:dict: section name and configuration class
    sections = {
        "radio": RadioConfig,
        "codebook": CodebookConfig,
        "detect": DetectConfig,
        "tracker": TrackerConfig,
        "stft": StftConfig,
        "md": MdConfig,
        "train": TrainConfig,
        "network": NetworkSpec,
        "fusion": FusionConfig,
    }

    def __init__(self, aps=None, **kwargs):
        for name, cls in self.sections.items():
            setattr(self, name, kwargs.pop(name, None) or cls())
        if kwargs:
            raise ValueError(f"Unknown configuration sections {list(kwargs)}")
        if aps is None:
            aps = [ApRegistration()]
        self.aps = list(aps)
        self.check()

    def check(self):
        """ Check the consistency between sections """
        ids = [ap.id for ap in self.aps]
        if len(set(ids)) != len(ids):
            raise ValueError(f"AP ids must be unique, got {ids}")
        poses = [(tuple(ap.position), ap.boresight) for ap in self.aps]
        if len(set(poses)) != len(poses):
            raise ValueError("AP poses must be distinct")
        step = self.stft.sigma * self.radio.t_c
        if abs(step - self.tracker.dt) > 1e-12:
            raise ValueError(
                f"Tracker step {self.tracker.dt} s must equal the STFT hop "
                f"sigma * T_c = {step} s"
            )

    def ap(self, ap_id):
        """ Registration of the AP with id ap_id """
        for ap in self.aps:
            if ap.id == ap_id:
                return ap
        raise ValueError(f"No AP with id {ap_id} in the configuration")

    @staticmethod
    def load(filename):
        """
        Load a pipeline configuration file

        Parameters
        ----------
        filename : str
            YAML document with one section per configuration class
            and an 'aps' list

        Returns
        -------
        config : PipelineConfig
        """
        data = load_yaml(filename)
        allowed = list(PipelineConfig.sections) + ["aps"]
        check_keys(filename, data, allowed)

        kwargs = {}
        for name, cls in PipelineConfig.sections.items():
            kwargs[name] = config_from_section(cls, filename, data.get(name))

        aps = None
        if "aps" in data:
            entries = require(filename, data, "aps", list)
            if len(entries) == 0:
                raise schema_error(filename, data, "aps", "'aps' must list at least one AP")
            aps = [config_from_section(ApRegistration, filename, e) for e in entries]

        try:
            return PipelineConfig(aps=aps, **kwargs)
        except ValueError as ex:
            raise SchemaError(f"{filename}:1: {ex}")

    def save(self, filename):
        """ Save the configuration as YAML """
        data = {name: self[name].to_dict() for name in self.sections}
        data["aps"] = [ap.to_dict() for ap in self.aps]
        logging.info("Saving configuration %s", filename)
        with open(filename, "w") as f:
            yaml.safe_dump(data, f, sort_keys=False)
