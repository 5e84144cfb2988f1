import json
import logging
from importlib import resources
from io import TextIOWrapper

import yaml
from jsonschema import Draft7Validator
from jsonschema.exceptions import ValidationError

from .exceptions import InvalidConfigError

LOG = logging.getLogger(__name__)

CONFIG_SCHEMA = "data/schema/experiment.config.schema.json"


def _package_of(package_name):
    # accept a module's ``__name__`` as well as a package name
    return package_name.split(".")[0]


def resource_stream(package_name, resource_name, encoding="utf-8"):
    """Load a package resource as a decoded file-like object.

    Decoding errors raise :exc:`ValueError`. :term:`universal newlines`
    are enabled. Can be used in a ``with`` statement.
    """
    resource = resources.files(_package_of(package_name)).joinpath(resource_name)
    return TextIOWrapper(resource.open("rb"), encoding=encoding)


def resource_json(package_name, resource_name):
    """Load a JSON package resource and return the parsed object."""
    with resource_stream(package_name, resource_name) as f:
        return json.load(f)


def resource_yaml(package_name, resource_name):
    """Load a YAML package resource and return the parsed object."""
    with resource_stream(package_name, resource_name) as f:
        return yaml.safe_load(f)


def make_config_validator():
    return Draft7Validator(resource_json(__name__, CONFIG_SCHEMA))


def load_experiment_config(config_file):
    """Parse and validate an experiment config document from an open file."""
    name = getattr(config_file, "name", "<config>")
    try:
        raw = json.load(config_file)
    except ValueError as e:
        LOG.debug("Experiment config decode failed", exc_info=True)
        raise InvalidConfigError(f"Experiment config '{name}' is not valid JSON: {e}") from e
    try:
        make_config_validator().validate(raw)
    except ValidationError as e:
        LOG.debug("Experiment config validation failed", exc_info=True)
        raise InvalidConfigError(
            f"Experiment config '{name}' is invalid: {e.message}"
        ) from e
    return raw
