from jinja2 import Environment, PackageLoader, select_autoescape

from .filters import FILTER_REGISTRY


def setup_jinja_env(**options):
    options.setdefault("loader", PackageLoader(__name__, "templates"))
    options.setdefault("autoescape", select_autoescape(["html", "htm", "xml"]))
    options.setdefault("trim_blocks", True)
    options.setdefault("lstrip_blocks", True)
    options.setdefault("keep_trailing_newline", True)
    # bandit doesn't detect if we set "autoescape" dynamically
    env = Environment(**options)  # nosec
    for filter_name, filter_func in FILTER_REGISTRY.items():
        env.filters[filter_name] = filter_func
    return env


def render(template_name, **context):
    return setup_jinja_env().get_template(template_name).render(**context)
