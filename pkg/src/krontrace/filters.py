from colorama import Fore, Style

FILTER_REGISTRY = {}


def register_filter(f):
    """Registers a filter function in this module's registry, so that filters
    can be added to Jinja2 environments easily.
    """
    FILTER_REGISTRY[f.__name__] = f
    return f


@register_filter
def sig(value, digits=6):
    """Formats a number with a fixed count of significant digits.

    >>> sig(1152 * 6.25)
    '7200'
    >>> sig(None)
    '-'
    >>> sig(0.000123456789, 3)
    '0.000123'
    """
    if value is None:
        return "-"
    return format(value, f".{digits}g")


@register_filter
def status_badge(passed):
    """A coloured PASS/FAIL marker for terminal reports."""
    if passed:
        return f"{Style.BRIGHT}{Fore.GREEN}PASS{Style.RESET_ALL}"
    return f"{Style.BRIGHT}{Fore.RED}FAIL{Style.RESET_ALL}"


@register_filter
def field_label(field):
    """Lower-case label of a scalar field or distribution.

    >>> field_label("Complex")
    'complex'
    """
    return getattr(field, "value", field).lower()
