from concurrent.futures import ThreadPoolExecutor
from re import compile
from typing import Callable, Iterable, List, Optional, TypeVar, Union


NON_FILENAME_CHARS = compile(r"[^\w\d _\-,\.+()]+")
FLOAT_FORMAT = ".17g"


T = TypeVar("T")
R = TypeVar("R")


def get_valid_filename(name: str) -> str:
    return NON_FILENAME_CHARS.sub("-", name)


def format_value(value: Union[None, bool, int, float, str]) -> str:
    """Serialize a CSV cell, floats keep 17 significant digits so they re-parse to
    the identical value.
    """
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    return str(value)


def parallel_map(
    function: Callable[[T], R], items: Iterable[T], workers: Optional[int] = 1
) -> List[R]:
    """Map in a thread pool, the results keep the order of `items`"""
    if workers is not None and workers <= 1:
        return [function(item) for item in items]

    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(function, items))
