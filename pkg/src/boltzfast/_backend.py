"""Select the compiled kernels when importable, else the numpy fallback.

Set ``BOLTZFAST_BACKEND=python`` to force the fallback.
"""
import os

from . import _kernels_py

python_kernels = _kernels_py

try:
    from . import _kernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

_choice = os.environ.get("BOLTZFAST_BACKEND", "auto").lower()
if _choice == "python" or compiled_kernels is None:
    kernels = python_kernels
else:
    kernels = compiled_kernels


def available() -> list[str]:
    names = ["python"]
    if compiled_kernels is not None:
        names.insert(0, "compiled")
    return names


def get(name: str | None = None):
    """Kernel module by name; ``None`` gives the import-time selection."""
    if name is None:
        return kernels
    if name == "compiled":
        if compiled_kernels is None:
            raise ImportError("compiled kernels are not built")
        return compiled_kernels
    if name == "python":
        return python_kernels
    raise ValueError(f"unknown backend {name!r}")
