"""
boltzmann/conf.py
─────────────────
Settings access that works both inside the Django project and when the
package is imported as a plain library (settings not configured).
"""

from django.conf import settings


def setting(name: str, default):
    """Return settings.<name>, or *default* when absent / Django unconfigured."""
    if not settings.configured:
        return default
    return getattr(settings, name, default)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = setting('BM_THREADS', 1)
    return max(1, int(threads))
