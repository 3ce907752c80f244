"""Backend selection for the Polya-Gamma sampling kernel.

Prefers the compiled extension, falls back to the pure-Python twin.  Both
expose ``pg_draw`` / ``pg_draw_arr`` with identical uniform-stream semantics;
``BACKEND`` records which one is active.
"""

try:
    from hawkes_vb import _pg_core as _impl
except ImportError:  # extension not built on this install
    from hawkes_vb import _pg_fallback as _impl

BACKEND = _impl.BACKEND_NAME
pg_draw = _impl.pg_draw
pg_draw_arr = _impl.pg_draw_arr
