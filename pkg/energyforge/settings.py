import os
from typing import Optional

from energyforge.errors import SpecError


class Settings:
    threads: int
    run_slow_tests: bool

    def __init__(self, environ: Optional[dict] = None):
        env = os.environ if environ is None else environ

        # ENERGYFORGE_THREADS: cap on the worker pool used for per-box and
        # per-node batches. Defaults to the CPU count.
        threads_env = str(env.get("ENERGYFORGE_THREADS", "")).strip()
        if threads_env:
            try:
                self.threads = int(threads_env)
            except ValueError:
                raise SpecError(
                    f"ENERGYFORGE_THREADS must be a positive integer, got: {threads_env!r}"
                ) from None
            if self.threads <= 0:
                raise SpecError(
                    f"ENERGYFORGE_THREADS must be a positive integer, got: {threads_env!r}"
                )
        else:
            self.threads = os.cpu_count() or 1

        self.run_slow_tests = str(env.get("ENERGYFORGE_RUN_SLOW", "")).strip() == "1"
