import os

# single-process pool unless a test asks for more workers
os.environ.setdefault("PENALIZED_WORKERS", "1")
