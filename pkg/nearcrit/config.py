"""Configuration from environment variables."""
import logging
import os

from dotenv import load_dotenv

load_dotenv()

DATABASE_URL = os.getenv("NEARCRIT_DATABASE_URL", "sqlite+aiosqlite:///./nearcrit.db")
OUTPUT_DIR = os.getenv("NEARCRIT_OUTPUT_DIR", "./results")

DEFAULT_SEED_RAW = os.getenv("NEARCRIT_SEED", "20240607")
THREADS_RAW = os.getenv("NEARCRIT_THREADS", "1")
LOG_LEVEL = os.getenv("NEARCRIT_LOG_LEVEL", "INFO").upper()
MAX_RENDER_PIXELS_RAW = os.getenv("NEARCRIT_MAX_RENDER_PIXELS", str(2 ** 26))

# Axial coordinates are kept inside 32-bit range; windows wider than this are refused.
MAX_WINDOW_EXTENT = 2 ** 20

try:
    DEFAULT_SEED = int(DEFAULT_SEED_RAW, 0)
    THREADS = int(THREADS_RAW)
    MAX_RENDER_PIXELS = int(MAX_RENDER_PIXELS_RAW)
except ValueError as e:
    raise ValueError(f"Invalid numeric setting in environment: {e}") from e

if not 0 <= DEFAULT_SEED < 2 ** 64:
    raise ValueError("NEARCRIT_SEED must be a 64-bit unsigned integer")

if THREADS < 1:
    raise ValueError("NEARCRIT_THREADS must be at least 1")

if not isinstance(logging.getLevelName(LOG_LEVEL), int):
    raise ValueError(f"Unknown NEARCRIT_LOG_LEVEL: {LOG_LEVEL}")
