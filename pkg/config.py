import logging
import os
import sys
from dotenv import load_dotenv

# Загрузка переменных окружения
load_dotenv()

BASE_DIR = os.path.dirname(os.path.abspath(__file__))

# Параметры симулятора
STEP_CAP = int(os.getenv("HQS_STEP_CAP", "10000"))
FAIRNESS_BOUND = int(os.getenv("HQS_FAIRNESS_BOUND", "12"))
OUTLIVED_BOUND = int(os.getenv("HQS_OUTLIVED_BOUND", "12"))
JOIN_TIMEOUT = int(os.getenv("HQS_JOIN_TIMEOUT", "400"))

# Ключ, из которого выводятся ключи подписи процессов
SIGNING_SECRET = os.getenv("HQS_SIGNING_SECRET", "hqs-signing-secret-change-me")

# Хранилище результатов прогонов
DATABASE_URL = os.getenv("DATABASE_URL", "sqlite:///./hqs_runs.db")

FIXTURES_DIR = os.getenv("HQS_FIXTURES_DIR", os.path.join(BASE_DIR, "fixtures"))
SCENARIOS_DIR = os.getenv("HQS_SCENARIOS_DIR", os.path.join(BASE_DIR, "scenarios"))
RESULTS_DIR = os.getenv("HQS_RESULTS_DIR", os.path.join(BASE_DIR, "results"))

LOG_LEVEL = os.getenv("HQS_LOG_LEVEL", "WARNING")
LOG_FORMAT = "%(levelname)-5.5s [%(name)s] %(message)s"


def setup_logging(level=None):
    """Настройка логирования (stderr, stdout остаётся для результатов)"""
    logging.basicConfig(
        level=(level or LOG_LEVEL).upper(),
        format=LOG_FORMAT,
        stream=sys.stderr,
    )
