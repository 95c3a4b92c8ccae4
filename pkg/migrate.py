#!/usr/bin/env python3
"""
Миграции хранилища результатов прогонов (Alembic)
"""
import os
import sys
from alembic.config import Config
from alembic import command

BASE_DIR = os.path.dirname(os.path.abspath(__file__))
sys.path.append(BASE_DIR)


def alembic_config() -> Config:
    return Config(os.path.join(BASE_DIR, "alembic.ini"))


def create_migration(message="Auto migration"):
    """Создание миграции по моделям database.py"""
    command.revision(alembic_config(), message=message, autogenerate=True)


def upgrade_database(revision="head"):
    """Применение миграций"""
    command.upgrade(alembic_config(), revision)


def downgrade_database(revision="base"):
    command.downgrade(alembic_config(), revision)


if __name__ == "__main__":
    if len(sys.argv) < 2:
        print("Использование:")
        print("  python migrate.py create <msg>   - Создание миграции")
        print("  python migrate.py upgrade        - Применение миграций")
        print("  python migrate.py downgrade      - Откат всех миграций")
        sys.exit(1)

    command_arg = sys.argv[1]

    if command_arg == "create":
        message = sys.argv[2] if len(sys.argv) > 2 else "Auto migration"
        create_migration(message)
        print(f"✓ Миграция '{message}' создана")
    elif command_arg == "upgrade":
        upgrade_database()
        print("✓ Миграции применены")
    elif command_arg == "downgrade":
        downgrade_database()
        print("✓ Миграции откачены")
    else:
        print(f"Неизвестная команда: {command_arg}")
        sys.exit(1)
