from pydantic_settings import BaseSettings

class Settings(BaseSettings):
    RUN_CONFIG_PATH: str = "config/run_config.ini"
    OUTPUT_DIR: str = "out"
    SEED: int = 20240601
    LOG_LEVEL: str = "INFO"

    # Параллелизм: 1 означает последовательный режим
    WORKERS: int = 4
    # Максимальное число элементов массива, которое ядро выделяет за один блок
    CHUNK_BUDGET: int = 4_000_000

    # Оценка sup-норм
    NORM_SAMPLES: int = 10_000
    TAIL_TOLERANCE: float = 1e-6

    # Предел перебора карт истории в настольной игре
    MAX_HISTORIES: int = 1_000_000

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = True

settings = Settings()
