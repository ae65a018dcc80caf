class AppConfig:
    threads: int = 1
    log_level: str = "INFO"
    log_format: str = '%(asctime)s.%(msecs)03d | %(name)s | %(levelname)-8s %(message)s'
    log_datefmt: str = '%Y-%m-%d %H:%M:%S'
