import logging


def configure_logging(level: str = "INFO") -> None:
    """Configure the root logger once for command-line runs."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
