from core.config import load_env
from app.cli import main as cli_main


def main() -> None:
    load_env()
    cli_main()


if __name__ == "__main__":
    main()
