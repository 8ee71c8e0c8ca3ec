import sys

from plugnorm.cli import Cli


def main() -> None:
    sys.exit(Cli().run())


if __name__ == "__main__":
    main()
