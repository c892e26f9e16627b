import sys

from aembench.cli import main

if __name__ == "__main__":
    sys.exit(main())
