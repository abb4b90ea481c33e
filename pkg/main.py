""" Main entry point for a trnsense script """
import sys

from trnsense.cli import main

if __name__ == "__main__":
    sys.exit(main())
