"""
Main entry point for the DARSAN simulator
"""

from darsan.cli import main

if __name__ == "__main__":
    main()
