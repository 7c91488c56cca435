"""
Random Covers of Hyperbolic Surfaces
Main entry point for the command line
"""

import sys

from src.cli import main as cli_main


def main() -> int:
    """Main entry point"""
    try:
        return cli_main(sys.argv[1:])
    except KeyboardInterrupt:
        print("\n\n[Run interrupted]\n", file=sys.stderr)
        return 130
    except Exception as e:
        print(f"\n\nError: {e}\n", file=sys.stderr)
        import traceback
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
