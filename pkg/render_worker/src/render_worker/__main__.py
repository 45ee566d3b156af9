import sys

from render_worker import main

if __name__ == "__main__":
    sys.exit(main())
