import sys

from adicke.cli import main

sys.exit(main())
