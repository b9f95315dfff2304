import sys

from nanonav.cli import main

sys.exit(main())
