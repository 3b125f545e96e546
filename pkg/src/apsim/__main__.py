import sys

from apsim.cli import main

sys.exit(main())
