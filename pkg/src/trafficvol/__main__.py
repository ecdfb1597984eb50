import sys

from trafficvol.cli import main

sys.exit(main())
