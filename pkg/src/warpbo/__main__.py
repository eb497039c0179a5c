import sys

from warpbo.cli import main

sys.exit(main())
