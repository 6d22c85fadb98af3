import sys

from gwflab.cli import main

sys.exit(main())
