import sys

from rlsad.cli import main

sys.exit(main())
