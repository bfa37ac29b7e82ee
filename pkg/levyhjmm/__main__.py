import sys

from levyhjmm.cli import main

sys.exit(main())
