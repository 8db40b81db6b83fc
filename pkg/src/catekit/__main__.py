import sys

from catekit.experiments.cli import main

sys.exit(main())
