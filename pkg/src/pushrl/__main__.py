import sys

from pushrl.cli import main

sys.exit(main())
