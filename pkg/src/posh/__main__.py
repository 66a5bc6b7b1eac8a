import sys

from posh.cli import main

sys.exit(main())
